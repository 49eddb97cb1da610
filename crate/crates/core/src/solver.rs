//! Closed-form and one-dimensional solvers for the per-round argmin.
//!
//! With diagonal quadratic stabilization every learner reduces to one of
//! three sub-problems:
//!
//! * a separable scalar problem `a·x + (q/2)(x − b)² + c|x|`, solved by
//!   soft-thresholding;
//! * the same quadratic restricted to an L2 ball, solved through its scalar
//!   Lagrange multiplier;
//! * for implicit updates on margin losses, a scalar fixed point
//!   `s = w·ℓ'(m(s))` where `m(s)` is the margin of the minimizer when the
//!   loss is replaced by the linear term `s·θ·x`.

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::types::Label;

/// Target accuracy of `‖x‖ = r` on the ball boundary.
pub const BALL_TOLERANCE: f64 = 1e-10;
/// Bracket width at which the fixed-point bisection is allowed to stop.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Guaranteed bound on `|s − w·ℓ'(m(s))|` for well-scaled problems.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

/// `argmin_x a·x + (q/2)(x − b)² + c|x|` with `q > 0`, `c ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCompositeProblem {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub c: f64,
}

impl ScalarCompositeProblem {
    pub fn new(a: f64, b: f64, q: f64, c: f64) -> Result<Self> {
        let p = Self { a, b, q, c };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::Domain(format!("curvature q must be positive, got {}", self.q)));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::Domain(format!("absolute-value weight c must be >= 0, got {}", self.c)));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Domain("non-finite linear coefficient or center".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: f64) -> f64 {
        self.a * x + 0.5 * self.q * (x - self.b) * (x - self.b) + self.c * x.abs()
    }
}

/// Shrinks `u` toward zero by `threshold`; `|u| ≤ threshold` maps to exactly 0.
#[inline]
pub fn soft_threshold(u: f64, threshold: f64) -> f64 {
    if u.abs() <= threshold {
        0.0
    } else {
        u - threshold.copysign(u)
    }
}

/// Minimizer of the scalar composite problem.
pub fn composite_scalar_argmin(p: &ScalarCompositeProblem) -> Result<f64> {
    p.validate()?;
    Ok(soft_threshold(p.b - p.a / p.q, p.c / p.q))
}

/// Result of a ball-constrained quadratic solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSolution {
    pub x: Vec<f64>,
    /// Lagrange multiplier `μ ≥ 0` of the norm constraint; zero for an
    /// interior optimum.
    pub multiplier: f64,
}

/// `argmin_{‖x‖₂ ≤ r} Σ_i a_i x_i + (q_i/2)(x_i − b_i)²`.
pub fn ball_project_argmin(a: &[f64], b: &[f64], q: &[f64], radius: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.len() != q.len() {
        return Err(Error::Input(format!(
            "dimension mismatch: a={}, b={}, q={}",
            a.len(),
            b.len(),
            q.len()
        )));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
    }
    if let Some(bad) = q.iter().find(|&&qi| !(qi.is_finite() && qi > 0.0)) {
        return Err(Error::Domain(format!("curvature entries must be positive, got {bad}")));
    }
    // Shift to the b = 0 form: x_i(μ) = (q_i b_i − a_i) / (q_i + μ).
    let shifted: Vec<f64> = a.iter().zip(b).zip(q).map(|((&ai, &bi), &qi)| ai - qi * bi).collect();
    Ok(ball_argmin(&shifted, q, radius).x)
}

/// `argmin_{‖x‖₂ ≤ r} Σ_i a_i x_i + (q_i/2) x_i²` for `q_i ≥ 0`, where
/// `q_i = 0` only alongside `a_i = 0`.
///
/// The returned point always satisfies `‖x‖ ≤ r`; on the boundary it is within
/// [`BALL_TOLERANCE`] of `r` unless floating point runs out first.
pub fn ball_argmin(a: &[f64], q: &[f64], radius: f64) -> BallSolution {
    // A coordinate with no curvature yet has no linear term either; keep it at 0.
    let at = |mu: f64| -> Vec<f64> {
        a.iter().zip(q).map(|(&ai, &qi)| if qi + mu > 0.0 { -ai / (qi + mu) } else { 0.0 }).collect()
    };
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();

    let x0 = at(0.0);
    if norm(&x0) <= radius {
        return BallSolution { x: x0, multiplier: 0.0 };
    }
    let mut lo = 0.0;
    let mut hi = norm(a) / radius;
    let mut x_hi = at(hi);
    for _ in 0..MAX_BISECTIONS {
        if radius - norm(&x_hi) <= BALL_TOLERANCE {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let x_mid = at(mid);
        if norm(&x_mid) > radius {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
        }
    }
    BallSolution { x: x_hi, multiplier: hi }
}

/// Solves `s = w·ℓ'(m(s))` for a non-increasing margin map `m`.
///
/// `margin_of(s)` must return the margin of the minimizer obtained when the
/// loss is replaced by the linear term `s·θ·x`; it is non-increasing in `s`
/// for every convex penalty, which makes the residual strictly decreasing and
/// the root unique. The root lies between 0 and `w·ℓ'(m(0))`, so bisection on
/// that bracket always succeeds for convex losses.
pub fn solve_margin_fixed_point(
    kind: LossKind,
    label: Label,
    weight: f64,
    mut margin_of: impl FnMut(f64) -> f64,
) -> Result<f64> {
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::Domain(format!("importance weight must be >= 0, got {weight}")));
    }
    let mut residual = |s: f64| -> Result<f64> {
        let m = margin_of(s);
        if !m.is_finite() {
            return Err(Error::Domain(format!("non-finite margin {m} during implicit solve")));
        }
        Ok(weight * kind.derivative_unchecked(m, label) - s)
    };

    let r0 = residual(0.0)?;
    if r0 == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if r0 > 0.0 { (0.0, r0) } else { (r0, 0.0) };
    let (f_lo, f_hi) = (residual(lo)?, residual(hi)?);
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::Internal(format!(
            "implicit solve bracket [{lo}, {hi}] has no sign change ({f_lo}, {f_hi})"
        )));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = residual(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The end nearer zero never steps past the root, so the implicit point
    // stays on the starting side of the loss minimizer.
    Ok(if r0 > 0.0 { lo } else { hi })
}

/// Implicit-update scalar for an unpenalized margin loss.
///
/// Returns `s*` with `s* = w·ℓ'(m0 − κ s*)`, where `κ = Σ_i θ_i²/σ_i` is the
/// curvature-scaled feature norm. The implicit gradient is `s*·θ`.
pub fn glm_implicit_solve(kind: LossKind, label: Label, weight: f64, m0: f64, kappa: f64) -> Result<f64> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if !m0.is_finite() {
        return Err(Error::Domain(format!("non-finite margin {m0}")));
    }
    solve_margin_fixed_point(kind, label, weight, |s| m0 - kappa * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn argmin(a: f64, b: f64, q: f64, c: f64) -> f64 {
        composite_scalar_argmin(&ScalarCompositeProblem::new(a, b, q, c).unwrap()).unwrap()
    }

    /// Exhaustive scan of `[-10, 10]` at step 1e-4.
    fn grid_argmin(p: &ScalarCompositeProblem) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for k in -100_000..=100_000 {
            let x = k as f64 * 1e-4;
            let v = p.objective(x);
            if v < best.0 {
                best = (v, x);
            }
        }
        best.1
    }

    #[test]
    fn scalar_goldens() {
        assert_eq!(argmin(0.0, 5.0, 2.0, 0.0), 5.0);
        assert_eq!(argmin(1.0, 0.0, 1.0, 0.0), -1.0);
        let p = ScalarCompositeProblem::new(0.0, 2.0, 1.0, 3.0).unwrap();
        assert_eq!(grid_argmin(&p), 0.0);
        assert_eq!(composite_scalar_argmin(&p).unwrap(), 0.0);
    }

    #[test]
    fn kink_tie_breaks_to_zero() {
        // |u| = c/q exactly
        assert_eq!(argmin(0.0, 2.0, 1.0, 2.0), 0.0);
        assert_eq!(argmin(-4.0, 0.0, 2.0, 4.0), 0.0);
    }

    #[test]
    fn non_positive_curvature_is_rejected() {
        assert!(matches!(ScalarCompositeProblem::new(0.0, 0.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(ScalarCompositeProblem::new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(ScalarCompositeProblem::new(0.0, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn ball_goldens() {
        let x = ball_project_argmin(&[0.0, 0.0], &[0.3, -0.4], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(x, vec![0.3, -0.4]);

        let x = ball_project_argmin(&[0.0, 0.0], &[3.0, 0.0], &[1.0, 1.0], 1.0).unwrap();
        assert!((x[0] - 1.0).abs() <= 1e-10 && x[1] == 0.0);

        // 2-D grid scan at step 1e-4 puts the minimizer at (-0.25, 0).
        let x = ball_project_argmin(&[1.0, 0.0], &[0.0, 0.0], &[2.0, 2.0], 0.25).unwrap();
        assert!((x[0] + 0.25).abs() <= 1e-10, "{x:?}");
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn ball_rejects_bad_radius() {
        assert!(ball_project_argmin(&[1.0], &[0.0], &[1.0], 0.0).is_err());
        assert!(ball_project_argmin(&[1.0], &[0.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn implicit_kappa_zero_is_explicit() {
        for kind in [LossKind::Logistic, LossKind::Squared { target: 3.0 }, LossKind::Linear] {
            for m0 in [-2.0, 0.0, 1.5] {
                let s = glm_implicit_solve(kind, Label::Negative, 0.7, m0, 0.0).unwrap();
                let explicit = 0.7 * kind.derivative(m0, Label::Negative).unwrap();
                assert!((s - explicit).abs() <= 1e-15, "{kind:?} {m0}");
            }
        }
    }

    #[test]
    fn implicit_logistic_golden() {
        // Independent oracle: scan the residual s + 1/(1 + e^{-s}) on a 1e-6 grid.
        let mut best = (f64::INFINITY, 0.0);
        for k in -1_000_000..=0 {
            let s = k as f64 * 1e-6;
            let r = (s + 1.0 / (1.0 + (-s).exp())).abs();
            if r < best.0 {
                best = (r, s);
            }
        }
        let s = glm_implicit_solve(LossKind::Logistic, Label::Positive, 1.0, 0.0, 1.0).unwrap();
        assert!((s - best.1).abs() <= 1e-6);
        assert!((s - -0.4010581375415470).abs() <= 1e-12);
        let residual = s - LossKind::Logistic.derivative(-s, Label::Positive).unwrap();
        assert!(residual.abs() <= FIXED_POINT_RESIDUAL);
    }

    #[test]
    fn implicit_squared_never_overshoots() {
        // From x_t = 2 toward the minimizer 3 with step η: x' = 2 − η s*.
        for k in -2..=3 {
            let eta = 10f64.powi(k);
            let s = glm_implicit_solve(LossKind::Squared { target: 3.0 }, Label::Positive, 1.0, 2.0, eta).unwrap();
            let next = 2.0 - eta * s;
            let closed = (2.0 + 3.0 * eta) / (1.0 + eta);
            assert!(next <= 3.0, "eta={eta} next={next}");
            assert!((next - closed).abs() <= 1e-9 * closed, "eta={eta}");
        }
        let far = glm_implicit_solve(LossKind::Squared { target: 3.0 }, Label::Positive, 1.0, 2.0, 1e9).unwrap();
        assert!((2.0 - 1e9 * far - 3.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn implicit_squared_stays_on_its_side(log_eta in -3.0f64..6.0, m0 in -10.0f64..10.0) {
            let eta = 10f64.powf(log_eta);
            let s = glm_implicit_solve(LossKind::Squared { target: 3.0 }, Label::Positive, 1.0, m0, eta).unwrap();
            let next = m0 - eta * s;
            if m0 <= 3.0 {
                prop_assert!(next <= 3.0 && next >= m0, "{next}");
            } else {
                prop_assert!(next >= 3.0 && next <= m0, "{next}");
            }
        }

        #[test]
        fn scalar_argmin_satisfies_subgradient_condition(
            a in -10.0f64..10.0, b in -10.0f64..10.0, q in 0.01f64..10.0, c in 0.0f64..10.0,
        ) {
            let x = argmin(a, b, q, c);
            let smooth = a + q * (x - b);
            if x != 0.0 {
                prop_assert!((smooth + c * x.signum()).abs() <= 1e-9 * (1.0 + a.abs() + q * b.abs()));
            } else {
                prop_assert!(smooth.abs() <= c * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn larger_threshold_never_grows_magnitude(
            a in -10.0f64..10.0, b in -10.0f64..10.0, q in 0.01f64..10.0, c in 0.0f64..10.0, dc in 0.0f64..5.0,
        ) {
            prop_assert!(argmin(a, b, q, c + dc).abs() <= argmin(a, b, q, c).abs());
        }

        #[test]
        fn implicit_squared_stays_between(eta in 1e-3f64..1e4) {
            let s = glm_implicit_solve(LossKind::Squared { target: 3.0 }, Label::Positive, 1.0, 2.0, eta).unwrap();
            let next = 2.0 - eta * s;
            prop_assert!(next > 2.0 && next <= 3.0);
        }

        #[test]
        fn implicit_approaches_explicit(m0 in -5.0f64..5.0, kappa in 0.0f64..1e-6, w in 0.0f64..3.0) {
            // Logistic derivative is 1/4-Lipschitz, so |s* − w ℓ'(m0)| ≤ w·κ·|s*|/4 ≤ w² κ / 4.
            let s = glm_implicit_solve(LossKind::Logistic, Label::Positive, w, m0, kappa).unwrap();
            let explicit = w * LossKind::Logistic.derivative(m0, Label::Positive).unwrap();
            prop_assert!((s - explicit).abs() <= 0.25 * w * w * kappa + 1e-15);
        }

        #[test]
        fn implicit_residual_is_small(m0 in -10.0f64..10.0, kappa in 0.0f64..100.0, w in 0.0f64..10.0) {
            let s = glm_implicit_solve(LossKind::Logistic, Label::Negative, w, m0, kappa).unwrap();
            let r = s - w * LossKind::Logistic.derivative(m0 - kappa * s, Label::Negative).unwrap();
            prop_assert!(r.abs() <= FIXED_POINT_RESIDUAL);
        }
    }
}
