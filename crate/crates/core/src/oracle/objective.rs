//! Dense reference solvers that never use the learners' closed forms.
//!
//! Both solvers run accelerated proximal gradient: a plain gradient step on
//! the smooth part followed by the exact Euclidean prox of the penalty
//! (soft-thresholding for L1, radial projection for the ball).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::solver::soft_threshold;
use crate::types::{SparseExample, WeightVector};

/// Largest dimension the dense oracles accept.
pub const MAX_DIM: usize = 64;
const MAX_ITERATIONS: usize = 1_000_000;

/// One quadratic `½ Σ_i σ_i (x_i − y_i)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTerm {
    pub sigma: Vec<f64>,
    pub center: Vec<f64>,
}

impl QuadraticTerm {
    pub fn uniform(sigma: f64, center: Vec<f64>) -> Self {
        Self { sigma: vec![sigma; center.len()], center }
    }
}

/// Non-smooth part of an objective with its weight already applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PenaltyTerm {
    None,
    /// `coefficient · ‖x‖₁`.
    L1 { coefficient: f64 },
    /// Restriction to `‖x‖₂ ≤ radius`.
    Ball { radius: f64 },
}

impl PenaltyTerm {
    fn prox(&self, v: &mut [f64], step: f64) {
        match *self {
            PenaltyTerm::None => {}
            PenaltyTerm::L1 { coefficient } => {
                for vi in v.iter_mut() {
                    *vi = soft_threshold(*vi, coefficient * step);
                }
            }
            PenaltyTerm::Ball { radius } => {
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > radius {
                    let scale = radius / norm;
                    v.iter_mut().for_each(|a| *a *= scale);
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            PenaltyTerm::None | PenaltyTerm::Ball { .. } => 0.0,
            PenaltyTerm::L1 { coefficient } => coefficient * x.iter().map(|a| a.abs()).sum::<f64>(),
        }
    }
}

/// `linear·x + Σ_s ½‖Q_s^{1/2}(x − y_s)‖² + penalty(x) [+ w·ℓ(θ·x)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub linear: Vec<f64>,
    pub quad_centers: Vec<QuadraticTerm>,
    pub penalty: PenaltyTerm,
    pub implicit_loss: Option<(LossKind, SparseExample)>,
}

impl ObjectiveSpec {
    pub fn new(linear: Vec<f64>) -> Self {
        Self { linear, quad_centers: Vec::new(), penalty: PenaltyTerm::None, implicit_loss: None }
    }

    pub fn with_quadratic(mut self, term: QuadraticTerm) -> Self {
        self.quad_centers.push(term);
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyTerm) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_loss(mut self, kind: LossKind, ex: SparseExample) -> Self {
        self.implicit_loss = Some((kind, ex));
        self
    }

    /// Objective value at a dense point.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self.linear.iter().zip(x).map(|(a, b)| a * b).sum();
        for q in &self.quad_centers {
            for i in 0..x.len() {
                let d = x[i] - q.center[i];
                v += 0.5 * q.sigma[i] * d * d;
            }
        }
        if let Some((kind, ex)) = &self.implicit_loss {
            v += ex.weight() * kind.value(ex.dot_dense(x), ex.label()).unwrap_or(f64::INFINITY);
        }
        v + self.penalty.value(x)
    }
}

/// Smooth part `b·x + ½ Σ_i q_i x_i² + w ℓ(θ·x)` collapsed from an `ObjectiveSpec`.
struct Smooth {
    b: Vec<f64>,
    q: Vec<f64>,
    loss: Option<(LossKind, SparseExample, Vec<f64>)>,
}

impl Smooth {
    fn from_spec(spec: &ObjectiveSpec, dim: usize) -> Result<Self> {
        let mut b = vec![0.0; dim];
        let mut q = vec![0.0; dim];
        if spec.linear.len() > dim {
            return Err(Error::Input(format!("linear term has {} entries for dim {dim}", spec.linear.len())));
        }
        for (bi, li) in b.iter_mut().zip(&spec.linear) {
            *bi = *li;
        }
        for term in &spec.quad_centers {
            if term.sigma.len() != dim || term.center.len() != dim {
                return Err(Error::Input("quadratic term does not match the dimension".into()));
            }
            for i in 0..dim {
                if !(term.sigma[i] >= 0.0) {
                    return Err(Error::Domain(format!("negative curvature {}", term.sigma[i])));
                }
                q[i] += term.sigma[i];
                b[i] -= term.sigma[i] * term.center[i];
            }
        }
        let loss = match &spec.implicit_loss {
            None => None,
            Some((kind, ex)) => {
                let theta = dense_features(ex, dim)?;
                Some((*kind, ex.clone(), theta))
            }
        };
        Ok(Self { b, q, loss })
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.b[i] + self.q[i] * x[i];
        }
        if let Some((kind, ex, theta)) = &self.loss {
            let m: f64 = theta.iter().zip(x).map(|(a, b)| a * b).sum();
            let s = ex.weight() * kind.derivative_unchecked(m, ex.label());
            for (o, th) in out.iter_mut().zip(theta) {
                *o += s * th;
            }
        }
    }

    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64 {
        let q_max = self.q.iter().cloned().fold(0.0, f64::max);
        let loss = self.loss.as_ref().map_or(0.0, |(kind, ex, theta)| {
            ex.weight() * kind.curvature_bound() * theta.iter().map(|a| a * a).sum::<f64>()
        });
        q_max + loss
    }
}

fn dense_features(ex: &SparseExample, dim: usize) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; dim];
    for &(c, v) in ex.features() {
        let i = c as usize;
        if i >= dim {
            return Err(Error::Input(format!("feature {c} outside dimension {dim}")));
        }
        theta[i] = v;
    }
    Ok(theta)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Input(format!("oracle dimension must be in 1..={MAX_DIM}, got {dim}")));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimizer of a strongly convex [`ObjectiveSpec`] over `R^dim`.
///
/// Runs proximal gradient with constant momentum until the certified
/// distance to the minimizer, `(1 + 2L/μ)·‖prox-step‖`, drops below
/// `tol / 10`.
pub fn global_argmin(spec: &ObjectiveSpec, dim: usize, tol: f64) -> Result<WeightVector> {
    check_dim(dim)?;
    if !(tol >= 1e-10) {
        return Err(Error::Domain(format!("oracle tolerance must be >= 1e-10, got {tol}")));
    }
    let smooth = Smooth::from_spec(spec, dim)?;
    let mu = smooth.q.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(mu > 0.0) {
        return Err(Error::Domain("objective is not strongly convex in every coordinate".into()));
    }
    let lip = smooth.lipschitz();
    let step = 1.0 / lip;
    let ratio = lip / mu;
    let momentum = (ratio.sqrt() - 1.0) / (ratio.sqrt() + 1.0);

    let prox_step = |from: &[f64], grad: &mut Vec<f64>, out: &mut Vec<f64>| {
        smooth.gradient(from, grad);
        for i in 0..dim {
            out[i] = from[i] - step * grad[i];
        }
        spec.penalty.prox(out, step);
    };

    let mut x = vec![0.0; dim];
    let mut x_prev = x.clone();
    let mut y = x.clone();
    let mut grad = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    let mut displacement = f64::INFINITY;
    for k in 0..MAX_ITERATIONS {
        prox_step(&y, &mut grad, &mut next);
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut next);
        for i in 0..dim {
            y[i] = x[i] + momentum * (x[i] - x_prev[i]);
        }
        if k % 8 == 7 {
            prox_step(&x, &mut grad, &mut probe);
            let moved: Vec<f64> = x.iter().zip(&probe).map(|(a, b)| a - b).collect();
            displacement = (1.0 + 2.0 * ratio) * norm(&moved);
            if displacement <= tol / 10.0 {
                return Ok(WeightVector::from_dense(&probe));
            }
            if !displacement.is_finite() {
                break;
            }
        }
    }
    Err(Error::Convergence { iterations: MAX_ITERATIONS, displacement })
}

/// Best fixed point in hindsight for a loss sequence.
///
/// Minimizes `Σ_t w_t ℓ_t(θ_t·x) + l1·‖x‖₁` over `R^dim`, or over the ball of
/// the given radius. Returns the minimizer and the minimized total.
pub fn posthoc_best(
    losses: &[(LossKind, SparseExample)],
    dim: usize,
    l1: f64,
    ball: Option<f64>,
) -> Result<(WeightVector, f64)> {
    check_dim(dim)?;
    if losses.is_empty() {
        return Err(Error::Input("posthoc_best needs at least one loss".into()));
    }
    if !(l1 >= 0.0) {
        return Err(Error::Domain(format!("l1 weight must be >= 0, got {l1}")));
    }
    let thetas = losses.iter().map(|(_, ex)| dense_features(ex, dim)).collect::<Result<Vec<_>>>()?;
    let total = |x: &[f64]| -> f64 {
        let f: f64 = losses
            .iter()
            .zip(&thetas)
            .map(|((kind, ex), th)| {
                let m: f64 = th.iter().zip(x).map(|(a, b)| a * b).sum();
                ex.weight() * kind.value(m, ex.label()).unwrap_or(f64::INFINITY)
            })
            .sum();
        f + l1 * x.iter().map(|a| a.abs()).sum::<f64>()
    };
    let gradient = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for ((kind, ex), th) in losses.iter().zip(&thetas) {
            let m: f64 = th.iter().zip(x).map(|(a, b)| a * b).sum();
            let s = ex.weight() * kind.derivative_unchecked(m, ex.label());
            for (o, t) in out.iter_mut().zip(th) {
                *o += s * t;
            }
        }
    };
    let penalty = match ball {
        Some(radius) if !(radius > 0.0) => {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")))
        }
        Some(radius) => Some(PenaltyTerm::Ball { radius }),
        None => None,
    };

    let mut lip: f64 = losses
        .iter()
        .zip(&thetas)
        .map(|((kind, ex), th)| ex.weight() * kind.curvature_bound() * th.iter().map(|a| a * a).sum::<f64>())
        .sum();
    let mut g0 = vec![0.0; dim];
    gradient(&vec![0.0; dim], &mut g0);
    match ball {
        // Purely linear pieces have no curvature; a step of one radius per
        // unit gradient still converges and is fast on the sphere.
        Some(radius) => lip = lip.max(norm(&g0) / radius).max(f64::MIN_POSITIVE),
        None if lip == 0.0 => {
            // Linear objective plus L1: bounded only if every coordinate is dominated.
            if g0.iter().all(|g| g.abs() <= l1) {
                let x = vec![0.0; dim];
                return Ok((WeightVector::new(), total(&x)));
            }
            return Err(Error::Domain("unbounded objective: linear losses without a feasible set".into()));
        }
        None => {}
    }
    let step = 1.0 / lip;
    let prox = |v: &mut Vec<f64>| {
        for vi in v.iter_mut() {
            *vi = soft_threshold(*vi, l1 * step);
        }
        if let Some(p) = penalty {
            p.prox(v, step);
        }
    };

    // FISTA with function-value restart.
    let mut x = vec![0.0; dim];
    let mut y = x.clone();
    let mut tk = 1.0f64;
    let mut grad = vec![0.0; dim];
    let mut f_x = total(&x);
    let mut displacement = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        gradient(&y, &mut grad);
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        prox(&mut next);
        let f_next = total(&next);
        displacement = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if f_next > f_x && tk > 1.0 {
            // restart momentum from the current point; a plain step can only
            // look worse through rounding, so it is always taken
            tk = 1.0;
            y.clone_from(&x);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        for i in 0..dim {
            y[i] = next[i] + (tk - 1.0) / t_next * (next[i] - x[i]);
        }
        tk = t_next;
        x = next;
        f_x = f_next;
        if displacement <= 1e-9 {
            // confirm with a plain step from x
            gradient(&x, &mut grad);
            let mut plain: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            prox(&mut plain);
            let d = x.iter().zip(&plain).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d <= 1e-9 {
                let best = if total(&plain) <= f_x { plain } else { x };
                let value = total(&best);
                return Ok((WeightVector::from_dense(&best), value));
            }
        }
    }
    Err(Error::Convergence { iterations: MAX_ITERATIONS, displacement })
}
