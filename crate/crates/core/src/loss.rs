//! Margin losses.
//!
//! Every loss is a convex function of the margin `m = θ·x` (or of the scalar
//! point itself for one-dimensional problems). The learners only ever need
//! the value, the derivative with respect to the margin, and a bracket for
//! that derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    /// `log(1 + exp(-y m))`.
    Logistic,
    /// `½ (m - target)²`; the label is ignored.
    Squared { target: f64 },
    /// `m`; the example's features are the gradient vector and the label is
    /// ignored.
    Linear,
}

impl LossKind {
    pub fn value(&self, margin: f64, label: Label) -> Result<f64> {
        check_finite(margin)?;
        Ok(match *self {
            LossKind::Logistic => softplus(-label.sign() * margin),
            LossKind::Squared { target } => 0.5 * (margin - target) * (margin - target),
            LossKind::Linear => margin,
        })
    }

    /// Derivative with respect to the margin.
    pub fn derivative(&self, margin: f64, label: Label) -> Result<f64> {
        check_finite(margin)?;
        Ok(self.derivative_unchecked(margin, label))
    }

    pub(crate) fn derivative_unchecked(&self, margin: f64, label: Label) -> f64 {
        match *self {
            LossKind::Logistic => {
                let y = label.sign();
                // -y / (1 + exp(y m)), written to avoid overflow on either tail.
                let ym = y * margin;
                if ym >= 0.0 {
                    let e = (-ym).exp();
                    -y * e / (1.0 + e)
                } else {
                    -y / (1.0 + ym.exp())
                }
            }
            LossKind::Squared { target } => margin - target,
            LossKind::Linear => 1.0,
        }
    }

    /// Closed interval containing every value of the margin derivative.
    pub fn derivative_range(&self, label: Label) -> (f64, f64) {
        match self {
            LossKind::Logistic => match label {
                Label::Positive => (-1.0, 0.0),
                Label::Negative => (0.0, 1.0),
            },
            LossKind::Squared { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            LossKind::Linear => (1.0, 1.0),
        }
    }

    /// Upper bound on the second derivative with respect to the margin.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            LossKind::Logistic => 0.25,
            LossKind::Squared { .. } => 1.0,
            LossKind::Linear => 0.0,
        }
    }

    /// Whether the loss depends on the label.
    pub fn uses_label(&self) -> bool {
        matches!(self, LossKind::Logistic)
    }
}

/// Loss at `margin`; non-finite input is a domain error.
pub fn loss_value(kind: LossKind, margin: f64, label: Label) -> Result<f64> {
    kind.value(margin, label)
}

/// Margin derivative of the loss; non-finite input is a domain error.
pub fn loss_margin_derivative(kind: LossKind, margin: f64, label: Label) -> Result<f64> {
    kind.derivative(margin, label)
}

fn check_finite(margin: f64) -> Result<()> {
    if margin.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite margin {margin}")))
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQ3: LossKind = LossKind::Squared { target: 3.0 };

    #[test]
    fn logistic_zero_margin() {
        let v = LossKind::Logistic.value(0.0, Label::Positive).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(LossKind::Logistic.derivative(0.0, Label::Positive).unwrap(), -0.5);
    }

    #[test]
    fn squared_example_values() {
        assert_eq!(SQ3.value(2.0, Label::Positive).unwrap(), 0.5);
        assert_eq!(SQ3.derivative(2.0, Label::Positive).unwrap(), -1.0);
    }

    #[test]
    fn logistic_large_margin_matches_series() {
        // log(1+u) for u = e^-10 via the alternating series, far past f64 precision.
        let u = (-10.0f64).exp();
        let series = u - u.powi(2) / 2.0 + u.powi(3) / 3.0 - u.powi(4) / 4.0;
        let v = LossKind::Logistic.value(10.0, Label::Positive).unwrap();
        assert!((v - series).abs() <= 1e-15 * series);
        assert!((v - 4.539889921686465e-5).abs() < 1e-18);
    }

    #[test]
    fn logistic_derivative_negative_label() {
        let d = LossKind::Logistic.derivative(2.0, Label::Negative).unwrap();
        let h = 1e-6;
        let fd = (LossKind::Logistic.value(2.0 + h, Label::Negative).unwrap()
            - LossKind::Logistic.value(2.0 - h, Label::Negative).unwrap())
            / (2.0 * h);
        assert!((d - fd).abs() < 1e-9);
        assert!((d - 0.8807970779778823).abs() < 1e-12);
    }

    #[test]
    fn non_finite_margin_is_domain_error() {
        assert!(matches!(
            LossKind::Logistic.value(f64::NAN, Label::Positive),
            Err(Error::Domain(_))
        ));
        assert!(matches!(SQ3.derivative(f64::INFINITY, Label::Positive), Err(Error::Domain(_))));
    }

    #[test]
    fn logistic_tails_do_not_overflow() {
        for m in [-800.0, -50.0, 50.0, 800.0] {
            for y in [Label::Positive, Label::Negative] {
                assert!(LossKind::Logistic.value(m, y).unwrap().is_finite());
                assert!(LossKind::Logistic.derivative(m, y).unwrap().is_finite());
            }
        }
    }

    fn any_label() -> impl Strategy<Value = Label> {
        prop_oneof![Just(Label::Positive), Just(Label::Negative)]
    }

    fn any_kind() -> impl Strategy<Value = LossKind> {
        prop_oneof![
            Just(LossKind::Logistic),
            (-5.0f64..5.0).prop_map(|target| LossKind::Squared { target }),
            Just(LossKind::Linear),
        ]
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(kind in any_kind(), m in -20.0f64..20.0, y in any_label()) {
            let h = 1e-6;
            let fd = (kind.value(m + h, y).unwrap() - kind.value(m - h, y).unwrap()) / (2.0 * h);
            let d = kind.derivative(m, y).unwrap();
            // relative 1e-5, with an absolute floor where the derivative vanishes
            prop_assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-3));
        }

        #[test]
        fn logistic_is_convex(m1 in -30.0f64..30.0, m2 in -30.0f64..30.0, th in 0.0f64..=1.0, y in any_label()) {
            let l = |m: f64| LossKind::Logistic.value(m, y).unwrap();
            let mix = th * m1 + (1.0 - th) * m2;
            prop_assert!(l(mix) <= th * l(m1) + (1.0 - th) * l(m2) + 1e-12);
        }

        #[test]
        fn logistic_derivative_in_open_range(m in -30.0f64..30.0, y in any_label()) {
            let d = LossKind::Logistic.derivative(m, y).unwrap();
            let (lo, hi) = LossKind::Logistic.derivative_range(y);
            prop_assert!(lo <= d && d <= hi);
            prop_assert!(LossKind::Logistic.value(m, y).unwrap() >= 0.0);
        }
    }
}
