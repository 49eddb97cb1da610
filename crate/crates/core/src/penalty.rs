//! Composite penalty `α_t Ψ(x)` and its per-round weight schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::WeightVector;

/// The fixed non-smooth function `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `λ‖x‖₁`.
    L1,
    /// Indicator of the centered L2 ball: 0 inside, +∞ outside. `λ` is unused.
    BallIndicator { radius: f64 },
}

/// How the per-round weight `α_t` evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "alphas", rename_all = "kebab-case")]
pub enum AlphaMode {
    /// `α_t = 1` for every round.
    Constant,
    /// `α_1 = 1`, then zero: a fixed prior that does not strengthen with `T`.
    PriorOnce,
    /// Explicit `α_1, α_2, …`; rounds past the end get zero.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub lambda: f64,
    pub mode: AlphaMode,
    pub kind: PenaltyKind,
}

impl PenaltySchedule {
    pub fn l1(lambda: f64) -> Self {
        Self { lambda, mode: AlphaMode::Constant, kind: PenaltyKind::L1 }
    }

    pub fn ball(radius: f64) -> Self {
        Self { lambda: 0.0, mode: AlphaMode::Constant, kind: PenaltyKind::BallIndicator { radius } }
    }

    /// No penalty at all.
    pub fn none() -> Self {
        Self::l1(0.0)
    }

    pub fn with_mode(mut self, mode: AlphaMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if let PenaltyKind::BallIndicator { radius } = self.kind {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
            }
        }
        if let AlphaMode::Custom(alphas) = &self.mode {
            let mut prev = f64::INFINITY;
            for (i, &a) in alphas.iter().enumerate() {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::Config(format!("alpha_{} = {a} is not a finite non-negative value", i + 1)));
                }
                if a > prev {
                    return Err(Error::Config(format!("alpha schedule increases at round {}", i + 1)));
                }
                prev = a;
            }
        }
        Ok(())
    }

    /// `α_t` for round `t ≥ 1`.
    pub fn alpha(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match &self.mode {
            AlphaMode::Constant => 1.0,
            AlphaMode::PriorOnce => {
                if t == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            AlphaMode::Custom(alphas) => alphas.get((t - 1) as usize).copied().unwrap_or(0.0),
        }
    }

    /// `α_{1:t}`; zero for `t = 0`.
    pub fn alpha_cumulative(&self, t: u64) -> f64 {
        match &self.mode {
            AlphaMode::Constant => t as f64,
            AlphaMode::PriorOnce => {
                if t >= 1 {
                    1.0
                } else {
                    0.0
                }
            }
            AlphaMode::Custom(alphas) => alphas.iter().take(t as usize).sum(),
        }
    }

    /// `Ψ(x)` without any `α` weight: `λ‖x‖₁`, or 0/+∞ for the ball.
    pub fn psi(&self, x: &WeightVector) -> f64 {
        match self.kind {
            PenaltyKind::L1 => self.lambda * x.l1_norm(),
            PenaltyKind::BallIndicator { radius } => ball_indicator(x.l2_norm(), radius),
        }
    }

    /// `Ψ` evaluated with a given weight in front; a zero weight switches the
    /// indicator off entirely.
    pub fn weighted_psi(&self, weight: f64, x: &WeightVector) -> f64 {
        if weight == 0.0 {
            return 0.0;
        }
        match self.kind {
            PenaltyKind::L1 => weight * self.lambda * x.l1_norm(),
            PenaltyKind::BallIndicator { radius } => ball_indicator(x.l2_norm(), radius),
        }
    }
}

/// Tolerance on the ball boundary so that points returned by the projection
/// solver are never reported as infeasible.
const BALL_SLACK: f64 = 1e-9;

pub(crate) fn ball_indicator(norm: f64, radius: f64) -> f64 {
    if norm <= radius * (1.0 + BALL_SLACK) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `α_t Ψ(x)` at round `t`.
pub fn penalty_value(schedule: &PenaltySchedule, x: &WeightVector, t: u64) -> f64 {
    schedule.weighted_psi(schedule.alpha(t), x)
}
