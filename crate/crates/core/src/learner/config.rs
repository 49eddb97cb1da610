use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::penalty::{PenaltyKind, PenaltySchedule};

/// The four instances of the unified update.
///
/// | family | quadratic centered at | penalty handling |
/// |--------|-----------------------|------------------|
/// | `Ftprl` | current iterate | exact, weight `α_{1:t}` |
/// | `Rda`   | origin          | exact, weight `α_{1:t}` |
/// | `Fobos` | current iterate | past rounds linearized, current weight `α_t` |
/// | `Aogd`  | origin          | past rounds linearized, current weight 1 |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ftprl,
    Rda,
    Fobos,
    Aogd,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Ftprl, Family::Rda, Family::Fobos, Family::Aogd];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ftprl => "ftprl",
            Family::Rda => "rda",
            Family::Fobos => "fobos",
            Family::Aogd => "aogd",
        }
    }

    /// Whether each round's quadratic is centered at the point just played
    /// (otherwise at the origin).
    pub fn centered_at_iterate(self) -> bool {
        matches!(self, Family::Ftprl | Family::Fobos)
    }

    /// Whether the accumulated penalty is kept exactly rather than through
    /// past subgradients.
    pub fn exact_penalty(self) -> bool {
        matches!(self, Family::Ftprl | Family::Rda)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ftprl" | "ftrl-proximal" => Ok(Family::Ftprl),
            "rda" => Ok(Family::Rda),
            "fobos" | "comid" => Ok(Family::Fobos),
            "aogd" => Ok(Family::Aogd),
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

/// Whether the current loss enters the round's objective through its
/// gradient at `x_t` or exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossHandling {
    Linearized,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    /// One `σ_{1:t} = γ√t` shared by every coordinate.
    GlobalScalar,
    /// `σ_{1:t,i} = γ·sqrt(Σ_s g_{s,i}²)` per coordinate.
    PerCoordinateAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub mode: RateMode,
    pub gamma: f64,
}

impl LearningRateSchedule {
    pub fn global(gamma: f64) -> Self {
        Self { mode: RateMode::GlobalScalar, gamma }
    }

    pub fn adaptive(gamma: f64) -> Self {
        Self { mode: RateMode::PerCoordinateAdaptive, gamma }
    }

    /// `σ_{1:t}` of the global schedule, floored.
    pub fn global_cumulative(&self, t: u64, floor: f64) -> f64 {
        if t == 0 {
            0.0
        } else {
            (self.gamma * (t as f64).sqrt()).max(floor)
        }
    }

    /// `σ_{1:t,i}` of the adaptive schedule from the running squared-gradient sum.
    pub fn adaptive_cumulative(&self, grad_sq: f64, floor: f64) -> f64 {
        (self.gamma * grad_sq.sqrt()).max(floor)
    }
}

/// Everything that determines a learner's behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub family: Family,
    pub loss: LossKind,
    pub loss_handling: LossHandling,
    pub rate: LearningRateSchedule,
    pub penalty: PenaltySchedule,
    /// Lower bound on every `σ_{1:t}` (and `σ_{1:t,i}`).
    pub sigma_floor: f64,
}

impl AlgorithmConfig {
    /// Logistic loss, linearized, no penalty, no floor.
    pub fn new(family: Family, rate: LearningRateSchedule) -> Self {
        Self {
            family,
            loss: LossKind::Logistic,
            loss_handling: LossHandling::Linearized,
            rate,
            penalty: PenaltySchedule::none(),
            sigma_floor: 0.0,
        }
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_handling(mut self, handling: LossHandling) -> Self {
        self.loss_handling = handling;
        self
    }

    pub fn implicit(self) -> Self {
        self.with_handling(LossHandling::Implicit)
    }

    pub fn with_penalty(mut self, penalty: PenaltySchedule) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_sigma_floor(mut self, floor: f64) -> Self {
        self.sigma_floor = floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = self.rate.gamma;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        if !(self.sigma_floor.is_finite() && self.sigma_floor >= 0.0) {
            return Err(Error::Config(format!("sigma floor must be >= 0, got {}", self.sigma_floor)));
        }
        if let LossKind::Squared { target } = self.loss {
            if !target.is_finite() {
                return Err(Error::Config("squared-loss target must be finite".into()));
            }
        }
        self.penalty.validate()?;
        if self.loss_handling == LossHandling::Implicit {
            if self.family == Family::Aogd {
                return Err(Error::Config("aogd supports linearized losses only".into()));
            }
            if self.rate.mode == RateMode::PerCoordinateAdaptive && self.sigma_floor <= 0.0 {
                return Err(Error::Config(
                    "implicit updates with adaptive rates need a positive sigma floor".into(),
                ));
            }
        }
        Ok(())
    }

    /// Weight on `Ψ` in the loss the learner is charged for at round `t`.
    pub fn round_penalty_weight(&self, t: u64) -> f64 {
        match self.family {
            Family::Aogd => 1.0,
            _ => self.penalty.alpha(t),
        }
    }

    pub(crate) fn is_ball(&self) -> bool {
        matches!(self.penalty.kind, PenaltyKind::BallIndicator { .. })
    }

    /// Whether coordinates not touched by an example still move.
    pub(crate) fn eager(&self) -> bool {
        self.rate.mode == RateMode::GlobalScalar || self.is_ball()
    }
}
