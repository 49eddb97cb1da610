use serde::{Deserialize, Serialize};

use crate::types::{Coord, WeightVector};

/// The quadratic stabilization `σ_t` added in one round.
///
/// Coordinate `i` receives `base + extra[i]`. `base` covers every coordinate
/// of the universe, including ones the learner has never seen.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SigmaIncrement {
    pub base: f64,
    pub extra: WeightVector,
}

impl SigmaIncrement {
    pub fn at(&self, coord: Coord) -> f64 {
        self.base + self.extra.get(coord)
    }
}

/// Per-round log of a full [`step`](super::LearnerState::step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    /// `x_t`, the point played this round.
    pub x: WeightVector,
    /// `x_{t+1}`.
    pub next: WeightVector,
    /// Loss subgradient folded into the state: `∇f_t(x_t)` when linearized,
    /// `∇f_t(x_{t+1})` when implicit.
    pub g: WeightVector,
    /// Penalty subgradient `φ_t` folded into the state (families that
    /// linearize past penalties only; empty otherwise).
    pub phi: WeightVector,
    /// `f_t(x_t)` including the importance weight.
    pub loss: f64,
    /// Per-round penalty charged at `x_t`: `α_t Ψ(x_t)`, or `Ψ(x_t)` for AOGD.
    pub penalty: f64,
    pub sigma_added: SigmaIncrement,
    /// Half the objective improvement of the implicit point over the
    /// linearized one; 0 when linearized.
    pub delta: f64,
    /// `‖x̄_{t+1} − x_{t+1}‖_∞` between the linearized and implicit points.
    pub implicit_shift: f64,
    /// `h_{0:t}(x_t) − h_{0:t}(x_{t+1}) − R_t(x_t)` for the round objective `h_{0:t}`.
    pub ledger_term: f64,
}

/// Outcome of a fast [`train_step`](super::LearnerState::train_step): the
/// prediction made before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub margin: f64,
    pub loss: f64,
}

/// Margin and logistic probability of an example under the current iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub margin: f64,
    pub probability: f64,
}

impl Prediction {
    pub fn from_margin(margin: f64) -> Self {
        let probability = if margin >= 0.0 {
            1.0 / (1.0 + (-margin).exp())
        } else {
            let e = margin.exp();
            e / (1.0 + e)
        };
        Self { margin, probability }
    }
}
