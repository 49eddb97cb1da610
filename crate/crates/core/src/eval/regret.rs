use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{AlgorithmConfig, Family, LearnerState, LearningRateSchedule, RoundRecord};
use crate::loss::LossKind;
use crate::oracle::ledger_tolerance;
use crate::penalty::PenaltySchedule;
use crate::types::{Label, SparseExample, WeightVector};

fn check_lengths(history: &[RoundRecord], stream: &[SparseExample]) -> Result<()> {
    if history.len() != stream.len() {
        return Err(Error::Input(format!(
            "history has {} rounds but the loss sequence has {}",
            history.len(),
            stream.len()
        )));
    }
    Ok(())
}

/// `Σ f_t(x_t) − Σ f_t(x*)` over the points recorded in `history`.
pub fn regret(
    loss: LossKind,
    history: &[RoundRecord],
    stream: &[SparseExample],
    comparator: &WeightVector,
) -> Result<f64> {
    check_lengths(history, stream)?;
    let mut total = 0.0;
    for (r, ex) in history.iter().zip(stream) {
        let w = ex.weight();
        total += w * (loss.value(ex.dot(&r.x), ex.label())? - loss.value(ex.dot(comparator), ex.label())?);
    }
    Ok(total)
}

/// Regret on `f_t + w_tΨ`, with `w_t` the configured per-round penalty weight.
pub fn composite_regret(
    config: &AlgorithmConfig,
    history: &[RoundRecord],
    stream: &[SparseExample],
    comparator: &WeightVector,
) -> Result<f64> {
    let mut total = regret(config.loss, history, stream, comparator)?;
    for r in history {
        let w = config.round_penalty_weight(r.t);
        total += config.penalty.weighted_psi(w, &r.x) - config.penalty.weighted_psi(w, comparator);
    }
    Ok(total)
}

/// Which scalar-rate bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundFamily {
    /// FTRL-Proximal, and mirror descent with implicit updates.
    Ftprl,
    Rda,
}

impl BoundFamily {
    pub fn for_family(family: Family) -> Result<Self> {
        match family {
            Family::Ftprl | Family::Fobos => Ok(BoundFamily::Ftprl),
            Family::Rda => Ok(BoundFamily::Rda),
            Family::Aogd => Err(Error::Config("no scalar-rate regret bound is stated for aogd".into())),
        }
    }

    /// Global rate `σ_{1:t} = γ√t` the bound is stated for.
    pub fn schedule(self, diameter: f64, grad_bound: f64) -> LearningRateSchedule {
        let gamma = grad_bound * SQRT_2 / diameter;
        LearningRateSchedule::global(match self {
            BoundFamily::Ftprl => gamma,
            BoundFamily::Rda => 2.0 * gamma,
        })
    }
}

/// A regret bound split into its parts. `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    /// The `√T` term.
    pub leading: f64,
    /// The `ln T` term (RDA only).
    pub log_term: f64,
    /// The constant (RDA only): `GD/√2` from bounding `Σ 1/t` by `ln T + 1`,
    /// plus `GD/√2` for the first round.
    pub constant: f64,
    pub total: f64,
}

pub fn regret_bound(family: BoundFamily, diameter: f64, grad_bound: f64, rounds: u64) -> Result<RegretBound> {
    if !(diameter > 0.0 && diameter.is_finite() && grad_bound > 0.0 && grad_bound.is_finite()) {
        return Err(Error::Domain(format!("need D > 0 and G > 0, got D={diameter} G={grad_bound}")));
    }
    if rounds == 0 {
        return Err(Error::Domain("need T >= 1".into()));
    }
    let dg = diameter * grad_bound;
    let root = (2.0 * rounds as f64).sqrt();
    let (leading, log_term, constant) = match family {
        BoundFamily::Ftprl => (dg * root, 0.0, 0.0),
        BoundFamily::Rda => (0.5 * dg * root, dg / SQRT_2 * (rounds as f64).ln(), 2.0 * dg / SQRT_2),
    };
    Ok(RegretBound { leading, log_term, constant, total: leading + log_term + constant })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCheckParams {
    pub family: Family,
    /// Implicit handling of the (linear) losses.
    pub implicit: bool,
    pub diameter: f64,
    pub grad_bound: f64,
    pub rounds: u64,
    pub dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCheck {
    pub params: RegretCheckParams,
    pub realized: f64,
    pub bound: RegretBound,
    /// `R_{1:T}(x*) + Σ_t (ledger term + linearization gap)`.
    pub ledger_bound: f64,
    pub pass: bool,
}

/// Plays the adversarial linear stream `g_{t,i} = G·sign(x_{t,i})/√n` (a
/// random sign where `x_{t,i} = 0`) against a learner constrained to the
/// ball of diameter `D`, and compares realized regret with both bounds.
pub fn regret_check(params: &RegretCheckParams) -> Result<RegretCheck> {
    let bound_family = BoundFamily::for_family(params.family)?;
    let bound = regret_bound(bound_family, params.diameter, params.grad_bound, params.rounds)?;
    if params.dim == 0 {
        return Err(Error::Config("regret check needs dim >= 1".into()));
    }
    let mut config = AlgorithmConfig::new(params.family, bound_family.schedule(params.diameter, params.grad_bound))
        .with_loss(LossKind::Linear)
        .with_penalty(PenaltySchedule::ball(params.diameter / 2.0));
    if params.implicit {
        config = config.implicit();
    }
    let mut state = LearnerState::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.dim;
    let scale = params.grad_bound / (n as f64).sqrt();

    let mut g_sum = vec![0.0; n];
    let mut played = 0.0;
    let mut ledger = 0.0;
    // Σσ_s, Σσ_s y_s and Σσ_s y_s² per coordinate, to evaluate R_{1:T}(x*) at the end.
    let (mut s0, mut s1, mut s2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..params.rounds {
        let g: Vec<f64> = (0..n)
            .map(|i| {
                let x = state.lazy_weight(i as u64);
                let sign = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                };
                scale * sign
            })
            .collect();
        let ex = SparseExample::from_dense(&g, Label::Positive)?;
        let r = state.step(&ex)?;
        played += ex.dot(&r.x);
        for i in 0..n {
            g_sum[i] += g[i];
            let c = i as u64;
            let sigma = r.sigma_added.at(c);
            let y = if params.family.centered_at_iterate() { r.x.get(c) } else { 0.0 };
            s0[i] += sigma;
            s1[i] += sigma * y;
            s2[i] += sigma * y * y;
            // Linear loss: only the penalty part of the gap survives.
            ledger -= r.phi.get(c) * (r.x.get(c) - r.next.get(c));
        }
        ledger += r.ledger_term;
    }
    let norm = g_sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = params.diameter / 2.0;
    let star: Vec<f64> = g_sum.iter().map(|v| if norm > 0.0 { -radius * v / norm } else { 0.0 }).collect();
    let realized = played + radius * norm;
    let r_star: f64 = (0..n).map(|i| 0.5 * (s0[i] * star[i] * star[i] - 2.0 * s1[i] * star[i] + s2[i])).sum();
    let ledger_bound = r_star + ledger;
    let pass = realized <= bound.total + ledger_tolerance(bound.total)
        && realized <= ledger_bound + ledger_tolerance(ledger_bound);
    Ok(RegretCheck { params: params.clone(), realized, bound, ledger_bound, pass })
}
