use crate::error::{Error, Result};
use crate::learner::{AlgorithmConfig, LossHandling, RoundRecord};
use crate::oracle::objective::{ObjectiveSpec, PenaltyTerm, QuadraticTerm};
use crate::penalty::PenaltyKind;
use crate::types::{SparseExample, WeightVector};

pub(crate) fn dense(v: &WeightVector, dim: usize) -> Vec<f64> {
    v.to_dense(dim)
}

/// Per-coordinate `σ_s` of a record as a dense vector.
pub(crate) fn sigma_dense(record: &RoundRecord, dim: usize) -> Vec<f64> {
    (0..dim).map(|i| record.sigma_added.at(i as u64)).collect()
}

/// Center `y_s` of round `s`'s quadratic.
pub(crate) fn center_dense(config: &AlgorithmConfig, record: &RoundRecord, dim: usize) -> Vec<f64> {
    if config.family.centered_at_iterate() {
        dense(&record.x, dim)
    } else {
        vec![0.0; dim]
    }
}

/// Non-smooth term of round `t`'s objective for the configured family.
pub fn round_penalty_term(config: &AlgorithmConfig, t: u64) -> PenaltyTerm {
    let weight = if config.family.exact_penalty() {
        config.penalty.alpha_cumulative(t)
    } else {
        config.round_penalty_weight(t)
    };
    match config.penalty.kind {
        PenaltyKind::L1 => PenaltyTerm::L1 { coefficient: weight * config.penalty.lambda },
        PenaltyKind::BallIndicator { radius } if weight > 0.0 => PenaltyTerm::Ball { radius },
        PenaltyKind::BallIndicator { .. } => PenaltyTerm::None,
    }
}

/// The family's global objective for round `t = history.len()`, whose
/// minimizer is `x_{t+1}`.
///
/// Loss and penalty subgradients of rounds `1..t` come from the records;
/// round `t` supplies its stabilizer `σ_t` and, when linearized, its
/// gradient. With implicit handling `f_t` enters exactly.
pub fn family_objective(
    config: &AlgorithmConfig,
    history: &[RoundRecord],
    current: &SparseExample,
    dim: usize,
) -> Result<ObjectiveSpec> {
    let (last, past) = history
        .split_last()
        .ok_or_else(|| Error::Input("family objective needs at least one round".into()))?;
    let t = history.len() as u64;
    let mut linear = vec![0.0; dim];
    for r in past {
        for (c, v) in r.g.iter().chain(r.phi.iter()) {
            linear[c as usize] += v;
        }
    }
    if config.loss_handling == LossHandling::Linearized {
        for (c, v) in last.g.iter() {
            linear[c as usize] += v;
        }
    }
    let mut spec = ObjectiveSpec::new(linear).with_penalty(round_penalty_term(config, t));
    for r in history {
        spec = spec.with_quadratic(QuadraticTerm { sigma: sigma_dense(r, dim), center: center_dense(config, r, dim) });
    }
    if config.loss_handling == LossHandling::Implicit {
        spec = spec.with_loss(config.loss, current.clone());
    }
    Ok(spec)
}
