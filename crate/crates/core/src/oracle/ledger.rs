//! Brute-force recomputation of the per-round regret ledger.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{AlgorithmConfig, LossHandling, RoundRecord};
use crate::oracle::family::{center_dense, round_penalty_term, sigma_dense};
use crate::oracle::objective::{PenaltyTerm, MAX_DIM};
use crate::types::{SparseExample, WeightVector};

/// One round of the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRound {
    pub t: u64,
    /// `h_{0:t}(x_t) − h_{0:t}(x_{t+1}) − R_t(x_t)` recomputed from the history.
    pub term: f64,
    /// The learner's own value of the same quantity.
    pub recorded_term: f64,
    /// Linearization gap of the loss (implicit handling) and of the penalty
    /// (families that linearize past penalties).
    pub under: f64,
    /// `Σ_{s≤t} F_s(x_s) − F_s(x*)` with `F_s = f_s + w_sΨ`.
    pub regret: f64,
    /// `R_{1:t}(x*) + Σ_{s≤t}(term_s + under_s)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub rounds: Vec<LedgerRound>,
    /// Rounds whose prefix regret exceeds the prefix bound.
    pub violations: Vec<u64>,
    /// Largest `|term − recorded_term|`.
    pub max_term_mismatch: f64,
    /// Smallest `bound − regret` over all prefixes.
    pub min_slack: f64,
}

impl LedgerReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tolerance on a prefix comparison.
pub fn ledger_tolerance(bound: f64) -> f64 {
    1e-9 * (1.0 + bound.abs())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn loss_at(config: &AlgorithmConfig, ex: &SparseExample, x: &[f64]) -> Result<f64> {
    Ok(ex.weight() * config.loss.value(ex.dot_dense(x), ex.label())?)
}

/// Replays `history` (the records of a run over `stream`) against the
/// comparator `x*`, rebuilding every round objective from scratch.
pub fn strong_ftrl_ledger(
    config: &AlgorithmConfig,
    stream: &[SparseExample],
    history: &[RoundRecord],
    comparator: &WeightVector,
    dim: usize,
) -> Result<LedgerReport> {
    if dim > MAX_DIM {
        return Err(Error::Input(format!("ledger oracle supports at most {MAX_DIM} coordinates, got {dim}")));
    }
    if stream.len() != history.len() {
        return Err(Error::Input(format!(
            "stream has {} examples but history has {} rounds",
            stream.len(),
            history.len()
        )));
    }
    let star = comparator.to_dense(dim);
    let exact = config.family.exact_penalty();
    let implicit = config.loss_handling == LossHandling::Implicit;

    // Σ_s (g_s + φ_s) and Σ_s σ_s y_s, Σ_s σ_s accumulated per coordinate.
    let mut g_hat = vec![0.0; dim];
    let mut quads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(history.len());
    let mut regret = 0.0;
    let mut accumulated = 0.0;
    let mut rounds = Vec::with_capacity(history.len());
    let mut violations = Vec::new();
    let mut max_term_mismatch = 0.0f64;
    let mut min_slack = f64::INFINITY;

    for (record, ex) in history.iter().zip(stream) {
        let t = record.t;
        let x = record.x.to_dense(dim);
        let next = record.next.to_dense(dim);
        let g = record.g.to_dense(dim);
        let phi = record.phi.to_dense(dim);
        for i in 0..dim {
            g_hat[i] += g[i] + phi[i];
        }
        let sigma = sigma_dense(record, dim);
        quads.push((sigma.clone(), center_dense(config, record, dim)));

        let exact_term = if exact { round_penalty_term(config, t) } else { PenaltyTerm::None };
        let objective = |p: &[f64]| {
            let mut v = dot(&g_hat, p) + exact_term.value(p);
            for (s, y) in &quads {
                for i in 0..dim {
                    let d = p[i] - y[i];
                    v += 0.5 * s[i] * d * d;
                }
            }
            v
        };
        let (s_t, y_t) = quads.last().expect("pushed above");
        let r_t: f64 = (0..dim).map(|i| 0.5 * s_t[i] * (x[i] - y_t[i]).powi(2)).sum();
        let term = objective(&x) - objective(&next) - r_t;

        let f_x = loss_at(config, ex, &x)?;
        let mut under = 0.0;
        if implicit {
            let diff: Vec<f64> = x.iter().zip(&next).map(|(a, b)| a - b).collect();
            under += f_x - loss_at(config, ex, &next)? - dot(&g, &diff);
        }
        let w_t = config.round_penalty_weight(t);
        let psi = |p: &[f64]| config.penalty.weighted_psi(w_t, &WeightVector::from_dense(p));
        if !exact {
            let diff: Vec<f64> = x.iter().zip(&next).map(|(a, b)| a - b).collect();
            under += psi(&x) - psi(&next) - dot(&phi, &diff);
        }

        regret += f_x + psi(&x) - loss_at(config, ex, &star)? - psi(&star);
        accumulated += term + under;
        let r_star: f64 = quads
            .iter()
            .map(|(s, y)| (0..dim).map(|i| 0.5 * s[i] * (star[i] - y[i]).powi(2)).sum::<f64>())
            .sum();
        let bound = r_star + accumulated;

        let slack = bound - regret;
        if slack < -ledger_tolerance(bound) {
            violations.push(t);
        }
        min_slack = min_slack.min(slack);
        max_term_mismatch = max_term_mismatch.max((term - record.ledger_term).abs());
        rounds.push(LedgerRound { t, term, recorded_term: record.ledger_term, under, regret, bound });
    }

    Ok(LedgerReport { rounds, violations, max_term_mismatch, min_slack })
}
