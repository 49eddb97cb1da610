use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{shuffle, Dataset};
use crate::error::{Error, Result};
use crate::eval::metrics::{auc, density};
use crate::learner::{AlgorithmConfig, Family, LearnerState};
use crate::types::SparseExample;

/// Progressive-validation outcome of one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub auc: f64,
    pub density: f64,
    /// Mean loss of the predictions made before each update.
    pub online_loss: f64,
    #[serde(rename = "T")]
    pub rounds: usize,
    pub nnz: usize,
}

/// One pass over `examples`, scoring each example before training on it.
/// Density is taken against `universe` features.
pub fn progressive_run(
    config: &AlgorithmConfig,
    examples: &[SparseExample],
    universe: usize,
) -> Result<(RunSummary, LearnerState)> {
    let mut state = LearnerState::new(config.clone())?;
    let mut scores = Vec::with_capacity(examples.len());
    let mut loss = 0.0;
    for ex in examples {
        let p = state.train_step(ex)?;
        scores.push((p.margin, ex.label()));
        loss += p.loss;
    }
    let weights = state.weights();
    let summary = RunSummary {
        auc: auc(&scores)?,
        density: density(&weights, universe)?,
        online_loss: if examples.is_empty() { 0.0 } else { loss / examples.len() as f64 },
        rounds: examples.len(),
        nnz: weights.nnz(),
    };
    Ok((summary, state))
}

/// One (family, λ) cell of a sweep at its selected γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: Family,
    pub lambda: f64,
    pub gamma: f64,
    pub auc: f64,
    pub density: f64,
    pub online_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Rate mode, loss, loss handling, σ floor and α mode shared by every
    /// cell. Family, γ and λ are overwritten per cell; the penalty is L1.
    pub template: AlgorithmConfig,
    pub families: Vec<Family>,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Number of evaluation shuffles averaged per row.
    pub shuffles: usize,
    /// γ is tuned on shuffle `seed`; rows average shuffles `seed+1..=seed+shuffles`.
    pub seed: u64,
}

/// Twelve points evenly spaced over `[0.3, 1.9]`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..12).map(|i| 0.3 + 1.6 * i as f64 / 11.0).collect()
}

fn cell_config(spec: &SweepSpec, family: Family, lambda: f64, gamma: f64) -> AlgorithmConfig {
    let mut config = spec.template.clone();
    config.family = family;
    config.rate.gamma = gamma;
    config.penalty.lambda = lambda;
    config.penalty.kind = crate::penalty::PenaltyKind::L1;
    config
}

/// Grid search over γ per (family, λ), then averages over fresh shuffles.
/// Cells run in parallel; rows come back ordered by family, then λ, as
/// listed in `spec`.
pub fn sweep(ds: &Dataset, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.families.is_empty() || spec.lambdas.is_empty() || spec.gammas.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    if spec.shuffles == 0 {
        return Err(Error::Config("sweep needs at least one shuffle".into()));
    }
    for (family, lambda, gamma) in cells(spec) {
        cell_config(spec, family, lambda, gamma).validate()?;
    }
    let universe = ds.feature_universe();
    let tuning = shuffle(ds, spec.seed);
    let tuned: Vec<f64> = cells(spec)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(f, l, g)| Ok(progressive_run(&cell_config(spec, f, l, g), tuning.examples(), universe)?.0.auc))
        .collect::<Result<_>>()?;

    // Best γ per (family, λ); the first grid point wins ties.
    let n_g = spec.gammas.len();
    let pairs: Vec<(Family, f64, f64)> = spec
        .families
        .iter()
        .flat_map(|&f| spec.lambdas.iter().map(move |&l| (f, l)))
        .enumerate()
        .map(|(k, (f, l))| {
            let aucs = &tuned[k * n_g..(k + 1) * n_g];
            let best = (0..n_g).fold(0, |b, i| if aucs[i] > aucs[b] { i } else { b });
            (f, l, spec.gammas[best])
        })
        .collect();

    let shuffled: Vec<Dataset> = (1..=spec.shuffles as u64).map(|k| shuffle(ds, spec.seed + k)).collect();
    let jobs: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|p| (0..spec.shuffles).map(move |s| (p, s))).collect();
    let runs: Vec<RunSummary> = jobs
        .into_par_iter()
        .map(|(p, s)| {
            let (f, l, g) = pairs[p];
            Ok(progressive_run(&cell_config(spec, f, l, g), shuffled[s].examples(), universe)?.0)
        })
        .collect::<Result<_>>()?;

    let k = spec.shuffles as f64;
    Ok(pairs
        .iter()
        .zip(runs.chunks(spec.shuffles))
        .map(|(&(family, lambda, gamma), runs)| SweepRow {
            family,
            lambda,
            gamma,
            auc: runs.iter().map(|r| r.auc).sum::<f64>() / k,
            density: runs.iter().map(|r| r.density).sum::<f64>() / k,
            online_loss: runs.iter().map(|r| r.online_loss).sum::<f64>() / k,
        })
        .collect())
}

fn cells(spec: &SweepSpec) -> impl Iterator<Item = (Family, f64, f64)> + '_ {
    spec.families.iter().flat_map(move |&f| {
        spec.lambdas.iter().flat_map(move |&l| spec.gammas.iter().map(move |&g| (f, l, g)))
    })
}

/// Rows of `challenger` that beat every same-λ row of `others` on both AUC
/// (higher) and density (lower).
pub fn frontier_dominators<'a>(rows: &'a [SweepRow], challenger: Family, others: &[Family]) -> Vec<&'a SweepRow> {
    rows.iter()
        .filter(|r| r.family == challenger)
        .filter(|r| {
            let rivals: Vec<&SweepRow> =
                rows.iter().filter(|o| others.contains(&o.family) && o.lambda == r.lambda).collect();
            !rivals.is_empty() && rivals.iter().all(|o| r.auc > o.auc && r.density < o.density)
        })
        .collect()
}

pub const CSV_HEADER: [&str; 6] = ["family", "lambda", "gamma", "auc", "density", "online_loss"];

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.family.name().to_string(),
            r.lambda.to_string(),
            r.gamma.to_string(),
            r.auc.to_string(),
            r.density.to_string(),
            r.online_loss.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows).map_err(|e| Error::Internal(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
