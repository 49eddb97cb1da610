//! Regret, bounds, classification metrics and the λ sweep.

mod metrics;
mod regret;
mod sweep;

pub use metrics::{auc, density};
pub use regret::{
    composite_regret, regret, regret_bound, regret_check, BoundFamily, RegretBound, RegretCheck, RegretCheckParams,
};
pub use sweep::{
    default_gamma_grid, frontier_dominators, progressive_run, sweep, write_csv, write_json, RunSummary, SweepRow,
    SweepSpec, CSV_HEADER,
};
