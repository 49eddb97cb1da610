//! The unified FTRL engine and its four named instances.

mod checkpoint;
mod config;
mod record;
mod state;

pub use config::{AlgorithmConfig, Family, LearningRateSchedule, LossHandling, RateMode};
pub use record::{Prediction, Progress, RoundRecord, SigmaIncrement};
pub use state::{init, lazy_weight, predict, step, LearnerState};
