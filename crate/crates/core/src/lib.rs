//! Online convex optimization through one update rule.
//!
//! Each round plays `x_{t+1} = argmin_x g_{1:t-1}·x + f_t(x) + (penalty terms) + R_{1:t}(x)`,
//! with a quadratic stabilizer `R_t` per coordinate. FTRL-Proximal, RDA,
//! FOBOS/COMID and AOGD are instances that differ in where `R_t` is centered and
//! in how the non-smooth penalty `Ψ` is accumulated. See [`learner::Family`].
//!
//! The [`oracle`] module re-derives the same iterates by brute force so the
//! closed forms can be checked, and [`eval`] measures regret, AUC and density.

pub mod data;
pub mod error;
pub mod eval;
pub mod learner;
pub mod loss;
pub mod oracle;
pub mod penalty;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use learner::{AlgorithmConfig, Family, LearnerState, LearningRateSchedule, LossHandling, RoundRecord};
pub use loss::LossKind;
pub use penalty::{AlphaMode, PenaltyKind, PenaltySchedule};
pub use types::{Coord, Label, SparseExample, WeightVector};

// The guide's chapters, so `cargo test --doc` runs their snippets.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/unified-update.md")]
    mod unified_update {}
    #[doc = include_str!("../../../book/src/implicit-updates.md")]
    mod implicit_updates {}
    #[doc = include_str!("../../../book/src/equivalences.md")]
    mod equivalences {}
    #[doc = include_str!("../../../book/src/regret.md")]
    mod regret {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
