//! Reference implementations used to check the learners: a dense global
//! solver, the family objectives, lockstep equivalence runs and a
//! brute-force regret ledger.

mod equivalence;
mod family;
mod ledger;
mod objective;

pub use equivalence::{
    equivalence_check, random_stream, run_seed, run_suite, Centering, Discrepancy, EquivalenceReport, ExplicitGd,
    GdOnRegularized, LibraryPlayer, MirrorDescent, OracleFtrlPhi, OracleSetup, Player, PsiChoice, Revisionist,
    SuiteParams, Theorem,
};
pub use family::{family_objective, round_penalty_term};
pub use ledger::{ledger_tolerance, strong_ftrl_ledger, LedgerReport, LedgerRound};
pub use objective::{global_argmin, posthoc_best, ObjectiveSpec, PenaltyTerm, QuadraticTerm, MAX_DIM};
