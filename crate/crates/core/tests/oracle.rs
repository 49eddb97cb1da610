use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uftrl::oracle::{
    family_objective, global_argmin, run_suite, strong_ftrl_ledger, PsiChoice, SuiteParams, Theorem,
};
use uftrl::{
    AlgorithmConfig, Family, Label, LearnerState, LearningRateSchedule, PenaltySchedule, SparseExample,
    WeightVector,
};

fn params(theorem: Theorem, psi: PsiChoice, seeds: u64) -> SuiteParams {
    SuiteParams { seeds, psi, ..SuiteParams::for_theorem(theorem) }
}

#[test]
fn every_suite_passes_on_a_few_seeds() {
    for theorem in Theorem::ALL {
        for psi in [PsiChoice::L1, PsiChoice::Ball] {
            let report = run_suite(theorem, &params(theorem, psi, 3)).unwrap();
            assert!(report.pass, "{theorem} {psi:?}: {report:?}");
        }
    }
}

fn sparse_stream(rounds: usize, dim: u64, seed: u64) -> Vec<SparseExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rounds)
        .map(|_| {
            let mut feats = Vec::new();
            for c in 0..dim {
                if rng.random_bool(0.4) {
                    feats.push((c, rng.random_range(-1.0..1.0)));
                }
            }
            if feats.is_empty() {
                feats.push((rng.random_range(0..dim), 1.0));
            }
            let label = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
            SparseExample::new(feats, label).unwrap()
        })
        .collect()
}

fn configs() -> Vec<AlgorithmConfig> {
    let mut out = Vec::new();
    for family in Family::ALL {
        for penalty in [PenaltySchedule::l1(0.05), PenaltySchedule::ball(0.8)] {
            for adaptive in [false, true] {
                let rate = if adaptive { LearningRateSchedule::adaptive(0.7) } else { LearningRateSchedule::global(0.7) };
                let base = AlgorithmConfig::new(family, rate).with_penalty(penalty.clone()).with_sigma_floor(0.3);
                if family != Family::Aogd {
                    out.push(base.clone().implicit());
                }
                out.push(base);
            }
        }
    }
    out
}

#[test]
fn iterates_match_family_objective_argmin() {
    let dim = 8;
    for (k, config) in configs().into_iter().enumerate() {
        let stream = sparse_stream(60, dim, k as u64);
        let mut state = LearnerState::new(config.clone()).unwrap();
        let mut history = Vec::new();
        let mut worst = 0.0f64;
        for ex in &stream {
            let record = state.step(ex).unwrap();
            history.push(record);
            let spec = family_objective(&config, &history, ex, dim as usize).unwrap();
            let oracle = global_argmin(&spec, dim as usize, 1e-10).unwrap();
            worst = worst.max(oracle.max_abs_diff(&state.weights()));
        }
        assert!(worst <= 1e-6, "{config:?}: {worst}");
    }
}

#[test]
fn ledger_matches_and_bounds_regret() {
    let dim = 6;
    for (k, config) in configs().into_iter().enumerate() {
        let stream = sparse_stream(80, dim, 100 + k as u64);
        let mut state = LearnerState::new(config.clone()).unwrap();
        let history: Vec<_> = stream.iter().map(|ex| state.step(ex).unwrap()).collect();
        let comparator = WeightVector::from_dense(&[0.3, -0.2, 0.0, 0.1, 0.0, -0.4]);
        let report = strong_ftrl_ledger(&config, &stream, &history, &comparator, dim as usize).unwrap();
        assert!(report.max_term_mismatch <= 1e-9, "{config:?}: {}", report.max_term_mismatch);
        assert!(report.holds(), "{config:?}: {:?}", report.violations);
    }
}
