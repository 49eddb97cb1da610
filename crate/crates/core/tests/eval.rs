use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uftrl::data::{synth_linear, Dataset};
use uftrl::eval::{
    auc, composite_regret, density, progressive_run, regret, regret_bound, regret_check, sweep, write_csv,
    write_json, BoundFamily, RegretCheckParams, SweepRow, SweepSpec,
};
use uftrl::{
    AlgorithmConfig, Family, Label, LearnerState, LearningRateSchedule, LossKind, PenaltySchedule, SparseExample,
    WeightVector,
};

/// Fraction of positive-negative pairs ordered correctly, ties counted ½.
fn pairwise_auc(scores: &[(f64, Label)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for &(sp, _) in scores.iter().filter(|(_, l)| l.is_positive()) {
        for &(sn, _) in scores.iter().filter(|(_, l)| !l.is_positive()) {
            pairs += 1.0;
            wins += if sp > sn {
                1.0
            } else if sp == sn {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

#[test]
fn auc_golden_by_pair_enumeration() {
    use Label::{Negative as N, Positive as P};
    let scores = [(0.9, P), (0.8, N), (0.7, P), (0.1, N)];
    assert_eq!(pairwise_auc(&scores), 0.75);
    assert_eq!(auc(&scores).unwrap(), 0.75);
}

fn any_scores() -> impl Strategy<Value = Vec<(f64, Label)>> {
    proptest::collection::vec(((-5i32..5).prop_map(|v| v as f64 * 0.5), any::<bool>()), 2..60)
        .prop_map(|v| v.into_iter().map(|(s, p)| (s, if p { Label::Positive } else { Label::Negative })).collect())
        .prop_filter("both classes", |v: &Vec<(f64, Label)>| {
            v.iter().any(|(_, l)| l.is_positive()) && v.iter().any(|(_, l)| !l.is_positive())
        })
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(scores in any_scores()) {
        prop_assert!((auc(&scores).unwrap() - pairwise_auc(&scores)).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_transforms(scores in any_scores()) {
        let mapped: Vec<(f64, Label)> = scores.iter().map(|&(s, l)| ((s * 0.7).exp() + 3.0, l)).collect();
        prop_assert_eq!(auc(&scores).unwrap(), auc(&mapped).unwrap());
    }
}

#[test]
fn regret_against_self_is_zero() {
    let config = AlgorithmConfig::new(Family::Ftprl, LearningRateSchedule::global(1.0)).with_loss(LossKind::Linear);
    let stream: Vec<SparseExample> =
        (0..5).map(|i| SparseExample::from_dense(&[1.0, -0.5 * i as f64], Label::Positive).unwrap()).collect();
    let mut state = LearnerState::new(config).unwrap();
    let history: Vec<_> = stream.iter().map(|e| state.step(e).unwrap()).collect();
    // A constant comparator against a constant player on the same losses.
    let constant: Vec<_> = history.iter().map(|r| { let mut r = r.clone(); r.x = WeightVector::new(); r }).collect();
    assert_eq!(regret(LossKind::Linear, &constant, &stream, &WeightVector::new()).unwrap(), 0.0);
    assert!(regret(LossKind::Linear, &history[..2], &stream, &WeightVector::new()).is_err());
}

#[test]
fn one_round_regret_is_gradient_norm() {
    let g = [0.6, -0.8];
    let config = AlgorithmConfig::new(Family::Ftprl, LearningRateSchedule::global(1.0))
        .with_loss(LossKind::Linear)
        .with_penalty(PenaltySchedule::ball(1.0));
    let stream = vec![SparseExample::from_dense(&g, Label::Positive).unwrap()];
    let mut state = LearnerState::new(config.clone()).unwrap();
    let history = vec![state.step(&stream[0]).unwrap()];
    let star = WeightVector::from_dense(&[-0.6, 0.8]);
    assert!((regret(LossKind::Linear, &history, &stream, &star).unwrap() - 1.0).abs() < 1e-15);
    assert!((composite_regret(&config, &history, &stream, &star).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn ftprl_random_unit_gradients_within_bound() {
    let (d, g, rounds) = (2.0, 1.0, 400u64);
    let config = AlgorithmConfig::new(Family::Ftprl, BoundFamily::Ftprl.schedule(d, g))
        .with_loss(LossKind::Linear)
        .with_penalty(PenaltySchedule::ball(d / 2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let stream: Vec<SparseExample> = (0..rounds)
        .map(|_| {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            SparseExample::from_dense(&v.iter().map(|a| g * a / n).collect::<Vec<_>>(), Label::Positive).unwrap()
        })
        .collect();
    let mut state = LearnerState::new(config).unwrap();
    let history: Vec<_> = stream.iter().map(|e| state.step(e).unwrap()).collect();
    let mut sum = vec![0.0; 5];
    for e in &stream {
        for &(c, v) in e.features() {
            sum[c as usize] += v;
        }
    }
    let n = sum.iter().map(|a| a * a).sum::<f64>().sqrt();
    let star = WeightVector::from_dense(&sum.iter().map(|a| -a / n).collect::<Vec<_>>());
    let realized = regret(LossKind::Linear, &history, &stream, &star).unwrap();
    let bound = regret_bound(BoundFamily::Ftprl, d, g, rounds).unwrap();
    assert!(realized <= bound.total, "{realized} > {}", bound.total);
}

#[test]
fn regret_check_single_round() {
    for family in [Family::Ftprl, Family::Rda, Family::Fobos] {
        let params =
            RegretCheckParams { family, implicit: false, diameter: 2.0, grad_bound: 1.0, rounds: 1, dim: 4, seed: 0 };
        let report = regret_check(&params).unwrap();
        assert!(report.pass, "{report:?}");
        // x_1 = 0, so the realized regret is ‖g‖ · D/2 = 1.
        assert!((report.realized - 1.0).abs() < 1e-12);
    }
    let aogd = RegretCheckParams {
        family: Family::Aogd,
        implicit: false,
        diameter: 2.0,
        grad_bound: 1.0,
        rounds: 5,
        dim: 2,
        seed: 0,
    };
    assert!(regret_check(&aogd).is_err());
}

#[test]
fn density_examples() {
    assert_eq!(density(&WeightVector::new(), 100).unwrap(), 0.0);
    assert!(density(&WeightVector::new(), 0).is_err());
}

fn small_suite() -> Dataset {
    synth_linear(600, 400, 5, 0.05, 9).unwrap()
}

fn template() -> AlgorithmConfig {
    AlgorithmConfig::new(Family::Ftprl, LearningRateSchedule::adaptive(1.0)).with_penalty(PenaltySchedule::l1(0.0))
}

#[test]
fn single_point_grid_gives_one_row_per_family() {
    let ds = small_suite();
    let spec = SweepSpec {
        template: template(),
        families: vec![Family::Ftprl, Family::Rda, Family::Fobos],
        lambdas: vec![1e-4],
        gammas: vec![0.5],
        shuffles: 2,
        seed: 3,
    };
    let rows = sweep(&ds, &spec).unwrap();
    assert_eq!(rows.len(), 3);
    for (row, family) in rows.iter().zip(&spec.families) {
        assert_eq!(row.family, *family);
        assert!((0.0..=1.0).contains(&row.auc) && (0.0..=1.0).contains(&row.density));
    }
}

#[test]
fn zero_lambda_density_is_touched_fraction() {
    let ds = small_suite();
    let config = template();
    let (summary, _) = progressive_run(&config, ds.examples(), ds.feature_universe()).unwrap();
    assert_eq!(summary.density, 1.0);
    // Against a larger universe, the touched features are what count.
    let (wider, _) = progressive_run(&config, ds.examples(), 2 * ds.feature_universe()).unwrap();
    assert_eq!(wider.density, 0.5);
}

#[test]
fn sweep_is_deterministic() {
    let ds = small_suite();
    let spec = SweepSpec {
        template: template(),
        families: vec![Family::Rda, Family::Fobos],
        lambdas: vec![1e-4, 1e-3],
        gammas: vec![0.3, 1.0],
        shuffles: 3,
        seed: 0,
    };
    let a = sweep(&ds, &spec).unwrap();
    let b = sweep(&ds, &spec).unwrap();
    assert_eq!(a, b);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sweep(&ds, &spec).unwrap());
    assert_eq!(a, serial);
}

#[test]
fn empty_grid_is_config_error() {
    let spec = SweepSpec {
        template: template(),
        families: vec![Family::Rda],
        lambdas: vec![],
        gammas: vec![1.0],
        shuffles: 1,
        seed: 0,
    };
    assert!(matches!(sweep(&small_suite(), &spec), Err(uftrl::Error::Config(_))));
}

#[test]
fn csv_and_json_output() {
    let rows = vec![SweepRow { family: Family::Fobos, lambda: 0.5, gamma: 1.0, auc: 0.75, density: 0.25, online_loss: 0.5 }];
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "family,lambda,gamma,auc,density,online_loss\nfobos,0.5,1,0.75,0.25,0.5\n");
    let mut json = Vec::new();
    write_json(&rows, &mut json).unwrap();
    let back: Vec<SweepRow> = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn fobos_is_no_sparser_at_matched_settings() {
    let ds = synth_linear(5000, 5000, 10, 0.0, 2).unwrap();
    for lambda in [1e-6, 1e-5, 1e-4] {
        for gamma in [0.5, 1.0] {
            let run = |family| {
                let config = AlgorithmConfig::new(family, LearningRateSchedule::adaptive(gamma))
                    .with_penalty(PenaltySchedule::l1(lambda));
                progressive_run(&config, ds.examples(), ds.feature_universe()).unwrap().0.density
            };
            let fobos = run(Family::Fobos);
            assert!(fobos >= run(Family::Rda) - 0.02, "λ={lambda} γ={gamma}");
            assert!(fobos >= run(Family::Ftprl) - 0.02, "λ={lambda} γ={gamma}");
        }
    }
}
