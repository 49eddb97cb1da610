//! Lockstep comparison of update rules that should play identical points.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{AlgorithmConfig, Family, LearnerState, LearningRateSchedule};
use crate::loss::LossKind;
use crate::oracle::objective::{global_argmin, ObjectiveSpec, PenaltyTerm, QuadraticTerm};
use crate::penalty::{PenaltyKind, PenaltySchedule};
use crate::types::{Label, SparseExample};

/// Tolerance handed to the dense oracle inside the suites.
const ORACLE_TOL: f64 = 1e-10;

/// Anything that plays a point, then observes a loss.
pub trait Player {
    /// The point `x_t` about to be played, over coordinates `0..dim`.
    fn point(&self) -> Vec<f64>;
    fn observe(&mut self, ex: &SparseExample) -> Result<()>;
}

/// A library learner viewed as a dense player.
pub struct LibraryPlayer {
    state: LearnerState,
    dim: usize,
}

impl LibraryPlayer {
    pub fn new(config: AlgorithmConfig, dim: usize) -> Result<Self> {
        Ok(Self { state: LearnerState::new(config)?, dim })
    }
}

impl Player for LibraryPlayer {
    fn point(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.state.lazy_weight(i as u64)).collect()
    }

    fn observe(&mut self, ex: &SparseExample) -> Result<()> {
        self.state.train_step(ex).map(|_| ())
    }
}

/// Gradient of `w·ℓ(θ·x)` at a dense point.
fn loss_gradient(kind: LossKind, ex: &SparseExample, x: &[f64]) -> Vec<f64> {
    let s = ex.weight() * kind.derivative_unchecked(ex.dot_dense(x), ex.label());
    let mut g = vec![0.0; x.len()];
    for &(c, v) in ex.features() {
        g[c as usize] = s * v;
    }
    g
}

/// Explicit gradient descent `x_{t+1} = x_t − g_t / σ_{1:t}` with the global schedule.
pub struct ExplicitGd {
    x: Vec<f64>,
    loss: LossKind,
    rate: LearningRateSchedule,
    floor: f64,
    t: u64,
}

impl ExplicitGd {
    pub fn new(dim: usize, loss: LossKind, rate: LearningRateSchedule, floor: f64) -> Self {
        Self { x: vec![0.0; dim], loss, rate, floor, t: 0 }
    }
}

impl Player for ExplicitGd {
    fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn observe(&mut self, ex: &SparseExample) -> Result<()> {
        self.t += 1;
        let sigma = self.rate.global_cumulative(self.t, self.floor);
        let g = loss_gradient(self.loss, ex, &self.x);
        for (xi, gi) in self.x.iter_mut().zip(g) {
            *xi -= gi / sigma;
        }
        Ok(())
    }
}

/// Gradient descent on `f_t^R(x) = g_t·x + (σ_t/2)‖x‖²` with step `1/σ_{1:t}`.
pub struct GdOnRegularized {
    x: Vec<f64>,
    loss: LossKind,
    rate: LearningRateSchedule,
    floor: f64,
    t: u64,
}

impl GdOnRegularized {
    pub fn new(dim: usize, loss: LossKind, rate: LearningRateSchedule, floor: f64) -> Self {
        Self { x: vec![0.0; dim], loss, rate, floor, t: 0 }
    }
}

impl Player for GdOnRegularized {
    fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn observe(&mut self, ex: &SparseExample) -> Result<()> {
        let prev = self.rate.global_cumulative(self.t, self.floor);
        self.t += 1;
        let total = self.rate.global_cumulative(self.t, self.floor);
        let step = total - prev;
        let g = loss_gradient(self.loss, ex, &self.x);
        for (xi, gi) in self.x.iter_mut().zip(g) {
            *xi -= (gi + step * *xi) / total;
        }
        Ok(())
    }
}

/// Revisionist gradient descent `x_{t+1} = −g_{1:t} / σ_{1:t}`.
pub struct Revisionist {
    g_sum: Vec<f64>,
    x: Vec<f64>,
    loss: LossKind,
    rate: LearningRateSchedule,
    floor: f64,
    t: u64,
}

impl Revisionist {
    pub fn new(dim: usize, loss: LossKind, rate: LearningRateSchedule, floor: f64) -> Self {
        Self { g_sum: vec![0.0; dim], x: vec![0.0; dim], loss, rate, floor, t: 0 }
    }
}

impl Player for Revisionist {
    fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn observe(&mut self, ex: &SparseExample) -> Result<()> {
        self.t += 1;
        let sigma = self.rate.global_cumulative(self.t, self.floor);
        let g = loss_gradient(self.loss, ex, &self.x);
        for i in 0..self.x.len() {
            self.g_sum[i] += g[i];
            self.x[i] = -self.g_sum[i] / sigma;
        }
        Ok(())
    }
}

/// Where the per-round stabilizer is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    Iterate,
    Origin,
}

/// Shared setup of the oracle-backed players.
#[derive(Debug, Clone)]
pub struct OracleSetup {
    pub dim: usize,
    pub loss: LossKind,
    pub implicit: bool,
    pub rate: LearningRateSchedule,
    pub floor: f64,
    pub centering: Centering,
    pub penalty: PenaltySchedule,
    /// Weight on `Ψ` at round `t` (`α_t`, or 1).
    pub unit_weight: bool,
}

impl OracleSetup {
    fn sigma(&self, t: u64) -> f64 {
        self.rate.global_cumulative(t, self.floor)
    }

    fn penalty_term(&self, t: u64) -> PenaltyTerm {
        let w = if self.unit_weight { 1.0 } else { self.penalty.alpha(t) };
        match self.penalty.kind {
            PenaltyKind::L1 => PenaltyTerm::L1 { coefficient: w * self.penalty.lambda },
            PenaltyKind::BallIndicator { radius } if w > 0.0 => PenaltyTerm::Ball { radius },
            PenaltyKind::BallIndicator { .. } => PenaltyTerm::None,
        }
    }
}

/// Mirror-descent step of round `t` from `x̂_t`:
/// `argmin ĝ·x + w_tΨ(x) + (σ_{1:t}/2)‖x − x̂_t‖²`, where `ĝ` is the loss
/// gradient at `x̂_t`, plus `σ_t x̂_t` for origin-centered stabilizers, or the
/// exact loss when implicit.
pub struct MirrorDescent {
    setup: OracleSetup,
    x: Vec<f64>,
    t: u64,
}

impl MirrorDescent {
    pub fn new(setup: OracleSetup) -> Self {
        Self { x: vec![0.0; setup.dim], setup, t: 0 }
    }
}

impl Player for MirrorDescent {
    fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn observe(&mut self, ex: &SparseExample) -> Result<()> {
        let s = &self.setup;
        let prev = s.sigma(self.t);
        self.t += 1;
        let total = s.sigma(self.t);
        let mut linear = if s.implicit { vec![0.0; s.dim] } else { loss_gradient(s.loss, ex, &self.x) };
        if s.centering == Centering::Origin {
            for (l, xi) in linear.iter_mut().zip(&self.x) {
                *l += (total - prev) * xi;
            }
        }
        let mut spec = ObjectiveSpec::new(linear)
            .with_quadratic(QuadraticTerm::uniform(total, self.x.clone()))
            .with_penalty(s.penalty_term(self.t));
        if s.implicit {
            spec = spec.with_loss(s.loss, ex.clone());
        }
        self.x = global_argmin(&spec, s.dim, ORACLE_TOL)?.to_dense(s.dim);
        Ok(())
    }
}

/// FTRL over the whole history, with past penalties entering only through
/// the subgradients `φ_s` extracted from each round's optimality condition:
/// `argmin (g'_{1:t−1} + φ_{1:t−1})·x + f_t(x) + w_tΨ(x) + Σ_s (σ_s/2)‖x − y_s‖²`.
pub struct OracleFtrlPhi {
    setup: OracleSetup,
    x: Vec<f64>,
    /// `g'_{1:t} + φ_{1:t}`.
    linear: Vec<f64>,
    quads: Vec<QuadraticTerm>,
    t: u64,
}

impl OracleFtrlPhi {
    pub fn new(setup: OracleSetup) -> Self {
        let dim = setup.dim;
        Self { setup, x: vec![0.0; dim], linear: vec![0.0; dim], quads: Vec::new(), t: 0 }
    }
}

impl Player for OracleFtrlPhi {
    fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn observe(&mut self, ex: &SparseExample) -> Result<()> {
        let s = &self.setup;
        let prev = s.sigma(self.t);
        self.t += 1;
        let step = s.sigma(self.t) - prev;
        let center = match s.centering {
            Centering::Iterate => self.x.clone(),
            Centering::Origin => vec![0.0; s.dim],
        };
        self.quads.push(QuadraticTerm::uniform(step, center));

        let mut linear = self.linear.clone();
        let g_lin = loss_gradient(s.loss, ex, &self.x);
        if !s.implicit {
            for (l, g) in linear.iter_mut().zip(&g_lin) {
                *l += g;
            }
        }
        let mut spec = ObjectiveSpec::new(linear).with_penalty(s.penalty_term(self.t));
        spec.quad_centers = self.quads.clone();
        if s.implicit {
            spec = spec.with_loss(s.loss, ex.clone());
        }
        let next = global_argmin(&spec, s.dim, ORACLE_TOL)?.to_dense(s.dim);

        // g'_t + φ_t = −(g'_{1:t−1} + φ_{1:t−1}) − Σ_s σ_s (x_{t+1} − y_s)
        for i in 0..s.dim {
            let pull: f64 = self.quads.iter().map(|q| q.sigma[i] * (next[i] - q.center[i])).sum();
            self.linear[i] = -pull;
        }
        self.x = next;
        Ok(())
    }
}

/// Largest coordinate gap seen over a lockstep run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub max_discrepancy: f64,
    /// Round (1-based point index) where the maximum occurred.
    pub worst_round: usize,
}

/// Runs two players on the same stream and returns the largest
/// `|x_t^A − x_t^B|` over every round and coordinate, including the final point.
pub fn equivalence_check(a: &mut dyn Player, b: &mut dyn Player, stream: &[SparseExample]) -> Result<Discrepancy> {
    let mut worst = Discrepancy { max_discrepancy: 0.0, worst_round: 1 };
    let mut compare = |t: usize, a: &dyn Player, b: &dyn Player| {
        let gap = a.point().iter().zip(b.point()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        if gap > worst.max_discrepancy || gap.is_nan() {
            worst = Discrepancy { max_discrepancy: if gap.is_nan() { f64::INFINITY } else { gap }, worst_round: t };
        }
    };
    for (t, ex) in stream.iter().enumerate() {
        compare(t + 1, a, b);
        a.observe(ex)?;
        b.observe(ex)?;
    }
    compare(stream.len() + 1, a, b);
    Ok(worst)
}

/// The equivalence statements with a runnable suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    /// Gradient descent with rates `1/σ_{1:t}` equals FTRL-Proximal without a penalty.
    Cor2,
    /// Linearized FOBOS equals FTRL-Proximal with subgradient-accumulated penalties.
    Cor3,
    /// FTRL on regularized losses, gradient descent on them, and revisionist
    /// gradient descent coincide.
    Cor4,
    /// Implicit composite mirror descent equals the implicit FTRL-with-φ update.
    Thm2,
    /// Mirror descent on regularized losses equals origin-centered FTRL with φ.
    Thm3,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [Theorem::Cor2, Theorem::Cor3, Theorem::Cor4, Theorem::Thm2, Theorem::Thm3];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Cor2 => "cor2",
            Theorem::Cor3 => "cor3",
            Theorem::Cor4 => "cor4",
            Theorem::Thm2 => "thm2",
            Theorem::Thm3 => "thm3",
        }
    }

    /// Exact-arithmetic pairs are held to 1e-9; pairs that go through the
    /// numeric oracle to 1e-6.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Theorem::Cor2 | Theorem::Cor4 => 1e-9,
            _ => 1e-6,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown theorem `{s}` (expected cor2, cor3, cor4, thm2 or thm3)")))
    }
}

/// Which `Ψ` the composite suites use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiChoice {
    L1,
    Ball,
}

impl FromStr for PsiChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(PsiChoice::L1),
            "ball" => Ok(PsiChoice::Ball),
            other => Err(Error::Config(format!("unknown psi `{other}` (expected l1 or ball)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub rounds: usize,
    pub dim: usize,
    pub seeds: u64,
    pub psi: PsiChoice,
    pub gamma: f64,
    pub lambda: f64,
    pub radius: f64,
    pub tol: f64,
}

impl SuiteParams {
    /// Default size and tolerance of each check.
    pub fn for_theorem(theorem: Theorem) -> Self {
        let (rounds, dim) = match theorem {
            Theorem::Cor2 | Theorem::Cor4 => (1000, 10),
            _ => (200, 5),
        };
        Self {
            rounds,
            dim,
            seeds: 20,
            psi: PsiChoice::L1,
            gamma: 1.0,
            lambda: 0.1,
            radius: 1.0,
            tol: theorem.default_tolerance(),
        }
    }
}

/// One line of a suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub theorem: Theorem,
    #[serde(rename = "T")]
    pub rounds: usize,
    pub dim: usize,
    pub max_discrepancy: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Random dense stream: linear losses, or logistic ones for the implicit suite.
pub fn random_stream(rounds: usize, dim: usize, logistic: bool, seed: u64) -> Vec<SparseExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rounds)
        .map(|_| {
            let theta: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = if logistic && rng.random_bool(0.5) { Label::Negative } else { Label::Positive };
            SparseExample::from_dense(&theta, label).expect("finite features")
        })
        .collect()
}

fn penalty_for(params: &SuiteParams) -> PenaltySchedule {
    match params.psi {
        PsiChoice::L1 => PenaltySchedule::l1(params.lambda),
        PsiChoice::Ball => PenaltySchedule::ball(params.radius),
    }
}

/// Runs one seed of a theorem's suite, returning the worst pairwise gap.
pub fn run_seed(theorem: Theorem, params: &SuiteParams, seed: u64) -> Result<f64> {
    let dim = params.dim;
    let rate = LearningRateSchedule::global(params.gamma);
    let implicit = theorem == Theorem::Thm2;
    let loss = if implicit { LossKind::Logistic } else { LossKind::Linear };
    let stream = random_stream(params.rounds, dim, implicit, seed);
    let library = |family: Family, penalty: PenaltySchedule| -> Result<LibraryPlayer> {
        let mut config = AlgorithmConfig::new(family, rate).with_loss(loss).with_penalty(penalty);
        if implicit {
            config = config.implicit();
        }
        LibraryPlayer::new(config, dim)
    };
    let pairwise = |players: &mut [Box<dyn Player>]| -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..players.len() {
            for j in i + 1..players.len() {
                let (left, right) = players.split_at_mut(j);
                let d = equivalence_check(left[i].as_mut(), right[0].as_mut(), &stream)?;
                worst = worst.max(d.max_discrepancy);
            }
        }
        Ok(worst)
    };
    let fresh = |theorem: Theorem| -> Result<Vec<Box<dyn Player>>> {
        Ok(match theorem {
            Theorem::Cor2 => vec![
                Box::new(library(Family::Ftprl, PenaltySchedule::none())?),
                Box::new(ExplicitGd::new(dim, loss, rate, 0.0)),
            ],
            Theorem::Cor4 => vec![
                Box::new(library(Family::Rda, PenaltySchedule::none())?),
                Box::new(GdOnRegularized::new(dim, loss, rate, 0.0)),
                Box::new(Revisionist::new(dim, loss, rate, 0.0)),
            ],
            Theorem::Cor3 | Theorem::Thm2 | Theorem::Thm3 => {
                let origin = theorem == Theorem::Thm3;
                let setup = OracleSetup {
                    dim,
                    loss,
                    implicit,
                    rate,
                    floor: 0.0,
                    centering: if origin { Centering::Origin } else { Centering::Iterate },
                    penalty: penalty_for(params),
                    unit_weight: origin,
                };
                let family = if origin { Family::Aogd } else { Family::Fobos };
                vec![
                    Box::new(MirrorDescent::new(setup.clone())),
                    Box::new(OracleFtrlPhi::new(setup)),
                    Box::new(library(family, penalty_for(params))?),
                ]
            }
        })
    };
    // Each pair needs players that start from scratch.
    let n = fresh(theorem)?.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let mut players = fresh(theorem)?;
            let b = players.swap_remove(j);
            let a = players.swap_remove(i);
            worst = worst.max(pairwise(&mut [a, b])?);
        }
    }
    Ok(worst)
}

/// Runs a theorem's suite over `params.seeds` seeds in parallel.
pub fn run_suite(theorem: Theorem, params: &SuiteParams) -> Result<EquivalenceReport> {
    if params.dim == 0 || params.rounds == 0 || params.seeds == 0 {
        return Err(Error::Config("suite needs positive rounds, dim and seeds".into()));
    }
    let gaps: Vec<f64> = (0..params.seeds)
        .into_par_iter()
        .map(|seed| run_seed(theorem, params, seed))
        .collect::<Result<_>>()?;
    let max_discrepancy = gaps.into_iter().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        theorem,
        rounds: params.rounds,
        dim: params.dim,
        max_discrepancy,
        tol: params.tol,
        pass: max_discrepancy <= params.tol,
    })
}
