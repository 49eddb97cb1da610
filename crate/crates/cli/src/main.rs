//! `uftrl`: train, sweep and check the unified FTRL learners from the shell.

mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use uftrl::data::{read_libsvm_file, shuffle, synth_linear, unit_scale, Dataset};
use uftrl::eval::{
    auc, default_gamma_grid, density, regret_check, sweep, write_csv, write_json, RegretCheckParams, SweepSpec,
};
use uftrl::oracle::{run_suite, PsiChoice, SuiteParams, Theorem};
use uftrl::{AlgorithmConfig, AlphaMode, Family, LearnerState, LearningRateSchedule, LossKind, PenaltySchedule};

use crate::manifest::{DatasetDescriptor, RunManifest};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Lib(#[from] uftrl::Error),
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use uftrl::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::CheckFailed(_) => 5,
            CliError::Write { .. } => 3,
            CliError::Lib(e) => match e {
                E::Config(_) | E::Domain(_) | E::Input(_) => 2,
                E::Parse { .. } | E::Data(_) | E::Io(_) => 3,
                E::Numeric { .. } | E::Convergence { .. } | E::Metric(_) | E::Internal(_) => 4,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "uftrl", version, about = "Online learning with the unified FTRL update")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One progressive-validation pass; writes metrics, checkpoint and weights.
    Train(TrainArgs),
    /// Sparsity/AUC sweep over families and λ with γ tuned per cell.
    Sweep(SweepArgs),
    /// Iterate-equivalence suites (cor2, cor3, cor4, thm2, thm3 or all).
    EquivCheck(EquivArgs),
    /// Realized regret against the closed-form and ledger bounds.
    RegretCheck(RegretArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Logistic,
    Squared,
    Linear,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RateArg {
    Global,
    Adaptive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PenaltyModeArg {
    Constant,
    PriorOnce,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct LearnerArgs {
    /// Solve each round with the exact loss instead of its linearization.
    #[arg(long)]
    implicit: bool,
    #[arg(long, value_enum, default_value = "logistic")]
    loss: LossArg,
    /// Minimizer `c` of the squared loss ½(m − c)².
    #[arg(long, default_value_t = 0.0)]
    target: f64,
    #[arg(long, value_enum, default_value = "adaptive")]
    rate: RateArg,
    #[arg(long, default_value_t = 0.0)]
    sigma_floor: f64,
    #[arg(long, value_enum, default_value = "constant")]
    penalty_mode: PenaltyModeArg,
}

impl LearnerArgs {
    fn template(&self, family: Family, gamma: f64, penalty: PenaltySchedule) -> AlgorithmConfig {
        let rate = match self.rate {
            RateArg::Global => LearningRateSchedule::global(gamma),
            RateArg::Adaptive => LearningRateSchedule::adaptive(gamma),
        };
        let loss = match self.loss {
            LossArg::Logistic => LossKind::Logistic,
            LossArg::Squared => LossKind::Squared { target: self.target },
            LossArg::Linear => LossKind::Linear,
        };
        let mode = match self.penalty_mode {
            PenaltyModeArg::Constant => AlphaMode::Constant,
            PenaltyModeArg::PriorOnce => AlphaMode::PriorOnce,
        };
        let config = AlgorithmConfig::new(family, rate)
            .with_loss(loss)
            .with_penalty(penalty.with_mode(mode))
            .with_sigma_floor(self.sigma_floor);
        if self.implicit {
            config.implicit()
        } else {
            config
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// LibSVM file (gzip if it ends in `.gz`). Without it the synthetic suite is used.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Scale every example of `--data` to unit L2 norm.
    #[arg(long)]
    unit_scale: bool,
    #[arg(long, default_value_t = 10_000)]
    synth_n: usize,
    #[arg(long, default_value_t = 10_000)]
    synth_d: usize,
    #[arg(long, default_value_t = 10)]
    synth_informative: usize,
    #[arg(long, default_value_t = 0.0)]
    synth_noise: f64,
    #[arg(long, default_value_t = 0)]
    synth_seed: u64,
}

impl DataArgs {
    fn load(&self) -> CliResult<(Dataset, DatasetDescriptor)> {
        match &self.data {
            Some(path) => {
                let mut ds = read_libsvm_file(path)?;
                if self.unit_scale {
                    ds = unit_scale(&ds)?;
                }
                let descriptor = DatasetDescriptor::File {
                    path: path.clone(),
                    examples: ds.len(),
                    features: ds.feature_universe(),
                    unit_scaled: self.unit_scale,
                };
                Ok((ds, descriptor))
            }
            None => {
                let ds = synth_linear(
                    self.synth_n,
                    self.synth_d,
                    self.synth_informative,
                    self.synth_noise,
                    self.synth_seed,
                )?;
                let descriptor = DatasetDescriptor::Synthetic {
                    n: self.synth_n,
                    d: self.synth_d,
                    informative: self.synth_informative,
                    noise: self.synth_noise,
                    seed: self.synth_seed,
                };
                Ok((ds, descriptor))
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "ftprl")]
    family: Family,
    /// L1 strength λ.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Constrain to the L2 ball of this radius instead of the L1 penalty.
    #[arg(long, conflicts_with = "lambda")]
    ball: Option<f64>,
    /// Shuffle the examples with this seed before the pass.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for metrics.json, checkpoint.txt, weights.tsv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "ftprl,rda,fobos")]
    family: Vec<Family>,
    /// λ grid. Defaults to {0.2, 1, 5, 25} × 0.05/T.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    lambda: Option<Vec<f64>>,
    /// γ grid. Defaults to 12 points over [0.3, 1.9].
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    gamma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    shuffles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Directory for the sweep table and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct EquivArgs {
    theorem: String,
    #[arg(long = "T")]
    rounds: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, default_value = "l1")]
    psi: PsiChoice,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegretArgs {
    #[arg(long, default_value = "ftprl")]
    family: Family,
    #[arg(long)]
    implicit: bool,
    /// Diameter of the feasible ball.
    #[arg(long = "D", default_value_t = 2.0)]
    diameter: f64,
    /// Bound on the gradient norm.
    #[arg(long = "G", default_value_t = 1.0)]
    grad_bound: f64,
    #[arg(long = "T", default_value_t = 10_000)]
    rounds: u64,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainMetrics {
    /// Absent when the stream has a single class.
    auc: Option<f64>,
    density: f64,
    online_loss: f64,
    #[serde(rename = "T")]
    rounds: usize,
    nnz: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("UFTRL_THREADS") else {
        return Ok(());
    };
    let threads = usize::from_str(value.trim())
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("UFTRL_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train(args) => train(args),
        Command::Sweep(args) => run_sweep(args),
        Command::EquivCheck(args) => equiv_check(args),
        Command::RegretCheck(args) => run_regret_check(args),
    }
}

fn train(args: TrainArgs) -> CliResult<()> {
    let start = Instant::now();
    let penalty = match args.ball {
        Some(radius) => PenaltySchedule::ball(radius),
        None => PenaltySchedule::l1(args.lambda),
    };
    let config = args.learner.template(args.family, args.gamma, penalty);
    let (mut ds, descriptor) = args.data.load()?;
    if let Some(seed) = args.seed {
        ds = shuffle(&ds, seed);
    }

    let mut state = LearnerState::new(config.clone())?;
    let mut scores = Vec::with_capacity(ds.len());
    let mut loss = 0.0;
    for ex in ds.examples() {
        let p = state.train_step(ex)?;
        scores.push((p.margin, ex.label()));
        loss += p.loss;
    }
    let weights = state.weights();
    let auc = match auc(&scores) {
        Ok(v) => Some(v),
        Err(uftrl::Error::Metric(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let metrics = TrainMetrics {
        auc,
        density: density(&weights, ds.feature_universe())?,
        online_loss: if ds.is_empty() { 0.0 } else { loss / ds.len() as f64 },
        rounds: ds.len(),
        nnz: weights.nnz(),
    };
    let text = to_json(&metrics);
    println!("{text}");

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("metrics.json"), text.as_bytes())?;
        let mut checkpoint = Vec::new();
        state.write_checkpoint(&mut checkpoint)?;
        write_file(&dir.join("checkpoint.txt"), &checkpoint)?;
        let table: String = weights.iter().map(|(c, v)| format!("{c}\t{v}\n")).collect();
        write_file(&dir.join("weights.tsv"), table.as_bytes())?;

        let mut manifest = RunManifest::new("train");
        manifest.config = Some(config);
        manifest.dataset = Some(descriptor);
        manifest.params = json!({ "shuffle_seed": args.seed });
        manifest.seeds = args.seed.into_iter().collect();
        manifest.wall_time_secs = start.elapsed().as_secs_f64();
        write_file(&dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> CliResult<()> {
    let start = Instant::now();
    let (ds, descriptor) = args.data.load()?;
    let lambdas = match args.lambda {
        Some(grid) if grid.is_empty() => return Err(CliError::Usage("--lambda grid is empty".into())),
        Some(grid) => grid,
        None => {
            let base = 0.05 / ds.len().max(1) as f64;
            [0.2, 1.0, 5.0, 25.0].iter().map(|m| m * base).collect()
        }
    };
    let gammas = match args.gamma {
        Some(grid) if grid.is_empty() => return Err(CliError::Usage("--gamma grid is empty".into())),
        Some(grid) => grid,
        None => default_gamma_grid(),
    };
    let template = args.learner.template(Family::Ftprl, 1.0, PenaltySchedule::l1(0.0));
    let spec = SweepSpec {
        template: template.clone(),
        families: args.family.clone(),
        lambdas: lambdas.clone(),
        gammas: gammas.clone(),
        shuffles: args.shuffles,
        seed: args.seed,
    };
    let rows = sweep(&ds, &spec)?;

    let mut table = Vec::new();
    match args.format {
        FormatArg::Csv => write_csv(&rows, &mut table)?,
        FormatArg::Json => write_json(&rows, &mut table)?,
    }
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let name = match args.format {
                FormatArg::Csv => "sweep.csv",
                FormatArg::Json => "sweep.json",
            };
            write_file(&dir.join(name), &table)?;
            let mut manifest = RunManifest::new("sweep");
            manifest.config = Some(template);
            manifest.dataset = Some(descriptor);
            let families: Vec<&str> = args.family.iter().map(|f| f.name()).collect();
            manifest.params = json!({
                "families": families,
                "lambdas": lambdas,
                "gammas": gammas,
                "shuffles": args.shuffles,
            });
            manifest.seeds = (args.seed..=args.seed + args.shuffles as u64).collect();
            manifest.wall_time_secs = start.elapsed().as_secs_f64();
            write_file(&dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
        }
        None => io::stdout()
            .write_all(&table)
            .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })?,
    }
    Ok(())
}

fn equiv_check(args: EquivArgs) -> CliResult<()> {
    let start = Instant::now();
    let theorems = if args.theorem.eq_ignore_ascii_case("all") {
        Theorem::ALL.to_vec()
    } else {
        vec![Theorem::from_str(&args.theorem)?]
    };
    let mut reports = Vec::new();
    let mut all_params = Vec::new();
    for &theorem in &theorems {
        let defaults = SuiteParams::for_theorem(theorem);
        let params = SuiteParams {
            rounds: args.rounds.unwrap_or(defaults.rounds),
            dim: args.dim.unwrap_or(defaults.dim),
            seeds: args.seeds.unwrap_or(defaults.seeds),
            psi: args.psi,
            gamma: args.gamma.unwrap_or(defaults.gamma),
            lambda: args.lambda.unwrap_or(defaults.lambda),
            radius: args.radius.unwrap_or(defaults.radius),
            tol: args.tol.unwrap_or(defaults.tol),
        };
        reports.push(run_suite(theorem, &params)?);
        all_params.push(params);
    }
    let text = if reports.len() == 1 { to_json(&reports[0]) } else { to_json(&reports) };
    println!("{text}");

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("report.json"), text.as_bytes())?;
        let mut manifest = RunManifest::new("equiv-check");
        manifest.params = json!(all_params);
        manifest.seeds = (0..all_params.iter().map(|p| p.seeds).max().unwrap_or(0)).collect();
        manifest.wall_time_secs = start.elapsed().as_secs_f64();
        write_file(&dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
    }

    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.theorem.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("discrepancy above tolerance for {}", failed.join(", "))))
    }
}

fn run_regret_check(args: RegretArgs) -> CliResult<()> {
    let start = Instant::now();
    let params = RegretCheckParams {
        family: args.family,
        implicit: args.implicit,
        diameter: args.diameter,
        grad_bound: args.grad_bound,
        rounds: args.rounds,
        dim: args.dim,
        seed: args.seed,
    };
    let report = regret_check(&params)?;
    let text = to_json(&report);
    println!("{text}");

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("report.json"), text.as_bytes())?;
        let mut manifest = RunManifest::new("regret-check");
        manifest.params = json!(params);
        manifest.seeds = vec![args.seed];
        manifest.wall_time_secs = start.elapsed().as_secs_f64();
        write_file(&dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "realized regret {} exceeds a bound ({} closed form, {} ledger)",
            report.realized, report.bound.total, report.ledger_bound
        )))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}
