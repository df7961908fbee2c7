//! `cesolve`: generate covariance ensembles, fit a common eigenvector set and
//! run the Monte Carlo studies.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cesolve_core::experiment::{fmt_sci, paired_difference, plot_script, summarize, write_csv};
use cesolve_core::io::{ensemble_from_json, ensemble_to_json, RealizationsFile, SolveResultFile};
use cesolve_core::rng::derive_seed;
use cesolve_core::{
    diag_metric, fourier_basis, gen_independent_ensemble, gen_joint_ensemble, gen_ula_ensemble, jade_diagonalize,
    pgd_solve, run_study, sample_covariance, sample_realizations, Ensemble, EnsembleKind, ExperimentConfig,
    HermitianCovariance, Init, JacobiConfig, Method, ObjectiveContext, PgdConfig, StepRule, Study, TrialStep,
    UlaParams, UnitaryMatrix,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cesolve",
    version,
    about = "Maximum-likelihood common eigenvector sets for covariance ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a covariance ensemble as JSON.
    Gen(GenArgs),
    /// Fit a common basis by projected gradient descent.
    Solve(SolveArgs),
    /// Fit a common basis by Jacobi joint diagonalization.
    Jade(JadeArgs),
    /// Evaluate eta and the ML cost of a basis on an ensemble.
    Eval(EvalArgs),
    /// Run a Monte Carlo study and write one CSV row per trial, grid point and
    /// method.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Joint,
    Independent,
    Ula,
}

impl From<KindArg> for EnsembleKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Joint => EnsembleKind::Joint,
            KindArg::Independent => EnsembleKind::Independent,
            KindArg::Ula => EnsembleKind::Ula,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Effective rank target for `ula` (default ceil(M/2)).
    #[arg(long)]
    rank: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

/// Which covariances the solvers see.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct DataArgs {
    /// Use the ensemble's covariances directly.
    #[arg(long)]
    exact: bool,
    /// Draw this many realizations per process and use sample covariances.
    #[arg(long)]
    samples: Option<usize>,
    /// Read realizations from a JSON file.
    #[arg(long)]
    realizations: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepRuleArg {
    LipschitzBacktracking,
    Diminishing,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrialStepArg {
    BarzilaiBorwein,
    Lipschitz,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Fourier,
    /// The ensemble's common basis (joint ensembles only).
    Ces,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "lipschitz-backtracking")]
    step_rule: StepRuleArg,
    /// First step of the diminishing rule.
    #[arg(long, default_value_t = 2.0)]
    alpha0: f64,
    #[arg(long, value_enum, default_value = "barzilai-borwein")]
    trial_step: TrialStepArg,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Stop once an iteration moves less than this in Frobenius norm.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
}

impl SolverArgs {
    fn config(&self, seed: u64, ensemble: Option<&Ensemble>) -> Result<PgdConfig> {
        let init = match self.init {
            InitArg::Random => Init::Random(seed),
            InitArg::Fourier => Init::Fourier,
            InitArg::Ces => match ensemble.and_then(|e| e.common_basis.clone()) {
                Some(u) => Init::Given(u),
                None => bail!("--init ces needs an ensemble with a common basis"),
            },
        };
        let config = PgdConfig {
            max_iters: self.max_iters,
            tol_move: self.tol,
            step_rule: match self.step_rule {
                StepRuleArg::LipschitzBacktracking => StepRule::LipschitzBacktracking,
                StepRuleArg::Diminishing => StepRule::Diminishing { alpha0: self.alpha0 },
            },
            trial_step: match self.trial_step {
                TrialStepArg::BarzilaiBorwein => TrialStep::BarzilaiBorwein,
                TrialStepArg::Lipschitz => TrialStep::Lipschitz,
            },
            init,
            ..PgdConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Seeds sampling and the random initial point.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct JadeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// A result JSON from `solve` or `jade`, or `fourier`, or `ces`.
    #[arg(long)]
    basis: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Fig1,
    Fig2,
    Fig3,
    Custom,
}

impl From<StudyArg> for Study {
    fn from(s: StudyArg) -> Self {
        match s {
            StudyArg::Fig1 => Study::Fig1,
            StudyArg::Fig2 => Study::Fig2,
            StudyArg::Fig3 => Study::Fig3,
            StudyArg::Custom => Study::Custom,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    study: StudyArg,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Ensemble family for `custom`.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated sample counts, or array sizes for fig3.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write a gnuplot script that plots the CSV.
    #[arg(long)]
    emit_plot_script: Option<PathBuf>,
    /// Record measured wall times instead of zeros (breaks byte-for-byte
    /// reproducibility).
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Jade(a) => jade(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_ensemble(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ensemble_from_json(&text).with_context(|| format!("parsing ensemble {}", path.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    let ensemble = match a.kind {
        KindArg::Joint => gen_joint_ensemble(a.m, a.k, a.seed)?,
        KindArg::Independent => gen_independent_ensemble(a.m, a.k, a.seed)?,
        KindArg::Ula => {
            let params = UlaParams::with_rank(a.rank.unwrap_or(a.m.div_ceil(2)));
            gen_ula_ensemble(a.m, a.k, &params, a.seed)?
        }
    };
    write_file(&a.output, &ensemble_to_json(&ensemble)?)
}

/// The covariances the solvers fit.
fn observed(ensemble: &Ensemble, data: &DataArgs, seed: u64) -> Result<Vec<HermitianCovariance>> {
    if data.exact {
        return Ok(ensemble.covariances.clone());
    }
    if let Some(path) = &data.realizations {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: RealizationsFile = serde_json::from_str(&text)?;
        let batches = file.into_batches()?;
        if batches.len() != ensemble.len() {
            bail!("{} realization batches for {} processes", batches.len(), ensemble.len());
        }
        return batches.iter().map(|b| Ok(sample_covariance(b)?)).collect();
    }
    let n = data.samples.expect("clap requires one data source");
    ensemble
        .covariances
        .iter()
        .enumerate()
        .map(|(k, sigma)| {
            Ok(sample_covariance(&sample_realizations(
                sigma,
                n,
                derive_seed(seed, &[k as u64]),
            )?)?)
        })
        .collect()
}

fn solve(a: SolveArgs) -> Result<()> {
    let ensemble = read_ensemble(&a.input)?;
    let covs = observed(&ensemble, &a.data, a.seed)?;
    let ctx = ObjectiveContext::new(&covs)?;
    let config = a.solver.config(a.seed, Some(&ensemble))?;
    let started = Instant::now();
    let result = pgd_solve(&ctx, &config)?;
    let elapsed = started.elapsed();
    write_file(
        &a.output,
        &serde_json::to_string_pretty(&SolveResultFile::from(&result))?,
    )?;
    if let Some(path) = &a.trace {
        write_file(path, &result.trace.to_csv())?;
    }
    eprintln!(
        "pgd: cost {}, {} iterations, {}, {:.1} ms",
        fmt_sci(result.final_cost),
        result.trace.iterations(),
        result.trace.status,
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

fn jade(a: JadeArgs) -> Result<()> {
    let ensemble = read_ensemble(&a.input)?;
    let covs = observed(&ensemble, &a.data, a.seed)?;
    let config = JacobiConfig {
        max_sweeps: a.max_sweeps,
        ..JacobiConfig::default()
    };
    let basis = jade_diagonalize(&covs, &config)?;
    let ctx = ObjectiveContext::new(&covs)?;
    let lambdas = ctx.quadratic_forms(basis.matrix())?;
    let final_cost = ctx.cost(basis.matrix())?;
    let file = SolveResultFile {
        method: "jade".into(),
        basis,
        lambdas,
        final_cost,
        status: "ok".into(),
        iterations: 0,
        final_step: None,
    };
    write_file(&a.output, &serde_json::to_string_pretty(&file)?)?;
    eprintln!("jade: cost {}", fmt_sci(final_cost));
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ensemble = read_ensemble(&a.input)?;
    let basis: UnitaryMatrix = match a.basis.as_str() {
        "fourier" => fourier_basis(ensemble.dim()),
        "ces" => ensemble.common_basis.clone().context("ensemble has no common basis")?,
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            serde_json::from_str::<SolveResultFile>(&text)
                .with_context(|| format!("parsing result {path}"))?
                .basis
        }
    };
    let ctx = ObjectiveContext::new(&ensemble.covariances)?;
    let mut report = diag_metric(&basis, &ensemble.covariances)?;
    if let Some(ces) = &ensemble.common_basis {
        report.cost_gap = Some(ctx.cost(basis.matrix())? - ctx.cost(ces.matrix())?);
    }
    let out = serde_json::json!({
        "eta": report.eta,
        "per_k_terms": report.per_k_terms,
        "cost": ctx.cost(basis.matrix())?,
        "cost_gap": report.cost_gap,
    });
    let text = serde_json::to_string_pretty(&out)?;
    match &a.output {
        Some(path) => write_file(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn threads() -> Result<usize> {
    match std::env::var("CESOLVE_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("CESOLVE_THREADS={v:?}"))?;
            if n == 0 {
                bail!("CESOLVE_THREADS must be positive");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let study = Study::from(a.study);
    let mut config = ExperimentConfig::for_study(study);
    if let Some(m) = a.m {
        config.m = m;
    }
    if let Some(k) = a.k {
        config.k = k;
    }
    if let Some(kind) = a.kind {
        config.kind = kind.into();
    }
    if let Some(trials) = a.trials {
        config.trials = trials;
    }
    if let Some(grid) = a.grid.clone() {
        config.grid = grid;
    }
    config.seed = a.seed;
    config.solver = a.solver.config(0, None)?;
    config.jade.max_sweeps = a.max_sweeps;
    let workers = threads()?;

    let started = Instant::now();
    let rows = run_study(&config, workers)?;
    let elapsed = started.elapsed();

    let file = fs::File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let mut out = std::io::BufWriter::new(file);
    write_csv(&rows, &mut out, a.timing)?;
    out.flush()?;
    if let Some(path) = &a.emit_plot_script {
        write_file(path, &plot_script(study, &a.output.to_string_lossy()))?;
    }

    eprintln!(
        "{study}: {} trials, {} rows, {workers} workers, {:.1} s",
        config.trials,
        rows.len(),
        elapsed.as_secs_f64()
    );
    for s in summarize(&rows) {
        let exact = s
            .cost_exact
            .map_or(String::new(), |c| format!(" cost_exact {:.6}", c.mean));
        eprintln!(
            "  grid {:>5} {:<10} cost {:.6} ± {:.6}  eta {:.6} ± {:.6}{exact}  failures {}  solver {:.0} ms",
            s.grid,
            s.method.to_string(),
            s.cost.mean,
            s.cost.stderr,
            s.eta.mean,
            s.eta.stderr,
            s.failures,
            s.wall_ms_total
        );
    }
    if study == Study::Fig1 {
        for (grid, gap) in paired_difference(&rows, Method::OracleCes, Method::Pgd, |r| r.cost) {
            eprintln!(
                "  grid {grid:>5} cost(U^c) - cost(U*) {:.6} ± {:.6}",
                gap.mean, gap.stderr
            );
        }
    }
    Ok(())
}
