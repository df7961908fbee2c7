//! Monte Carlo studies comparing PGD against JADE, the Fourier basis and the
//! generating eigenbasis, written as CSV.
//!
//! Every trial derives its own seed from the master seed, so rows do not
//! depend on how trials are spread over worker threads.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::covariance::{
    gen_independent_ensemble, gen_joint_ensemble, gen_ula_ensemble, sample_covariance, sample_realizations, Ensemble,
    EnsembleKind, HermitianCovariance, UlaParams,
};
use crate::error::{Error, Result};
use crate::jade::{jade_diagonalize, JacobiConfig};
use crate::metrics::{eta, fourier_basis};
use crate::objective::ObjectiveContext;
use crate::pgd::{pgd_solve, Init, PgdConfig};
use crate::rng::derive_seed;
use crate::unitary::UnitaryMatrix;

pub const CSV_HEADER: &str = "study,trial,grid,method,cost,eta,iters,wall_ms,seed,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Study {
    Fig1,
    Fig2,
    Fig3,
    Custom,
}

impl Study {
    fn code(self) -> u64 {
        match self {
            Self::Fig1 => 1,
            Self::Fig2 => 2,
            Self::Fig3 => 3,
            Self::Custom => 4,
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Custom => "custom",
        })
    }
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Self::Fig1),
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidArgument(format!("unknown study `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Pgd,
    Jade,
    Fourier,
    OracleCes,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pgd => "pgd",
            Self::Jade => "jade",
            Self::Fourier => "fourier",
            Self::OracleCes => "oracle_ces",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub study: Study,
    /// Array size; ignored by `fig3`, whose grid runs over `M`.
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    /// Sample counts `N` (fig1, fig2, custom) or array sizes `M` (fig3).
    pub grid: Vec<usize>,
    pub seed: u64,
    /// Solver settings; a `Random` init is re-seeded per trial and grid point.
    pub solver: PgdConfig,
    pub jade: JacobiConfig,
    /// Ensemble family for `custom`.
    pub kind: EnsembleKind,
}

impl ExperimentConfig {
    pub fn for_study(study: Study) -> Self {
        let (m, k, grid) = match study {
            Study::Fig1 => (16, 8, vec![16, 32, 64, 128, 256, 512, 1024, 4096]),
            Study::Fig2 => (16, 8, vec![16, 32, 64, 128]),
            Study::Fig3 => (0, 5, vec![8, 16, 32]),
            Study::Custom => (16, 8, vec![16, 32, 64, 128]),
        };
        Self {
            study,
            m,
            k,
            trials: 1000,
            grid,
            seed: 0,
            solver: PgdConfig::default(),
            jade: JacobiConfig::default(),
            kind: EnsembleKind::Independent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.grid.is_empty() {
            return bad("grid must not be empty".into());
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid must be strictly increasing".into());
        }
        if self.grid[0] < 1 {
            return bad("grid values must be positive".into());
        }
        if self.k < 1 {
            return bad("K must be at least 1".into());
        }
        if self.study == Study::Fig3 && self.grid[0] < 2 {
            return bad("fig3 array sizes must be at least 2".into());
        }
        if self.study != Study::Fig3 && self.m < 1 {
            return bad("M must be at least 1".into());
        }
        self.solver.validate()
    }

    /// Per-trial seed recorded in the CSV.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, &[self.study.code(), trial as u64])
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub study: Study,
    pub trial: usize,
    pub grid: usize,
    pub method: Method,
    /// ML cost on the covariances the solvers saw (sample covariances when
    /// sampling, exact ones otherwise).
    pub cost: f64,
    /// Diagonalization metric on the true covariances.
    pub eta: f64,
    pub iters: usize,
    pub wall_ms: f64,
    pub seed: u64,
    pub status: String,
    /// ML cost on the exact covariances; fig1 only, not part of the CSV.
    pub cost_exact: Option<f64>,
}

/// Runs every trial of `config` on a pool of `threads` workers.
pub fn run_study(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let per_trial: Vec<Vec<ResultRecord>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, trial))
            .collect::<Result<_>>()
    })?;
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn run_fig1(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    expect_study(config, Study::Fig1)?;
    run_study(config, threads)
}

pub fn run_fig2(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    expect_study(config, Study::Fig2)?;
    run_study(config, threads)
}

pub fn run_fig3(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    expect_study(config, Study::Fig3)?;
    run_study(config, threads)
}

fn expect_study(config: &ExperimentConfig, study: Study) -> Result<()> {
    if config.study != study {
        return Err(Error::InvalidArgument(format!(
            "config is for study {}, expected {study}",
            config.study
        )));
    }
    Ok(())
}

struct TrialCtx<'a> {
    config: &'a ExperimentConfig,
    trial: usize,
    seed: u64,
}

impl TrialCtx<'_> {
    fn record(&self, grid: usize, method: Method) -> ResultRecord {
        ResultRecord {
            study: self.config.study,
            trial: self.trial,
            grid,
            method,
            cost: f64::NAN,
            eta: f64::NAN,
            iters: 0,
            wall_ms: 0.0,
            seed: self.seed,
            status: "ok".into(),
            cost_exact: None,
        }
    }

    fn solver_config(&self, grid: usize) -> PgdConfig {
        let mut solver = self.config.solver.clone();
        if let Init::Random(base) = solver.init {
            solver.init = Init::Random(derive_seed(self.seed, &[grid as u64, 7, base]));
        }
        solver
    }

    /// Sample covariances of `n` fresh draws per process.
    fn sampled(&self, ensemble: &Ensemble, n: usize) -> Result<Vec<HermitianCovariance>> {
        ensemble
            .covariances
            .iter()
            .enumerate()
            .map(|(k, sigma)| {
                let seed = derive_seed(self.seed, &[n as u64, 1, k as u64]);
                sample_covariance(&sample_realizations(sigma, n, seed)?)
            })
            .collect()
    }

    /// PGD row, with eta measured against `truth`.
    fn pgd_row(
        &self,
        grid: usize,
        ctx: &ObjectiveContext,
        truth: &[HermitianCovariance],
    ) -> (ResultRecord, Option<UnitaryMatrix>) {
        let mut row = self.record(grid, Method::Pgd);
        let started = Instant::now();
        let solved = pgd_solve(ctx, &self.solver_config(grid));
        row.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        match solved {
            Ok(res) => {
                row.cost = res.final_cost;
                row.iters = res.trace.iterations();
                row.status = res.trace.status.to_string();
                match eta(&res.basis, truth) {
                    Ok(e) => row.eta = e,
                    Err(e) => row.status = error_status(&e),
                }
                (row, Some(res.basis))
            }
            Err(e) => {
                row.status = error_status(&e);
                (row, None)
            }
        }
    }

    fn fixed_basis_row(
        &self,
        grid: usize,
        method: Method,
        basis: &UnitaryMatrix,
        ctx: &ObjectiveContext,
        truth: &[HermitianCovariance],
    ) -> ResultRecord {
        let mut row = self.record(grid, method);
        let started = Instant::now();
        let evaluated = ctx.cost(basis.matrix()).and_then(|c| Ok((c, eta(basis, truth)?)));
        row.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        match evaluated {
            Ok((c, e)) => {
                row.cost = c;
                row.eta = e;
            }
            Err(e) => row.status = error_status(&e),
        }
        row
    }

    fn jade_row(
        &self,
        grid: usize,
        observed: &[HermitianCovariance],
        ctx: &ObjectiveContext,
        truth: &[HermitianCovariance],
    ) -> ResultRecord {
        let started = Instant::now();
        let solved = jade_diagonalize(observed, &self.config.jade);
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        let mut row = match solved {
            Ok(basis) => self.fixed_basis_row(grid, Method::Jade, &basis, ctx, truth),
            Err(e) => {
                let mut row = self.record(grid, Method::Jade);
                row.status = error_status(&e);
                row
            }
        };
        row.wall_ms += elapsed;
        row
    }
}

fn error_status(e: &Error) -> String {
    let msg: String = e
        .to_string()
        .chars()
        .map(|c| if c == ',' || c == '\n' || c == '"' { ';' } else { c })
        .collect();
    format!("error: {msg}")
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<ResultRecord>> {
    let t = TrialCtx {
        config,
        trial,
        seed: config.trial_seed(trial),
    };
    let mut rows = Vec::new();
    match config.study {
        Study::Fig1 => {
            let ensemble = gen_joint_ensemble(config.m, config.k, t.seed)?;
            let ces = ensemble
                .common_basis
                .clone()
                .expect("joint ensembles carry their basis");
            let exact = ObjectiveContext::new(&ensemble.covariances)?;
            for &n in &config.grid {
                let sampled = t.sampled(&ensemble, n)?;
                let ctx = ObjectiveContext::new(&sampled)?;
                let (mut pgd, basis) = t.pgd_row(n, &ctx, &ensemble.covariances);
                pgd.cost_exact = basis.and_then(|b| exact.cost(b.matrix()).ok());
                let mut oracle = t.fixed_basis_row(n, Method::OracleCes, &ces, &ctx, &ensemble.covariances);
                oracle.cost_exact = exact.cost(ces.matrix()).ok();
                rows.push(pgd);
                rows.push(oracle);
            }
        }
        Study::Fig2 => {
            let ensemble = gen_independent_ensemble(config.m, config.k, t.seed)?;
            for &n in &config.grid {
                let sampled = t.sampled(&ensemble, n)?;
                let ctx = ObjectiveContext::new(&sampled)?;
                rows.push(t.pgd_row(n, &ctx, &ensemble.covariances).0);
                rows.push(t.jade_row(n, &sampled, &ctx, &ensemble.covariances));
            }
        }
        Study::Fig3 => {
            for &m in &config.grid {
                let params = UlaParams::with_rank(m.div_ceil(2));
                let ensemble = gen_ula_ensemble(m, config.k, &params, derive_seed(t.seed, &[m as u64]))?;
                let ctx = ObjectiveContext::new(&ensemble.covariances)?;
                rows.push(t.pgd_row(m, &ctx, &ensemble.covariances).0);
                rows.push(t.fixed_basis_row(m, Method::Fourier, &fourier_basis(m), &ctx, &ensemble.covariances));
            }
        }
        Study::Custom => {
            let ensemble = match config.kind {
                EnsembleKind::Joint => gen_joint_ensemble(config.m, config.k, t.seed)?,
                EnsembleKind::Independent => gen_independent_ensemble(config.m, config.k, t.seed)?,
                EnsembleKind::Ula => {
                    gen_ula_ensemble(config.m, config.k, &UlaParams::with_rank(config.m.div_ceil(2)), t.seed)?
                }
            };
            for &n in &config.grid {
                let sampled = t.sampled(&ensemble, n)?;
                let ctx = ObjectiveContext::new(&sampled)?;
                let truth = &ensemble.covariances;
                rows.push(t.pgd_row(n, &ctx, truth).0);
                rows.push(t.jade_row(n, &sampled, &ctx, truth));
                rows.push(t.fixed_basis_row(n, Method::Fourier, &fourier_basis(config.m), &ctx, truth));
                if let Some(ces) = &ensemble.common_basis {
                    rows.push(t.fixed_basis_row(n, Method::OracleCes, ces, &ctx, truth));
                }
            }
        }
    }
    Ok(rows)
}

/// `%.12e` formatting: mantissa with 12 decimals and a signed exponent of at
/// least two digits.
pub fn fmt_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Writes the CSV. Wall times are machine-dependent, so they are written as
/// zero unless `timing` is set.
pub fn write_csv<W: Write>(records: &[ResultRecord], mut out: W, timing: bool) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.study,
            r.trial,
            r.grid,
            r.method,
            fmt_sci(r.cost),
            fmt_sci(r.eta),
            r.iters,
            fmt_sci(if timing { r.wall_ms } else { 0.0 }),
            r.seed,
            r.status
        )?;
    }
    Ok(())
}

pub fn to_csv_string(records: &[ResultRecord], timing: bool) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf, timing).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Mean and standard error of one quantity over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanStderr {
    pub fn of(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                count: 0,
            };
        }
        let mean = finite.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            count: n,
        }
    }
}

/// Aggregates for one `(grid, method)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub grid: usize,
    pub method: Method,
    pub cost: MeanStderr,
    pub eta: MeanStderr,
    pub cost_exact: Option<MeanStderr>,
    pub failures: usize,
    pub wall_ms_total: f64,
}

pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, Method)> = records.iter().map(|r| (r.grid, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(grid, method)| {
            let cell: Vec<&ResultRecord> = records
                .iter()
                .filter(|r| r.grid == grid && r.method == method)
                .collect();
            let costs: Vec<f64> = cell.iter().map(|r| r.cost).collect();
            let etas: Vec<f64> = cell.iter().map(|r| r.eta).collect();
            let exact: Vec<f64> = cell.iter().filter_map(|r| r.cost_exact).collect();
            SummaryRow {
                grid,
                method,
                cost: MeanStderr::of(&costs),
                eta: MeanStderr::of(&etas),
                cost_exact: (!exact.is_empty()).then(|| MeanStderr::of(&exact)),
                failures: cell.iter().filter(|r| r.status.starts_with("error")).count(),
                wall_ms_total: cell.iter().map(|r| r.wall_ms).sum(),
            }
        })
        .collect()
}

/// Per-trial paired difference `a - b` of a quantity, aggregated per grid
/// value.
pub fn paired_difference(
    records: &[ResultRecord],
    a: Method,
    b: Method,
    quantity: fn(&ResultRecord) -> f64,
) -> Vec<(usize, MeanStderr)> {
    let mut grids: Vec<usize> = records.iter().map(|r| r.grid).collect();
    grids.sort_unstable();
    grids.dedup();
    grids
        .into_iter()
        .map(|g| {
            let diffs: Vec<f64> = records
                .iter()
                .filter(|r| r.grid == g && r.method == a)
                .filter_map(|ra| {
                    records
                        .iter()
                        .find(|rb| rb.grid == g && rb.method == b && rb.trial == ra.trial)
                        .map(|rb| quantity(ra) - quantity(rb))
                })
                .collect();
            (g, MeanStderr::of(&diffs))
        })
        .collect()
}

/// Gnuplot script plotting per-grid means straight from the CSV.
pub fn plot_script(study: Study, csv_path: &str) -> String {
    let (column, ylabel, xlabel, methods): (usize, &str, &str, &[&str]) = match study {
        Study::Fig1 => (5, "mean cost f(U)", "N", &["pgd", "oracle_ces"]),
        Study::Fig2 => (6, "mean eta", "N", &["pgd", "jade"]),
        Study::Fig3 => (6, "mean eta", "M", &["pgd", "fourier"]),
        Study::Custom => (6, "mean eta", "N", &["pgd", "jade", "fourier", "oracle_ces"]),
    };
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale x 2\n");
    s.push_str(&format!(
        "set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset key top right\n"
    ));
    s.push_str("set table $means\n");
    let mut plots = Vec::new();
    for (i, m) in methods.iter().enumerate() {
        s.push_str(&format!(
            "plot '{csv_path}' every ::1 using 3:(strcol(4) eq '{m}' ? ${column} : 1/0) smooth unique\n"
        ));
        plots.push(format!("$means index {i} using 1:2 with linespoints title '{m}'"));
    }
    s.push_str("unset table\n");
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}
