//! Projected gradient descent on the unitary group:
//! `U_{t+1} = P(U_t - alpha_t grad f(U_t))`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::covariance::EigenvalueVector;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, is_finite, real_inner, CMatrix};
use crate::metrics::fourier_basis;
use crate::objective::{Evaluation, ObjectiveContext};
use crate::unitary::{project, random_unitary, unitarity_defect, UnitaryMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// Start every iteration at `1 / lipschitz_estimate(U_t)` and shrink until
    /// the quadratic upper model accepts the step.
    LipschitzBacktracking,
    /// `alpha_t = alpha0 / t`, `t = 1, 2, ...`; no acceptance test.
    Diminishing { alpha0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Random(u64),
    Given(UnitaryMatrix),
    Fourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    pub max_iters: usize,
    /// Stop once `||U_{t+1} - U_t||_F < tol_move`.
    pub tol_move: f64,
    pub step_rule: StepRule,
    pub init: Init,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Halvings tried before declaring the iterate numerically stationary.
    pub max_backtracks: usize,
    /// First step size tried by backtracking.
    pub trial_step: TrialStep,
}

/// Where backtracking starts: always at `1 / lipschitz_estimate(U_t)`, or at
/// the larger of that and the Barzilai-Borwein step from the previous
/// iteration. Both use the same acceptance test, so descent stays monotone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStep {
    Lipschitz,
    BarzilaiBorwein,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_move: 1e-9,
            step_rule: StepRule::LipschitzBacktracking,
            init: Init::Random(0),
            shrink: 0.5,
            max_backtracks: 60,
            trial_step: TrialStep::BarzilaiBorwein,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.tol_move > 0.0) {
            return bad("tol_move must be positive");
        }
        if let StepRule::Diminishing { alpha0 } = self.step_rule {
            if !(alpha0 > 0.0) {
                return bad("alpha0 must be positive");
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink factor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub step: f64,
    #[serde(rename = "move")]
    pub move_norm: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    ConvergedByMove,
    MaxIters,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ConvergedByMove => "converged_by_move",
            Self::MaxIters => "max_iters",
        })
    }
}

/// Iteration history. Record 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    pub status: SolveStatus,
}

impl SolveTrace {
    /// Number of gradient steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,cost,step,move,defect\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iter,
                crate::experiment::fmt_sci(r.cost),
                crate::experiment::fmt_sci(r.step),
                crate::experiment::fmt_sci(r.move_norm),
                crate::experiment::fmt_sci(r.defect)
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub basis: UnitaryMatrix,
    pub lambdas: Vec<EigenvalueVector>,
    pub trace: SolveTrace,
    pub final_cost: f64,
    /// Step size of the last accepted iteration.
    pub final_step: f64,
}

/// `f(at) + Re<grad f(at), U - at> + (L/2) ||U - at||_F^2`.
///
/// With the conjugate gradient convention this model is minimized over the
/// unitary group exactly by `P(at - grad f(at) / L)`.
pub fn proxy_value(u: &CMatrix, at: &CMatrix, ctx: &ObjectiveContext, lipschitz: f64) -> Result<f64> {
    let (f_at, g_at) = ctx.cost_and_gradient(at)?;
    Ok(proxy_from_parts(u, at, f_at, &g_at, lipschitz))
}

fn proxy_from_parts(u: &CMatrix, at: &CMatrix, f_at: f64, g_at: &CMatrix, lipschitz: f64) -> f64 {
    let delta = u - at;
    f_at + real_inner(g_at, &delta) + 0.5 * lipschitz * delta.norm_squared()
}

/// `||U - P(U - alpha grad f(U))||_F`, zero exactly at fixed points of the
/// iteration.
pub fn stationarity_residual(u: &CMatrix, ctx: &ObjectiveContext, alpha: f64) -> Result<f64> {
    let g = ctx.gradient(u)?;
    let next = project(&(u - g.scale(alpha)))?;
    Ok(frobenius(&(next.matrix() - u)))
}

fn initial_point(init: &Init, dim: usize) -> Result<UnitaryMatrix> {
    match init {
        Init::Random(seed) => Ok(random_unitary(dim, *seed)),
        Init::Fourier => Ok(fourier_basis(dim)),
        Init::Given(u) => {
            if u.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: u.dim(),
                });
            }
            Ok(u.clone())
        }
    }
}

struct Step {
    next: UnitaryMatrix,
    eval: Evaluation,
    alpha: f64,
}

/// `||S||^2 / |Re<S, Y>|` from the last displacement `S` and gradient change
/// `Y`.
fn barzilai_borwein(u: &CMatrix, grad: &CMatrix, previous: Option<&(CMatrix, CMatrix)>) -> Option<f64> {
    let (prev_u, prev_g) = previous?;
    let s = u - prev_u;
    let y = grad - prev_g;
    let sy = real_inner(&s, &y).abs();
    let alpha = s.norm_squared() / sy;
    (sy > 0.0 && alpha.is_finite()).then_some(alpha)
}

fn backtracking_step(
    ctx: &ObjectiveContext,
    u: &CMatrix,
    current: &Evaluation,
    grad: &CMatrix,
    config: &PgdConfig,
    trial: Option<f64>,
) -> Result<Option<Step>> {
    let mut alpha = 1.0 / ctx.lipschitz_at(current);
    if let Some(t) = trial {
        alpha = alpha.max(t);
    }
    for _ in 0..=config.max_backtracks {
        let next = project(&(u - grad.scale(alpha)))?;
        // Candidates that leave the domain of the logarithm are rejected like
        // any other failed acceptance test.
        if let Ok(eval) = ctx.evaluate(next.matrix()) {
            let model = proxy_from_parts(next.matrix(), u, current.cost, grad, 1.0 / alpha);
            if eval.cost <= model && eval.cost <= current.cost {
                return Ok(Some(Step { next, eval, alpha }));
            }
        }
        alpha *= config.shrink;
    }
    Ok(None)
}

/// Runs projected gradient descent from `config.init`.
pub fn pgd_solve(ctx: &ObjectiveContext, config: &PgdConfig) -> Result<SolveResult> {
    config.validate()?;
    let mut u = initial_point(&config.init, ctx.dim())?;
    let mut current = ctx.evaluate(u.matrix())?;
    let mut grad = ctx.gradient_at(&current);
    let mut records = vec![IterRecord {
        iter: 0,
        cost: current.cost,
        step: 0.0,
        move_norm: 0.0,
        defect: u.defect(),
    }];
    let mut status = SolveStatus::MaxIters;
    let mut last_alpha = match config.step_rule {
        StepRule::Diminishing { alpha0 } => alpha0,
        StepRule::LipschitzBacktracking => 1.0 / ctx.lipschitz_at(&current),
    };
    let mut previous: Option<(CMatrix, CMatrix)> = None;

    for t in 1..=config.max_iters {
        if !is_finite(&grad) {
            return Err(Error::NonFinite);
        }
        let step = match config.step_rule {
            StepRule::LipschitzBacktracking => {
                let trial = match config.trial_step {
                    TrialStep::Lipschitz => None,
                    TrialStep::BarzilaiBorwein => barzilai_borwein(u.matrix(), &grad, previous.as_ref()),
                };
                backtracking_step(ctx, u.matrix(), &current, &grad, config, trial)?
            }
            StepRule::Diminishing { alpha0 } => {
                let alpha = alpha0 / t as f64;
                let next = project(&(u.matrix() - grad.scale(alpha)))?;
                let eval = ctx.evaluate(next.matrix())?;
                Some(Step { next, eval, alpha })
            }
        };
        let Some(step) = step else {
            // No step decreases the cost at working precision.
            records.push(IterRecord {
                iter: t,
                cost: current.cost,
                step: 0.0,
                move_norm: 0.0,
                defect: u.defect(),
            });
            status = SolveStatus::ConvergedByMove;
            break;
        };
        let move_norm = frobenius(&(step.next.matrix() - u.matrix()));
        let next_grad = ctx.gradient_at(&step.eval);
        previous = Some((u.into_matrix(), std::mem::replace(&mut grad, next_grad)));
        u = step.next;
        current = step.eval;
        last_alpha = step.alpha;
        records.push(IterRecord {
            iter: t,
            cost: current.cost,
            step: step.alpha,
            move_norm,
            defect: unitarity_defect(u.matrix()),
        });
        if move_norm < config.tol_move {
            status = SolveStatus::ConvergedByMove;
            break;
        }
    }

    let lambdas = ctx.optimal_lambdas(u.matrix())?;
    Ok(SolveResult {
        basis: u,
        lambdas,
        trace: SolveTrace { records, status },
        final_cost: current.cost,
        final_step: last_alpha,
    })
}
