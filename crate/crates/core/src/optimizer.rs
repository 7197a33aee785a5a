//! Projected Quasi-Newton (PQN) iteration with BFGS inverse-Hessian updates,
//! active-set masking and projected Armijo backtracking, plus the projected
//! attenuated Landweber baseline.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adjoint::{InverseProblem, ObjectiveEval};
use crate::error::{Error, Result};

/// Smooth objective on the box `[0, β_max]^N`.
pub trait Objective {
    fn value(&self, beta: &[f64]) -> Result<f64>;
    fn value_and_gradient(&self, beta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    LineSearchFailure,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::MaxIter => "max_iter",
            StopReason::LineSearchFailure => "line_search_failure",
        })
    }
}

/// One line of the convergence log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub normalized_f: f64,
    pub lambda: f64,
    pub active_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub beta_max: f64,
    pub max_iter: usize,
    /// `f` is divided by this before comparing with the threshold; usually
    /// `‖u^δ‖²`.
    pub normalization: f64,
    /// Stop as soon as `f / normalization ≤ threshold` (`ρδ`). `None`
    /// disables the discrepancy principle.
    pub discrepancy_threshold: Option<f64>,
    pub armijo_c: f64,
    pub armijo_tau: f64,
    pub min_step: f64,
    /// Constant step of the Landweber iteration.
    pub landweber_damping: f64,
}

impl OptimizerConfig {
    pub fn new(beta_max: f64, max_iter: usize) -> Self {
        Self {
            beta_max,
            max_iter,
            normalization: 1.0,
            discrepancy_threshold: None,
            armijo_c: 0.5,
            armijo_tau: 0.5,
            min_step: 1e-12,
            landweber_damping: 1.0,
        }
    }

    /// Discrepancy principle `f/‖u^δ‖² ≤ ρδ`.
    pub fn with_discrepancy(mut self, data_norm_squared: f64, rho: f64, delta: f64) -> Self {
        self.normalization = data_norm_squared;
        self.discrepancy_threshold = Some(rho * delta);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta_max > 0.0 && self.beta_max.is_finite()) {
            return Err(Error::Invalid("beta_max must be positive".into()));
        }
        if !(self.normalization > 0.0) {
            return Err(Error::Invalid("normalization must be positive".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0)
            || !(self.armijo_tau > 0.0 && self.armijo_tau < 1.0)
        {
            return Err(Error::Invalid("Armijo constants must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn reached(&self, f: f64) -> bool {
        self.discrepancy_threshold
            .is_some_and(|t| f / self.normalization <= t)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerState {
    pub beta: Vec<f64>,
    #[serde(skip)]
    pub inv_hessian: DMatrix<f64>,
    /// Number of accepted steps.
    pub k: usize,
    /// `f(β^(0)), f(β^(1)), …`
    pub residual_history: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub active_i1: Vec<usize>,
    pub active_i2: Vec<usize>,
    pub last_step: f64,
    pub stop_reason: Option<StopReason>,
    /// Objective evaluations (forward solves) spent.
    pub evaluations: usize,
    /// BFGS updates skipped by the curvature test.
    pub skipped_updates: usize,
    /// Resets of `S` to the identity after a failed line search.
    pub restarts: usize,
}

impl OptimizerState {
    fn start(beta: Vec<f64>) -> Self {
        let dim = beta.len();
        Self {
            beta,
            inv_hessian: DMatrix::identity(dim, dim),
            k: 0,
            residual_history: Vec::new(),
            history: Vec::new(),
            active_i1: Vec::new(),
            active_i2: Vec::new(),
            last_step: 0.0,
            stop_reason: None,
            evaluations: 0,
            skipped_updates: 0,
            restarts: 0,
        }
    }

    fn record(&mut self, f: f64, cfg: &OptimizerConfig, lambda: f64, active: usize) {
        self.residual_history.push(f);
        self.history.push(IterationRecord {
            k: self.k,
            f,
            normalized_f: f / cfg.normalization,
            lambda,
            active_count: active,
        });
    }

    pub fn final_objective(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }

    /// Convergence log as CSV: `k,f,normalized_f,lambda,active_count`.
    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("k,f,normalized_f,lambda,active_count\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                r.k, r.f, r.normalized_f, r.lambda, r.active_count
            ));
        }
        out
    }
}

/// `P_B`: componentwise clamp to `[0, β_max]`.
pub fn project_box(beta: &[f64], beta_max: f64) -> Vec<f64> {
    beta.iter().map(|b| b.clamp(0.0, beta_max)).collect()
}

/// Search direction with its active sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub p: Vec<f64>,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
}

impl Direction {
    pub fn active_count(&self) -> usize {
        self.i1.len() + self.i2.len()
    }
}

fn blocked(beta: f64, beta_max: f64, v: f64) -> bool {
    (beta <= 0.0 && v > 0.0) || (beta >= beta_max && v < 0.0)
}

/// `p = −Ŝ ∇f`, where `Ŝ` is `S` with the rows and columns of `I₁ ∪ I₂`
/// zeroed. `I₁` holds bound variables whose gradient points out of the box,
/// `I₂` those whose `S̄`-scaled gradient does.
pub fn search_direction(
    beta: &[f64],
    grad: &[f64],
    inv_hessian: &DMatrix<f64>,
    beta_max: f64,
) -> Direction {
    let dim = beta.len();
    let i1: Vec<usize> = (0..dim)
        .filter(|&i| blocked(beta[i], beta_max, grad[i]))
        .collect();
    let mut fixed = vec![false; dim];
    for &i in &i1 {
        fixed[i] = true;
    }
    let scaled = masked_product(inv_hessian, grad, &fixed);
    let i2: Vec<usize> = (0..dim)
        .filter(|&i| !fixed[i] && blocked(beta[i], beta_max, scaled[i]))
        .collect();
    for &i in &i2 {
        fixed[i] = true;
    }
    let p = masked_product(inv_hessian, grad, &fixed)
        .into_iter()
        .map(|v| -v)
        .collect();
    Direction { p, i1, i2 }
}

/// `(S with fixed rows/columns zeroed) · g`.
fn masked_product(s: &DMatrix<f64>, g: &[f64], fixed: &[bool]) -> Vec<f64> {
    let dim = g.len();
    (0..dim)
        .map(|i| {
            if fixed[i] {
                return 0.0;
            }
            (0..dim)
                .filter(|&j| !fixed[j])
                .map(|j| s[(i, j)] * g[j])
                .sum()
        })
        .collect()
}

/// Sherman–Morrison form of the BFGS update of the inverse Hessian. Updates
/// with `sᵀg ≤ 1e-12‖s‖‖g‖` are skipped and `None` is returned.
pub fn bfgs_inverse_update(s: &DMatrix<f64>, sk: &[f64], gk: &[f64]) -> Option<DMatrix<f64>> {
    let sv = DVector::from_column_slice(sk);
    let gv = DVector::from_column_slice(gk);
    let sg = sv.dot(&gv);
    if !(sg > 1e-12 * sv.norm() * gv.norm()) {
        return None;
    }
    let sgv = s * &gv;
    let gsg = gv.dot(&sgv);
    let ss = &sv * sv.transpose();
    let cross = &sgv * sv.transpose() + &sv * sgv.transpose();
    let mut next = s + ss * ((sg + gsg) / (sg * sg)) - cross / sg;
    // Symmetrise away roundoff.
    let t = next.transpose();
    next = (next + t) * 0.5;
    Some(next)
}

/// Accepted step of [`armijo_projected`].
#[derive(Debug, Clone)]
pub struct LineSearch {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Backtracks `λ = 1, τ, τ², …` until
/// `f(β) − f(P_B(β + λp)) ≥ −cλ ∇f·p`. Returns `None` once `λ < min_step`.
pub fn armijo_projected<O: Objective + ?Sized>(
    objective: &O,
    beta: &[f64],
    f: f64,
    grad: &[f64],
    p: &[f64],
    cfg: &OptimizerConfig,
) -> Result<(Option<LineSearch>, usize)> {
    let slope: f64 = grad.iter().zip(p).map(|(g, p)| g * p).sum();
    let mut lambda = 1.0;
    let mut evaluations = 0;
    while lambda >= cfg.min_step {
        let trial: Vec<f64> = beta
            .iter()
            .zip(p)
            .map(|(b, p)| (b + lambda * p).clamp(0.0, cfg.beta_max))
            .collect();
        let ft = objective.value(&trial)?;
        evaluations += 1;
        if f - ft >= -cfg.armijo_c * lambda * slope {
            return Ok((
                Some(LineSearch {
                    lambda,
                    beta: trial,
                    f: ft,
                    evaluations,
                }),
                evaluations,
            ));
        }
        lambda *= cfg.armijo_tau;
    }
    Ok((None, evaluations))
}

/// Projected Quasi-Newton iteration from `beta0` (projected first), with
/// `S⁰ = I`. A failed line search resets `S` to `I` once before the run is
/// stopped with [`StopReason::LineSearchFailure`].
pub fn pqn_solve<O: Objective + ?Sized>(
    objective: &O,
    beta0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizerState> {
    cfg.validate()?;
    let mut state = OptimizerState::start(project_box(beta0, cfg.beta_max));
    let (mut f, mut grad) = objective.value_and_gradient(&state.beta)?;
    state.evaluations += 1;
    state.record(f, cfg, 0.0, 0);
    let dim = state.beta.len();
    let mut fresh = true;
    loop {
        if cfg.reached(f) {
            state.stop_reason = Some(StopReason::Discrepancy);
            break;
        }
        if state.k >= cfg.max_iter {
            state.stop_reason = Some(StopReason::MaxIter);
            break;
        }
        let dir = search_direction(&state.beta, &grad, &state.inv_hessian, cfg.beta_max);
        state.active_i1 = dir.i1.clone();
        state.active_i2 = dir.i2.clone();
        let pnorm = dir.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let accepted = if pnorm >= 1e-14 * cfg.beta_max {
            let (accepted, evals) =
                armijo_projected(objective, &state.beta, f, &grad, &dir.p, cfg)?;
            state.evaluations += evals;
            accepted
        } else {
            None
        };
        let Some(step) = accepted else {
            // A stale curvature model can produce useless directions near the
            // kinks of the PCHIP parametrisation; retry once from S = I.
            if !fresh {
                log::debug!("pqn: restarting quasi-Newton model at k = {}", state.k);
                state.inv_hessian = DMatrix::identity(dim, dim);
                state.restarts += 1;
                fresh = true;
                continue;
            }
            log::debug!("pqn: no descent from S = I at k = {}", state.k);
            state.stop_reason = Some(StopReason::LineSearchFailure);
            break;
        };
        let (f_new, grad_new) = objective.value_and_gradient(&step.beta)?;
        state.evaluations += 1;
        let sk: Vec<f64> = step
            .beta
            .iter()
            .zip(&state.beta)
            .map(|(a, b)| a - b)
            .collect();
        let gk: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        match bfgs_inverse_update(&state.inv_hessian, &sk, &gk) {
            Some(s) => {
                state.inv_hessian = s;
                fresh = false;
            }
            None => state.skipped_updates += 1,
        }
        state.beta = step.beta;
        state.last_step = step.lambda;
        state.k += 1;
        f = f_new;
        grad = grad_new;
        state.record(f, cfg, step.lambda, dir.i1.len() + dir.i2.len());
        log::debug!(
            "pqn k={} f={:e} lambda={:e} active={}",
            state.k,
            f / cfg.normalization,
            step.lambda,
            dir.i1.len() + dir.i2.len()
        );
    }
    Ok(state)
}

/// Projected attenuated Landweber iteration `β ← P_B(β − λ∇f(β))`.
///
/// Fails with [`Error::DampingTooLarge`] when `f` increases in 10
/// consecutive steps.
pub fn landweber_solve<O: Objective + ?Sized>(
    objective: &O,
    beta0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizerState> {
    cfg.validate()?;
    if !(cfg.landweber_damping > 0.0) {
        return Err(Error::Invalid("Landweber damping must be positive".into()));
    }
    let lambda = cfg.landweber_damping;
    let mut state = OptimizerState::start(project_box(beta0, cfg.beta_max));
    let (mut f, mut grad) = objective.value_and_gradient(&state.beta)?;
    state.evaluations += 1;
    state.record(f, cfg, 0.0, 0);
    let mut increases = 0;
    loop {
        if cfg.reached(f) {
            state.stop_reason = Some(StopReason::Discrepancy);
            break;
        }
        if state.k >= cfg.max_iter {
            state.stop_reason = Some(StopReason::MaxIter);
            break;
        }
        let next: Vec<f64> = state
            .beta
            .iter()
            .zip(&grad)
            .map(|(b, g)| (b - lambda * g).clamp(0.0, cfg.beta_max))
            .collect();
        let active = next
            .iter()
            .filter(|&&b| b <= 0.0 || b >= cfg.beta_max)
            .count();
        let (f_new, grad_new) = objective.value_and_gradient(&next)?;
        state.evaluations += 1;
        if f_new > f {
            increases += 1;
            if increases >= 10 {
                return Err(Error::DampingTooLarge(state.k + 1));
            }
        } else {
            increases = 0;
        }
        state.beta = next;
        state.last_step = lambda;
        state.k += 1;
        f = f_new;
        grad = grad_new;
        state.record(f, cfg, lambda, active);
        if state.k % 500 == 0 {
            log::debug!("landweber k={} f={:e}", state.k, f / cfg.normalization);
        }
    }
    Ok(state)
}

/// [`Objective`] view of an [`InverseProblem`] in dimensionless variables
/// `x = β/β_max ∈ [0, 1]` and `f̃ = f/‖u^δ‖²`.
///
/// With these units the identity is a sensible initial inverse Hessian and
/// a unit step is of the order of the box size. The forward solve of the
/// last evaluated point is cached, so the gradient at an accepted
/// line-search point costs only the adjoint solve.
#[derive(Debug)]
pub struct ProblemObjective<'a> {
    problem: &'a InverseProblem,
    f_scale: f64,
    cache: RefCell<Option<(Vec<f64>, ObjectiveEval)>>,
}

impl<'a> ProblemObjective<'a> {
    pub fn new(problem: &'a InverseProblem) -> Result<Self> {
        let f_scale = problem.data_norm_squared();
        if !(f_scale > 0.0 && f_scale.is_finite()) {
            return Err(Error::Invalid("measurement data has zero norm".into()));
        }
        Ok(Self {
            problem,
            f_scale,
            cache: RefCell::new(None),
        })
    }

    pub fn to_beta(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.problem.beta_max).collect()
    }

    pub fn to_unit(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().map(|v| v / self.problem.beta_max).collect()
    }

    fn parameter(&self, x: &[f64]) -> Result<crate::pchip::FluxParameter> {
        // Projection onto [0, 1] can round β_max·1 marginally; clamp.
        let beta: Vec<f64> = self
            .to_beta(x)
            .into_iter()
            .map(|b| b.clamp(0.0, self.problem.beta_max))
            .collect();
        self.problem.parameter(&beta)
    }
}

impl Objective for ProblemObjective<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let fp = self.parameter(x)?;
        let eval = self.problem.evaluate(&fp)?;
        let value = eval.value / self.f_scale;
        *self.cache.borrow_mut() = Some((x.to_vec(), eval));
        Ok(value)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let fp = self.parameter(x)?;
        let cached = self
            .cache
            .borrow_mut()
            .take()
            .filter(|(b, _)| b.as_slice() == x)
            .map(|(_, e)| e);
        let eval = match cached {
            Some(e) => e,
            None => self.problem.evaluate(&fp)?,
        };
        let report = self.problem.gradient_from(&fp, eval)?;
        let g_scale = self.problem.beta_max / self.f_scale;
        Ok((
            report.objective / self.f_scale,
            report.gradient.iter().map(|g| g * g_scale).collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    Pqn,
    /// `damping` acts on the dimensionless variables of
    /// [`ProblemObjective`].
    Landweber {
        damping: f64,
    },
}

/// Minimises the misfit of `problem` from `beta0` (physical units) and
/// stops by the discrepancy principle `f/‖u^δ‖² ≤ ρδ` when `delta` is
/// given. The returned state holds `β` in physical units and the
/// unnormalised residual history; `inv_hessian` refers to the
/// dimensionless variables.
pub fn invert(
    problem: &InverseProblem,
    method: Method,
    beta0: &[f64],
    rho: f64,
    delta: Option<f64>,
    max_iter: usize,
) -> Result<OptimizerState> {
    if beta0.len() != 2 * problem.n {
        return Err(Error::Shape(format!(
            "initial parameter has {} entries, expected {}",
            beta0.len(),
            2 * problem.n
        )));
    }
    if delta.is_some() && !(rho > 1.0) {
        return Err(Error::Invalid(
            "discrepancy factor rho must exceed 1".into(),
        ));
    }
    let objective = ProblemObjective::new(problem)?;
    let mut cfg = OptimizerConfig::new(1.0, max_iter);
    cfg.discrepancy_threshold = delta.map(|d| rho * d);
    let x0 = objective.to_unit(beta0);
    let mut state = match method {
        Method::Pqn => pqn_solve(&objective, &x0, &cfg)?,
        Method::Landweber { damping } => {
            cfg.landweber_damping = damping;
            landweber_solve(&objective, &x0, &cfg)?
        }
    };
    state.beta = objective.to_beta(&state.beta);
    let scale = objective.f_scale;
    for f in &mut state.residual_history {
        *f *= scale;
    }
    for r in &mut state.history {
        r.f *= scale;
    }
    Ok(state)
}
