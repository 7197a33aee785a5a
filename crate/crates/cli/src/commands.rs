//! The four subcommands. Each returns a serialisable summary and writes its
//! files atomically below the output directory.

use std::path::{Path, PathBuf};

use heatflux_core::adjoint::{check_gradient, GradientCheck};
use heatflux_core::forward::{solve_ibvp_with, BoundaryFluxes};
use heatflux_core::observation::{add_noise, matrix_to_csv, observe, NoiseMeta};
use heatflux_core::optimizer::{invert as run_optimizer, Method};
use heatflux_core::twin::{compare_profiles, probe_parameter, ProfileComparison};
use heatflux_core::{Grid, InverseProblem, Measurement, OptimizerState, Pchip, StopReason};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io::{read_text, Written};

/// Sidecar of a simulated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    #[serde(flatten)]
    pub noise: NoiseMeta,
    /// Grid the data was generated on.
    pub grid: Grid,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub delta: f64,
    pub sensors: usize,
    pub samples: usize,
    #[serde(skip)]
    pub files: Written,
}

/// Exact-flux forward solve on the simulation grid, observed and perturbed.
pub fn synthesize(
    cfg: &ExperimentConfig,
) -> Result<(Measurement, SimulationMeta, String), CliError> {
    let grid = cfg.sim_grid()?;
    let material = cfg.material()?;
    let fluxes = cfg.exact_fluxes()?;
    let spec = cfg.observation_spec()?;
    spec.check_inside(&grid)?;
    log::info!("simulating on {}×{} grid", grid.nx, grid.nt);
    let field = solve_ibvp_with(&material, &fluxes, &cfg.initial_state(&grid), &grid)?;
    let clean = observe(&field, &spec)?;
    let noisy = add_noise(&clean, &spec, cfg.noise.amplitude, cfg.noise.seed)?;
    let meta = SimulationMeta {
        noise: noisy.meta(),
        grid,
    };
    Ok((noisy, meta, matrix_to_csv(&clean, &spec)))
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateSummary, CliError> {
    let (noisy, meta, clean_csv) = synthesize(cfg)?;
    let mut files = Written::default();
    files.text(out.join("clean.csv"), &clean_csv)?;
    files.text(out.join("noisy.csv"), &noisy.to_csv())?;
    files.json(out.join("meta.json"), &meta)?;
    log::info!("noise level delta = {:e}", meta.noise.delta);
    Ok(SimulateSummary {
        delta: meta.noise.delta,
        sensors: noisy.spec.d(),
        samples: noisy.spec.m(),
        files,
    })
}

/// Reads `noisy.csv` and `meta.json` from `dir`.
pub fn load_measurement(dir: &Path) -> Result<(Measurement, SimulationMeta), CliError> {
    let meta_path = dir.join("meta.json");
    let meta: SimulationMeta = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", meta_path.display())))?;
    let data = Measurement::from_csv(&read_text(&dir.join("noisy.csv"))?, &meta.noise)?;
    Ok((data, meta))
}

/// Refuses to invert on the grid that produced the data.
pub fn inverse_crime_guard(sim: &Grid, inv: &Grid, allow: bool) -> Result<(), CliError> {
    if allow || (sim.nx != inv.nx && sim.nt != inv.nt) {
        return Ok(());
    }
    Err(CliError::InverseCrime(format!(
        "inversion grid {}×{} shares a dimension with the simulation grid {}×{}",
        inv.nx, inv.nt, sim.nx, sim.nt
    )))
}

/// Inverse problem on the inversion grid for `data`.
pub fn build_problem(
    cfg: &ExperimentConfig,
    data: Measurement,
    grid: Grid,
) -> Result<InverseProblem, CliError> {
    data.spec.check_inside(&grid)?;
    Ok(InverseProblem {
        material: cfg.material()?,
        grid,
        u0: cfg.initial_state(&grid),
        data,
        u_max: cfg.partition.u_max,
        beta_max: cfg.bounds.beta_max,
        n: cfg.partition.n,
        corrupt_top_trace: false,
    })
}

/// Final state file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalState {
    pub beta: Vec<f64>,
    pub k_star: usize,
    pub stop_reason: StopReason,
    pub method: Method,
    pub objective: f64,
    pub normalized_residual: f64,
    pub delta: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluxErrors {
    pub bottom: ProfileComparison,
    pub top: ProfileComparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertSummary {
    pub result: FinalState,
    pub flux_errors: FluxErrors,
    pub evaluations: usize,
    #[serde(skip)]
    pub state: OptimizerState,
    #[serde(skip)]
    pub files: Written,
}

fn flux_errors(cfg: &ExperimentConfig, recovered: &BoundaryFluxes) -> Result<FluxErrors, CliError> {
    let exact = cfg.exact_fluxes()?;
    let u_max = cfg.partition.u_max;
    let cell = u_max / (cfg.partition.n - 1) as f64;
    Ok(FluxErrors {
        bottom: compare_profiles(&recovered.bottom, &exact.bottom, u_max, cell),
        top: compare_profiles(&recovered.top, &exact.top, u_max, cell),
    })
}

fn knots_csv(knots: &[f64], bottom: &[f64], top: &[f64]) -> String {
    let mut out = String::from("u,bottom,top\n");
    for i in 0..knots.len() {
        out.push_str(&format!("{},{},{}\n", knots[i], bottom[i], top[i]));
    }
    out
}

fn dense_csv(
    recovered: &BoundaryFluxes,
    exact: &BoundaryFluxes,
    u_max: f64,
    samples: usize,
) -> String {
    let mut out = String::from("u,bottom,top,bottom_exact,top_exact\n");
    for k in 0..samples {
        let u = u_max * k as f64 / (samples - 1) as f64;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            u,
            recovered.bottom.eval_clamped(u).0,
            recovered.top.eval_clamped(u).0,
            exact.bottom.eval_clamped(u).0,
            exact.top.eval_clamped(u).0
        ));
    }
    out
}

fn residual_csv(state: &OptimizerState, threshold: f64) -> String {
    let mut out = String::from("k,log10_normalized_f,log10_threshold\n");
    for r in &state.history {
        out.push_str(&format!(
            "{},{},{}\n",
            r.k,
            r.normalized_f.log10(),
            threshold.log10()
        ));
    }
    out
}

/// Runs the configured optimizer on the measurement stored in `data_dir`.
pub fn invert(
    cfg: &ExperimentConfig,
    data_dir: &Path,
    out: &Path,
    allow_inverse_crime: bool,
) -> Result<InvertSummary, CliError> {
    let (data, meta) = load_measurement(data_dir)?;
    let grid = cfg.inv_grid()?;
    inverse_crime_guard(&meta.grid, &grid, allow_inverse_crime)?;
    let delta = data.delta;
    let problem = build_problem(cfg, data, grid)?;
    let method = cfg.method();
    log::info!(
        "inverting on {}×{} grid with {:?}, delta = {:e}",
        grid.nx,
        grid.nt,
        method,
        delta
    );
    let state = run_optimizer(
        &problem,
        method,
        &cfg.initial_beta(),
        cfg.optimizer.rho,
        Some(delta),
        cfg.optimizer.max_iter,
    )?;
    let stop_reason = state.stop_reason.unwrap_or(StopReason::MaxIter);
    let fp = problem.parameter(&state.beta)?;
    let recovered = BoundaryFluxes::from(&fp);
    let threshold = cfg.optimizer.rho * delta;
    let result = FinalState {
        beta: state.beta.clone(),
        k_star: state.k,
        stop_reason,
        method,
        objective: state.final_objective(),
        normalized_residual: state.final_objective() / problem.data_norm_squared(),
        delta,
        threshold,
    };

    let mut files = Written::default();
    files.json(out.join("beta.json"), &result)?;
    let n = cfg.partition.n;
    files.text(
        out.join("fluxes.csv"),
        &knots_csv(fp.partition(), &state.beta[..n], &state.beta[n..]),
    )?;
    files.text(out.join("convergence.csv"), &state.convergence_csv())?;
    let exact = cfg.exact_fluxes()?;
    let plot = out.join("plotdata");
    files.text(
        plot.join("fluxes_dense.csv"),
        &dense_csv(
            &recovered,
            &exact,
            cfg.partition.u_max,
            cfg.output.plot_samples,
        ),
    )?;
    files.text(plot.join("residuals.csv"), &residual_csv(&state, threshold))?;
    files.text(plot.join("bottom_pchip.csv"), &recovered.bottom.to_csv())?;
    files.text(plot.join("top_pchip.csv"), &recovered.top.to_csv())?;
    let fit = problem.evaluate(&fp)?;
    let predicted = observe(&fit.field, &problem.data.spec)?;
    files.text(
        plot.join("sensor_fit.csv"),
        &matrix_to_csv(&predicted, &problem.data.spec),
    )?;

    let summary = InvertSummary {
        result,
        flux_errors: flux_errors(cfg, &recovered)?,
        evaluations: state.evaluations,
        state,
        files,
    };
    if stop_reason == StopReason::LineSearchFailure {
        return Err(CliError::Optimizer(format!(
            "line search failed after {} iterations (normalised residual {:e}, threshold {:e})",
            summary.result.k_star, summary.result.normalized_residual, threshold
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckSummary {
    pub grid: Grid,
    pub n: usize,
    pub epsilon: f64,
    pub beta: Vec<f64>,
    #[serde(flatten)]
    pub check: GradientCheck,
    #[serde(skip)]
    pub files: Written,
}

/// Adjoint gradient against central differences on the coarse check grid,
/// with twin data from the simulation grid.
pub fn gradcheck(cfg: &ExperimentConfig, out: &Path) -> Result<GradcheckSummary, CliError> {
    let (data, _, _) = synthesize(cfg)?;
    let grid = cfg.gradcheck_grid()?;
    let n = cfg.gradcheck.n;
    let mut problem = build_problem(cfg, data, grid)?;
    problem.n = n;
    let beta = probe_parameter(n, cfg.bounds.beta_max);
    let epsilon = cfg.gradcheck.epsilon * cfg.bounds.beta_max;
    let check = check_gradient(
        &problem,
        &beta,
        epsilon,
        cfg.gradcheck.directions,
        cfg.noise.seed,
        cfg.gradcheck.tolerance,
    )?;
    log::info!(
        "gradient check: relative l2 error {:e}, max {:e}",
        check.relative_l2_error,
        check.max_relative_error
    );
    let mut summary = GradcheckSummary {
        grid,
        n,
        epsilon,
        beta,
        check,
        files: Written::default(),
    };
    let mut files = Written::default();
    files.json(out.join("gradcheck.json"), &summary)?;
    summary.files = files;
    Ok(summary)
}

/// First iteration of `history` at or below `level`.
pub fn first_reaching(history: &[f64], level: f64) -> Option<usize> {
    history.iter().position(|&f| f <= level)
}

/// One row of the level comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: f64,
    pub landweber_k: usize,
    pub pqn_k: Option<usize>,
    pub ratio: Option<f64>,
}

/// For every Landweber iteration `k ≥ min_k`, the first PQN iteration whose
/// normalised residual is at or below Landweber's at `k`.
pub fn level_comparison(pqn: &[f64], landweber: &[f64], min_k: usize) -> Vec<LevelRow> {
    // Running minimum makes the PQN search monotone.
    let mut best = Vec::with_capacity(pqn.len());
    let mut m = f64::INFINITY;
    for &f in pqn {
        m = m.min(f);
        best.push(m);
    }
    let mut lw_best = f64::INFINITY;
    let mut rows = Vec::new();
    for (k, &f) in landweber.iter().enumerate() {
        // Only levels that are new minima are "reached" for the first time.
        if f >= lw_best {
            continue;
        }
        lw_best = f;
        if k < min_k {
            continue;
        }
        let pqn_k = best.partition_point(|&b| b > f);
        let pqn_k = (pqn_k < best.len()).then_some(pqn_k);
        rows.push(LevelRow {
            level: f,
            landweber_k: k,
            pqn_k,
            ratio: pqn_k.map(|p| p as f64 / k as f64),
        });
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub k: usize,
    pub stop_reason: StopReason,
    pub final_normalized_residual: f64,
    pub evaluations: usize,
}

impl MethodSummary {
    fn from_state(s: &OptimizerState) -> Self {
        Self {
            k: s.k,
            stop_reason: s.stop_reason.unwrap_or(StopReason::MaxIter),
            final_normalized_residual: s.history.last().map_or(f64::NAN, |r| r.normalized_f),
            evaluations: s.evaluations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub delta: f64,
    pub threshold: f64,
    pub pqn: MethodSummary,
    pub landweber: MethodSummary,
    /// PQN iterations to reach Landweber's deepest level over the Landweber
    /// iterations it took.
    pub overall_ratio: f64,
    /// Largest per-level ratio; dominated by the first few iterations, where
    /// both methods take the same gradient step.
    pub max_ratio: f64,
    pub pqn_reaches_all_levels: bool,
    /// PQN needs fewer iterations than Landweber for every level.
    pub pqn_strictly_fewer: bool,
    /// Landweber iteration from which on every level is reached by PQN in
    /// strictly fewer iterations.
    pub strictly_fewer_from: Option<usize>,
    pub pqn_monotone: bool,
    pub levels: Vec<LevelRow>,
    #[serde(skip)]
    pub pqn_state: OptimizerState,
    #[serde(skip)]
    pub landweber_state: OptimizerState,
    #[serde(skip)]
    pub files: Written,
}

/// PQN and Landweber on the same synthetic data, run concurrently.
pub fn compare(
    cfg: &ExperimentConfig,
    out: &Path,
    allow_inverse_crime: bool,
) -> Result<CompareSummary, CliError> {
    let (data, meta, _) = synthesize(cfg)?;
    let grid = cfg.inv_grid()?;
    inverse_crime_guard(&meta.grid, &grid, allow_inverse_crime)?;
    let delta = data.delta;
    let problem = build_problem(cfg, data, grid)?;
    let beta0 = cfg.initial_beta();
    let rho = cfg.optimizer.rho;
    let (pqn, landweber) = std::thread::scope(|s| {
        let pqn = s.spawn(|| {
            run_optimizer(
                &problem,
                Method::Pqn,
                &beta0,
                rho,
                Some(delta),
                cfg.optimizer.max_iter,
            )
        });
        let landweber = s.spawn(|| {
            run_optimizer(
                &problem,
                Method::Landweber {
                    damping: cfg.optimizer.landweber_damping,
                },
                &beta0,
                rho,
                Some(delta),
                cfg.optimizer.landweber_max_iter,
            )
        });
        (pqn.join(), landweber.join())
    });
    let pqn = pqn.map_err(|_| CliError::Optimizer("PQN worker panicked".into()))??;
    let landweber =
        landweber.map_err(|_| CliError::Optimizer("Landweber worker panicked".into()))??;

    let norm = |s: &OptimizerState| s.history.iter().map(|r| r.normalized_f).collect::<Vec<_>>();
    let (pqn_f, lw_f) = (norm(&pqn), norm(&landweber));
    // Iteration 0 is the shared starting point.
    let levels = level_comparison(&pqn_f, &lw_f, 1);
    let ratio = |r: &LevelRow| r.ratio.unwrap_or(f64::INFINITY);
    let max_ratio = levels.iter().map(ratio).fold(0.0, f64::max);
    let overall_ratio = levels.last().map_or(f64::NAN, ratio);
    let pqn_reaches_all_levels = levels.iter().all(|r| r.pqn_k.is_some());
    let pqn_strictly_fewer = levels
        .iter()
        .all(|r| r.pqn_k.is_some_and(|k| k < r.landweber_k));
    let strictly_fewer_from = levels
        .iter()
        .rposition(|r| !r.pqn_k.is_some_and(|k| k < r.landweber_k))
        .map_or(levels.first().map(|r| r.landweber_k), |i| {
            levels.get(i + 1).map(|r| r.landweber_k)
        });
    let pqn_monotone = pqn_f.windows(2).all(|w| w[1] <= w[0]);

    let mut table = String::from("k,pqn_normalized_f,landweber_normalized_f\n");
    for k in 0..pqn_f.len().max(lw_f.len()) {
        let cell = |h: &[f64]| h.get(k).map_or(String::new(), |v| v.to_string());
        table.push_str(&format!("{},{},{}\n", k, cell(&pqn_f), cell(&lw_f)));
    }
    let mut summary = CompareSummary {
        delta,
        threshold: rho * delta,
        pqn: MethodSummary::from_state(&pqn),
        landweber: MethodSummary::from_state(&landweber),
        overall_ratio,
        max_ratio,
        pqn_reaches_all_levels,
        pqn_strictly_fewer,
        strictly_fewer_from,
        pqn_monotone,
        levels,
        pqn_state: pqn,
        landweber_state: landweber,
        files: Written::default(),
    };
    let mut files = Written::default();
    files.text(out.join("table.csv"), &table)?;
    files.json(out.join("summary.json"), &summary)?;
    summary.files = files;
    Ok(summary)
}

/// Resolves the output directory: `--out` wins over the config.
pub fn output_dir(cfg: &ExperimentConfig, cli_out: Option<PathBuf>) -> PathBuf {
    cli_out.unwrap_or_else(|| cfg.output.dir.clone())
}

/// Recovered fluxes stored by [`invert`].
pub fn load_recovered(out: &Path) -> Result<BoundaryFluxes, CliError> {
    let plot = out.join("plotdata");
    Ok(BoundaryFluxes {
        bottom: Pchip::from_csv(&read_text(&plot.join("bottom_pchip.csv"))?)?,
        top: Pchip::from_csv(&read_text(&plot.join("top_pchip.csv"))?)?,
    })
}
