//! Objective `f(β) = ½‖F(β) − u^δ‖²` and its gradient via the adjoint state.
//!
//! The gradient is `∇f(β) = S̃*_β Q*(F(β) − u^δ)` with
//! `S̃*_β v = ∫₀ᵀ −∇β₀(u(t,0)) φ(t,0) − ∇β_L(u(t,L)) φ(t,L) dt`, where `φ`
//! solves the backward adjoint problem driven by the point sources `Q*v`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{self, BoundaryFluxes, EnthalpyField, Grid};
use crate::material::MaterialModel;
use crate::observation::{self, Measurement};
use crate::pchip::FluxParameter;

/// Objective, gradient and adjoint diagnostics at one parameter.
#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub objective: f64,
    pub gradient: Vec<f64>,
    #[serde(skip)]
    pub adjoint_field: Option<EnthalpyField>,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Forward solve, observation and misfit in one pass.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub residual: DMatrix<f64>,
    pub field: EnthalpyField,
}

/// `f(β)` together with the residual `F(β) − u^δ` and the trajectory.
pub fn objective(
    fp: &FluxParameter,
    data: &Measurement,
    material: &MaterialModel,
    u0: &[f64],
    grid: &Grid,
) -> Result<ObjectiveEval> {
    let field = forward::solve_ibvp(material, fp, u0, grid)?;
    let predicted = observation::observe(&field, &data.spec)?;
    if predicted.shape() != data.data.shape() {
        return Err(Error::Shape(
            "measurement shape does not match its spec".into(),
        ));
    }
    let residual = predicted - &data.data;
    Ok(ObjectiveEval {
        value: 0.5 * residual.norm_squared(),
        residual,
        field,
    })
}

/// Adjoint state `φ` for the source field `source` (already scaled as a
/// density, see [`observation::adjoint_source`]). `φ(T, ·) = 0`.
pub fn solve_adjoint(
    u: &EnthalpyField,
    material: &MaterialModel,
    fp: &FluxParameter,
    source: &EnthalpyField,
    grid: &Grid,
) -> Result<EnthalpyField> {
    if u.grid() != grid || source.grid() != grid {
        return Err(Error::Shape(
            "adjoint inputs live on different grids".into(),
        ));
    }
    forward::solve_backward(u, material, &BoundaryFluxes::from(fp), source)
}

/// `∫ −∇β₀(u(t,0)) φ(t,0) − ∇β_L(u(t,L)) φ(t,L) dt`.
///
/// The flux acting over `[t_n, t_{n+1}]` is frozen at `t_n`, so each step
/// contributes its left-endpoint value; with `φ(T) = 0` this is the
/// trapezoidal sum up to the half weight at `t = 0`, and it is the exact
/// transpose of the discrete linearised solve.
pub fn assemble_gradient(
    phi: &EnthalpyField,
    u: &EnthalpyField,
    fp: &FluxParameter,
    grid: &Grid,
) -> Result<Vec<f64>> {
    assemble_gradient_signed(phi, u, fp, grid, 1.0)
}

fn assemble_gradient_signed(
    phi: &EnthalpyField,
    u: &EnthalpyField,
    fp: &FluxParameter,
    grid: &Grid,
    top_sign: f64,
) -> Result<Vec<f64>> {
    if phi.grid() != grid || u.grid() != grid {
        return Err(Error::Shape(
            "adjoint field and trajectory differ in grid".into(),
        ));
    }
    let n = fp.n();
    let fluxes = BoundaryFluxes::from(fp);
    let dt = grid.dt();
    let last = grid.nx - 1;
    let mut grad = vec![0.0; 2 * n];
    let (g_bottom, g_top) = grad.split_at_mut(n);
    for step in 0..grid.nt {
        let urow = u.row(step);
        let prow = phi.row(step);
        fluxes
            .bottom
            .local_gradient(urow[0])
            .add_scaled_to(-dt * prow[0], g_bottom);
        fluxes
            .top
            .local_gradient(urow[last])
            .add_scaled_to(-dt * top_sign * prow[last], g_top);
    }
    Ok(grad)
}

fn trace_norm(phi: &EnthalpyField, j: usize) -> f64 {
    let g = phi.grid();
    ((0..=g.nt).map(|n| phi.at(n, j).powi(2)).sum::<f64>() * g.dt()).sqrt()
}

/// Everything needed to evaluate `f` and `∇f` for a flux parameter.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub material: MaterialModel,
    pub grid: Grid,
    pub u0: Vec<f64>,
    pub data: Measurement,
    pub u_max: f64,
    pub beta_max: f64,
    pub n: usize,
    /// Flips the sign of the `x = L` adjoint trace. Only for mutation tests of
    /// the gradient check.
    #[doc(hidden)]
    pub corrupt_top_trace: bool,
}

impl InverseProblem {
    pub fn parameter(&self, beta: &[f64]) -> Result<FluxParameter> {
        if beta.len() != 2 * self.n {
            return Err(Error::Shape(format!(
                "parameter has {} entries, expected {}",
                beta.len(),
                2 * self.n
            )));
        }
        FluxParameter::new(beta.to_vec(), self.u_max, self.beta_max)
    }

    /// Like [`Self::parameter`] but without the box check, for probes.
    pub fn parameter_unchecked(&self, beta: &[f64]) -> Result<FluxParameter> {
        let template = FluxParameter::zeros(self.n, self.u_max, self.beta_max)?;
        if beta.len() != 2 * self.n {
            return Err(Error::Shape(format!(
                "parameter has {} entries, expected {}",
                beta.len(),
                2 * self.n
            )));
        }
        Ok(template.with_beta_unchecked(beta.to_vec()))
    }

    pub fn evaluate(&self, fp: &FluxParameter) -> Result<ObjectiveEval> {
        objective(fp, &self.data, &self.material, &self.u0, &self.grid)
    }

    /// Objective and adjoint gradient at `fp`.
    pub fn gradient(&self, fp: &FluxParameter) -> Result<GradientReport> {
        let eval = self.evaluate(fp)?;
        self.gradient_from(fp, eval)
    }

    /// Adjoint gradient reusing a forward evaluation at `fp`.
    pub fn gradient_from(&self, fp: &FluxParameter, eval: ObjectiveEval) -> Result<GradientReport> {
        let source = observation::adjoint_source(&eval.residual, &self.data.spec, &self.grid)?;
        let phi = solve_adjoint(&eval.field, &self.material, fp, &source, &self.grid)?;
        let sign = if self.corrupt_top_trace { -1.0 } else { 1.0 };
        let gradient = assemble_gradient_signed(&phi, &eval.field, fp, &self.grid, sign)?;
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step: 0,
                reason: "non-finite gradient".into(),
            });
        }
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert(
            "max_abs_phi".into(),
            phi.values().iter().fold(0.0f64, |m, v| m.max(v.abs())),
        );
        diagnostics.insert("phi_trace_bottom_l2".into(), trace_norm(&phi, 0));
        diagnostics.insert(
            "phi_trace_top_l2".into(),
            trace_norm(&phi, self.grid.nx - 1),
        );
        diagnostics.insert("max_excursion".into(), eval.field.excursion(self.u_max));
        Ok(GradientReport {
            objective: eval.value,
            gradient,
            adjoint_field: Some(phi),
            diagnostics,
        })
    }

    /// `‖u^δ‖²_F`.
    pub fn data_norm_squared(&self) -> f64 {
        self.data.norm_squared()
    }
}

/// Comparison of the adjoint gradient with central finite differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub report: GradientReport,
    pub finite_difference: Vec<f64>,
    /// `‖∇f − ∇_FD f‖ / ‖∇_FD f‖`.
    pub relative_l2_error: f64,
    /// Directional derivatives `∇f·d` against `(f(β+εd) − f(β−εd))/2ε` for
    /// random unit directions.
    pub directional: Vec<DirectionalCheck>,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionalCheck {
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Checks the adjoint gradient at `beta` against central differences with
/// step `epsilon` (absolute, in flux units) per coordinate and along
/// `directions` random unit directions drawn from `seed`.
///
/// Probes may leave the box by `epsilon`; the fluxes are evaluated without
/// the box check there.
pub fn check_gradient(
    problem: &InverseProblem,
    beta: &[f64],
    epsilon: f64,
    directions: usize,
    seed: u64,
    tolerance: f64,
) -> Result<GradientCheck> {
    use rand::{Rng, SeedableRng};

    if !(epsilon > 0.0) {
        return Err(Error::Invalid(
            "finite-difference step must be positive".into(),
        ));
    }
    let fp = problem.parameter(beta)?;
    let report = problem.gradient(&fp)?;
    let f_at = |b: &[f64]| -> Result<f64> {
        Ok(problem.evaluate(&problem.parameter_unchecked(b)?)?.value)
    };
    let central = |d: &[f64]| -> Result<f64> {
        let plus: Vec<f64> = beta.iter().zip(d).map(|(b, d)| b + epsilon * d).collect();
        let minus: Vec<f64> = beta.iter().zip(d).map(|(b, d)| b - epsilon * d).collect();
        Ok((f_at(&plus)? - f_at(&minus)?) / (2.0 * epsilon))
    };
    let dim = beta.len();
    let mut fd = vec![0.0; dim];
    let mut unit = vec![0.0; dim];
    for i in 0..dim {
        unit[i] = 1.0;
        fd[i] = central(&unit)?;
        unit[i] = 0.0;
    }
    let diff: f64 = report
        .gradient
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let fd_norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    let relative_l2_error = relative(diff, fd_norm);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut directional = Vec::with_capacity(directions);
    for _ in 0..directions {
        let mut d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let norm = d
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        d.iter_mut().for_each(|v| *v /= norm);
        let adjoint: f64 = report.gradient.iter().zip(&d).map(|(g, d)| g * d).sum();
        let finite_difference = central(&d)?;
        directional.push(DirectionalCheck {
            adjoint,
            finite_difference,
            // Directional derivatives can vanish; measure against the
            // gradient scale instead.
            relative_error: relative((adjoint - finite_difference).abs(), fd_norm),
        });
    }
    let max_relative_error = directional
        .iter()
        .map(|d| d.relative_error)
        .fold(relative_l2_error, f64::max);
    Ok(GradientCheck {
        report,
        finite_difference: fd,
        relative_l2_error,
        directional,
        max_relative_error,
        tolerance,
        passed: max_relative_error <= tolerance,
    })
}

/// `err / scale`, with `0/0 = 0`.
fn relative(err: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        if err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        err / scale
    }
}
