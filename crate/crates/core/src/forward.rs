//! Finite-difference solvers for the quasilinear cooling problem and its
//! linearisation with respect to the flux parameter.
//!
//! Both use the same semi-implicit stencil: diffusion is backward Euler with
//! coefficients frozen at the previous time level, boundary fluxes are taken
//! explicitly from the previous level, and each step is a single tridiagonal
//! solve. Boundary nodes own half cells, which is the ghost-point treatment
//! of the flux condition written in conservative form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::pchip::{FluxParameter, LocalGradient, Pchip};
use crate::tridiag;

/// Uniform space-time grid on `[0, T] × [0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub final_time: f64,
    pub nx: usize,
    pub nt: usize,
}

impl Grid {
    pub fn new(length: f64, final_time: f64, nx: usize, nt: usize) -> Result<Self> {
        let g = Self {
            length,
            final_time,
            nx,
            nt,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.nt < 1 {
            return Err(Error::Invalid(format!(
                "grid needs nx ≥ 3 and nt ≥ 1, got nx = {}, nt = {}",
                self.nx, self.nt
            )));
        }
        if !(self.length > 0.0 && self.final_time > 0.0)
            || !self.length.is_finite()
            || !self.final_time.is_finite()
        {
            return Err(Error::Invalid(
                "grid length and final time must be positive".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / (self.nx - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.final_time / self.nt as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.nx {
            self.length
        } else {
            j as f64 * self.dx()
        }
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        if n == self.nt {
            self.final_time
        } else {
            n as f64 * self.dt()
        }
    }

    /// Trapezoidal quadrature weight of node `j`.
    #[inline]
    pub fn mass(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.nx {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }
}

/// Node values on a [`Grid`], `(nt + 1) × nx`, row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnthalpyField {
    grid: Grid,
    values: Vec<f64>,
}

impl EnthalpyField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; (grid.nt + 1) * grid.nx],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.nt + 1) * grid.nx {
            return Err(Error::Shape(format!(
                "field has {} values, grid needs {}",
                values.len(),
                (grid.nt + 1) * grid.nx
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[n * nx..(n + 1) * nx]
    }

    #[inline]
    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        &mut self.values[n * nx..(n + 1) * nx]
    }

    #[inline]
    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.grid.nx + j]
    }

    /// Largest distance of any value from `[0, u_max]`.
    pub fn excursion(&self, u_max: f64) -> f64 {
        self.values
            .iter()
            .map(|&u| (-u).max(u - u_max).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Discrete `L²(Q)` norm with uniform `dx·dt` weights.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.dx() * self.grid.dt();
        (self.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    }

    /// CSV: first row the times, first column the positions.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::from("x\\t");
        for n in 0..=g.nt {
            out.push_str(&format!(",{}", g.t(n)));
        }
        out.push('\n');
        for j in 0..g.nx {
            out.push_str(&format!("{}", g.x(j)));
            for n in 0..=g.nt {
                out.push_str(&format!(",{}", self.at(n, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// The two boundary flux laws `β₀(u)` (at `x = 0`) and `β_L(u)` (at `x = L`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFluxes {
    pub bottom: Pchip,
    pub top: Pchip,
}

impl From<&FluxParameter> for BoundaryFluxes {
    fn from(fp: &FluxParameter) -> Self {
        let (bottom, top) = fp.fluxes();
        Self { bottom, top }
    }
}

/// Trapezoidal `∫_Ω u(t_step, x) dx`.
pub fn total_enthalpy(field: &EnthalpyField, step: usize) -> Result<f64> {
    let g = field.grid();
    if step > g.nt {
        return Err(Error::Invalid(format!("step {step} beyond nt = {}", g.nt)));
    }
    Ok(field
        .row(step)
        .iter()
        .enumerate()
        .map(|(j, u)| g.mass(j) * u)
        .sum())
}

/// Residual of the continuous energy balance
/// `dE/dt + β₀(u(t,0)) + β_L(u(t,L)) = 0` along a computed trajectory, one
/// entry per step: `(E^{n+1} − E^n)/dt + ½(F^n + F^{n+1})` with `E` the
/// composite Simpson integral (odd `nx`) and `F` the total boundary flux.
///
/// The scheme itself conserves the trapezoidal energy with left-point fluxes
/// exactly, so this residual isolates the O(dt) time and O(dx²) space
/// consistency errors.
pub fn energy_defect(field: &EnthalpyField, fluxes: &BoundaryFluxes) -> Result<Vec<f64>> {
    let g = field.grid();
    if g.nx % 2 == 0 {
        return Err(Error::Invalid(format!(
            "Simpson energy needs odd nx, got {}",
            g.nx
        )));
    }
    let dx = g.dx();
    let last = g.nx - 1;
    let simpson = |row: &[f64]| -> f64 {
        let inner: f64 = row[1..last]
            .iter()
            .enumerate()
            .map(|(k, u)| if k % 2 == 0 { 4.0 * u } else { 2.0 * u })
            .sum();
        dx / 3.0 * (row[0] + row[last] + inner)
    };
    let flux =
        |row: &[f64]| fluxes.bottom.eval_clamped(row[0]).0 + fluxes.top.eval_clamped(row[last]).0;
    let dt = g.dt();
    Ok((0..g.nt)
        .map(|n| {
            let (a, b) = (field.row(n), field.row(n + 1));
            (simpson(b) - simpson(a)) / dt + 0.5 * (flux(a) + flux(b))
        })
        .collect())
}

fn check_finite(row: &[f64], step: usize) -> Result<()> {
    if let Some(j) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step,
            reason: format!("non-finite value at node {j}"),
        });
    }
    Ok(())
}

struct Stencil {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    coef: Vec<f64>,
    ws: tridiag::Workspace,
}

impl Stencil {
    fn new(nx: usize) -> Self {
        Self {
            lower: vec![0.0; nx],
            diag: vec![0.0; nx],
            upper: vec![0.0; nx],
            rhs: vec![0.0; nx],
            coef: vec![0.0; nx],
            ws: tridiag::Workspace::new(nx),
        }
    }

    /// `M − dt·K_a` with interface diffusivities averaged from `coef`.
    fn assemble_divergence(&mut self, g: &Grid) {
        let nx = g.nx;
        let r = g.dt() / g.dx();
        for j in 0..nx {
            self.diag[j] = g.mass(j);
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
        }
        for j in 0..nx - 1 {
            let a_half = 0.5 * (self.coef[j] + self.coef[j + 1]) * r;
            self.diag[j] += a_half;
            self.diag[j + 1] += a_half;
            self.upper[j] = -a_half;
            self.lower[j + 1] = -a_half;
        }
    }

    fn solve_into(&mut self, out: &mut [f64]) {
        tridiag::solve(
            &self.lower,
            &self.diag,
            &self.upper,
            &mut self.rhs,
            &mut self.ws,
        );
        out.copy_from_slice(&self.rhs);
    }
}

/// Solves `u_t = (α′(u) u_x)_x` with `α′u_x = β₀(u)` at `x = 0`,
/// `−α′u_x = β_L(u)` at `x = L` and `u(0, ·) = u0`.
pub fn solve_ibvp_with(
    material: &MaterialModel,
    fluxes: &BoundaryFluxes,
    u0: &[f64],
    grid: &Grid,
) -> Result<EnthalpyField> {
    grid.validate()?;
    if u0.len() != grid.nx {
        return Err(Error::Shape(format!(
            "initial condition has {} nodes, grid has {}",
            u0.len(),
            grid.nx
        )));
    }
    check_finite(u0, 0)?;
    let nx = grid.nx;
    let dt = grid.dt();
    let mut field = EnthalpyField::zeros(*grid);
    field.row_mut(0).copy_from_slice(u0);
    let mut st = Stencil::new(nx);
    for n in 0..grid.nt {
        let (prev, next) = field.values.split_at_mut((n + 1) * nx);
        let prev = &prev[n * nx..];
        for j in 0..nx {
            st.coef[j] = material.diffusivity(prev[j]);
        }
        st.assemble_divergence(grid);
        for j in 0..nx {
            st.rhs[j] = grid.mass(j) * prev[j];
        }
        st.rhs[0] -= dt * fluxes.bottom.eval_clamped(prev[0]).0;
        st.rhs[nx - 1] -= dt * fluxes.top.eval_clamped(prev[nx - 1]).0;
        st.solve_into(&mut next[..nx]);
        check_finite(&next[..nx], n + 1)?;
    }
    Ok(field)
}

/// [`solve_ibvp_with`] for PCHIP fluxes parametrised by `fp`.
pub fn solve_ibvp(
    material: &MaterialModel,
    fp: &FluxParameter,
    u0: &[f64],
    grid: &Grid,
) -> Result<EnthalpyField> {
    solve_ibvp_with(material, &BoundaryFluxes::from(fp), u0, grid)
}

/// Boundary data of the linearised problem at one time level.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BoundaryLinearization {
    pub slope_bottom: f64,
    pub slope_top: f64,
    pub grad_bottom: LocalGradient,
    pub grad_top: LocalGradient,
}

pub(crate) fn linearize_boundary(fluxes: &BoundaryFluxes, row: &[f64]) -> BoundaryLinearization {
    let last = row.len() - 1;
    BoundaryLinearization {
        slope_bottom: fluxes.bottom.eval_clamped(row[0]).1,
        slope_top: fluxes.top.eval_clamped(row[last]).1,
        grad_bottom: fluxes.bottom.local_gradient(row[0]),
        grad_top: fluxes.top.local_gradient(row[last]),
    }
}

/// Explicit part of the linearised step at level `n`: the product of the
/// coefficient derivative with the already known next level,
/// `E w = Σ ½(α″_j w_j + α″_{j+1} w_{j+1}) (u^{n+1}_j − u^{n+1}_{j+1})/dx (e_j − e_{j+1})`.
#[derive(Debug, Clone)]
struct Coupling {
    /// `½ α″(u^n_j)`.
    half_da: Vec<f64>,
    /// `(u^{n+1}_j − u^{n+1}_{j+1}) / dx` per interface.
    jump: Vec<f64>,
}

impl Coupling {
    fn new(nx: usize) -> Self {
        Self {
            half_da: vec![0.0; nx],
            jump: vec![0.0; nx - 1],
        }
    }

    fn fill(&mut self, material: &MaterialModel, now: &[f64], next: &[f64], dx: f64) {
        for (j, &u) in now.iter().enumerate() {
            self.half_da[j] = 0.5 * material.diffusivity_with_derivative(u).1;
        }
        for j in 0..self.jump.len() {
            self.jump[j] = (next[j] - next[j + 1]) / dx;
        }
    }

    /// `out −= scale · E w`.
    fn sub_apply(&self, w: &[f64], scale: f64, out: &mut [f64]) {
        for (j, &d) in self.jump.iter().enumerate() {
            let c = scale * d * (self.half_da[j] * w[j] + self.half_da[j + 1] * w[j + 1]);
            out[j] -= c;
            out[j + 1] += c;
        }
    }

    /// `out −= scale · Eᵀ v`.
    fn sub_apply_transpose(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        for (j, &d) in self.jump.iter().enumerate() {
            let c = scale * d * (v[j] - v[j + 1]);
            out[j] -= c * self.half_da[j];
            out[j + 1] -= c * self.half_da[j + 1];
        }
    }
}

/// Solves the linearised problem `w_t = (α′(u) w)_xx`,
/// `(α′w)_x = β₀′w + ∇β₀·h` at `x = 0`, `−(α′w)_x = β_L′w + ∇β_L·h` at
/// `x = L`, `w(0, ·) = 0`, along the trajectory `u`.
///
/// The discretisation is the exact derivative of the [`solve_ibvp`] step
/// with respect to the flux parameter in direction `h`, so it matches
/// finite differences of the forward solver up to second-order terms.
pub fn solve_sensitivity(
    u: &EnthalpyField,
    material: &MaterialModel,
    fp: &FluxParameter,
    h: &[f64],
    grid: &Grid,
) -> Result<EnthalpyField> {
    if u.grid() != grid {
        return Err(Error::Shape(
            "trajectory was computed on a different grid".into(),
        ));
    }
    let n = fp.n();
    if h.len() != 2 * n {
        return Err(Error::Shape(format!(
            "direction has {} entries, expected {}",
            h.len(),
            2 * n
        )));
    }
    let (h_bottom, h_top) = h.split_at(n);
    let fluxes = BoundaryFluxes::from(fp);
    let nx = grid.nx;
    let dt = grid.dt();
    let mut w = EnthalpyField::zeros(*grid);
    let mut st = Stencil::new(nx);
    let mut coupling = Coupling::new(nx);
    for step in 0..grid.nt {
        let urow = u.row(step);
        for j in 0..nx {
            st.coef[j] = material.diffusivity(urow[j]);
        }
        st.assemble_divergence(grid);
        coupling.fill(material, urow, u.row(step + 1), grid.dx());
        let lin = linearize_boundary(&fluxes, urow);
        let (prev, next) = w.values.split_at_mut((step + 1) * nx);
        let prev = &prev[step * nx..];
        for j in 0..nx {
            st.rhs[j] = grid.mass(j) * prev[j];
        }
        coupling.sub_apply(prev, dt, &mut st.rhs);
        st.rhs[0] -= dt * (lin.slope_bottom * prev[0] + lin.grad_bottom.dot(h_bottom));
        st.rhs[nx - 1] -= dt * (lin.slope_top * prev[nx - 1] + lin.grad_top.dot(h_top));
        st.solve_into(&mut next[..nx]);
        check_finite(&next[..nx], step + 1)?;
    }
    Ok(w)
}

/// Backward solve of `φ_t = −α′(u) φ_xx − v` with `α′φ_x = β₀′φ` at
/// `x = 0`, `−α′φ_x = β_L′φ` at `x = L` and `φ(T, ·) = 0`, marched in
/// reversed time. The discrete operator is the exact transpose of the one in
/// [`solve_sensitivity`].
pub(crate) fn solve_backward(
    u: &EnthalpyField,
    material: &MaterialModel,
    fluxes: &BoundaryFluxes,
    source: &EnthalpyField,
) -> Result<EnthalpyField> {
    let grid = *u.grid();
    let nx = grid.nx;
    let dt = grid.dt();
    let dxdt = grid.dx() * dt;
    let mut phi = EnthalpyField::zeros(grid);
    let mut st = Stencil::new(nx);
    let mut coupling = Coupling::new(nx);
    for step in (0..grid.nt).rev() {
        let urow = u.row(step);
        for j in 0..nx {
            st.coef[j] = material.diffusivity(urow[j]);
        }
        // symmetric, hence its own transpose
        st.assemble_divergence(&grid);
        let (head, tail) = phi.values.split_at_mut((step + 1) * nx);
        let later = &tail[..nx];
        let src = source.row(step + 1);
        for j in 0..nx {
            st.rhs[j] = grid.mass(j) * later[j] + src[j] * dxdt;
        }
        if step + 1 < grid.nt {
            let next_row = u.row(step + 1);
            coupling.fill(material, next_row, u.row(step + 2), grid.dx());
            coupling.sub_apply_transpose(later, dt, &mut st.rhs);
            let lin_next = linearize_boundary(fluxes, next_row);
            st.rhs[0] -= dt * lin_next.slope_bottom * later[0];
            st.rhs[nx - 1] -= dt * lin_next.slope_top * later[nx - 1];
        }
        st.solve_into(&mut head[step * nx..]);
        check_finite(&head[step * nx..], step)?;
    }
    Ok(phi)
}
