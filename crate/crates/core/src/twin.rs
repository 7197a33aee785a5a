//! Synthetic twin-experiment ingredients: reference flux profiles with a
//! Leidenfrost signature and the default plate/sensor setting.

use crate::error::Result;
use crate::forward::BoundaryFluxes;
use serde::Serialize;

use crate::pchip::{uniform_knots, Pchip, SUP_SAMPLES};

pub const PLATE_THICKNESS: f64 = 0.05;
pub const COOLING_TIME: f64 = 30.0;
pub const INITIAL_ENTHALPY: f64 = 5.5e9;
pub const SENSOR_POSITIONS: [f64; 5] = [0.002, 0.01, 0.025, 0.04, 0.048];
pub const SAMPLE_INTERVAL: f64 = 0.1;
pub const NOISE_AMPLITUDE: f64 = 2e6;
pub const PARTITION_SIZE: usize = 20;
pub const BETA_MAX: f64 = 16e6;
pub const DISCREPANCY_RHO: f64 = 2.0;
/// Seed of the default noise realisation.
pub const NOISE_SEED: u64 = 7;

/// `(nx, nt)` of the grid that generates synthetic data.
pub const SIM_GRID: (usize, usize) = (176, 3600);
/// `(nx, nt)` of the grid used for inversion; differs from [`SIM_GRID`] in
/// both directions. With `nx − 1` a multiple of 25 every sensor sits on a
/// node of both grids, which keeps the model error between them
/// orders of magnitude below the noise level.
pub const INV_GRID: (usize, usize) = (151, 3000);
/// Landweber step in the dimensionless variables of
/// [`crate::optimizer::ProblemObjective`]; the largest tried value with a
/// monotone residual.
pub const LANDWEBER_DAMPING: f64 = 0.1;

/// Knot count of the reference profiles. Deliberately unrelated to
/// [`PARTITION_SIZE`] so the inversion never sees its own parametrisation.
pub const REFERENCE_KNOTS: usize = 14;

/// Shape of a Leidenfrost-type flux curve over enthalpy.
#[derive(Debug, Clone, Copy)]
pub struct LeidenfrostShape {
    /// Film-boiling flux at high enthalpy.
    pub plateau: f64,
    /// Additional flux at the vapour-layer collapse.
    pub peak: f64,
    /// Enthalpy of the collapse peak.
    pub peak_at: f64,
    /// Width of the peak in enthalpy.
    pub width: f64,
    /// Enthalpy scale of the decay to zero at `u = 0`.
    pub decay: f64,
}

impl LeidenfrostShape {
    pub fn eval(&self, u: f64) -> f64 {
        let z = (u - self.peak_at) / self.width;
        let onset = 1.0 - (-(u / self.decay).powi(2)).exp();
        onset * (self.plateau + self.peak * (-z * z).exp())
    }
}

pub const BOTTOM_SHAPE: LeidenfrostShape = LeidenfrostShape {
    plateau: 0.5e6,
    peak: 2.8e6,
    peak_at: 2.1e9,
    width: 1.2e9,
    decay: 1.0e9,
};

pub const TOP_SHAPE: LeidenfrostShape = LeidenfrostShape {
    plateau: 0.45e6,
    peak: 2.6e6,
    peak_at: 1.9e9,
    width: 1.2e9,
    decay: 1.0e9,
};

/// Reference flux interpolating `shape` on [`REFERENCE_KNOTS`] uniform knots
/// of `[0, u_max]`.
pub fn reference_profile(shape: &LeidenfrostShape, u_max: f64) -> Result<Pchip> {
    let knots = uniform_knots(0.0, u_max, REFERENCE_KNOTS);
    let values: Vec<f64> = knots.iter().map(|&u| shape.eval(u)).collect();
    Pchip::new(&knots, &values)
}

/// The builtin exact fluxes `(β₀, β_L)`.
pub fn reference_fluxes(u_max: f64) -> Result<BoundaryFluxes> {
    Ok(BoundaryFluxes {
        bottom: reference_profile(&BOTTOM_SHAPE, u_max)?,
        top: reference_profile(&TOP_SHAPE, u_max)?,
    })
}

/// A parameter strictly inside the box with well separated data values, so
/// that no PCHIP slope rule switches under small perturbations. Used as the
/// gradient-check point.
pub fn probe_parameter(n: usize, beta_max: f64) -> Vec<f64> {
    let bump = |i: usize, centre: f64, width: f64, base: f64, height: f64| {
        let z = (i as f64 - centre) / width;
        beta_max * (base + height * (-z * z).exp())
    };
    let c = n as f64 - 1.0;
    let mut beta: Vec<f64> = (0..n)
        .map(|i| bump(i, 0.4 * c, 0.28 * c, 0.1, 0.6))
        .collect();
    beta.extend((0..n).map(|i| bump(i, 0.59 * c, 0.24 * c, 0.15, 0.5)));
    beta
}

/// Agreement of a recovered flux with the exact one on `[0, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileComparison {
    /// `‖p − p_exact‖_{L²} / ‖p_exact‖_{L²}`.
    pub relative_l2: f64,
    pub peak_recovered: f64,
    pub peak_exact: f64,
    /// `|peak_recovered − peak_exact|` in units of `cell`.
    pub peak_shift_cells: f64,
}

/// Compares `recovered` with `exact` on [`SUP_SAMPLES`] uniform points of
/// `[0, u_max]` (trapezoidal L²); `cell` is the partition width used to
/// express the peak shift.
pub fn compare_profiles(
    recovered: &Pchip,
    exact: &Pchip,
    u_max: f64,
    cell: f64,
) -> ProfileComparison {
    let samples = SUP_SAMPLES;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut peak_r, mut peak_e) = ((0.0, f64::NEG_INFINITY), (0.0, f64::NEG_INFINITY));
    for k in 0..samples {
        let u = u_max * k as f64 / (samples - 1) as f64;
        let w = if k == 0 || k + 1 == samples { 0.5 } else { 1.0 };
        let r = recovered.eval_clamped(u).0;
        let e = exact.eval_clamped(u).0;
        num += w * (r - e).powi(2);
        den += w * e * e;
        if r > peak_r.1 {
            peak_r = (u, r);
        }
        if e > peak_e.1 {
            peak_e = (u, e);
        }
    }
    ProfileComparison {
        relative_l2: (num / den).sqrt(),
        peak_recovered: peak_r.0,
        peak_exact: peak_e.0,
        peak_shift_cells: (peak_r.0 - peak_e.0).abs() / cell,
    }
}
