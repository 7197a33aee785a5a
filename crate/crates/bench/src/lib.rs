//! Shared fixtures for the benchmarks: the reference twin problem on a
//! configurable inversion grid.

use heatflux_core::forward::solve_ibvp_with;
use heatflux_core::observation::{add_noise, observe, ObservationSpec};
use heatflux_core::twin::{
    reference_fluxes, BETA_MAX, COOLING_TIME, INITIAL_ENTHALPY, NOISE_AMPLITUDE, NOISE_SEED,
    PLATE_THICKNESS, SAMPLE_INTERVAL, SENSOR_POSITIONS,
};
use heatflux_core::{Grid, InverseProblem, MaterialModel};

pub fn sensors() -> ObservationSpec {
    ObservationSpec::uniform_times(SENSOR_POSITIONS.to_vec(), SAMPLE_INTERVAL, COOLING_TIME)
        .unwrap()
}

/// Twin problem with data from a grid finer than `nx × nt` by a few nodes.
pub fn twin_problem(nx: usize, nt: usize, n: usize) -> InverseProblem {
    let material = MaterialModel::builtin_steel();
    let sim = Grid::new(PLATE_THICKNESS, COOLING_TIME, nx + 25, nt + 600).unwrap();
    let exact = reference_fluxes(INITIAL_ENTHALPY).unwrap();
    let field = solve_ibvp_with(&material, &exact, &vec![INITIAL_ENTHALPY; sim.nx], &sim).unwrap();
    let clean = observe(&field, &sensors()).unwrap();
    let data = add_noise(&clean, &sensors(), NOISE_AMPLITUDE, NOISE_SEED).unwrap();
    InverseProblem {
        material,
        grid: Grid::new(PLATE_THICKNESS, COOLING_TIME, nx, nt).unwrap(),
        u0: vec![INITIAL_ENTHALPY; nx],
        data,
        u_max: INITIAL_ENTHALPY,
        beta_max: BETA_MAX,
        n,
        corrupt_top_trace: false,
    }
}
