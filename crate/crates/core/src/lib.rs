//! Identification of enthalpy-dependent boundary heat fluxes in a 1D
//! quasilinear cooling process from internal enthalpy measurements.
//!
//! The fluxes are parametrised by PCHIP interpolants on a uniform enthalpy
//! partition ([`pchip`]), the forward model is a semi-implicit finite
//! difference solver ([`forward`]), measurements are point samples
//! ([`observation`]), gradients come from the adjoint state ([`adjoint`]) and
//! the box-constrained minimisation uses a projected quasi-Newton method
//! with a Landweber baseline ([`optimizer`]).

pub mod adjoint;
pub mod error;
pub mod forward;
pub mod material;
pub mod observation;
pub mod optimizer;
pub mod pchip;
pub mod tridiag;
pub mod twin;

pub use adjoint::{GradientReport, InverseProblem};
pub use error::{Error, Result};
pub use forward::{BoundaryFluxes, EnthalpyField, Grid};
pub use material::MaterialModel;
pub use observation::{Measurement, ObservationSpec};
pub use optimizer::{OptimizerConfig, OptimizerState, StopReason};
pub use pchip::{FluxParameter, Pchip};
