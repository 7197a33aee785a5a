//! Experiment configuration. TOML with one table per concern; every key is
//! optional and defaults to the reference cooling experiment.

use std::path::{Path, PathBuf};

use heatflux_core::forward::BoundaryFluxes;
use heatflux_core::observation::ObservationSpec;
use heatflux_core::optimizer::Method;
use heatflux_core::{twin, Grid, MaterialModel, Pchip};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub grids: Grids,
    pub material: MaterialSource,
    pub initial: Initial,
    pub partition: Partition,
    #[serde(rename = "box")]
    pub bounds: Bounds,
    pub sensors: Sensors,
    pub noise: Noise,
    pub optimizer: OptimizerSettings,
    pub fluxes: FluxSource,
    pub gradcheck: GradcheckSettings,
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    pub length: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub nx: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub sim: GridSize,
    pub inv: GridSize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSource {
    /// CSV `theta,capacity,conductivity`; the builtin steel table if absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Initial {
    pub enthalpy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Partition {
    pub n: usize,
    pub u_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub beta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sensors {
    pub positions: Vec<f64>,
    pub sample_interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Pqn,
    Landweber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub method: MethodName,
    pub rho: f64,
    pub max_iter: usize,
    /// Landweber step for the dimensionless variables `β/β_max` and
    /// `f/‖u^δ‖²`.
    pub landweber_damping: f64,
    /// Iteration budget of the Landweber run in `compare`.
    pub landweber_max_iter: usize,
    /// Initial parameter; zeros if absent.
    pub initial_beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxSource {
    /// PCHIP CSVs `knot,value,slope`; the builtin profiles if absent.
    pub bottom: Option<PathBuf>,
    pub top: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSettings {
    pub nx: usize,
    pub nt: usize,
    pub n: usize,
    /// Central-difference step relative to `β_max`.
    pub epsilon: f64,
    pub directions: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    /// Samples per flux curve in `plotdata/`.
    pub plot_samples: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            length: twin::PLATE_THICKNESS,
            final_time: twin::COOLING_TIME,
        }
    }
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            sim: GridSize {
                nx: twin::SIM_GRID.0,
                nt: twin::SIM_GRID.1,
            },
            inv: GridSize {
                nx: twin::INV_GRID.0,
                nt: twin::INV_GRID.1,
            },
        }
    }
}

impl Default for Initial {
    fn default() -> Self {
        Self {
            enthalpy: twin::INITIAL_ENTHALPY,
        }
    }
}

impl Default for Partition {
    fn default() -> Self {
        Self {
            n: twin::PARTITION_SIZE,
            u_max: twin::INITIAL_ENTHALPY,
        }
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            beta_max: twin::BETA_MAX,
        }
    }
}

impl Default for Sensors {
    fn default() -> Self {
        Self {
            positions: twin::SENSOR_POSITIONS.to_vec(),
            sample_interval: twin::SAMPLE_INTERVAL,
        }
    }
}

impl Default for Noise {
    fn default() -> Self {
        Self {
            amplitude: twin::NOISE_AMPLITUDE,
            seed: twin::NOISE_SEED,
        }
    }
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            method: MethodName::Pqn,
            rho: twin::DISCREPANCY_RHO,
            max_iter: 5000,
            landweber_damping: twin::LANDWEBER_DAMPING,
            landweber_max_iter: 10_000,
            initial_beta: None,
        }
    }
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            nx: 50,
            nt: 200,
            n: 10,
            epsilon: 1e-3,
            directions: 5,
            tolerance: 1e-2,
        }
    }
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plot_samples: 501,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        resolve(&mut cfg.material.path);
        resolve(&mut cfg.fluxes.bottom);
        resolve(&mut cfg.fluxes.top);
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("domain.length", self.domain.length)?;
        positive("domain.final_time", self.domain.final_time)?;
        positive("initial.enthalpy", self.initial.enthalpy)?;
        positive("partition.u_max", self.partition.u_max)?;
        positive("box.beta_max", self.bounds.beta_max)?;
        positive("sensors.sample_interval", self.sensors.sample_interval)?;
        positive(
            "optimizer.landweber_damping",
            self.optimizer.landweber_damping,
        )?;
        positive("gradcheck.epsilon", self.gradcheck.epsilon)?;
        positive("gradcheck.tolerance", self.gradcheck.tolerance)?;
        if !(self.noise.amplitude >= 0.0 && self.noise.amplitude.is_finite()) {
            return Err(CliError::Validation("noise.amplitude must be ≥ 0".into()));
        }
        if !(self.optimizer.rho > 1.0) {
            return Err(CliError::Validation("optimizer.rho must exceed 1".into()));
        }
        if self.partition.n < 6 || self.partition.n % 2 != 0 {
            return Err(CliError::Validation(
                "partition.n must be even and at least 6".into(),
            ));
        }
        if self.initial.enthalpy > self.partition.u_max {
            return Err(CliError::Validation(
                "initial.enthalpy exceeds partition.u_max".into(),
            ));
        }
        if self.sensors.positions.is_empty() {
            return Err(CliError::Validation("no sensor positions".into()));
        }
        if let Some(x) = self
            .sensors
            .positions
            .iter()
            .find(|&&x| !(0.0..=self.domain.length).contains(&x))
        {
            return Err(CliError::Validation(format!(
                "sensor position {x} outside [0, {}]",
                self.domain.length
            )));
        }
        if self.output.plot_samples < 2 {
            return Err(CliError::Validation(
                "output.plot_samples must be ≥ 2".into(),
            ));
        }
        if let Some(beta) = &self.optimizer.initial_beta {
            if beta.len() != 2 * self.partition.n {
                return Err(CliError::Validation(format!(
                    "optimizer.initial_beta has {} entries, expected {}",
                    beta.len(),
                    2 * self.partition.n
                )));
            }
        }
        self.sim_grid()?;
        self.inv_grid()?;
        self.observation_spec()?;
        Ok(())
    }

    fn grid(&self, size: GridSize) -> Result<Grid, CliError> {
        Ok(Grid::new(
            self.domain.length,
            self.domain.final_time,
            size.nx,
            size.nt,
        )?)
    }

    pub fn sim_grid(&self) -> Result<Grid, CliError> {
        self.grid(self.grids.sim)
    }

    pub fn inv_grid(&self) -> Result<Grid, CliError> {
        self.grid(self.grids.inv)
    }

    pub fn gradcheck_grid(&self) -> Result<Grid, CliError> {
        self.grid(GridSize {
            nx: self.gradcheck.nx,
            nt: self.gradcheck.nt,
        })
    }

    pub fn observation_spec(&self) -> Result<ObservationSpec, CliError> {
        Ok(ObservationSpec::uniform_times(
            self.sensors.positions.clone(),
            self.sensors.sample_interval,
            self.domain.final_time,
        )?)
    }

    pub fn material(&self) -> Result<MaterialModel, CliError> {
        match &self.material.path {
            None => Ok(MaterialModel::builtin_steel()),
            Some(p) => Ok(MaterialModel::from_csv(&read(p)?)?),
        }
    }

    pub fn exact_fluxes(&self) -> Result<BoundaryFluxes, CliError> {
        let builtin = twin::reference_fluxes(self.partition.u_max)?;
        let load = |p: &Option<PathBuf>, fallback: Pchip| -> Result<Pchip, CliError> {
            match p {
                None => Ok(fallback),
                Some(p) => Ok(Pchip::from_csv(&read(p)?)?),
            }
        };
        Ok(BoundaryFluxes {
            bottom: load(&self.fluxes.bottom, builtin.bottom)?,
            top: load(&self.fluxes.top, builtin.top)?,
        })
    }

    pub fn initial_state(&self, grid: &Grid) -> Vec<f64> {
        vec![self.initial.enthalpy; grid.nx]
    }

    pub fn method(&self) -> Method {
        match self.optimizer.method {
            MethodName::Pqn => Method::Pqn,
            MethodName::Landweber => Method::Landweber {
                damping: self.optimizer.landweber_damping,
            },
        }
    }

    pub fn initial_beta(&self) -> Vec<f64> {
        self.optimizer
            .initial_beta
            .clone()
            .unwrap_or_else(|| vec![0.0; 2 * self.partition.n])
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
