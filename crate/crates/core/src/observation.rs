//! Sensor sampling of enthalpy fields, its adjoint, and synthetic noise.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{EnthalpyField, Grid};

/// Sensor depths (m) and sampling instants (s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub positions: Vec<f64>,
    pub times: Vec<f64>,
}

impl ObservationSpec {
    pub fn new(positions: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || times.is_empty() {
            return Err(Error::Invalid(
                "need at least one sensor and one sample time".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid(
                "sample times must be strictly ascending".into(),
            ));
        }
        if positions.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite sensor position or time".into()));
        }
        Ok(Self { positions, times })
    }

    /// Samples every `interval` seconds on `(0, final_time]`.
    pub fn uniform_times(positions: Vec<f64>, interval: f64, final_time: f64) -> Result<Self> {
        if !(interval > 0.0) {
            return Err(Error::Invalid("sample interval must be positive".into()));
        }
        let m = (final_time / interval + 1e-9).floor() as usize;
        let times = (1..=m).map(|i| i as f64 * interval).collect();
        Self::new(positions, times)
    }

    pub fn d(&self) -> usize {
        self.positions.len()
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    /// Every sensor strictly inside `(0, L)`, every time in `(0, T]`.
    pub fn check_inside(&self, grid: &Grid) -> Result<()> {
        for &x in &self.positions {
            if !(x > 0.0 && x < grid.length) {
                return Err(Error::Domain {
                    value: x,
                    lo: 0.0,
                    hi: grid.length,
                });
            }
        }
        for &t in &self.times {
            if !(t > 0.0 && t <= grid.final_time * (1.0 + 1e-12)) {
                return Err(Error::Domain {
                    value: t,
                    lo: 0.0,
                    hi: grid.final_time,
                });
            }
        }
        Ok(())
    }
}

/// Lower node and weight of the upper node for linear interpolation on a
/// uniform axis with `cells` intervals of width `step`.
#[inline]
fn axis_weight(coord: f64, step: f64, cells: usize) -> (usize, f64) {
    let s = coord / step;
    let lo = (s.floor().max(0.0) as usize).min(cells - 1);
    let w = (s - lo as f64).clamp(0.0, 1.0);
    (lo, w)
}

/// Bilinear stencil `[(n, j, weight); 4]` for one observation.
fn stencil(grid: &Grid, t: f64, x: f64) -> [(usize, usize, f64); 4] {
    let (n, wt) = axis_weight(t, grid.dt(), grid.nt);
    let (j, wx) = axis_weight(x, grid.dx(), grid.nx - 1);
    [
        (n, j, (1.0 - wt) * (1.0 - wx)),
        (n, j + 1, (1.0 - wt) * wx),
        (n + 1, j, wt * (1.0 - wx)),
        (n + 1, j + 1, wt * wx),
    ]
}

/// `(Qu)_{j,i} = u(t_i, x_j)`, bilinear in the grid values. Rows are
/// sensors, columns sample times.
pub fn observe(field: &EnthalpyField, spec: &ObservationSpec) -> Result<DMatrix<f64>> {
    let grid = field.grid();
    spec.check_inside(grid)?;
    Ok(DMatrix::from_fn(spec.d(), spec.m(), |j, i| {
        stencil(grid, spec.times[i], spec.positions[j])
            .iter()
            .map(|&(n, k, w)| w * field.at(n, k))
            .sum()
    }))
}

/// Discrete point-source injection `Q*v`: the transposed interpolation
/// weights scaled by `1/(dx·dt)`, so that
/// `(Qw, v)_F = Σ w · Q*v · dx·dt` holds exactly.
pub fn adjoint_source(
    residual: &DMatrix<f64>,
    spec: &ObservationSpec,
    grid: &Grid,
) -> Result<EnthalpyField> {
    if residual.nrows() != spec.d() || residual.ncols() != spec.m() {
        return Err(Error::Shape(format!(
            "residual is {}×{}, observation spec is {}×{}",
            residual.nrows(),
            residual.ncols(),
            spec.d(),
            spec.m()
        )));
    }
    spec.check_inside(grid)?;
    let scale = 1.0 / (grid.dx() * grid.dt());
    let mut src = EnthalpyField::zeros(*grid);
    let nx = grid.nx;
    let values = src.values_mut();
    for i in 0..spec.m() {
        for j in 0..spec.d() {
            let r = residual[(j, i)];
            if r == 0.0 {
                continue;
            }
            for (n, k, w) in stencil(grid, spec.times[i], spec.positions[j]) {
                values[n * nx + k] += w * r * scale;
            }
        }
    }
    Ok(src)
}

/// Sensor readings with their noise bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub data: DMatrix<f64>,
    pub spec: ObservationSpec,
    pub delta: f64,
    pub seed: u64,
    pub amplitude: f64,
}

/// Sidecar metadata written next to a measurement CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub delta: f64,
    pub seed: u64,
    pub amplitude: f64,
}

impl Measurement {
    /// `‖u^δ‖²_F`.
    pub fn norm_squared(&self) -> f64 {
        self.data.norm_squared()
    }

    pub fn meta(&self) -> NoiseMeta {
        NoiseMeta {
            delta: self.delta,
            seed: self.seed,
            amplitude: self.amplitude,
        }
    }

    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.data, &self.spec)
    }

    pub fn from_csv(text: &str, meta: &NoiseMeta) -> Result<Self> {
        let (data, spec) = matrix_from_csv(text)?;
        Ok(Self {
            data,
            spec,
            delta: meta.delta,
            seed: meta.seed,
            amplitude: meta.amplitude,
        })
    }
}

/// Relative noise level `δ = ‖clean − noisy‖²_F / (2‖noisy‖²_F)`: the
/// smallest `δ` with `½‖clean − noisy‖² ≤ δ‖noisy‖²`.
pub fn noise_level(clean: &DMatrix<f64>, noisy: &DMatrix<f64>) -> f64 {
    let denom = noisy.norm_squared();
    if denom == 0.0 {
        return 0.0;
    }
    (clean - noisy).norm_squared() / (2.0 * denom)
}

/// Adds i.i.d. uniform noise on `[−amplitude, amplitude]` from a seeded
/// ChaCha8 stream (column-major order).
pub fn add_noise(
    clean: &DMatrix<f64>,
    spec: &ObservationSpec,
    amplitude: f64,
    seed: u64,
) -> Result<Measurement> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::Invalid(format!(
            "noise amplitude {amplitude} must be ≥ 0"
        )));
    }
    if clean.nrows() != spec.d() || clean.ncols() != spec.m() {
        return Err(Error::Shape(
            "clean data does not match observation spec".into(),
        ));
    }
    let mut noisy = clean.clone();
    if amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in noisy.iter_mut() {
            *v += rng.gen_range(-amplitude..=amplitude);
        }
    }
    Ok(Measurement {
        delta: noise_level(clean, &noisy),
        data: noisy,
        spec: spec.clone(),
        seed,
        amplitude,
    })
}

/// CSV: first row the sample times, first column the sensor positions.
pub fn matrix_to_csv(data: &DMatrix<f64>, spec: &ObservationSpec) -> String {
    let mut out = String::from("x\\t");
    for t in &spec.times {
        out.push_str(&format!(",{t}"));
    }
    out.push('\n');
    for (j, x) in spec.positions.iter().enumerate() {
        out.push_str(&format!("{x}"));
        for i in 0..spec.m() {
            out.push_str(&format!(",{}", data[(j, i)]));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<(DMatrix<f64>, ObservationSpec)> {
    let parse = |s: &str, what: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("{what}: {e} in {s:?}")))
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty measurement csv".into()))?;
    let times = header
        .split(',')
        .skip(1)
        .map(|s| parse(s, "time"))
        .collect::<Result<Vec<_>>>()?;
    let mut positions = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        positions.push(parse(cells.next().unwrap_or(""), "position")?);
        let row = cells
            .map(|s| parse(s, "reading"))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != times.len() {
            return Err(Error::Parse(format!(
                "row for sensor {} has {} readings, expected {}",
                positions.len(),
                row.len(),
                times.len()
            )));
        }
        rows.extend(row);
    }
    let spec = ObservationSpec::new(positions, times)?;
    let data = DMatrix::from_row_slice(spec.d(), spec.m(), &rows);
    Ok((data, spec))
}
