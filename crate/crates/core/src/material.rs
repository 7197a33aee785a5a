//! Temperature ↔ enthalpy transformation and the enthalpy-dependent thermal
//! diffusivity.
//!
//! Capacity and conductivity are tabulated against temperature and treated
//! as piecewise linear. The enthalpy `u = ∫_{θ₀}^{θ} C` is therefore
//! piecewise quadratic; at the table points it coincides with the
//! trapezoidal sum, and between them it is inverted exactly.

use crate::error::{Error, Result};
use crate::pchip::{uniform_knots, Pchip};

/// Reference temperature of the enthalpy scale (0 °C), in K.
pub const REFERENCE_TEMPERATURE: f64 = 273.15;

/// Number of uniform enthalpy knots used to represent `α′(u)`.
pub const DIFFUSIVITY_KNOTS: usize = 257;

#[derive(Debug, Clone)]
pub struct MaterialModel {
    theta: Vec<f64>,
    capacity: Vec<f64>,
    conductivity: Vec<f64>,
    enthalpy: Vec<f64>,
    diffusivity: Pchip,
    c_min: f64,
    c_max: f64,
}

impl MaterialModel {
    /// Builds the model from temperature tables (K, J/(m³·K), W/(m·K)).
    pub fn new(theta: &[f64], capacity: &[f64], conductivity: &[f64]) -> Result<Self> {
        let len = theta.len();
        if capacity.len() != len || conductivity.len() != len {
            return Err(Error::Shape(format!(
                "material tables differ in length: {len}, {}, {}",
                capacity.len(),
                conductivity.len()
            )));
        }
        if len < 3 {
            return Err(Error::TooFewPoints {
                required: 3,
                got: len,
            });
        }
        if (theta[0] - REFERENCE_TEMPERATURE).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "temperature table must start at {REFERENCE_TEMPERATURE} K, got {}",
                theta[0]
            )));
        }
        if theta.windows(2).any(|w| !(w[1] > w[0])) || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPartition(
                "temperatures must be finite and strictly increasing".into(),
            ));
        }
        if let Some((i, c)) = capacity
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
        {
            return Err(Error::BoundViolation(format!(
                "capacity[{i}] = {c} is not positive"
            )));
        }
        if let Some((i, k)) = conductivity
            .iter()
            .enumerate()
            .find(|(_, k)| !(**k > 0.0 && k.is_finite()))
        {
            return Err(Error::BoundViolation(format!(
                "conductivity[{i}] = {k} is not positive"
            )));
        }

        let mut enthalpy = Vec::with_capacity(len);
        enthalpy.push(0.0);
        for i in 1..len {
            let step = 0.5 * (capacity[i - 1] + capacity[i]) * (theta[i] - theta[i - 1]);
            enthalpy.push(enthalpy[i - 1] + step);
        }

        let ratios: Vec<f64> = conductivity
            .iter()
            .zip(capacity)
            .map(|(k, c)| k / c)
            .collect();
        let c_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let c_max = ratios.iter().copied().fold(0.0, f64::max);

        let mut model = Self {
            theta: theta.to_vec(),
            capacity: capacity.to_vec(),
            conductivity: conductivity.to_vec(),
            enthalpy,
            // placeholder, replaced below once the inverse map is available
            diffusivity: Pchip::new(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0])?,
            c_min,
            c_max,
        };
        let knots = uniform_knots(0.0, model.max_enthalpy(), DIFFUSIVITY_KNOTS);
        let samples = knots
            .iter()
            .map(|&u| {
                let (seg, theta) = model.invert(u);
                let w = (theta - model.theta[seg]) / (model.theta[seg + 1] - model.theta[seg]);
                let k = lerp(model.conductivity[seg], model.conductivity[seg + 1], w);
                let c = lerp(model.capacity[seg], model.capacity[seg + 1], w);
                (k / c).clamp(c_min, c_max)
            })
            .collect::<Vec<_>>();
        model.diffusivity = Pchip::new(&knots, &samples)?;
        Ok(model)
    }

    /// Parses a CSV with header `theta,capacity,conductivity`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty material csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["theta", "capacity", "conductivity"] {
            return Err(Error::Parse(format!(
                "unexpected material header {header:?}"
            )));
        }
        let (mut theta, mut cap, mut cond) = (Vec::new(), Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("material row {}: {e}", row + 2)))?;
            if vals.len() != 3 {
                return Err(Error::Parse(format!(
                    "material row {} needs 3 columns",
                    row + 2
                )));
            }
            theta.push(vals[0]);
            cap.push(vals[1]);
            cond.push(vals[2]);
        }
        Self::new(&theta, &cap, &cond)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,capacity,conductivity\n");
        for i in 0..self.theta.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.theta[i], self.capacity[i], self.conductivity[i]
            ));
        }
        out
    }

    /// Synthetic steel-like material. The heat capacity carries a
    /// transformation peak near 1000 K, which shows up as a diffusivity dip
    /// in a band of high enthalpies. `Ĉ(1100 K) ≈ 5.5e9 J/m³`.
    pub fn builtin_steel() -> Self {
        let density = 7850.0;
        let theta: Vec<f64> = (0..=110)
            .map(|i| REFERENCE_TEMPERATURE + 10.0 * i as f64)
            .collect();
        let capacity: Vec<f64> = theta
            .iter()
            .map(|&t| {
                let rise = t - REFERENCE_TEMPERATURE;
                let peak = 2200.0 * (-((t - 1000.0) / 60.0).powi(2)).exp();
                density * (450.0 + 0.28 * rise + peak)
            })
            .collect();
        let conductivity: Vec<f64> = theta
            .iter()
            .map(|&t| (52.0 - 0.03 * (t - REFERENCE_TEMPERATURE)).max(26.0))
            .collect();
        Self::new(&theta, &capacity, &conductivity).expect("builtin table is valid")
    }

    pub fn theta_table(&self) -> &[f64] {
        &self.theta
    }

    pub fn capacity_table(&self) -> &[f64] {
        &self.capacity
    }

    pub fn conductivity_table(&self) -> &[f64] {
        &self.conductivity
    }

    pub fn enthalpy_table(&self) -> &[f64] {
        &self.enthalpy
    }

    pub fn diffusivity_pchip(&self) -> &Pchip {
        &self.diffusivity
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn max_enthalpy(&self) -> f64 {
        self.enthalpy[self.enthalpy.len() - 1]
    }

    /// Thermal diffusivity `α′(u)`, clamped outside the tabulated range.
    #[inline]
    pub fn diffusivity(&self, u: f64) -> f64 {
        self.diffusivity.eval_clamped(u).0
    }

    /// `(α′(u), α″(u))`.
    #[inline]
    pub fn diffusivity_with_derivative(&self, u: f64) -> (f64, f64) {
        self.diffusivity.eval_clamped(u)
    }

    /// `Ĉ(θ)`: enthalpy at temperature `theta`.
    pub fn enthalpy_from_temperature(&self, theta: f64) -> Result<f64> {
        let lo = self.theta[0];
        let hi = self.theta[self.theta.len() - 1];
        if !(theta >= lo && theta <= hi) {
            return Err(Error::Domain {
                value: theta,
                lo,
                hi,
            });
        }
        let seg = match self.theta.partition_point(|&t| t <= theta) {
            0 => 0,
            p => (p - 1).min(self.theta.len() - 2),
        };
        let s = theta - self.theta[seg];
        let width = self.theta[seg + 1] - self.theta[seg];
        let slope = (self.capacity[seg + 1] - self.capacity[seg]) / width;
        Ok(self.enthalpy[seg] + self.capacity[seg] * s + 0.5 * slope * s * s)
    }

    /// `Ĉ⁻¹(u)`: temperature at enthalpy `u`.
    pub fn temperature_from_enthalpy(&self, u: f64) -> Result<f64> {
        let hi = self.max_enthalpy();
        if !(u >= 0.0 && u <= hi) {
            return Err(Error::Domain {
                value: u,
                lo: 0.0,
                hi,
            });
        }
        Ok(self.invert(u).1)
    }

    /// Segment index and temperature for an in-range enthalpy.
    fn invert(&self, u: f64) -> (usize, f64) {
        let last = self.enthalpy.len() - 2;
        let seg = match self.enthalpy.partition_point(|&e| e <= u) {
            0 => 0,
            p => (p - 1).min(last),
        };
        let width = self.theta[seg + 1] - self.theta[seg];
        let c0 = self.capacity[seg];
        let slope = (self.capacity[seg + 1] - c0) / width;
        let rem = u - self.enthalpy[seg];
        // c0·s + ½·slope·s² = rem, positive root in cancellation-free form
        let disc = (c0 * c0 + 2.0 * slope * rem).max(0.0);
        let s = 2.0 * rem / (c0 + disc.sqrt());
        (seg, self.theta[seg] + s.clamp(0.0, width))
    }
}

#[inline]
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        uniform_knots(lo, hi, n)
    }

    #[test]
    fn constant_coefficients() {
        let theta = table(12, REFERENCE_TEMPERATURE, 1373.15);
        let m = MaterialModel::new(&theta, &vec![2.0; 12], &vec![4.0; 12]).unwrap();
        for (t, u) in theta.iter().zip(m.enthalpy_table()) {
            assert_relative_eq!(*u, 2.0 * (t - REFERENCE_TEMPERATURE), max_relative = 1e-12);
        }
        for u in [0.0, 1.0, 100.0, 2199.0] {
            assert_relative_eq!(m.diffusivity(u), 2.0, max_relative = 1e-14);
        }
        assert_eq!((m.c_min(), m.c_max()), (2.0, 2.0));
        assert_relative_eq!(
            m.temperature_from_enthalpy(200.0).unwrap(),
            REFERENCE_TEMPERATURE + 100.0,
            max_relative = 1e-14
        );
        assert_eq!(
            m.temperature_from_enthalpy(0.0).unwrap(),
            REFERENCE_TEMPERATURE
        );
    }

    #[test]
    fn linear_capacity_integrates_exactly() {
        let theta = table(30, REFERENCE_TEMPERATURE, 900.0);
        let cap: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
        let m = MaterialModel::new(&theta, &cap, &vec![1.0; 30]).unwrap();
        for (t, u) in theta.iter().zip(m.enthalpy_table()) {
            let exact = t * t - REFERENCE_TEMPERATURE * REFERENCE_TEMPERATURE;
            assert_relative_eq!(*u, exact, max_relative = 1e-12);
        }
        // off-table points follow the same closed form
        let u = m.enthalpy_from_temperature(512.3).unwrap();
        assert_relative_eq!(
            u,
            512.3f64.powi(2) - REFERENCE_TEMPERATURE.powi(2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rejects_invalid_tables() {
        let theta = table(4, REFERENCE_TEMPERATURE, 400.0);
        assert!(matches!(
            MaterialModel::new(&theta, &[1.0, 0.0, 1.0, 1.0], &[1.0; 4]),
            Err(Error::BoundViolation(_))
        ));
        assert!(matches!(
            MaterialModel::new(&theta, &[1.0; 4], &[1.0, 1.0, -2.0, 1.0]),
            Err(Error::BoundViolation(_))
        ));
        assert!(MaterialModel::new(&theta[..2], &[1.0; 2], &[1.0; 2]).is_err());
        assert!(MaterialModel::new(&[300.0, 400.0, 500.0], &[1.0; 3], &[1.0; 3]).is_err());
        let m = MaterialModel::new(&theta, &[1.0; 4], &[1.0; 4]).unwrap();
        assert!(m.temperature_from_enthalpy(-1.0).is_err());
        assert!(m.temperature_from_enthalpy(1e9).is_err());
    }

    #[test]
    fn builtin_is_steel_like() {
        let m = MaterialModel::builtin_steel();
        let u1100 = m.enthalpy_from_temperature(1100.0).unwrap();
        assert!((5.3e9..5.7e9).contains(&u1100), "{u1100}");
        assert!(m.max_enthalpy() > 5.5e9 * 1.1);
        assert!(m.c_min() > 0.0 && m.c_max() < 1e-4);
        // diffusivity dips in the transformation band
        let dip = m.diffusivity(m.enthalpy_from_temperature(1000.0).unwrap());
        assert!(dip < 0.5 * m.diffusivity(1e9));
    }

    #[test]
    fn csv_round_trip() {
        let m = MaterialModel::builtin_steel();
        let back = MaterialModel::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back.enthalpy_table(), m.enthalpy_table());
        assert!(MaterialModel::from_csv("t,c,k\n").is_err());
    }
}
