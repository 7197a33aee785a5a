//! Shape-preserving piecewise cubic Hermite interpolation on equidistant
//! partitions, plus the sensitivity of the interpolant with respect to its
//! data values.
//!
//! Interior slopes use the weighted harmonic mean of neighbouring secants and
//! vanish at local extrema. Endpoint slopes use the one-sided three-point
//! formula `3/2 Δ₁ − 1/2 Δ₂`, limited so that it never points against the
//! first secant and never exceeds three times it when the data turns.

use crate::error::{Error, Result};

const SPACING_RTOL: f64 = 1e-12;

/// How a slope depends on the neighbouring secants.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SlopeRule {
    /// Slope is identically zero in a neighbourhood of the data.
    Zero,
    /// Interior harmonic mean of the secants on both sides.
    Harmonic,
    /// Unlimited three-point endpoint formula.
    Endpoint,
    /// Endpoint slope capped at three times the adjacent secant.
    EndpointCapped,
}

/// Piecewise cubic Hermite interpolant on an equidistant partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    h: f64,
    rules: Vec<SlopeRule>,
}

/// Nonzero part of `∂p/∂f` at a point: entries `start..start + 4`
/// (indices past the last knot carry zero weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGradient {
    pub start: usize,
    pub weights: [f64; 4],
}

impl LocalGradient {
    /// Dot product with a vector of per-knot coefficients.
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(k, _)| self.start + k < v.len())
            .map(|(k, w)| w * v[self.start + k])
            .sum()
    }

    /// `out[start + k] += scale * weights[k]`.
    pub fn add_scaled_to(&self, scale: f64, out: &mut [f64]) {
        for (k, w) in self.weights.iter().enumerate() {
            if let Some(slot) = out.get_mut(self.start + k) {
                *slot += scale * w;
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.add_scaled_to(1.0, &mut out);
        out
    }
}

#[inline]
fn phi(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[inline]
fn dphi(t: f64) -> f64 {
    6.0 * t * (1.0 - t)
}

#[inline]
fn psi(t: f64) -> f64 {
    t * t * (t - 1.0)
}

#[inline]
fn dpsi(t: f64) -> f64 {
    t * (3.0 * t - 2.0)
}

/// Hermite basis `H₁..H₄` on an interval of width `h` at local coordinate `t`.
#[inline]
fn hermite_basis(t: f64, h: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [phi(s), phi(t), -h * psi(s), h * psi(t)]
}

#[inline]
fn hermite_basis_dx(t: f64, h: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [-dphi(s) / h, dphi(t) / h, dpsi(s), dpsi(t)]
}

/// Checks that `knots` is strictly increasing with uniform spacing and
/// returns that spacing.
pub fn equidistant_spacing(knots: &[f64]) -> Result<f64> {
    if knots.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: knots.len(),
        });
    }
    if knots.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidPartition("non-finite knot".into()));
    }
    let n = knots.len();
    let h = (knots[n - 1] - knots[0]) / (n - 1) as f64;
    if h <= 0.0 {
        return Err(Error::InvalidPartition(
            "knots must be strictly increasing".into(),
        ));
    }
    let tol = SPACING_RTOL * knots[0].abs().max(knots[n - 1].abs()).max(h);
    for (i, w) in knots.windows(2).enumerate() {
        let step = w[1] - w[0];
        if step <= 0.0 {
            return Err(Error::InvalidPartition(format!(
                "knots not strictly increasing at index {}",
                i + 1
            )));
        }
        if (step - h).abs() > tol {
            return Err(Error::InvalidPartition(format!(
                "spacing {step} at index {i} differs from uniform spacing {h}"
            )));
        }
    }
    Ok(h)
}

/// Uniform partition of `[a, b]` with `n` knots; the last knot is exactly `b`.
pub fn uniform_knots(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + i as f64 * h })
        .collect()
}

fn endpoint_slope(near: f64, far: f64) -> (f64, SlopeRule) {
    let d = 1.5 * near - 0.5 * far;
    if near == 0.0 || d.signum() != near.signum() || d == 0.0 {
        (0.0, SlopeRule::Zero)
    } else if near.signum() != far.signum() && d.abs() > 3.0 * near.abs() {
        (3.0 * near, SlopeRule::EndpointCapped)
    } else {
        (d, SlopeRule::Endpoint)
    }
}

impl Pchip {
    /// Builds the interpolant through `(knots[i], values[i])`.
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        let n = knots.len();
        if n < 3 {
            return Err(Error::TooFewPoints {
                required: 3,
                got: n,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("interpolation values must be finite".into()));
        }
        let h = equidistant_spacing(knots)?;
        let secants: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();

        let mut slopes = vec![0.0; n];
        let mut rules = vec![SlopeRule::Zero; n];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            // a·b ≤ 0 covers extrema and flat neighbours (including 0/0)
            if a * b > 0.0 {
                slopes[k] = 2.0 * a * b / (a + b);
                rules[k] = SlopeRule::Harmonic;
            }
        }
        let (d0, r0) = endpoint_slope(secants[0], secants[1]);
        let (dn, rn) = endpoint_slope(secants[n - 2], secants[n - 3]);
        slopes[0] = d0;
        rules[0] = r0;
        slopes[n - 1] = dn;
        rules[n - 1] = rn;

        Ok(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            slopes,
            h,
            rules,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn interval_width(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if x.is_nan() || x < lo || x > hi {
            return Err(Error::Domain { value: x, lo, hi });
        }
        Ok(())
    }

    /// Interval index and local coordinate for an in-domain `x`.
    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.knots.len();
        let raw = ((x - self.knots[0]) / self.h).floor();
        let i = if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(n - 2)
        };
        let t = ((x - self.knots[i]) / self.h).clamp(0.0, 1.0);
        (i, t)
    }

    #[inline]
    fn eval_in_domain(&self, x: f64) -> (f64, f64) {
        let (i, t) = self.locate(x);
        let coeffs = [
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
        ];
        let b = hermite_basis(t, self.h);
        let db = hermite_basis_dx(t, self.h);
        let value = (0..4).map(|k| coeffs[k] * b[k]).sum();
        // H1' = −H2', written in difference form so constant data has an
        // exactly zero derivative.
        let deriv = (coeffs[1] - coeffs[0]) * db[1] + coeffs[2] * db[2] + coeffs[3] * db[3];
        (value, deriv)
    }

    /// Value and x-derivative at `x`.
    ///
    /// With `clamp` set, points outside the domain evaluate to the nearest
    /// endpoint value with zero derivative; otherwise they are rejected.
    pub fn eval(&self, x: f64, clamp: bool) -> Result<(f64, f64)> {
        if clamp && !x.is_nan() {
            return Ok(self.eval_clamped(x));
        }
        self.check_domain(x)?;
        Ok(self.eval_in_domain(x))
    }

    /// Infallible clamped evaluation for use inside time-stepping loops.
    #[inline]
    pub fn eval_clamped(&self, x: f64) -> (f64, f64) {
        let (lo, hi) = self.domain();
        if x < lo {
            (self.values[0], 0.0)
        } else if x > hi {
            (self.values[self.values.len() - 1], 0.0)
        } else {
            self.eval_in_domain(x)
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.eval(x, false).map(|(v, _)| v)
    }

    /// `(k, ∂d_j/∂f_k)` for the three data values a slope can depend on.
    fn slope_jacobian(&self, j: usize) -> [(usize, f64); 3] {
        let n = self.knots.len();
        let h = self.h;
        let secant = |k: usize| (self.values[k + 1] - self.values[k]) / h;
        match self.rules[j] {
            SlopeRule::Zero => [(j, 0.0); 3],
            SlopeRule::Harmonic => {
                let (a, b) = (secant(j - 1), secant(j));
                let s2 = (a + b) * (a + b);
                let da = 2.0 * b * b / s2;
                let db = 2.0 * a * a / s2;
                [(j - 1, -da / h), (j, (da - db) / h), (j + 1, db / h)]
            }
            SlopeRule::Endpoint if j == 0 => [(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)],
            SlopeRule::Endpoint => [(n - 3, 0.5 / h), (n - 2, -2.0 / h), (n - 1, 1.5 / h)],
            SlopeRule::EndpointCapped if j == 0 => [(0, -3.0 / h), (1, 3.0 / h), (2, 0.0)],
            SlopeRule::EndpointCapped => [(n - 2, -3.0 / h), (n - 1, 3.0 / h), (n - 3, 0.0)],
        }
    }

    #[inline]
    fn local_gradient_in_domain(&self, x: f64) -> LocalGradient {
        let n = self.knots.len();
        let (i, t) = self.locate(x);
        let b = hermite_basis(t, self.h);
        let start = i.saturating_sub(1).min(n.saturating_sub(4));
        let mut weights = [0.0; 4];
        weights[i - start] += b[0];
        weights[i + 1 - start] += b[1];
        for (slope_idx, basis) in [(i, b[2]), (i + 1, b[3])] {
            if basis == 0.0 {
                continue;
            }
            for (k, c) in self.slope_jacobian(slope_idx) {
                if c != 0.0 {
                    weights[k - start] += basis * c;
                }
            }
        }
        LocalGradient { start, weights }
    }

    /// Sparse sensitivity `∂p(x)/∂f` (clamped outside the domain).
    pub fn local_gradient(&self, x: f64) -> LocalGradient {
        let (lo, hi) = self.domain();
        let n = self.knots.len();
        if x <= lo {
            let mut weights = [0.0; 4];
            weights[0] = 1.0;
            LocalGradient { start: 0, weights }
        } else if x >= hi {
            let start = n.saturating_sub(4);
            let mut weights = [0.0; 4];
            weights[n - 1 - start] = 1.0;
            LocalGradient { start, weights }
        } else {
            self.local_gradient_in_domain(x)
        }
    }

    /// Dense sensitivity `(∂p/∂f₁(x), …, ∂p/∂f_n(x))`.
    pub fn grad_wrt_values(&self, x: f64) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(self.local_gradient(x).to_dense(self.knots.len()))
    }

    /// CSV with header `knot,value,slope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("knot,value,slope\n");
        for i in 0..self.knots.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.knots[i], self.values[i], self.slopes[i]
            ));
        }
        out
    }

    /// Parses the `knot,value,slope` format. Slopes are recomputed from the
    /// data; the column is accepted but not trusted.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty pchip csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "knot" || cols[1] != "value" {
            return Err(Error::Parse(format!("unexpected pchip header {header:?}")));
        }
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let mut fields = line.split(',').map(str::trim);
            let mut next = |name: &str| -> Result<f64> {
                fields
                    .next()
                    .ok_or_else(|| Error::Parse(format!("row {}: missing {name}", lineno + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {name}: {e}", lineno + 2)))
            };
            knots.push(next("knot")?);
            values.push(next("value")?);
        }
        Self::new(&knots, &values)
    }
}

/// Outcome of nested-partition refinement.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub level: u32,
    pub pchip: Pchip,
    pub max_error: f64,
}

/// Number of uniform sample points used to estimate the sup-norm error.
pub const SUP_SAMPLES: usize = 10_001;

/// Refines nested uniform partitions of `[a, b]` (`2^i + 1` knots at level
/// `i`) until the interpolant of `sampler` is within `epsilon` in the sup
/// norm, estimated on [`SUP_SAMPLES`] uniform points.
pub fn refine_to_tolerance<F>(
    sampler: F,
    a: f64,
    b: f64,
    epsilon: f64,
    max_level: u32,
) -> Result<Refinement>
where
    F: Fn(f64) -> f64,
{
    if !(epsilon >= 0.0) {
        return Err(Error::Invalid("epsilon must be non-negative".into()));
    }
    if !(b > a) {
        return Err(Error::InvalidPartition(format!(
            "empty interval [{a}, {b}]"
        )));
    }
    let probe = uniform_knots(a, b, SUP_SAMPLES);
    let reference: Vec<f64> = probe.iter().map(|&x| sampler(x)).collect();
    let mut last_error = f64::INFINITY;
    for level in 1..=max_level {
        let n = (1usize << level) + 1;
        let knots = uniform_knots(a, b, n);
        let values: Vec<f64> = knots.iter().map(|&x| sampler(x)).collect();
        let pchip = Pchip::new(&knots, &values)?;
        let max_error = probe
            .iter()
            .zip(&reference)
            .map(|(&x, &f)| (pchip.eval_clamped(x).0 - f).abs())
            .fold(0.0, f64::max);
        last_error = max_error;
        if max_error < epsilon {
            return Ok(Refinement {
                level,
                pchip,
                max_error,
            });
        }
    }
    Err(Error::NotConverged {
        epsilon,
        level: max_level,
        last_error,
    })
}

/// The flux parameter `β ∈ [0, β_max]^{2n}`: the first `n` entries are the
/// values of the flux at `x = 0`, the last `n` those at `x = L`, both on a
/// shared uniform enthalpy partition of `[0, u_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxParameter {
    beta: Vec<f64>,
    partition: Vec<f64>,
    beta_max: f64,
}

impl FluxParameter {
    pub fn new(beta: Vec<f64>, u_max: f64, beta_max: f64) -> Result<Self> {
        if beta.len() % 2 != 0 || beta.len() < 6 {
            return Err(Error::Shape(format!(
                "flux parameter needs an even length ≥ 6, got {}",
                beta.len()
            )));
        }
        if !(u_max > 0.0) || !(beta_max > 0.0) {
            return Err(Error::Invalid("u_max and beta_max must be positive".into()));
        }
        if let Some((i, b)) = beta
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b >= 0.0 && **b <= beta_max))
        {
            return Err(Error::BoundViolation(format!(
                "beta[{i}] = {b} outside [0, {beta_max}]"
            )));
        }
        let n = beta.len() / 2;
        Ok(Self {
            beta,
            partition: uniform_knots(0.0, u_max, n),
            beta_max,
        })
    }

    /// All-zero parameter.
    pub fn zeros(n: usize, u_max: f64, beta_max: f64) -> Result<Self> {
        Self::new(vec![0.0; 2 * n], u_max, beta_max)
    }

    /// Knot count per flux.
    pub fn n(&self) -> usize {
        self.partition.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn u_max(&self) -> f64 {
        self.partition[self.partition.len() - 1]
    }

    /// Same partition and bound, new values (must be feasible).
    pub fn with_beta(&self, beta: Vec<f64>) -> Result<Self> {
        Self::new(beta, self.u_max(), self.beta_max)
    }

    /// Same partition and bound, values taken as given without the box check.
    /// Used for finite-difference probes that may sit on the bound.
    pub fn with_beta_unchecked(&self, beta: Vec<f64>) -> Self {
        assert_eq!(beta.len(), self.beta.len());
        Self {
            beta,
            partition: self.partition.clone(),
            beta_max: self.beta_max,
        }
    }

    /// Interpolants `(β₀, β_L)`.
    pub fn fluxes(&self) -> (Pchip, Pchip) {
        let n = self.n();
        let f0 = Pchip::new(&self.partition, &self.beta[..n]).expect("validated partition");
        let fl = Pchip::new(&self.partition, &self.beta[n..]).expect("validated partition");
        (f0, fl)
    }
}
