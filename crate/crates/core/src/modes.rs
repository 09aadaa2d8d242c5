//! Temporal-mode algebra for pairs of pulse envelopes.
//!
//! All integrals use the trapezoidal rule on the envelopes' shared uniform
//! grid. Only the scalar distortion produced here is consumed by the
//! channel model.

use alloc::vec::Vec;

pub use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::sqrt;

const MIN_POINTS: usize = 8;
const GRID_TOLERANCE: f64 = 1e-9;
const NORM_TOLERANCE: f64 = 1e-9;
/// Below this distortion the complement mode is numerically meaningless.
pub const COMPLEMENT_CUTOFF: f64 = 1e-12;

/// Complex pulse amplitude sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEnvelope {
    t: Vec<f64>,
    amplitudes: Vec<Complex64>,
}

impl TemporalEnvelope {
    pub fn new(t: Vec<f64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if t.len() != amplitudes.len() {
            return Err(Error::LengthMismatch {
                grid: t.len(),
                amplitudes: amplitudes.len(),
            });
        }
        if t.len() < MIN_POINTS {
            return Err(Error::TooFewPoints {
                min: MIN_POINTS,
                got: t.len(),
            });
        }
        let step = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::NonUniformGrid { index: 0 });
        }
        for (i, pair) in t.windows(2).enumerate() {
            let h = pair[1] - pair[0];
            if !(h > 0.0) || libm::fabs(h - step) > GRID_TOLERANCE * step {
                return Err(Error::NonUniformGrid { index: i + 1 });
            }
        }
        Ok(Self { t, amplitudes })
    }

    /// A unit-norm Gaussian whose intensity `|u|^2` has standard deviation `sigma`.
    pub fn gaussian(t: Vec<f64>, center: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "must be positive",
            });
        }
        let scale = libm::pow(2.0 * core::f64::consts::PI * sigma * sigma, -0.25);
        let amplitudes = t
            .iter()
            .map(|&x| {
                let d = x - center;
                Complex64::new(scale * libm::exp(-d * d / (4.0 * sigma * sigma)), 0.0)
            })
            .collect();
        Self::new(t, amplitudes)
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        if self.t.len() != other.t.len() {
            return false;
        }
        let tol = GRID_TOLERANCE * self.step();
        self.t
            .iter()
            .zip(&other.t)
            .all(|(a, b)| libm::fabs(a - b) <= tol)
    }

    /// `∫ conj(self) other dt`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(trapezoid(
            self.step(),
            self.amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a.conj() * b),
        ))
    }

    /// `∫ |u|^2 dt`.
    pub fn energy(&self) -> f64 {
        trapezoid(
            self.step(),
            self.amplitudes
                .iter()
                .map(|a| Complex64::new(a.norm_sqr(), 0.0)),
        )
        .re
    }

    pub fn normalize(&self) -> Result<Self> {
        let energy = self.energy();
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::DegenerateEnvelope);
        }
        let scale = 1.0 / sqrt(energy);
        Ok(Self {
            t: self.t.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * scale).collect(),
        })
    }

    pub fn is_normalized(&self) -> bool {
        libm::fabs(self.energy() - 1.0) <= NORM_TOLERANCE
    }

    /// Multiplies every amplitude by `exp(i phase)`.
    pub fn with_phase(&self, phase: f64) -> Self {
        let factor = Complex64::from_polar(1.0, phase);
        Self {
            t: self.t.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// L2 norm of `self - other` under the trapezoidal rule.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let diff = trapezoid(
            self.step(),
            self.amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| Complex64::new((a - b).norm_sqr(), 0.0)),
        );
        Ok(sqrt(diff.re.max(0.0)))
    }

    /// `alpha * self + beta * other`, on the shared grid.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            t: self.t.clone(),
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }
}

/// Uniform grid of `points` samples over `[start, end]`.
pub fn uniform_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    let step = (end - start) / (points.max(2) - 1) as f64;
    (0..points).map(|i| start + step * i as f64).collect()
}

fn trapezoid(step: f64, values: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut first = None;
    let mut last = Complex64::new(0.0, 0.0);
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    let first = first.unwrap_or_default();
    (sum - (first + last) * 0.5) * step
}

/// The two symbol envelopes, normalized and on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePair {
    u0: TemporalEnvelope,
    u1: TemporalEnvelope,
}

impl ModePair {
    pub fn new(u0: TemporalEnvelope, u1: TemporalEnvelope) -> Result<Self> {
        if !u0.same_grid(&u1) {
            return Err(Error::GridMismatch);
        }
        for u in [&u0, &u1] {
            if !u.is_normalized() {
                return Err(Error::NotNormalized { norm: u.energy() });
            }
        }
        Ok(Self { u0, u1 })
    }

    /// Normalizes both envelopes before pairing them.
    pub fn from_raw(u0: &TemporalEnvelope, u1: &TemporalEnvelope) -> Result<Self> {
        Self::new(u0.normalize()?, u1.normalize()?)
    }

    /// Unit-norm Gaussians of intensity width `sigma` centred at `∓ delta_t / 2`,
    /// sampled on a grid wide enough for the tails to be negligible.
    pub fn offset_gaussians(delta_t: f64, sigma: f64, points: usize) -> Result<Self> {
        let half = 12.0 * sigma + 0.5 * libm::fabs(delta_t);
        let t = uniform_grid(-half, half, points);
        let u0 = TemporalEnvelope::gaussian(t.clone(), -0.5 * delta_t, sigma)?;
        let u1 = TemporalEnvelope::gaussian(t, 0.5 * delta_t, sigma)?;
        Self::from_raw(&u0, &u1)
    }

    pub fn u0(&self) -> &TemporalEnvelope {
        &self.u0
    }

    pub fn u1(&self) -> &TemporalEnvelope {
        &self.u1
    }

    /// `∫ conj(u0) u1 dt`.
    pub fn overlap(&self) -> Complex64 {
        self.u0
            .inner(&self.u1)
            .expect("pair shares a grid by construction")
    }

    /// `1 - |overlap|^2`, clamped into `[0, 1]`.
    pub fn distortion(&self) -> f64 {
        (1.0 - self.overlap().norm_sqr()).clamp(0.0, 1.0)
    }

    /// Normalized component of `u1` orthogonal to `u0`.
    pub fn complement_mode(&self) -> Result<TemporalEnvelope> {
        let d = self.distortion();
        if d <= COMPLEMENT_CUTOFF {
            return Err(Error::ModesCoincide);
        }
        let c = self.overlap();
        let scale = 1.0 / sqrt(d);
        self.u1
            .combine(Complex64::new(scale, 0.0), &self.u0, -c * scale)
    }
}
