//! Poisson photocount laws and certified truncation of their support.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::infokey::DiscreteDistribution;
use crate::math::{deviance, exp, ln, stirling_error, LN_SQRT_2PI};

/// Truncation settings for infinite Poisson sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    tail_epsilon: f64,
    hard_cap: u64,
}

impl TruncationPolicy {
    pub fn new(tail_epsilon: f64, hard_cap: u64) -> Result<Self> {
        if !(tail_epsilon > 0.0 && tail_epsilon < 1e-6) {
            return Err(Error::InvalidParameter {
                name: "tail_epsilon",
                reason: "must lie in (0, 1e-6)",
            });
        }
        if hard_cap < 16 {
            return Err(Error::InvalidParameter {
                name: "hard_cap",
                reason: "must be at least 16",
            });
        }
        Ok(Self {
            tail_epsilon,
            hard_cap,
        })
    }

    pub fn tail_epsilon(&self) -> f64 {
        self.tail_epsilon
    }

    pub fn hard_cap(&self) -> u64 {
        self.hard_cap
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_epsilon: 1e-12,
            hard_cap: 1_000_000,
        }
    }
}

/// Poisson law of photocounts per slot. A zero mean is the point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonLaw {
    mean: f64,
}

impl PoissonLaw {
    pub fn new(mean: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mean",
                reason: "must be finite and nonnegative",
            });
        }
        Ok(Self { mean })
    }

    pub const fn point_mass() -> Self {
        Self { mean: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Natural log of the pmf; `-inf` outside the support.
    ///
    /// Uses the saddle-point form `-stirlerr(k) - bd0(k, mean) - ln sqrt(2 pi k)`,
    /// which keeps full relative precision far into both tails.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        let mu = self.mean;
        if mu == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if k == 0 {
            return -mu;
        }
        let x = k as f64;
        -stirling_error(k) - deviance(x, mu) - LN_SQRT_2PI - 0.5 * ln(x)
    }

    pub fn pmf(&self, k: u64) -> f64 {
        exp(self.ln_pmf(k))
    }

    /// Smallest `K` with `P(k > K) <= tail_epsilon`.
    pub fn support_bound(&self, policy: &TruncationPolicy) -> Result<u64> {
        let mu = self.mean;
        if mu == 0.0 {
            return Ok(0);
        }
        let eps = policy.tail_epsilon;
        let cap = policy.hard_cap;
        let cap_err = Error::TruncationCapExceeded { mean: mu, cap };

        // Past the mode the terms shrink at least geometrically with ratio
        // mu / (k + 2), which gives a certified bound on the tail beyond k.
        let mut k = libm::floor(mu) as u64;
        if k > cap {
            return Err(cap_err);
        }
        loop {
            let next = self.pmf(k + 1);
            let ratio = mu / (k as f64 + 2.0);
            if ratio < 1.0 && next / (1.0 - ratio) <= eps {
                break;
            }
            k += 1;
            if k > cap {
                return Err(cap_err);
            }
        }

        let mut tail = self.upper_tail(k);
        while k > 0 {
            let p = self.pmf(k);
            if tail + p > eps {
                break;
            }
            tail += p;
            k -= 1;
        }
        Ok(k)
    }

    /// Largest `L` with `P(k < L) <= tail_epsilon`.
    pub fn support_floor(&self, policy: &TruncationPolicy) -> u64 {
        let eps = policy.tail_epsilon;
        let mut cumulative = 0.0;
        let mut k = 0u64;
        loop {
            let p = self.pmf(k);
            if cumulative + p > eps {
                return k;
            }
            cumulative += p;
            k += 1;
        }
    }

    /// Inclusive window `[floor, bound]` holding all but `2 tail_epsilon` of the mass.
    pub fn support_window(&self, policy: &TruncationPolicy) -> Result<(u64, u64)> {
        let hi = self.support_bound(policy)?;
        Ok((self.support_floor(policy).min(hi), hi))
    }

    /// The pmf on `{0..=k_max}`, not renormalized.
    pub fn truncated_pmf_vector(&self, k_max: u64) -> DiscreteDistribution<u64> {
        let labels: Vec<u64> = (0..=k_max).collect();
        let probs = labels.iter().map(|&k| self.pmf(k)).collect();
        DiscreteDistribution::from_parts(labels, probs)
    }

    /// `P(k > K)` summed outward until the terms stop contributing.
    fn upper_tail(&self, k: u64) -> f64 {
        let mut sum = 0.0;
        let mut j = k + 1;
        loop {
            let p = self.pmf(j);
            sum += p;
            if p <= sum * 1e-17 || p == 0.0 {
                return sum;
            }
            j += 1;
        }
    }
}
