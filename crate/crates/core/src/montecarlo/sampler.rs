//! Exact Poisson variates from a uniform 64-bit source.

use rand_xoshiro::rand_core::Rng;

use crate::math::{exp, ln, ln_factorial, sqrt};

/// Means below this use sequential inversion, larger ones PTRS.
pub const INVERSION_LIMIT: f64 = 30.0;

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws one Poisson(`mean`) count. `mean` must be finite and nonnegative.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        inversion(rng, mean)
    } else {
        ptrs(rng, mean)
    }
}

fn inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let mut u = uniform(rng);
    let mut p = exp(-mean);
    let mut k = 0u64;
    // The pmf underflows near k ~ 170 for mean < 30, far past any
    // realistic u; the cap keeps rounding from looping forever.
    while u > p && k < 1000 {
        u -= p;
        k += 1;
        p *= mean / k as f64;
    }
    k
}

/// Hörmann's transformed rejection with squeeze (PTRS), valid for mean >= 10.
fn ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = sqrt(mean);
    let loglam = ln(mean);
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = uniform(rng) - 0.5;
        let v = uniform(rng);
        let us = 0.5 - libm::fabs(u);
        let k = libm::floor((2.0 * a / us + b) * u + mean + 0.43);
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = ln(v) + ln(inv_alpha) - ln(a / (us * us) + b);
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}
