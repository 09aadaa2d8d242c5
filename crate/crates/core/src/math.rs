//! Scalar helpers shared by the numerical modules.

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2: f64 = core::f64::consts::LN_2;

/// `ln(n!) - ((n + 1/2) ln n - n + ln sqrt(2 pi))` for integer `n`.
const STIRLING_ERROR: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_67,
    0.041_340_695_955_409_294_093_82,
    0.027_677_925_684_998_339_148_79,
    0.020_790_672_103_765_093_111_52,
    0.016_644_691_189_821_192_163_19,
    0.013_876_128_823_070_747_998_75,
    0.011_896_709_945_891_770_095_06,
    0.010_411_265_261_972_096_497_48,
    0.009_255_462_182_712_732_917_729,
    0.008_330_563_433_362_871_256_469,
    0.007_573_675_487_951_840_794_972,
    0.006_942_840_107_209_529_865_664,
    0.006_408_994_188_004_207_068_44,
    0.005_951_370_112_758_847_735_624,
    0.005_554_733_551_962_801_371_039,
];

pub(crate) fn stirling_error(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < 16 {
        return STIRLING_ERROR[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / m) + m - x`, accurate when `x` is close to `m`.
pub(crate) fn deviance(x: f64, m: f64) -> f64 {
    if libm::fabs(x - m) < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1.0;
        loop {
            ej *= v;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return next;
            }
            s = next;
            j += 1.0;
        }
    }
    x * libm::log(x / m) + m - x
}

/// `ln(n!)`.
pub(crate) fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let x = n as f64;
    stirling_error(n) + (x + 0.5) * libm::log(x) - x + LN_SQRT_2PI
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log(x) / LN_2
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `-x log2 x` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn neg_xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        -x * log2(x)
    } else {
        0.0
    }
}

/// `x log2(x / y)` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn xlog2_ratio(x: f64, y: f64) -> f64 {
    if x > 0.0 {
        x * log2(x / y)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_products() {
        let mut acc = 0.0f64;
        for n in 1..=60u64 {
            acc += libm::log(n as f64);
            let rel = libm::fabs(ln_factorial(n) - acc) / libm::fmax(acc, 1.0);
            assert!(rel < 1e-13, "n = {}: {} vs {}", n, ln_factorial(n), acc);
        }
    }

    #[test]
    fn deviance_small_and_large_branches_agree() {
        for &(x, m) in &[(10.0, 10.5), (100.0, 99.0), (3.0, 30.0), (500.0, 480.0)] {
            let direct = x * libm::log(x / m) + m - x;
            assert!(libm::fabs(deviance(x, m) - direct) < 1e-9 * (1.0 + libm::fabs(direct)));
        }
    }
}
