//! Brute-force references built on `statrs` and plain double sums.

#![allow(dead_code)]

use okd_core::{HardDecoder, ScenarioParams, Symbol};
use statrs::distribution::{Discrete, Poisson};

pub fn pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        (k == 0) as u8 as f64
    } else {
        Poisson::new(mean).unwrap().pmf(k)
    }
}

/// Generous cutoff: far beyond any mass that matters at 1e-12.
pub fn upper(mean: f64) -> u64 {
    (mean + 15.0 * mean.sqrt() + 40.0).ceil() as u64
}

fn symbol_index(d: HardDecoder, k: u64) -> usize {
    match d.decode(k) {
        Symbol::Zero => 0,
        Symbol::Inconclusive => 1,
        Symbol::One => 2,
    }
}

/// `P(y | A = a)` for Bob's estimated variable.
pub fn bob_conditionals(p: &ScenarioParams, decoder: Option<HardDecoder>) -> [Vec<f64>; 2] {
    let bob = p.bob_channel();
    let top = upper(bob.law(0).mean().max(bob.law(1).mean()));
    let mut out = [Vec::new(), Vec::new()];
    for a in 0..2u8 {
        let m = bob.law(a).mean();
        out[a as usize] = match decoder {
            None => (0..=top).map(|k| pmf(m, k)).collect(),
            Some(d) => {
                let mut t = vec![0.0; 3];
                for k in 0..=top {
                    t[symbol_index(d, k)] += pmf(m, k);
                }
                t
            }
        };
    }
    out
}

/// I(X;Y) for equiprobable binary X.
pub fn binary_mi(c: &[Vec<f64>; 2]) -> f64 {
    c[0].iter()
        .zip(&c[1])
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            let t = |p: f64| if p > 0.0 { 0.5 * p * (p / m).log2() } else { 0.0 };
            t(a) + t(b)
        })
        .sum()
}

pub fn i_ab(p: &ScenarioParams, decoder: Option<HardDecoder>) -> f64 {
    binary_mi(&bob_conditionals(p, decoder))
}

/// I(B;E) over Bob's variable and Eve's uncollapsed pair `(k_Eu, k_Ev)`.
pub fn i_be(p: &ScenarioParams, decoder: Option<HardDecoder>) -> f64 {
    let eve = p.eve_channel();
    let q = bob_conditionals(p, decoder);
    let umax = upper(eve.u_law(0).mean().max(eve.u_law(1).mean()));
    let vmax = upper(eve.v_law(1).mean());
    let law = |a: u8, ku: u64, kv: u64| pmf(eve.u_law(a).mean(), ku) * pmf(eve.v_law(a).mean(), kv);
    let pq: Vec<f64> = q[0].iter().zip(&q[1]).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut info = 0.0;
    for ku in 0..=umax {
        for kv in 0..=vmax {
            let e = [law(0, ku, kv), law(1, ku, kv)];
            let pe = 0.5 * (e[0] + e[1]);
            if pe == 0.0 {
                continue;
            }
            for (i, &m) in pq.iter().enumerate() {
                let joint = 0.5 * (q[0][i] * e[0] + q[1][i] * e[1]);
                if joint > 0.0 {
                    info += joint * (joint / m / pe).log2();
                }
            }
        }
    }
    info
}

pub fn key(p: &ScenarioParams, decoder: Option<HardDecoder>) -> f64 {
    (i_ab(p, decoder) - i_be(p, decoder)).max(0.0)
}
