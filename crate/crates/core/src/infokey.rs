//! Mutual informations and the reverse-reconciliation key rate
//! `K = max(I(A;B) - I(B;E), 0)` for soft and hard decoding at Bob.
//!
//! Alice's bit `A` is uniform. Bob's variable `B` is either his raw
//! photocount (soft decoding) or its ternary discrimination (hard decoding).
//! Eve's variable `E = (k_Eu, k_Ev)` is handled on a collapsed alphabet:
//! every outcome with `k_Ev >= 1` has posterior `P(A = 1 | E) = 1`, so all
//! of them merge into a single symbol (written `⊤`) without changing
//! `I(B; E)`. The remaining outcomes are indexed by `k_Eu`.
//!
//! All infinite Poisson sums are truncated to windows whose excluded mass is
//! at most `2 tail_epsilon` per law; truncated vectors are never
//! renormalized. Logarithms are base 2.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::channels::{BobChannel, EveChannel, ScenarioParams};
use crate::error::{Error, Result};
use crate::math::{exp, ln, neg_xlog2x, xlog2_ratio};
use crate::photostat::{PoissonLaw, TruncationPolicy};

const LN_2: f64 = core::f64::consts::LN_2;

/// Finite probability vector over an ordered alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<L> {
    labels: Vec<L>,
    probs: Vec<f64>,
}

impl<L> DiscreteDistribution<L> {
    /// Checks nonnegativity and that the total mass does not exceed one.
    /// A mass below one is allowed and reported as [`deficit`](Self::deficit).
    pub fn new(labels: Vec<L>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidDistribution("labels and probabilities differ in length"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution("negative or non-finite probability"));
        }
        let mass: f64 = probs.iter().sum();
        if mass > 1.0 + 1e-9 {
            return Err(Error::InvalidDistribution("total mass exceeds one"));
        }
        Ok(Self { labels, probs })
    }

    pub(crate) fn from_parts(labels: Vec<L>, probs: Vec<f64>) -> Self {
        Self { labels, probs }
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.labels.iter().zip(self.probs.iter().copied())
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Missing mass `1 - sum(p)`, floored at zero.
    pub fn deficit(&self) -> f64 {
        (1.0 - self.mass()).max(0.0)
    }

    pub fn entropy_bits(&self) -> f64 {
        self.probs.iter().map(|&p| neg_xlog2x(p)).sum()
    }
}

/// `I(X; Y)` in bits for a joint distribution over pairs, with `0 log 0 = 0`.
/// Values below zero from rounding are clamped to zero.
pub fn mutual_information<X: Ord + Clone, Y: Ord + Clone>(
    joint: &DiscreteDistribution<(X, Y)>,
) -> f64 {
    let mut px: BTreeMap<X, f64> = BTreeMap::new();
    let mut py: BTreeMap<Y, f64> = BTreeMap::new();
    for ((x, y), p) in joint.iter() {
        *px.entry(x.clone()).or_default() += p;
        *py.entry(y.clone()).or_default() += p;
    }
    let info: f64 = joint
        .iter()
        .map(|((x, y), p)| xlog2_ratio(p, px[x] * py[y]))
        .sum();
    info.max(0.0)
}

/// Bob's ternary decision: a bit value or the inconclusive symbol `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Zero,
    Inconclusive,
    One,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::Zero => "0",
            Symbol::Inconclusive => "X",
            Symbol::One => "1",
        })
    }
}

/// Threshold pair: counts below `k0` decode to 0, above `k1` to 1, and
/// `k0..=k1` is inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HardDecoder {
    k0: u64,
    k1: u64,
}

impl HardDecoder {
    pub fn new(k0: u64, k1: u64) -> Result<Self> {
        if k0 > k1 {
            return Err(Error::InvalidThresholds { k0, k1 });
        }
        Ok(Self { k0, k1 })
    }

    pub fn k0(&self) -> u64 {
        self.k0
    }

    pub fn k1(&self) -> u64 {
        self.k1
    }

    pub fn decode(&self, k_b: u64) -> Symbol {
        hard_decode(k_b, self)
    }
}

pub fn hard_decode(k_b: u64, d: &HardDecoder) -> Symbol {
    if k_b < d.k0 {
        Symbol::Zero
    } else if k_b <= d.k1 {
        Symbol::Inconclusive
    } else {
        Symbol::One
    }
}

/// Which variable Bob keys on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoding {
    Soft,
    Hard(HardDecoder),
}

impl Decoding {
    pub fn name(&self) -> &'static str {
        match self {
            Decoding::Soft => "soft",
            Decoding::Hard(_) => "hard",
        }
    }

    pub fn decoder(&self) -> Option<HardDecoder> {
        match self {
            Decoding::Soft => None,
            Decoding::Hard(d) => Some(*d),
        }
    }
}

/// Key rate with its information breakdown, all in bits per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub key_rate: f64,
    pub i_ab: f64,
    pub i_be: f64,
    pub decoding: Decoding,
    pub delta_e: f64,
}

/// Conditional laws `P(y | A = 0)` and `P(y | A = 1)` on a shared finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPair {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl ConditionalPair {
    pub fn len(&self) -> usize {
        self.p0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p0.is_empty()
    }

    /// Marginal `P(y)` under a uniform bit.
    pub fn marginal(&self) -> Vec<f64> {
        self.p0
            .iter()
            .zip(&self.p1)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Largest missing mass of the two conditionals.
    pub fn deficit(&self) -> f64 {
        let m0: f64 = self.p0.iter().sum();
        let m1: f64 = self.p1.iter().sum();
        (1.0 - m0.min(m1)).max(0.0)
    }
}

/// Keys at most this many tail budgets are indistinguishable from
/// truncation error and reported as zero.
pub const KEY_RESOLUTION: f64 = 100.0;

/// Bob's conditional photocount laws on a truncated window starting at `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct BobTable {
    pub offset: u64,
    pub cond: ConditionalPair,
    /// Smallest key reported as positive.
    pub resolution: f64,
}

impl BobTable {
    pub fn new(bob: &BobChannel, policy: &TruncationPolicy) -> Result<Self> {
        let (lo, hi) = joint_window(&bob.law0, &bob.law1, policy)?;
        let p0 = (lo..=hi).map(|k| flush(bob.law0.pmf(k))).collect();
        let p1 = (lo..=hi).map(|k| flush(bob.law1.pmf(k))).collect();
        Ok(Self {
            offset: lo,
            cond: ConditionalPair { p0, p1 },
            resolution: KEY_RESOLUTION * policy.tail_epsilon(),
        })
    }

    /// Highest count covered by the window.
    pub fn upper(&self) -> u64 {
        self.offset + self.cond.len() as u64 - 1
    }

    /// Region masses `[P(0|a), P(X|a), P(1|a)]` under a hard decoder.
    pub fn ternary(&self, d: &HardDecoder) -> ConditionalPair {
        let mut p0 = [0.0; 3];
        let mut p1 = [0.0; 3];
        for (i, (a, b)) in self.cond.p0.iter().zip(&self.cond.p1).enumerate() {
            let slot = match d.decode(self.offset + i as u64) {
                Symbol::Zero => 0,
                Symbol::Inconclusive => 1,
                Symbol::One => 2,
            };
            p0[slot] += a;
            p1[slot] += b;
        }
        ConditionalPair {
            p0: p0.to_vec(),
            p1: p1.to_vec(),
        }
    }
}

/// Eve's collapsed alphabet: `k_Eu` values of the window (with `k_Ev = 0`),
/// followed by the `⊤` symbol when the complement mode carries light.
#[derive(Debug, Clone, PartialEq)]
pub struct EveTable {
    pub offset: u64,
    pub has_top: bool,
    pub cond: ConditionalPair,
    /// `P(e)` under a uniform bit.
    pub weight: Vec<f64>,
    /// `P(A = 1 | e)`, computed from log-likelihoods.
    pub posterior: Vec<f64>,
}

impl EveTable {
    pub fn new(eve: &EveChannel, policy: &TruncationPolicy) -> Result<Self> {
        let (lo, hi) = joint_window(&eve.u_law0, &eve.u_law1, policy)?;
        let v_mean = eve.v_law1.mean();
        let n = (hi - lo + 1) as usize + usize::from(v_mean > 0.0);
        let mut table = Self {
            offset: lo,
            has_top: v_mean > 0.0,
            cond: ConditionalPair {
                p0: Vec::with_capacity(n),
                p1: Vec::with_capacity(n),
            },
            weight: Vec::with_capacity(n),
            posterior: Vec::with_capacity(n),
        };
        for k in lo..=hi {
            // k_Ev = 0 is certain under bit 0 and has probability exp(-v_mean) under bit 1.
            let l0 = eve.u_law0.ln_pmf(k);
            let l1 = eve.u_law1.ln_pmf(k) - v_mean;
            table.push_log(l0, l1);
        }
        if table.has_top {
            let top = eve.click_probability();
            table.cond.p0.push(0.0);
            table.cond.p1.push(top);
            table.weight.push(0.5 * top);
            table.posterior.push(1.0);
        }
        Ok(table)
    }

    fn push_log(&mut self, l0: f64, l1: f64) {
        let m = l0.max(l1);
        let (weight, posterior) = if m == f64::NEG_INFINITY {
            (0.0, 0.5)
        } else {
            let a = exp(l0 - m);
            let b = exp(l1 - m);
            (flush(0.5 * exp(m) * (a + b)), b / (a + b))
        };
        self.cond.p0.push(flush(exp(l0)));
        self.cond.p1.push(flush(exp(l1)));
        self.weight.push(weight);
        self.posterior.push(posterior);
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }
}

/// Drops subnormal probabilities, whose halves and ratios are unreliable.
#[inline]
fn flush(p: f64) -> f64 {
    if p < f64::MIN_POSITIVE {
        0.0
    } else {
        p
    }
}

fn joint_window(a: &PoissonLaw, b: &PoissonLaw, policy: &TruncationPolicy) -> Result<(u64, u64)> {
    let (lo_a, hi_a) = a.support_window(policy)?;
    let (lo_b, hi_b) = b.support_window(policy)?;
    Ok((lo_a.min(lo_b), hi_a.max(hi_b)))
}

/// `I(A; Y)` for a uniform bit `A` sent through the given conditionals.
pub fn binary_input_information(c: &ConditionalPair) -> f64 {
    let info: f64 = c
        .p0
        .iter()
        .zip(&c.p1)
        .map(|(&a, &b)| {
            let s = 0.5 * a + 0.5 * b;
            0.5 * (xlog2_ratio(a, s) + xlog2_ratio(b, s))
        })
        .sum();
    info.max(0.0)
}

/// `I(B; E)` for the Markov chain `B - A - E` with a uniform bit `A`.
///
/// Evaluated as `sum_e P(e) D(P(B|e) || P(B))`, where
/// `P(b|e) = (1 - pi_e) P(b|0) + pi_e P(b|1)` and `pi_e = P(A = 1 | e)`.
pub fn chain_information(bob: &ConditionalPair, eve_weight: &[f64], eve_posterior: &[f64]) -> f64 {
    let marginal = bob.marginal();
    let ln_marginal: Vec<f64> = marginal
        .iter()
        .map(|&m| if m > 0.0 { ln(m) } else { 0.0 })
        .collect();
    let mut total = 0.0;
    for (&w, &pi) in eve_weight.iter().zip(eve_posterior) {
        if w <= 0.0 {
            continue;
        }
        let mut divergence = 0.0;
        for ((&b0, &b1), &lm) in bob.p0.iter().zip(&bob.p1).zip(&ln_marginal) {
            let m = (1.0 - pi) * b0 + pi * b1;
            if m > 0.0 {
                divergence += m * (ln(m) - lm);
            }
        }
        total += w * divergence;
    }
    (total / LN_2).max(0.0)
}

pub fn i_ab_soft(p: &ScenarioParams, policy: &TruncationPolicy) -> Result<f64> {
    let bob = BobTable::new(&p.bob_channel(), policy)?;
    Ok(binary_input_information(&bob.cond))
}

pub fn i_ab_hard(p: &ScenarioParams, d: &HardDecoder, policy: &TruncationPolicy) -> Result<f64> {
    let bob = BobTable::new(&p.bob_channel(), policy)?;
    Ok(binary_input_information(&bob.ternary(d)))
}

pub fn i_be(p: &ScenarioParams, decoding: &Decoding, policy: &TruncationPolicy) -> Result<f64> {
    let bob = BobTable::new(&p.bob_channel(), policy)?;
    let eve = EveTable::new(&p.eve_channel(), policy)?;
    let cond = match decoding {
        Decoding::Soft => bob.cond,
        Decoding::Hard(d) => bob.ternary(d),
    };
    Ok(chain_information(&cond, &eve.weight, &eve.posterior))
}

/// `max(I(A;B) - I(B;E), 0)` together with its two terms.
pub fn key_rate(
    p: &ScenarioParams,
    decoding: &Decoding,
    policy: &TruncationPolicy,
) -> Result<KeyRateResult> {
    let bob = BobTable::new(&p.bob_channel(), policy)?;
    let eve = EveTable::new(&p.eve_channel(), policy)?;
    Ok(key_rate_from_tables(&bob, &eve, decoding, p.delta_e()))
}

pub(crate) fn key_rate_from_tables(
    bob: &BobTable,
    eve: &EveTable,
    decoding: &Decoding,
    delta_e: f64,
) -> KeyRateResult {
    let ternary;
    let cond = match decoding {
        Decoding::Soft => &bob.cond,
        Decoding::Hard(d) => {
            ternary = bob.ternary(d);
            &ternary
        }
    };
    let i_ab = binary_input_information(cond);
    let i_be = chain_information(cond, &eve.weight, &eve.posterior);
    let diff = i_ab - i_be;
    KeyRateResult {
        key_rate: if diff > bob.resolution { diff } else { 0.0 },
        i_ab,
        i_be,
        decoding: *decoding,
        delta_e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn hard_decode_branches() {
        let d = HardDecoder::new(5, 10).unwrap();
        assert_eq!(hard_decode(3, &d), Symbol::Zero);
        assert_eq!(hard_decode(7, &d), Symbol::Inconclusive);
        assert_eq!(hard_decode(5, &d), Symbol::Inconclusive);
        assert_eq!(hard_decode(10, &d), Symbol::Inconclusive);
        assert_eq!(hard_decode(11, &d), Symbol::One);
        assert!(HardDecoder::new(3, 2).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let independent = DiscreteDistribution::new(
            vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            vec![0.25; 4],
        )
        .unwrap();
        assert_eq!(mutual_information(&independent), 0.0);
        let identity =
            DiscreteDistribution::new(vec![(0, 0), (1, 1)], vec![0.5, 0.5]).unwrap();
        assert!(libm::fabs(mutual_information(&identity) - 1.0) < 1e-15);
        // 2 * 0.4 log2(0.4 / 0.25) + 2 * 0.1 log2(0.1 / 0.25)
        let skew = DiscreteDistribution::new(
            vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            vec![0.4, 0.1, 0.1, 0.4],
        )
        .unwrap();
        assert!(libm::fabs(mutual_information(&skew) - 0.278_071_905_112_638_1) < 1e-14);
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::new(vec![0, 1], vec![0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![0, 1], vec![0.5, -0.1]).is_err());
        assert!(DiscreteDistribution::new(vec![0, 1], vec![0.7, 0.7]).is_err());
        let d = DiscreteDistribution::new(vec![0, 1], vec![0.5, 0.25]).unwrap();
        assert_eq!(d.deficit(), 0.25);
    }

    #[test]
    fn zero_modulation_carries_no_information() {
        let p = ScenarioParams::new(10.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(i_ab_soft(&p, &policy()).unwrap(), 0.0);
        let d = HardDecoder::new(8, 12).unwrap();
        assert_eq!(i_ab_hard(&p, &d, &policy()).unwrap(), 0.0);
        assert_eq!(i_be(&p, &Decoding::Soft, &policy()).unwrap(), 0.0);
        let k = key_rate(&p, &Decoding::Soft, &policy()).unwrap();
        assert_eq!(k.key_rate, 0.0);
    }

    #[test]
    fn all_inconclusive_decoder_is_uninformative() {
        let p = ScenarioParams::new(10.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let bob = BobTable::new(&p.bob_channel(), &policy()).unwrap();
        let d = HardDecoder::new(0, bob.upper()).unwrap();
        assert!(i_ab_hard(&p, &d, &policy()).unwrap() < 1e-11);
    }

    #[test]
    fn top_symbol_identifies_bit_one() {
        let p = ScenarioParams::new(10.0, 0.5, 0.01, 1.0, 0.0).unwrap();
        let eve = EveTable::new(&p.eve_channel(), &policy()).unwrap();
        assert!(eve.has_top);
        assert_eq!(*eve.posterior.last().unwrap(), 1.0);
        assert_eq!(*eve.cond.p0.last().unwrap(), 0.0);
        let p = ScenarioParams::new(10.0, 0.5, 0.0, 1.0, 0.0).unwrap();
        assert!(!EveTable::new(&p.eve_channel(), &policy()).unwrap().has_top);
    }

    #[test]
    fn orthogonal_symbols_leave_no_key() {
        // Eve collects ten times Bob's signal and sees orthogonal symbols, so
        // she misses the bit only when both of her detectors stay dark.
        let p = ScenarioParams::new(50.0, 2.0, 1.0, 0.1, 0.0).unwrap();
        let k = key_rate(&p, &Decoding::Soft, &policy()).unwrap();
        assert!(k.i_ab > 0.2);
        assert!(k.key_rate < 1e-10);
    }

    #[test]
    fn key_rate_clamps_negative_difference() {
        let p = ScenarioParams::new(10.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let bob = BobTable::new(&p.bob_channel(), &policy()).unwrap();
        // An Eve table whose symbols reveal the bit exactly.
        let eve = EveTable {
            offset: 0,
            has_top: false,
            cond: ConditionalPair {
                p0: vec![1.0, 0.0],
                p1: vec![0.0, 1.0],
            },
            weight: vec![0.5, 0.5],
            posterior: vec![0.0, 1.0],
        };
        let k = key_rate_from_tables(&bob, &eve, &Decoding::Soft, 1.0);
        assert!(libm::fabs(k.i_ab - k.i_be) < 1e-12);
        assert_eq!(k.key_rate, 0.0);
    }
}
