//! Maximisation of the key rate over the modulation depth and, for hard
//! decoding, over Bob's discrimination thresholds.
//!
//! The depth search scans a uniform grid on `[0, sqrt(nbar_E)]` and then
//! refines around the best grid point with golden-section search; the key
//! is not assumed unimodal. Threshold pairs are searched exhaustively with
//! branch and bound: bounds come from coarse-grained views of Eve's symbols
//! and, per depth, from the soft key, since thresholding Bob's count cannot
//! raise `I(A;B|E)`, which is the key under the Markov chain `B - A - E`.

use alloc::vec::Vec;

use crate::channels::{OperatingPoint, ScenarioParams};
use crate::error::{Error, Result};
use crate::infokey::{
    key_rate, key_rate_from_tables, BobTable, ConditionalPair, Decoding, EveTable, HardDecoder,
    KeyRateResult,
};
use crate::math::{log2, neg_xlog2x, xlog2_ratio};
use crate::photostat::TruncationPolicy;

/// Pairs whose upper bound is within this margin of the incumbent are
/// evaluated exactly.
const PRUNE_MARGIN: f64 = 1e-9;
const MAX_GOLDEN_STEPS: usize = 200;
/// Posterior-bin counts of the coarse Eve alphabets used as pruning bounds.
const BOUND_BINS: [usize; 2] = [4, 32];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationBudget {
    pub coarse_grid_points: usize,
    /// Relative tolerance on the refined modulation depth.
    pub refine_tolerance: f64,
    /// Widest Bob window the threshold search accepts; `None` means no cap.
    pub max_threshold_span: Option<u64>,
}

impl OptimizationBudget {
    pub fn new(
        coarse_grid_points: usize,
        refine_tolerance: f64,
        max_threshold_span: Option<u64>,
    ) -> Result<Self> {
        if coarse_grid_points < 8 {
            return Err(Error::InvalidParameter {
                name: "coarse_grid_points",
                reason: "must be at least 8",
            });
        }
        if !(refine_tolerance > 0.0 && refine_tolerance <= 1e-2) {
            return Err(Error::InvalidParameter {
                name: "refine_tolerance",
                reason: "must lie in (0, 1e-2]",
            });
        }
        Ok(Self {
            coarse_grid_points,
            refine_tolerance,
            max_threshold_span,
        })
    }
}

impl Default for OptimizationBudget {
    fn default() -> Self {
        Self {
            coarse_grid_points: 64,
            refine_tolerance: 1e-4,
            max_threshold_span: None,
        }
    }
}

/// One evaluated modulation depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub delta_e: f64,
    /// The key at `delta_e` when `exact`, otherwise an upper bound on it
    /// (the incumbent the point was pruned against).
    pub key_rate: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedPoint {
    /// Operating point with the optimal depth filled in.
    pub params: ScenarioParams,
    pub result: KeyRateResult,
    /// Every depth evaluated during the search, in evaluation order.
    pub probes: Vec<Probe>,
}

impl OptimizedPoint {
    pub fn decoder(&self) -> Option<HardDecoder> {
        self.result.decoding.decoder()
    }

    pub fn key_rate(&self) -> f64 {
        self.result.key_rate
    }
}

/// Best soft-decoding key over the modulation depth.
pub fn optimize_soft(
    point: &OperatingPoint,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
) -> Result<OptimizedPoint> {
    optimize_fixed_decoding(point, &Decoding::Soft, budget, policy)
}

/// Best hard-decoding key over the modulation depth and threshold pairs.
///
/// Coarse-grid depths are searched only for pairs beating the incumbent;
/// a depth with none is recorded as an inexact probe bounded by it.
pub fn optimize_hard(
    point: &OperatingPoint,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
) -> Result<OptimizedPoint> {
    let mut hint = None;
    maximize_over_delta(point, budget, |params, floor| {
        let result = thresholds_above(params, budget, policy, hint, floor)?;
        if let Some(r) = result {
            if r.key_rate > 0.0 {
                hint = r.decoding.decoder();
            }
        }
        Ok(result)
    })
}

/// Best key over the modulation depth with the given decoding held fixed.
pub fn optimize_fixed_decoding(
    point: &OperatingPoint,
    decoding: &Decoding,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
) -> Result<OptimizedPoint> {
    maximize_over_delta(point, budget, |params, _| {
        let bob = BobTable::new(&params.bob_channel(), policy)?;
        let eve = EveTable::new(&params.eve_channel(), policy)?;
        Ok(Some(key_rate_from_tables(&bob, &eve, decoding, params.delta_e())))
    })
}

type Incumbent = Option<(ScenarioParams, KeyRateResult)>;

/// `eval(params, floor)` returns the key at `params`, or `None` when it can
/// certify the key does not exceed `floor`. A `None` floor demands a value.
fn maximize_over_delta<F>(
    point: &OperatingPoint,
    budget: &OptimizationBudget,
    mut eval: F,
) -> Result<OptimizedPoint>
where
    F: FnMut(&ScenarioParams, Option<f64>) -> Result<Option<KeyRateResult>>,
{
    let max = point.max_delta();
    let n = budget.coarse_grid_points.max(2);
    let step = max / (n - 1) as f64;
    let mut probes = Vec::with_capacity(n + 64);
    let mut best: Incumbent = None;
    let mut best_index = 0;

    let mut record = |delta: f64, prune: bool, probes: &mut Vec<Probe>, best: &mut Incumbent| -> Result<Option<f64>> {
        let params = point.with_delta(delta)?;
        let floor = if prune { best.map(|(_, r)| r.key_rate) } else { None };
        match eval(&params, floor)? {
            Some(result) => {
                probes.push(Probe {
                    delta_e: params.delta_e(),
                    key_rate: result.key_rate,
                    exact: true,
                });
                if best.is_none_or(|(_, b)| result.key_rate > b.key_rate) {
                    *best = Some((params, result));
                    return Ok(Some(result.key_rate));
                }
                Ok(None)
            }
            None => {
                probes.push(Probe {
                    delta_e: params.delta_e(),
                    key_rate: floor.expect("pruning needs a floor"),
                    exact: false,
                });
                Ok(None)
            }
        }
    };

    for i in 0..n {
        let delta = if i == n - 1 { max } else { step * i as f64 };
        if record(delta, true, &mut probes, &mut best)?.is_some() {
            best_index = i;
        }
    }

    let best_key = best.map(|(_, r)| r.key_rate).unwrap_or(0.0);
    if best_key > 0.0 {
        let lo = step * best_index.saturating_sub(1) as f64;
        let hi = (step * (best_index + 1) as f64).min(max);
        let abs_floor = budget.refine_tolerance * step * 1e-3;
        golden_section_max(
            |x| {
                record(x, false, &mut probes, &mut best)?;
                Ok(probes.last().expect("just recorded").key_rate)
            },
            lo,
            hi,
            budget.refine_tolerance,
            abs_floor,
        )?;
    }

    let (params, result) = best.expect("grid has at least two points");
    Ok(OptimizedPoint {
        params,
        result,
        probes,
    })
}

/// Cross-seeds a curve of optimised points that differ only in distortion,
/// sorted by increasing distortion.
///
/// Eve at distortion `D' > D` can reproduce her statistics at `D` by handing
/// each `v` photon back to `u` with probability `1 - D/D'`, so the optimal
/// key never increases with `D`. Whenever a point falls below its successor
/// the successor's depth (and thresholds, for hard decoding) is tried at
/// that point and kept if better.
pub fn reconcile_distortion_curve(
    curve: &mut [OptimizedPoint],
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
) -> Result<()> {
    for i in (0..curve.len().saturating_sub(1)).rev() {
        let (head, tail) = curve.split_at_mut(i + 1);
        let (cur, next) = (&mut head[i], &tail[0]);
        if cur.key_rate() >= next.key_rate() {
            continue;
        }
        let params = cur.params.operating_point().with_delta(next.params.delta_e())?;
        let candidate = match next.result.decoding {
            Decoding::Soft => key_rate(&params, &Decoding::Soft, policy)?,
            Decoding::Hard(d) => best_thresholds(&params, budget, policy, Some(d))?,
        };
        cur.probes.push(Probe {
            delta_e: params.delta_e(),
            key_rate: candidate.key_rate,
            exact: true,
        });
        if candidate.key_rate > cur.key_rate() {
            cur.params = params;
            cur.result = candidate;
        }
    }
    Ok(())
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
///
/// Stops once the bracket is narrower than `rel_tol` times its midpoint
/// (or `abs_tol`, whichever is larger). Returns the best point seen.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64, abs_tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut steps = 0;
    while (b - a) > (rel_tol * 0.5 * (a + b)).max(abs_tol) && steps < MAX_GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        steps += 1;
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Exhaustive search of the threshold pair maximizing the hard-decoding key
/// at fixed modulation depth.
///
/// Thresholds are searched over Bob's truncated window; thresholds outside
/// it are equivalent to ones on its edge and are reported by the smallest
/// equivalent value. Ties go to the lexicographically smallest pair, and a
/// point with no positive key reports `(0, 0)`. The optional `hint` only
/// seeds the incumbent used for pruning and never changes the result.
pub fn best_thresholds(
    params: &ScenarioParams,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
    hint: Option<HardDecoder>,
) -> Result<KeyRateResult> {
    Ok(thresholds_above(params, budget, policy, hint, None)?.expect("no floor given"))
}

/// Like [`best_thresholds`], but returns `None` when no pair beats `floor`.
fn thresholds_above(
    params: &ScenarioParams,
    budget: &OptimizationBudget,
    policy: &TruncationPolicy,
    hint: Option<HardDecoder>,
    floor: Option<f64>,
) -> Result<Option<KeyRateResult>> {
    let bob = BobTable::new(&params.bob_channel(), policy)?;
    let eve = EveTable::new(&params.eve_channel(), policy)?;
    let span = bob.cond.len() as u64;
    if let Some(cap) = budget.max_threshold_span {
        if span > cap {
            return Err(Error::ThresholdSpanExceeded { span, cap });
        }
    }
    if let Some(f) = floor {
        // Thresholding B cannot raise I(A;B|E), so the soft key bounds every pair.
        if key_rate_from_tables(&bob, &eve, &Decoding::Soft, params.delta_e()).key_rate <= f {
            return Ok(None);
        }
    }
    let search = ThresholdSearch::new(&bob, &eve);
    let decoder = match (search.run(hint, floor.unwrap_or(0.0).max(bob.resolution)), floor) {
        (Some(d), _) => d,
        (None, Some(_)) => return Ok(None),
        // No pair has a positive key.
        (None, None) => HardDecoder::new(0, 0).expect("valid pair"),
    };
    Ok(Some(key_rate_from_tables(
        &bob,
        &eve,
        &Decoding::Hard(decoder),
        params.delta_e(),
    )))
}

/// `P(q) * H(E | q)` in bits for a region with conditional masses `x`, `y`
/// under bits 0 and 1: `-1/2 sum_e s_e log2(s_e / (x + y))`,
/// `s_e = x P(e|0) + y P(e|1)`.
fn weighted_conditional_entropy(eve: &ConditionalPair, x: f64, y: f64) -> f64 {
    let total = x + y;
    if total <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (&e0, &e1) in eve.p0.iter().zip(&eve.p1) {
        let s = x * e0 + y * e1;
        if s > 0.0 {
            acc += s * log2(s / total);
        }
    }
    -0.5 * acc
}

/// Contribution of one region to `I(A; Q)`.
fn region_information(x: f64, y: f64) -> f64 {
    let m = 0.5 * (x + y);
    0.5 * (xlog2_ratio(x, m) + xlog2_ratio(y, m))
}

/// Eve's alphabet with `I(Q; E) = H(E) - sum_q P(q) H(E | q)` precomputed
/// for the regions that depend on a single threshold.
struct EveView {
    cond: ConditionalPair,
    entropy: f64,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl EveView {
    fn new(cond: ConditionalPair, prefix: &[(f64, f64)], suffix: &[(f64, f64)]) -> Self {
        let entropy = cond
            .p0
            .iter()
            .zip(&cond.p1)
            .map(|(a, b)| neg_xlog2x(0.5 * (a + b)))
            .sum();
        let below = prefix
            .iter()
            .map(|&(x, y)| weighted_conditional_entropy(&cond, x, y))
            .collect();
        let above = suffix
            .iter()
            .map(|&(x, y)| weighted_conditional_entropy(&cond, x, y))
            .collect();
        Self {
            cond,
            entropy,
            below,
            above,
        }
    }

    /// `I(Q; E)` for the region split `(a, b)`.
    fn information(&self, a: usize, b: usize, mid: (f64, f64)) -> f64 {
        self.entropy
            - self.below[a]
            - self.above[b]
            - weighted_conditional_entropy(&self.cond, mid.0, mid.1)
    }
}

/// Merges Eve's symbols into posterior bins; `⊤` keeps a bin of its own.
fn binned(eve: &EveTable, bins: usize) -> ConditionalPair {
    let mut p0 = alloc::vec![0.0; bins + 1];
    let mut p1 = alloc::vec![0.0; bins + 1];
    let top_index = eve.len().wrapping_sub(usize::from(eve.has_top));
    for (i, ((&a, &b), &pi)) in eve
        .cond
        .p0
        .iter()
        .zip(&eve.cond.p1)
        .zip(&eve.posterior)
        .enumerate()
    {
        let slot = if eve.has_top && i == top_index {
            bins
        } else {
            ((pi * bins as f64) as usize).min(bins - 1)
        };
        p0[slot] += a;
        p1[slot] += b;
    }
    ConditionalPair { p0, p1 }
}

struct ThresholdSearch<'a> {
    bob: &'a BobTable,
    /// Masses of the first `a` window entries under each bit.
    prefix: Vec<(f64, f64)>,
    /// Masses of the window entries from index `b` on.
    suffix: Vec<(f64, f64)>,
    bounds: Vec<EveView>,
    exact: EveView,
}

impl<'a> ThresholdSearch<'a> {
    fn new(bob: &'a BobTable, eve: &EveTable) -> Self {
        let w = bob.cond.len();
        let mut prefix = Vec::with_capacity(w + 1);
        let mut acc = (0.0, 0.0);
        prefix.push(acc);
        for i in 0..w {
            acc = (acc.0 + bob.cond.p0[i], acc.1 + bob.cond.p1[i]);
            prefix.push(acc);
        }
        let mut suffix = alloc::vec![(0.0, 0.0); w + 1];
        let mut acc = (0.0, 0.0);
        for i in (0..w).rev() {
            acc = (acc.0 + bob.cond.p0[i], acc.1 + bob.cond.p1[i]);
            suffix[i] = acc;
        }
        let bounds = BOUND_BINS
            .iter()
            .map(|&m| EveView::new(binned(eve, m), &prefix, &suffix))
            .collect();
        let exact = EveView::new(eve.cond.clone(), &prefix, &suffix);
        Self {
            bob,
            prefix,
            suffix,
            bounds,
            exact,
        }
    }

    fn width(&self) -> usize {
        self.bob.cond.len()
    }

    /// Smallest thresholds equivalent to the split where the first `a`
    /// window entries decode to 0 and entries `a..b` are inconclusive.
    fn decoder(&self, a: usize, b: usize) -> HardDecoder {
        let lo = self.bob.offset;
        let k0 = if a == 0 { 0 } else { lo + a as u64 };
        let k1 = if b == 0 { k0 } else { (lo + b as u64 - 1).max(k0) };
        HardDecoder::new(k0, k1).expect("k0 <= k1 by construction")
    }

    /// Window split of an arbitrary decoder.
    fn split(&self, d: &HardDecoder) -> (usize, usize) {
        let lo = self.bob.offset;
        let w = self.width();
        let a = d.k0().saturating_sub(lo).min(w as u64) as usize;
        let b = (d.k1() + 1).saturating_sub(lo).min(w as u64) as usize;
        (a, b.max(a))
    }

    fn key(&self, a: usize, b: usize) -> f64 {
        let (mid, i_ab) = self.region_terms(a, b);
        i_ab - self.exact.information(a, b, mid)
    }

    fn region_terms(&self, a: usize, b: usize) -> ((f64, f64), f64) {
        let below = self.prefix[a];
        let above = self.suffix[b];
        let upto = self.prefix[b];
        let mid = ((upto.0 - below.0).max(0.0), (upto.1 - below.1).max(0.0));
        let i_ab = region_information(below.0, below.1)
            + region_information(mid.0, mid.1)
            + region_information(above.0, above.1);
        (mid, i_ab)
    }

    /// Lexicographically smallest pair among those maximizing the key,
    /// provided that key exceeds `floor`.
    fn run(&self, hint: Option<HardDecoder>, floor: f64) -> Option<HardDecoder> {
        let w = self.width();
        let mut best = floor;
        let mut best_pair = None;
        let mut best_decoder: Option<HardDecoder> = None;

        if let Some(h) = hint {
            let (a, b) = self.split(&h);
            let k = self.key(a, b);
            if k > best {
                best = k;
                best_pair = Some((a, b));
                best_decoder = Some(self.decoder(a, b));
            }
        }

        for a in 0..=w {
            for b in a..=w {
                if b == a && a != 0 && a != w {
                    continue;
                }
                if Some((a, b)) == best_pair {
                    continue;
                }
                let (mid, i_ab) = self.region_terms(a, b);
                let cut = best - PRUNE_MARGIN;
                if i_ab <= floor || i_ab < cut {
                    continue;
                }
                let pruned = self.bounds.iter().any(|view| {
                    let ub = i_ab - view.information(a, b, mid);
                    ub <= floor || ub < cut
                });
                if pruned {
                    continue;
                }
                let k = i_ab - self.exact.information(a, b, mid);
                if k <= floor {
                    continue;
                }
                let decoder = self.decoder(a, b);
                let better = match best_decoder {
                    None => true,
                    Some(incumbent) => k > best || (k == best && decoder < incumbent),
                };
                if better {
                    best = k;
                    best_pair = Some((a, b));
                    best_decoder = Some(decoder);
                }
            }
        }
        best_decoder
    }
}
