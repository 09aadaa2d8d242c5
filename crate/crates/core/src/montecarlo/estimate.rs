//! Plug-in mutual information from contingency tables, with standard errors
//! from a nonoverlapping-block bootstrap.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::sampler::uniform;
use super::{
    chunk_seed, simulate_range, SimConfig, SlotRecord, BOOTSTRAP_BLOCKS, BOOTSTRAP_REPLICATES,
};
use crate::error::Result;
use crate::infokey::{Decoding, KeyRateResult, Symbol};
use crate::math::{log2, sqrt};

/// Eve's collapsed observation: `k_Eu` when `k_Ev = 0`, otherwise this.
const TOP: u64 = u64::MAX;

/// Salt separating the bootstrap stream from the slot streams.
const BOOTSTRAP_SALT: u64 = 0xB007_57A9_0000_0001;

type Cell = (u8, u64, u64);

/// Joint counts of `(q_A, Bob's estimate, Eve's observation)` kept per
/// bootstrap block.
///
/// Tallies over disjoint slot ranges of one run can be merged in any order;
/// the result only depends on which slots were observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    cfg: SimConfig,
    observed: u64,
    blocks: Vec<BTreeMap<Cell, u64>>,
}

/// How entropies are estimated from counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Maximum likelihood: the entropy of the empirical frequencies.
    #[default]
    PlugIn,
    /// Plug-in plus `(m - 1) / 2N` nats per entropy, `m` the occupied cells.
    MillerMadow,
}

/// Standard errors of a [`MonteCarloEstimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardErrors {
    pub i_ab: f64,
    pub i_be: f64,
    pub key_rate: f64,
}

/// Plug-in estimates in bits per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub slots: u64,
    pub i_ab_hat: f64,
    pub i_be_hat: f64,
    /// `max(i_ab_hat - i_be_hat, 0)`.
    pub k_hat: f64,
    /// Bootstrap standard errors; the key's comes from the unclamped
    /// replicate differences.
    pub standard_errors: StandardErrors,
}

/// Which of the three estimates lie within the tolerance of the analytic
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agreement {
    pub i_ab: bool,
    pub i_be: bool,
    pub key_rate: bool,
}

impl Agreement {
    pub fn all(&self) -> bool {
        self.i_ab && self.i_be && self.key_rate
    }
}

impl MonteCarloEstimate {
    /// Compares against analytic values with a tolerance of `z` standard
    /// errors.
    pub fn agreement(&self, analytic: &KeyRateResult, z: f64) -> Agreement {
        let se = &self.standard_errors;
        let within = |hat: f64, exact: f64, se: f64| libm::fabs(hat - exact) <= z * se;
        Agreement {
            i_ab: within(self.i_ab_hat, analytic.i_ab, se.i_ab),
            i_be: within(self.i_be_hat, analytic.i_be, se.i_be),
            key_rate: within(self.k_hat, analytic.key_rate, se.key_rate),
        }
    }
}

impl Tally {
    /// An empty tally for `cfg`; fails when the run is too short to estimate.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.check_estimable()?;
        Ok(Self {
            cfg: *cfg,
            observed: 0,
            blocks: vec![BTreeMap::new(); BOOTSTRAP_BLOCKS],
        })
    }

    /// Simulates and tallies slots `start..end`.
    pub fn from_range(cfg: &SimConfig, start: u64, end: u64) -> Result<Self> {
        let mut tally = Self::new(cfg)?;
        let mut stream = simulate_range(cfg, start, end);
        loop {
            let index = stream.position();
            match stream.next() {
                Some(record) => tally.observe(index, &record),
                None => break,
            }
        }
        Ok(tally)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Slots tallied so far.
    pub fn observed(&self) -> u64 {
        self.observed
    }

    /// Adds slot number `index` of the run.
    pub fn observe(&mut self, index: u64, r: &SlotRecord) {
        let bob = match &self.cfg.decoding {
            Decoding::Soft => r.k_b,
            Decoding::Hard(d) => match d.decode(r.k_b) {
                Symbol::Zero => 0,
                Symbol::Inconclusive => 1,
                Symbol::One => 2,
            },
        };
        let eve = if r.k_ev == 0 { r.k_eu } else { TOP };
        let block = self.cfg.block_of(index);
        *self.blocks[block].entry((r.q_a, bob, eve)).or_insert(0) += 1;
        self.observed += 1;
    }

    /// Folds in a tally of other slots of the same run.
    ///
    /// # Panics
    /// If the tallies belong to different runs.
    pub fn merge(&mut self, other: &Tally) {
        assert_eq!(self.cfg, other.cfg, "tallies of different runs");
        for (mine, theirs) in self.blocks.iter_mut().zip(&other.blocks) {
            for (cell, n) in theirs {
                *mine.entry(*cell).or_insert(0) += n;
            }
        }
        self.observed += other.observed;
    }

    /// Plug-in estimates and their bootstrap standard errors.
    pub fn estimate(&self) -> MonteCarloEstimate {
        self.estimate_with(Estimator::PlugIn)
    }

    /// Estimates with the chosen entropy estimator.
    pub fn estimate_with(&self, estimator: Estimator) -> MonteCarloEstimate {
        let table = Indexed::new(&self.blocks);
        let full: Vec<u64> = {
            let mut c = vec![0u64; table.cells.len()];
            for block in &table.blocks {
                for &(i, n) in block {
                    c[i] += n;
                }
            }
            c
        };
        let (i_ab_hat, i_be_hat) = table.information(&full, estimator);

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(chunk_seed(self.cfg.seed ^ BOOTSTRAP_SALT, 0));
        let mut acc = [Moments::default(); 3];
        let mut counts = vec![0u64; table.cells.len()];
        for _ in 0..BOOTSTRAP_REPLICATES {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..BOOTSTRAP_BLOCKS {
                let b = (uniform(&mut rng) * BOOTSTRAP_BLOCKS as f64) as usize;
                for &(i, n) in &table.blocks[b] {
                    counts[i] += n;
                }
            }
            let (ab, be) = table.information(&counts, estimator);
            acc[0].push(ab);
            acc[1].push(be);
            acc[2].push(ab - be);
        }

        MonteCarloEstimate {
            slots: self.observed,
            i_ab_hat,
            i_be_hat,
            k_hat: (i_ab_hat - i_be_hat).max(0.0),
            standard_errors: StandardErrors {
                i_ab: acc[0].std_dev(),
                i_be: acc[1].std_dev(),
                key_rate: acc[2].std_dev(),
            },
        }
    }
}

/// Simulates the whole run and estimates the key rate.
pub fn estimate_key_rate(cfg: &SimConfig) -> Result<MonteCarloEstimate> {
    Ok(Tally::from_range(cfg, 0, cfg.slots)?.estimate())
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn std_dev(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            sqrt(self.m2 / (self.n - 1.0))
        }
    }
}

/// The tally re-expressed over dense cell indices, with each cell's
/// coordinates in the marginal tables needed for the two informations.
struct Indexed {
    cells: Vec<CellIndex>,
    blocks: Vec<Vec<(usize, u64)>>,
    sizes: [usize; 4],
}

#[derive(Clone, Copy)]
struct CellIndex {
    a: usize,
    b: usize,
    e: usize,
    ab: usize,
    be: usize,
}

impl Indexed {
    fn new(blocks: &[BTreeMap<Cell, u64>]) -> Self {
        let mut all: BTreeMap<Cell, usize> = BTreeMap::new();
        for block in blocks {
            for cell in block.keys() {
                all.insert(*cell, 0);
            }
        }
        let mut b_ix = BTreeMap::new();
        let mut e_ix = BTreeMap::new();
        let mut ab_ix = BTreeMap::new();
        let mut be_ix = BTreeMap::new();
        for &(a, b, e) in all.keys() {
            let n = b_ix.len();
            b_ix.entry(b).or_insert(n);
            let n = e_ix.len();
            e_ix.entry(e).or_insert(n);
            let n = ab_ix.len();
            ab_ix.entry((a, b)).or_insert(n);
            let n = be_ix.len();
            be_ix.entry((b, e)).or_insert(n);
        }
        let mut cells = Vec::with_capacity(all.len());
        for (i, (&(a, b, e), slot)) in all.iter_mut().enumerate() {
            *slot = i;
            cells.push(CellIndex {
                a: a as usize,
                b: b_ix[&b],
                e: e_ix[&e],
                ab: ab_ix[&(a, b)],
                be: be_ix[&(b, e)],
            });
        }
        let blocks = blocks
            .iter()
            .map(|block| block.iter().map(|(cell, &n)| (all[cell], n)).collect())
            .collect();
        Self {
            cells,
            blocks,
            sizes: [b_ix.len(), e_ix.len(), ab_ix.len(), be_ix.len()],
        }
    }

    /// `(I(A;B), I(B;E))` estimated from per-cell counts.
    fn information(&self, counts: &[u64], estimator: Estimator) -> (f64, f64) {
        let mut na = [0u64; 2];
        let mut nb = vec![0u64; self.sizes[0]];
        let mut ne = vec![0u64; self.sizes[1]];
        let mut nab = vec![0u64; self.sizes[2]];
        let mut nbe = vec![0u64; self.sizes[3]];
        let mut total = 0u64;
        for (c, &n) in self.cells.iter().zip(counts) {
            na[c.a] += n;
            nb[c.b] += n;
            ne[c.e] += n;
            nab[c.ab] += n;
            nbe[c.be] += n;
            total += n;
        }
        if total == 0 {
            return (0.0, 0.0);
        }
        let n = total as f64;
        // Each entropy is log2 N - s(v); Miller-Madow adds (m - 1) / (2 N ln 2).
        let mm = match estimator {
            Estimator::PlugIn => 0.0,
            Estimator::MillerMadow => 1.0 / (2.0 * n * core::f64::consts::LN_2),
        };
        let s = |v: &[u64]| {
            let (sum, occupied) = v.iter().filter(|&&k| k > 0).fold((0.0, 0.0), |(s, m), &k| {
                (s + k as f64 * log2(k as f64), m + 1.0)
            });
            sum / n - mm * (occupied - 1.0)
        };
        let (sa, sb, se, sab, sbe) = (s(&na), s(&nb), s(&ne), s(&nab), s(&nbe));
        let lg = log2(n);
        ((lg - sa - sb + sab).max(0.0), (lg - sb - se + sbe).max(0.0))
    }
}
