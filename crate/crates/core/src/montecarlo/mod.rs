//! Seeded slot simulation and plug-in estimates of the key rate.
//!
//! Generator: Xoshiro256++ (`rand_xoshiro`). Slots are grouped in chunks of
//! [`CHUNK_SLOTS`]; chunk `c` of a run with seed `s` is driven by its own
//! generator, seeded through [`chunk_seed`]. Any slot range can therefore be
//! regenerated on its own, and sharded runs reproduce the serial stream
//! exactly.
//!
//! Within a slot the draws happen in a fixed order: the bit `q_A`, then
//! `k_B`, `k_Eu` and `k_Ev`.

mod estimate;
pub mod sampler;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::channels::{BobChannel, EveChannel, ScenarioParams};
use crate::error::{Error, Result};
use crate::infokey::Decoding;

pub use estimate::{estimate_key_rate, Agreement, Estimator, MonteCarloEstimate, StandardErrors, Tally};

/// Slots generated from one chunk seed.
pub const CHUNK_SLOTS: u64 = 1 << 16;
/// Minimum slots accepted by the estimators.
pub const MIN_SLOTS: u64 = 10_000;
/// Nonoverlapping blocks used by the bootstrap.
pub const BOOTSTRAP_BLOCKS: usize = 100;
/// Bootstrap replicates behind each standard error.
pub const BOOTSTRAP_REPLICATES: usize = 200;

/// A simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: ScenarioParams,
    pub slots: u64,
    pub seed: u64,
    /// Decides what Bob's estimated variable is: the raw count (soft) or
    /// the thresholded symbol (hard).
    pub decoding: Decoding,
}

impl SimConfig {
    pub fn new(params: ScenarioParams, slots: u64, seed: u64, decoding: Decoding) -> Result<Self> {
        if slots == 0 {
            return Err(Error::InvalidParameter {
                name: "slots",
                reason: "must be positive",
            });
        }
        Ok(Self {
            params,
            slots,
            seed,
            decoding,
        })
    }

    pub(crate) fn check_estimable(&self) -> Result<()> {
        if self.slots < MIN_SLOTS {
            return Err(Error::InsufficientSlots {
                slots: self.slots,
                min: MIN_SLOTS,
            });
        }
        Ok(())
    }

    /// Nonoverlapping bootstrap block holding slot `index`.
    #[inline]
    pub fn block_of(&self, index: u64) -> usize {
        ((index as u128 * BOOTSTRAP_BLOCKS as u128) / self.slots as u128) as usize
    }
}

/// One realisation of all random variables of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotRecord {
    pub q_a: u8,
    pub k_b: u64,
    pub k_eu: u64,
    pub k_ev: u64,
}

/// Seed of the generator driving chunk `chunk` (SplitMix64 finaliser).
pub fn chunk_seed(seed: u64, chunk: u64) -> u64 {
    let mut z = seed ^ chunk.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Iterator over the slot records of a run, or of a slice of one.
#[derive(Debug, Clone)]
pub struct SlotStream {
    bob: BobChannel,
    eve: EveChannel,
    seed: u64,
    next: u64,
    end: u64,
    rng: Xoshiro256PlusPlus,
}

impl SlotStream {
    fn draw(&mut self) -> SlotRecord {
        let q_a = (self.rng.next_u64() >> 63) as u8;
        let k_b = sampler::poisson(&mut self.rng, self.bob.law(q_a).mean());
        let k_eu = sampler::poisson(&mut self.rng, self.eve.u_law(q_a).mean());
        let k_ev = sampler::poisson(&mut self.rng, self.eve.v_law(q_a).mean());
        SlotRecord {
            q_a,
            k_b,
            k_eu,
            k_ev,
        }
    }

    /// Index of the next slot to be produced.
    pub fn position(&self) -> u64 {
        self.next
    }
}

impl Iterator for SlotStream {
    type Item = SlotRecord;

    fn next(&mut self) -> Option<SlotRecord> {
        if self.next >= self.end {
            return None;
        }
        if self.next.is_multiple_of(CHUNK_SLOTS) {
            self.rng = Xoshiro256PlusPlus::seed_from_u64(chunk_seed(self.seed, self.next / CHUNK_SLOTS));
        }
        self.next += 1;
        Some(self.draw())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for SlotStream {}

/// All slots of the run, in order.
pub fn simulate(cfg: &SimConfig) -> SlotStream {
    simulate_range(cfg, 0, cfg.slots)
}

/// Slots `start..end` of the run (clamped to its length), identical to the
/// corresponding part of [`simulate`].
pub fn simulate_range(cfg: &SimConfig, start: u64, end: u64) -> SlotStream {
    let end = end.min(cfg.slots);
    let start = start.min(end);
    let chunk = start / CHUNK_SLOTS;
    let mut stream = SlotStream {
        bob: cfg.params.bob_channel(),
        eve: cfg.params.eve_channel(),
        seed: cfg.seed,
        next: chunk * CHUNK_SLOTS,
        end,
        rng: Xoshiro256PlusPlus::seed_from_u64(chunk_seed(cfg.seed, chunk)),
    };
    // Replay the head of the chunk so the generator state lines up.
    for _ in stream.next..start {
        stream.draw();
    }
    stream.next = start;
    stream
}
