//! Sharded Monte Carlo runs and their comparison with the analytic values.

use okd_core::montecarlo::{
    simulate_range, Agreement, Estimator, MonteCarloEstimate, SimConfig, Tally, CHUNK_SLOTS,
};
use okd_core::KeyRateResult;
use rayon::prelude::*;

/// Tolerance of the agreement check, in standard errors.
pub const TOLERANCE_SE: f64 = 3.0;

/// Estimates the key rate with slots split over `shards` chunk-aligned
/// ranges. The result does not depend on `shards`.
pub fn parallel_estimate(cfg: &SimConfig, shards: usize, estimator: Estimator) -> okd_core::Result<MonteCarloEstimate> {
    let chunks = cfg.slots.div_ceil(CHUNK_SLOTS);
    let shards = (shards.max(1) as u64).min(chunks);
    let per = chunks.div_ceil(shards) * CHUNK_SLOTS;
    let tallies = (0..shards)
        .into_par_iter()
        .map(|s| Tally::from_range(cfg, s * per, (s + 1) * per))
        .collect::<okd_core::Result<Vec<_>>>()?;
    let mut total = Tally::new(cfg)?;
    for t in &tallies {
        total.merge(t);
    }
    Ok(total.estimate_with(estimator))
}

/// Default shard count: one per worker thread.
pub fn default_shards() -> usize {
    rayon::current_num_threads()
}

/// Analytic and simulated values side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub analytic: KeyRateResult,
    pub estimate: MonteCarloEstimate,
    pub agreement: Agreement,
}

impl Comparison {
    pub fn new(analytic: KeyRateResult, estimate: MonteCarloEstimate) -> Self {
        Self {
            analytic,
            estimate,
            agreement: estimate.agreement(&analytic, TOLERANCE_SE),
        }
    }

    /// The verdict rests on the key; the informations are flagged
    /// individually because plug-in bias can push them out on its own.
    pub fn passed(&self) -> bool {
        self.agreement.key_rate
    }

    /// A fixed-width table plus the verdict line.
    pub fn report(&self) -> String {
        let a = &self.analytic;
        let e = &self.estimate;
        let se = &e.standard_errors;
        let verdict = |ok: bool| if ok { "ok" } else { "MISMATCH" };
        let line = |name: &str, exact: f64, hat: f64, se: f64, ok: bool| {
            let z = if se > 0.0 { (hat - exact) / se } else { 0.0 };
            format!("{name:<8}{exact:>14.8}{hat:>14.8}{se:>12.2e}{z:>+9.2}  {}\n", verdict(ok))
        };
        let mut s = format!("{:<8}{:>14}{:>14}{:>12}{:>9}\n", "", "analytic", "estimate", "se", "z");
        s += &line("I(A;B)", a.i_ab, e.i_ab_hat, se.i_ab, self.agreement.i_ab);
        s += &line("I(B;E)", a.i_be, e.i_be_hat, se.i_be, self.agreement.i_be);
        s += &line("K", a.key_rate, e.k_hat, se.key_rate, self.agreement.key_rate);
        if !(self.agreement.i_ab && self.agreement.i_be) {
            s += "note: plug-in estimates are biased upward by about (|X|-1)(|Y|-1)/(2N ln 2) bits; \
                  try --estimator miller-madow\n";
        }
        s += if self.passed() { "PASS" } else { "FAIL" };
        s += &format!(" (key within {TOLERANCE_SE} SE; {} slots)\n", e.slots);
        s
    }
}

/// Iterator over every slot of the run, for record dumps.
pub fn records(cfg: &SimConfig) -> impl Iterator<Item = okd_core::montecarlo::SlotRecord> {
    simulate_range(cfg, 0, cfg.slots)
}
