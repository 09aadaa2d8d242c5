//! Secure key rates for binary-modulated IM/DD optical key distribution when
//! the eavesdropper demultiplexes the captured light into temporal modes.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`modes`]: overlap integrals, the symbol shape distortion and the
//!   orthogonal complement mode of a pair of pulse envelopes;
//! * [`photostat`]: Poisson laws with certified truncation of the support;
//! * [`channels`]: Bob's and Eve's conditional photocount laws for an
//!   operating point;
//! * [`infokey`]: mutual informations and the reverse-reconciliation key rate
//!   for soft and hard decoding;
//! * [`optimize`]: maximisation of the key over modulation depth and
//!   discrimination thresholds;
//! * [`montecarlo`]: a seeded slot simulator with plug-in estimators used to
//!   cross-check the analytic pipeline.
#![no_std]

extern crate alloc;

mod error;
mod math;

pub mod channels;
pub mod infokey;
pub mod modes;
pub mod montecarlo;
pub mod optimize;
pub mod photostat;

pub use channels::{BobChannel, EnergyPair, EveChannel, OperatingPoint, ScenarioParams};
pub use error::{Error, Result};
pub use infokey::{
    key_rate, mutual_information, Decoding, DiscreteDistribution, HardDecoder, KeyRateResult,
    Symbol,
};
pub use modes::{ModePair, TemporalEnvelope};
pub use optimize::{
    optimize_hard, optimize_soft, reconcile_distortion_curve, OptimizationBudget, OptimizedPoint,
};
pub use photostat::{PoissonLaw, TruncationPolicy};

/// Converts a linear distortion (a power fraction) to decibels.
pub fn to_db(distortion: f64) -> f64 {
    10.0 * libm::log10(distortion)
}

/// Converts a distortion given in decibels back to a power fraction.
pub fn from_db(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}
