//! Conditional photocount laws of Bob and Eve at an operating point.
//!
//! Pulse energies are expressed as seen by Eve; Bob's energies follow from
//! the transmission ratio `tau_B / tau_E`, so absolute transmissions and
//! Alice-side energies never appear.

use crate::error::{Error, Result};
use crate::math::{exp, sqrt};
use crate::photostat::PoissonLaw;

/// Relative slack allowed when the modulation depth sits on its upper bound.
const DEPTH_SLACK: f64 = 1e-12;

fn check_distortion(distortion: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&distortion) {
        return Err(Error::DistortionOutOfRange);
    }
    Ok(())
}

/// Everything except the modulation depth: the quantities a key-rate
/// optimisation holds fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    nbar_e: f64,
    distortion: f64,
    tau_ratio: f64,
    n_b: f64,
}

impl OperatingPoint {
    pub fn new(nbar_e: f64, distortion: f64, tau_ratio: f64, n_b: f64) -> Result<Self> {
        if !(nbar_e > 0.0 && nbar_e.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "nbar_e",
                reason: "must be positive and finite",
            });
        }
        check_distortion(distortion)?;
        if !(tau_ratio > 0.0 && tau_ratio.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau_ratio",
                reason: "must be positive and finite",
            });
        }
        if !(n_b >= 0.0 && n_b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "n_b",
                reason: "must be nonnegative and finite",
            });
        }
        Ok(Self {
            nbar_e,
            distortion,
            tau_ratio,
            n_b,
        })
    }

    pub fn nbar_e(&self) -> f64 {
        self.nbar_e
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn tau_ratio(&self) -> f64 {
        self.tau_ratio
    }

    pub fn n_b(&self) -> f64 {
        self.n_b
    }

    /// Largest admissible modulation depth, `sqrt(nbar_E)`.
    pub fn max_delta(&self) -> f64 {
        sqrt(self.nbar_e)
    }

    pub fn with_delta(&self, delta_e: f64) -> Result<ScenarioParams> {
        ScenarioParams::from_operating_point(*self, delta_e)
    }
}

/// A complete operating point including the rescaled modulation depth
/// `delta_E = (n_E1 - n_E0) / (2 sqrt(nbar_E))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    point: OperatingPoint,
    delta_e: f64,
}

impl ScenarioParams {
    pub fn new(nbar_e: f64, delta_e: f64, distortion: f64, tau_ratio: f64, n_b: f64) -> Result<Self> {
        Self::from_operating_point(OperatingPoint::new(nbar_e, distortion, tau_ratio, n_b)?, delta_e)
    }

    pub fn from_operating_point(point: OperatingPoint, delta_e: f64) -> Result<Self> {
        if !(delta_e >= 0.0) || !delta_e.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta_e",
                reason: "must be nonnegative and finite",
            });
        }
        let max = point.max_delta();
        if delta_e > max * (1.0 + DEPTH_SLACK) {
            return Err(Error::NegativePulseEnergy);
        }
        Ok(Self {
            point,
            delta_e: delta_e.min(max),
        })
    }

    pub fn operating_point(&self) -> OperatingPoint {
        self.point
    }

    pub fn nbar_e(&self) -> f64 {
        self.point.nbar_e
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    pub fn distortion(&self) -> f64 {
        self.point.distortion
    }

    pub fn tau_ratio(&self) -> f64 {
        self.point.tau_ratio
    }

    pub fn n_b(&self) -> f64 {
        self.point.n_b
    }

    pub fn energies(&self) -> EnergyPair {
        energies_from_params(self)
    }

    pub fn bob_channel(&self) -> BobChannel {
        bob_channel(self)
    }

    pub fn eve_channel(&self) -> EveChannel {
        eve_channel(self)
    }
}

/// Mean photon numbers reaching Eve for bit values 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPair {
    pub n_e0: f64,
    pub n_e1: f64,
}

/// Bob's photocount law conditioned on Alice's bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobChannel {
    pub law0: PoissonLaw,
    pub law1: PoissonLaw,
}

impl BobChannel {
    pub fn law(&self, bit: u8) -> &PoissonLaw {
        if bit == 0 {
            &self.law0
        } else {
            &self.law1
        }
    }
}

/// Photocount laws of Eve's two demultiplexed detectors, monitoring the
/// bit-0 mode `u` and its orthogonal complement `v`. Given the bit the two
/// counts are independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveChannel {
    pub u_law0: PoissonLaw,
    pub u_law1: PoissonLaw,
    pub v_law0: PoissonLaw,
    pub v_law1: PoissonLaw,
}

impl EveChannel {
    pub fn u_law(&self, bit: u8) -> &PoissonLaw {
        if bit == 0 {
            &self.u_law0
        } else {
            &self.u_law1
        }
    }

    pub fn v_law(&self, bit: u8) -> &PoissonLaw {
        if bit == 0 {
            &self.v_law0
        } else {
            &self.v_law1
        }
    }

    /// `P(k_Ev >= 1 | bit = 1)`.
    pub fn click_probability(&self) -> f64 {
        -libm::expm1(-self.v_law1.mean())
    }

    /// `P(k_Ev = 0 | bit = 1)`.
    pub fn no_click_probability(&self) -> f64 {
        exp(-self.v_law1.mean())
    }
}

pub fn energies_from_params(p: &ScenarioParams) -> EnergyPair {
    let nbar = p.nbar_e();
    let shift = p.delta_e * sqrt(nbar);
    EnergyPair {
        n_e0: (nbar - shift).max(0.0),
        n_e1: nbar + shift,
    }
}

pub fn bob_channel(p: &ScenarioParams) -> BobChannel {
    let e = energies_from_params(p);
    let law = |n: f64| PoissonLaw::new(p.tau_ratio() * n + p.n_b()).expect("validated mean");
    BobChannel {
        law0: law(e.n_e0),
        law1: law(e.n_e1),
    }
}

pub fn eve_channel(p: &ScenarioParams) -> EveChannel {
    let e = energies_from_params(p);
    let d = p.distortion();
    let law = |n: f64| PoissonLaw::new(n).expect("validated mean");
    EveChannel {
        u_law0: law(e.n_e0),
        u_law1: law((1.0 - d) * e.n_e1),
        v_law0: PoissonLaw::point_mass(),
        v_law1: law(d * e.n_e1),
    }
}
