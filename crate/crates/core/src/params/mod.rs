//! Physical and protocol parameters.
//!
//! All three users sit at the same fiber distance `L` from the measurement
//! node; the channel transmission is `η_t = 10^(−βL/10)` and the overall
//! efficiency `η = η_d·η_t`.

mod config;

pub use config::{parse_config, serialize_config, Config, MonteCarloPlan, OptimizeBox, SweepGrid};

use crate::error::{Error, Result};

/// Default photon-number cutoff for Fock-space sums.
pub const DEFAULT_N_MAX: u32 = 12;

/// Fiber channel between each user and the measurement node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Loss coefficient in dB/km.
    pub beta: f64,
    /// One-way distance in km, identical for all three users.
    pub length_km: f64,
}

impl ChannelModel {
    pub fn new(beta: f64, length_km: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid("channel.beta", format!("{beta} must be >= 0")));
        }
        if !(length_km >= 0.0 && length_km.is_finite()) {
            return Err(Error::invalid(
                "channel.distance_km",
                format!("{length_km} must be >= 0"),
            ));
        }
        Ok(ChannelModel { beta, length_km })
    }

    pub fn at_distance(self, length_km: f64) -> Self {
        ChannelModel { length_km, ..self }
    }

    /// Fiber transmission `10^(−βL/10)`.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.beta * self.length_km / 10.0)
    }
}

/// Threshold single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub eta_d: f64,
    /// Dark/background count probability per gate.
    pub p_d: f64,
}

impl DetectorModel {
    pub fn new(eta_d: f64, p_d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta_d) {
            return Err(Error::invalid("detector.eta_d", format!("{eta_d} not in [0, 1]")));
        }
        if !(0.0..1.0).contains(&p_d) {
            return Err(Error::invalid("detector.p_d", format!("{p_d} not in [0, 1)")));
        }
        Ok(DetectorModel { eta_d, p_d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub channel: ChannelModel,
    pub detector: DetectorModel,
    /// Misalignment error probability.
    pub e_d: f64,
    /// Error-correction inefficiency.
    pub f: f64,
    /// Photon-number cutoff for Fock sums.
    pub n_max: u32,
}

impl SystemParams {
    pub fn new(channel: ChannelModel, detector: DetectorModel, e_d: f64, f: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&e_d) {
            return Err(Error::invalid("system.e_d", format!("{e_d} not in [0, 0.5]")));
        }
        if !(f >= 1.0 && f.is_finite()) {
            return Err(Error::invalid("system.f", format!("{f} must be >= 1")));
        }
        Ok(SystemParams {
            channel,
            detector,
            e_d,
            f,
            n_max: DEFAULT_N_MAX,
        })
    }

    pub fn at_distance(&self, length_km: f64) -> Self {
        SystemParams {
            channel: self.channel.at_distance(length_km),
            ..*self
        }
    }

    pub fn eta(&self) -> f64 {
        overall_efficiency(&self.channel, &self.detector)
    }

    pub fn eta_t(&self) -> f64 {
        self.channel.transmission()
    }
}

/// Photon source used by all three users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// Phase-randomized weak coherent pulses.
    WeakCoherent,
    /// SPDC pairs heralded by a trigger detector; intensities are mean pair numbers.
    Heralded { trigger: DetectorModel },
    /// Weak coherent pulses followed by a QND filter passing at most one photon per arm.
    WeakCoherentQnd,
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::WeakCoherent => "wcs",
            SourceKind::Heralded { .. } => "heralded",
            SourceKind::WeakCoherentQnd => "qnd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// Signal intensities (μ, ν, ω) of Alice, Bob and Charlie.
    pub intensities: [f64; 3],
}

/// Signal level `mu2` and decoy level `mu1`; vacuum is the implicit third level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyPlan {
    pub mu2: f64,
    pub mu1: f64,
}

impl DecoyPlan {
    pub fn new(mu2: f64, mu1: f64) -> Result<Self> {
        if !(mu1 > 0.0 && mu1.is_finite()) {
            return Err(Error::invalid("decoy.mu1", format!("{mu1} must be > 0")));
        }
        if !(mu2 > mu1 && mu2.is_finite()) {
            return Err(Error::invalid("decoy.mu2", "mu2 must exceed mu1"));
        }
        Ok(DecoyPlan { mu2, mu1 })
    }
}

/// Number of phase regions for phase post-selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasePlan {
    pub k: u32,
}

impl PhasePlan {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("phase.k", "must be >= 1"));
        }
        Ok(PhasePlan { k })
    }
}

/// `η = η_d · 10^(−βL/10)`, identical for the three users.
pub fn overall_efficiency(channel: &ChannelModel, detector: &DetectorModel) -> f64 {
    detector.eta_d * channel.transmission()
}

/// Arguments may stray outside [0, 1] by this much before being rejected.
pub const ENTROPY_SLACK: f64 = 1e-15;

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-ENTROPY_SLACK..=1.0 + ENTROPY_SLACK).contains(&x) {
        return Err(Error::invalid("entropy argument", format!("{x} not in [0, 1]")));
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}
