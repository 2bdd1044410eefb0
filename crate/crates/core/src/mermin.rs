//! Decoy-state lower bound on the Mermin value of post-selected
//! single-photon GHZ states.
//!
//! Only `⟨XXX⟩` is estimated. For the Φ0+ state the other three
//! correlators follow from `⟨XXX⟩ = −⟨XYY⟩ = −⟨YXY⟩ = −⟨YYX⟩`, so
//! `M = ⟨XXX⟩ − ⟨XYY⟩ − ⟨YXY⟩ − ⟨YYX⟩ = 4⟨XXX⟩`.

use crate::decoy::{self, GainGrid, MerminGains, MerminYieldBounds};
use crate::error::Result;
use crate::exec::Exec;
use crate::fock;
use crate::gains;
use crate::params::{DecoyPlan, SystemParams};

/// Local-realism limit of the Mermin value.
pub const LOCAL_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MerminEstimate {
    pub distance_km: f64,
    pub bounds: MerminYieldBounds,
    /// Lower bound on `⟨XXX⟩`; `None` when both upper bounds vanish.
    pub xxx_lower: Option<f64>,
    /// `4·⟨XXX⟩^L`.
    pub m_lower: Option<f64>,
    /// Same estimator fed with exact single-photon yields.
    pub m_exact: Option<f64>,
}

/// `(1 − 2e_d)(Y+ − Y−)/(Y+ + Y−)`, `None` on a zero denominator.
pub fn xxx_from_yields(lower_ppp: f64, upper_ppp: f64, upper_mmm: f64, e_d: f64) -> Option<f64> {
    let denom = upper_ppp + upper_mmm;
    (denom > 0.0).then(|| (1.0 - 2.0 * e_d) * (lower_ppp - upper_mmm) / denom)
}

pub fn mermin_gain_grid(params: &SystemParams, plan: &DecoyPlan, exec: Exec) -> Result<GainGrid<MerminGains>> {
    let (eta, p_d) = (params.eta(), params.detector.p_d);
    GainGrid::build(exec, |p| {
        let mu = decoy::pattern_intensities(p, plan);
        Ok(MerminGains {
            ppp: gains::mermin_outcome_gains(0b000, mu, eta, p_d)?,
            mmm: gains::mermin_outcome_gains(0b111, mu, eta, p_d)?,
        })
    })
}

/// Mermin lower bound at the channel length set in `params`.
pub fn mermin_lower_bound(params: &SystemParams, plan: &DecoyPlan, exec: Exec) -> Result<MerminEstimate> {
    let grid = mermin_gain_grid(params, plan, exec)?;
    let bounds = decoy::mermin_yield_bounds(&grid, plan);
    let xxx_lower = xxx_from_yields(bounds.ppp_lower, bounds.ppp_upper, bounds.mmm_upper, params.e_d);
    let exact = fock::exact_single_photon_stats(params.eta(), params.detector.p_d, params.e_d);
    let m_exact = xxx_from_yields(exact.y_ppp_phi_plus, exact.y_ppp_phi_plus, exact.y_mmm_phi_plus, params.e_d)
        .map(|x| 4.0 * x);
    Ok(MerminEstimate {
        distance_km: params.channel.length_km,
        bounds,
        xxx_lower,
        m_lower: xxx_lower.map(|x| 4.0 * x),
        m_exact,
    })
}

pub fn mermin_curve(params: &SystemParams, plan: &DecoyPlan, distances: &[f64], exec: Exec) -> Result<Vec<MerminEstimate>> {
    exec.map(distances, |&l| mermin_lower_bound(&params.at_distance(l), plan, Exec::Sequential))
        .into_iter()
        .collect()
}
