//! Secret key rates for conference key agreement (QCC) and the three secret
//! sharing (QSS) variants, per-distance evaluation and sweeps.
//!
//! All rates are in bits per pulse triple (per heralded triple for SPDC
//! sources). Reported rates are clamped at zero; the unclamped two-decoy
//! value is kept as `raw_rate`.

use crate::decoy::{
    self, Diagnostics, ErrorBound, GainGrid, HeraldedStats, IntensityPattern, Level, SinglePhotonBounds,
};
use crate::error::Result;
use crate::exec::Exec;
use crate::fock::{self, Basis, BasisYield, ClickTable};
use crate::gains::{self, GainSet, SlicedGains};
use crate::params::{binary_entropy, DecoyPlan, DetectorModel, OptimizeBox, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolVariant {
    Qcc,
    QssPhasePostSelect { k: u32 },
    QssHeralded { trigger: DetectorModel },
    QssQnd,
}

impl ProtocolVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolVariant::Qcc => "qcc",
            ProtocolVariant::QssPhasePostSelect { .. } => "pps",
            ProtocolVariant::QssHeralded { .. } => "heralded",
            ProtocolVariant::QssQnd => "qnd",
        }
    }
}

/// Per-user probabilities of emitting zero and one photon at the signal level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonWeights {
    pub p0: [f64; 3],
    pub p1: [f64; 3],
}

impl PhotonWeights {
    pub fn poisson(mu: [f64; 3]) -> Self {
        PhotonWeights {
            p0: mu.map(|m| (-m).exp()),
            p1: mu.map(|m| m * (-m).exp()),
        }
    }

    pub fn heralded(stats: &HeraldedStats) -> Self {
        PhotonWeights {
            p0: [stats.get(0); 3],
            p1: [stats.get(1); 3],
        }
    }

    pub fn p111(&self) -> f64 {
        self.p1.iter().product()
    }
}

/// Outcome of a single rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub rate: f64,
    pub raw: f64,
    pub diagnostics: Diagnostics,
}

/// `Q_v + Q111·[1 − H(e111)] − H(E)·f·Q`. An unbounded `e111` or a
/// no-signal `E` forces the rate to zero.
fn rate_formula(q_vac: f64, q111: f64, e111: ErrorBound, e: Option<f64>, q: f64, f: f64) -> Result<Rate> {
    let mut diagnostics = Diagnostics::default();
    let Some(e) = e else {
        diagnostics.push("no_signal");
        return Ok(Rate {
            rate: 0.0,
            raw: 0.0,
            diagnostics,
        });
    };
    let leak = binary_entropy(e)? * f * q;
    let raw = match e111 {
        ErrorBound::Bounded(e1) => q_vac + q111 * (1.0 - binary_entropy(e1)?) - leak,
        ErrorBound::Unbounded => {
            diagnostics.push("unbounded_error");
            q_vac - leak
        }
    };
    let rate = if matches!(e111, ErrorBound::Unbounded) { 0.0 } else { raw.max(0.0) };
    Ok(Rate { rate, raw, diagnostics })
}

/// `R = e^{−μ}Q_{0νω}^Z + μνω e^{−μ−ν−ω} Y111^{ZL}[1 − H(e111^{BX})] − H(E*)·f·Q^Z`
/// with `E* = max(E^ZAB, E^ZAC)`. `q0_z` is `Q_{0νω}^Z`.
pub fn qcc_rate(
    params: &SystemParams,
    weights: &PhotonWeights,
    gains: &GainSet,
    bounds: &SinglePhotonBounds,
    q0_z: f64,
) -> Result<Rate> {
    let e_star = match (gains.e_zab(), gains.e_zac()) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    rate_formula(
        weights.p0[0] * q0_z,
        weights.p111() * bounds.y111_zl,
        bounds.e111_bxu,
        e_star,
        gains.q_z(),
        params.f,
    )
}

/// `R = P0·Q_{0νω}^X + P111·Y111^{XL}[1 − H(e111^{BZ})] − H(E^X)·f·Q^X`.
pub fn qss_rate(
    params: &SystemParams,
    weights: &PhotonWeights,
    gains: &GainSet,
    bounds: &SinglePhotonBounds,
    q0_x: f64,
) -> Result<Rate> {
    rate_formula(
        weights.p0[0] * q0_x,
        weights.p111() * bounds.y111_xl,
        bounds.e111_bzu,
        gains.e_x(),
        gains.q_x(),
        params.f,
    )
}

/// Phase post-selection: `R ≥ Q111^X[1 − H(e111^{BZ})]/K² − H(Ẽ^X)·f·Q̃^X`.
/// Alice's vacuum component is not credited.
pub fn qss_pps_rate(
    params: &SystemParams,
    weights: &PhotonWeights,
    sliced: &SlicedGains,
    bounds: &SinglePhotonBounds,
) -> Result<Rate> {
    let k2 = (sliced.k as f64).powi(2);
    rate_formula(
        0.0,
        weights.p111() * bounds.y111_xl / k2,
        bounds.e111_bzu,
        sliced.error_rate(),
        sliced.q(),
        params.f,
    )
}

/// Full-phase-average X-basis error rate of weak coherent pulses with no
/// post-selection; `None` when nothing is detected.
pub fn naive_qss_error(params: &SystemParams, intensities: [f64; 3]) -> Result<Option<f64>> {
    Ok(gains::gains_wcs(intensities, params.eta(), params.detector.p_d, params.e_d)?.e_x())
}

/// Exact single-photon statistics turned into "bounds" for infinite-decoy rates.
pub fn exact_bounds(z: BasisYield, x: BasisYield, e_d: f64) -> SinglePhotonBounds {
    let wrap = |e: Option<f64>| e.map_or(ErrorBound::Unbounded, ErrorBound::Bounded);
    SinglePhotonBounds {
        y111_zl: z.total(),
        y111_xl: x.total(),
        e111_bxu: wrap(x.error_rate(e_d)),
        e111_bzu: wrap(z.error_rate(e_d)),
        diagnostics: Diagnostics::default(),
    }
}

/// Single-photon yields referenced to photons leaving the source, for the
/// QND scheme: each photon survives the channel with probability `η_t`, and
/// only arms holding at most one photon reach the analyzer.
pub fn qnd_source_yields(eta_t: f64, detector: &DetectorModel) -> Result<(BasisYield, BasisYield)> {
    let table = ClickTable::new(detector.eta_d, detector.p_d, 3);
    let (mut z, mut x) = (BasisYield::default(), BasisYield::default());
    for combo in 0..8u32 {
        let arrived = [combo & 1, combo >> 1 & 1, combo >> 2 & 1];
        let w: f64 = arrived.iter().map(|&a| if a == 1 { eta_t } else { 1.0 - eta_t }).product();
        let zy = fock::z_basis_yield(&fock::pattern_yields(Basis::Z, arrived, &table, 3)?);
        let xy = fock::x_basis_yield(&fock::pattern_yields(Basis::X, arrived, &table, 3)?);
        z.correct += w * zy.correct;
        z.error += w * zy.error;
        x.correct += w * xy.correct;
        x.error += w * xy.error;
    }
    Ok((z, x))
}

/// One grid point of a key-rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    /// Two-decoy rate, clamped at 0.
    pub rate: f64,
    /// Rate with exact single-photon statistics, clamped at 0.
    pub rate_infinite: f64,
    /// Unclamped two-decoy rate.
    pub raw_rate: f64,
    /// Phase-error bound entering the rate: `e111^{BXU}` for QCC, `e111^{BZU}` for QSS.
    pub e111_upper: Option<f64>,
    /// Single-photon yield bound entering the rate: `Y111^{ZL}` for QCC, `Y111^{XL}` for QSS.
    pub y111_lower: f64,
    /// Overall error rate charged for error correction.
    pub qber: Option<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateCurve {
    pub variant: ProtocolVariant,
    pub points: Vec<RatePoint>,
    /// Largest grid distance with a strictly positive two-decoy rate.
    pub cutoff_km: Option<f64>,
}

fn weak_coherent_grid(exec: Exec, plan: &DecoyPlan, f: impl Fn([f64; 3]) -> Result<GainSet> + Sync + Send) -> Result<GainGrid<GainSet>> {
    GainGrid::build(exec, |p| f(decoy::pattern_intensities(p, plan)))
}

const SIGNAL: IntensityPattern = [Level::Signal; 3];
const ALICE_VACUUM: IntensityPattern = [Level::Vacuum, Level::Signal, Level::Signal];

/// Evaluates `variant` at the channel length already set in `params`.
pub fn evaluate_point(variant: &ProtocolVariant, params: &SystemParams, plan: &DecoyPlan, exec: Exec) -> Result<RatePoint> {
    let (eta, p_d, e_d) = (params.eta(), params.detector.p_d, params.e_d);
    let signal = [plan.mu2; 3];
    let (two, infinite, bounds, qber) = match variant {
        ProtocolVariant::Qcc => {
            let grid = weak_coherent_grid(exec, plan, |mu| gains::gains_wcs(mu, eta, p_d, e_d))?;
            let bounds = decoy::wcs_bounds(&grid, plan);
            let exact = fock::exact_single_photon_stats(eta, p_d, e_d);
            let exact = exact_bounds(exact.z, exact.x, e_d);
            let w = PhotonWeights::poisson(signal);
            let (g, q0) = (grid.get(SIGNAL), grid.get(ALICE_VACUUM).q_z());
            let qber = g.e_zab().zip(g.e_zac()).map(|(a, b)| a.max(b));
            (
                qcc_rate(params, &w, g, &bounds, q0)?,
                qcc_rate(params, &w, g, &exact, q0)?,
                bounds,
                qber,
            )
        }
        ProtocolVariant::QssPhasePostSelect { k } => {
            let grid = weak_coherent_grid(exec, plan, |mu| gains::gains_wcs(mu, eta, p_d, e_d))?;
            let bounds = decoy::wcs_bounds(&grid, plan);
            let exact = fock::exact_single_photon_stats(eta, p_d, e_d);
            let exact = exact_bounds(exact.z, exact.x, e_d);
            let sliced = gains::phase_sliced_gains(signal, eta, p_d, *k, e_d)?;
            let w = PhotonWeights::poisson(signal);
            (
                qss_pps_rate(params, &w, &sliced, &bounds)?,
                qss_pps_rate(params, &w, &sliced, &exact)?,
                bounds,
                sliced.error_rate(),
            )
        }
        ProtocolVariant::QssHeralded { trigger } => {
            let n_max = params.n_max;
            let stats = [0.0, plan.mu1, plan.mu2].map(|mu| decoy::heralded_stats(mu, trigger, n_max));
            let level = |l: Level| match l {
                Level::Vacuum => &stats[0],
                Level::Decoy => &stats[1],
                Level::Signal => &stats[2],
            };
            let grid = GainGrid::build(exec, |p| {
                Ok(gains::gains_heralded(p.map(level), eta, p_d, e_d, n_max)?.gains)
            })?;
            let bounds = decoy::heralded_bounds(&grid, &stats[2], &stats[1]);
            let exact = fock::exact_single_photon_stats(eta, p_d, e_d);
            let exact = exact_bounds(exact.z, exact.x, e_d);
            let w = PhotonWeights::heralded(&stats[2]);
            let (g, q0) = (grid.get(SIGNAL), grid.get(ALICE_VACUUM).q_x());
            (
                qss_rate(params, &w, g, &bounds, q0)?,
                qss_rate(params, &w, g, &exact, q0)?,
                bounds,
                g.e_x(),
            )
        }
        ProtocolVariant::QssQnd => {
            let (eta_t, det) = (params.eta_t(), params.detector);
            let grid = weak_coherent_grid(exec, plan, |mu| gains::gains_qnd(mu, eta_t, &det, e_d))?;
            let bounds = decoy::wcs_bounds(&grid, plan);
            let (z, x) = qnd_source_yields(eta_t, &det)?;
            let exact = exact_bounds(z, x, e_d);
            let w = PhotonWeights::poisson(signal);
            let (g, q0) = (grid.get(SIGNAL), grid.get(ALICE_VACUUM).q_x());
            (
                qss_rate(params, &w, g, &bounds, q0)?,
                qss_rate(params, &w, g, &exact, q0)?,
                bounds,
                g.e_x(),
            )
        }
    };
    let (e111_upper, y111_lower) = match variant {
        ProtocolVariant::Qcc => (bounds.e111_bxu.value(), bounds.y111_zl),
        _ => (bounds.e111_bzu.value(), bounds.y111_xl),
    };
    let mut diagnostics = bounds.diagnostics.clone();
    diagnostics.extend(&two.diagnostics);
    Ok(RatePoint {
        distance_km: params.channel.length_km,
        rate: two.rate,
        rate_infinite: infinite.rate,
        raw_rate: two.raw,
        e111_upper,
        y111_lower,
        qber,
        diagnostics,
    })
}

/// Evaluates `variant` at every distance of `distances`, in order.
pub fn sweep(variant: &ProtocolVariant, params: &SystemParams, plan: &DecoyPlan, distances: &[f64], exec: Exec) -> Result<KeyRateCurve> {
    // grid points run in parallel; each point's inner work stays sequential
    let points = exec.map(distances, |&l| evaluate_point(variant, &params.at_distance(l), plan, Exec::Sequential));
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let cutoff_km = points.iter().rev().find(|p| p.rate > 0.0).map(|p| p.distance_km);
    Ok(KeyRateCurve {
        variant: *variant,
        points,
        cutoff_km,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedIntensities {
    pub plan: DecoyPlan,
    pub rate: f64,
}

const SEARCH_POINTS: usize = 7;
const SEARCH_ROUNDS: usize = 4;

fn axis(lo: f64, hi: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    (0..SEARCH_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SEARCH_POINTS - 1) as f64)
        .collect()
}

/// Coarse-to-fine grid search for the `(μ2, μ1)` pair maximizing the
/// two-decoy rate at `search.distance_km`. Each round shrinks the box to
/// two grid spacings around the incumbent. Ties go to the smaller `μ2`,
/// then the smaller `μ1`; pairs with `μ2 ≤ μ1` are skipped.
pub fn optimize_intensities(
    variant: &ProtocolVariant,
    params: &SystemParams,
    search: &OptimizeBox,
    exec: Exec,
) -> Result<Option<OptimizedIntensities>> {
    let params = params.at_distance(search.distance_km);
    let (mut b2, mut b1) = (search.mu2, search.mu1);
    let mut best: Option<OptimizedIntensities> = None;
    for _ in 0..SEARCH_ROUNDS {
        let mut candidates = Vec::new();
        for &m2 in &axis(b2.0, b2.1) {
            for &m1 in &axis(b1.0, b1.1) {
                if let Ok(plan) = DecoyPlan::new(m2, m1) {
                    candidates.push(plan);
                }
            }
        }
        let rates = exec.map(&candidates, |plan| {
            evaluate_point(variant, &params, plan, Exec::Sequential).map(|p| p.rate)
        });
        for (plan, rate) in candidates.into_iter().zip(rates) {
            let rate = rate?;
            let better = match best {
                None => true,
                Some(b) => {
                    rate > b.rate
                        || (rate == b.rate && (plan.mu2, plan.mu1) < (b.plan.mu2, b.plan.mu1))
                }
            };
            if better {
                best = Some(OptimizedIntensities { plan, rate });
            }
        }
        let Some(b) = best else { break };
        let shrink = |(lo, hi): (f64, f64), at: f64| {
            let step = (hi - lo) / (SEARCH_POINTS - 1) as f64;
            ((at - step).max(lo), (at + step).min(hi))
        };
        b2 = shrink(b2, b.plan.mu2);
        b1 = shrink(b1, b.plan.mu1);
    }
    Ok(best)
}
