//! Gains and error rates of the GHZ analyzer.
//!
//! All gains here are per pulse triple and already include the 1/8 weight of
//! each users' random bit (polarization or sign) pattern. Weak coherent
//! inputs use closed forms (Z basis) or phase-averaging quadrature (X basis,
//! phase slices, Mermin patterns); heralded and QND sources sum exact Fock
//! yields from [`crate::fock`].
//!
//! Z-basis pattern classes, written as Alice/Bob/Charlie polarizations:
//! `A = {HHH, VVV}`, `B = {HHV, HVV}`, `C = {VHH, VHV}`, `D = {HVH, VVH}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::decoy::HeraldedStats;
use crate::error::{Error, Result};
use crate::fock::{self, Basis, ClickTable, OutcomeClass};
use crate::math::{bessel_i0m1, certified_integrate};
use crate::params::DetectorModel;

/// Nodes per axis for the two-dimensional phase averages.
pub const NODES_2D: usize = 64;
/// Nodes per axis for the three-dimensional phase-slice integrals.
pub const NODES_3D: usize = 32;

/// Per-pattern Z-basis gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZGainComponents {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// X-basis gains of the correct (`e`) and false (`f`) outcome class for
/// the `+++` sign pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XGainComponents {
    pub e: f64,
    pub f: f64,
}

/// Phase post-selected X-basis gains: all three users in the first of `k`
/// phase regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedGains {
    pub k: u32,
    pub q_c: f64,
    pub q_e: f64,
    /// `e_d·Q̃^C + (1 − e_d)·Q̃^E`.
    pub eq: f64,
}

impl SlicedGains {
    pub fn q(&self) -> f64 {
        self.q_c + self.q_e
    }

    pub fn error_rate(&self) -> Option<f64> {
        ratio(self.eq, self.q())
    }
}

/// Gains and error-weighted gains for one intensity triple.
///
/// Error rates are reported as `Option`: `None` marks a no-signal point
/// whose gain is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainSet {
    pub q_cz: f64,
    pub q_ez: f64,
    pub q_czab: f64,
    pub q_ezab: f64,
    pub q_czac: f64,
    pub q_ezac: f64,
    pub q_cx: f64,
    pub q_ex: f64,
    /// `E^Z·Q^Z = e_d·Q^CZ + (1 − e_d)·Q^EZ`, likewise for the others.
    pub eq_z: f64,
    pub eq_zab: f64,
    pub eq_zac: f64,
    pub eq_x: f64,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn mix(e_d: f64, correct: f64, error: f64) -> f64 {
    e_d * correct + (1.0 - e_d) * error
}

impl GainSet {
    pub fn q_z(&self) -> f64 {
        self.q_cz + self.q_ez
    }
    pub fn q_x(&self) -> f64 {
        self.q_cx + self.q_ex
    }
    pub fn e_z(&self) -> Option<f64> {
        ratio(self.eq_z, self.q_z())
    }
    pub fn e_zab(&self) -> Option<f64> {
        ratio(self.eq_zab, self.q_z())
    }
    pub fn e_zac(&self) -> Option<f64> {
        ratio(self.eq_zac, self.q_z())
    }
    pub fn e_x(&self) -> Option<f64> {
        ratio(self.eq_x, self.q_x())
    }

    fn finish(mut self, e_d: f64) -> Self {
        self.eq_z = mix(e_d, self.q_cz, self.q_ez);
        self.eq_zab = mix(e_d, self.q_czab, self.q_ezab);
        self.eq_zac = mix(e_d, self.q_czac, self.q_ezac);
        self.eq_x = mix(e_d, self.q_cx, self.q_ex);
        self
    }

    /// Builds a gain set from per-pattern `(Φ+, Φ−)` gains, each already
    /// carrying its 1/8 pattern weight. Pattern bit `p` is party `p`'s bit.
    pub fn from_pattern_gains(z: &[(f64, f64); 8], x: &[(f64, f64); 8], e_d: f64) -> Self {
        let mut g = GainSet::default();
        for (p, (plus, minus)) in z.iter().enumerate() {
            let y = plus + minus;
            let bit = |i: usize| p >> i & 1;
            let all = fock::z_pattern_correct(p as u8);
            *(if all { &mut g.q_cz } else { &mut g.q_ez }) += y;
            *(if bit(0) == bit(1) { &mut g.q_czab } else { &mut g.q_ezab }) += y;
            *(if bit(0) == bit(2) { &mut g.q_czac } else { &mut g.q_ezac }) += y;
        }
        for (p, (plus, minus)) in x.iter().enumerate() {
            let (c, e) = match fock::x_correct_class(p as u8) {
                OutcomeClass::PhiPlus => (plus, minus),
                _ => (minus, plus),
            };
            g.q_cx += c;
            g.q_ex += e;
        }
        g.finish(e_d)
    }
}

/// `1 − q·e^{−u}` without cancellation, with `q = 1 − p_d`.
#[inline]
fn click(u: f64, p_d: f64) -> f64 {
    -(-u).exp_m1() + p_d * (-u).exp()
}

fn check_close(what: &str, a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + 1e-300 {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what}: {a:e} vs {b:e}")))
    }
}

/// Z-basis pattern gains for mean photon numbers `x = (μη_a, νη_b, ωη_c)`.
pub fn z_gain_components_at(x: [f64; 3], p_d: f64) -> Result<ZGainComponents> {
    let q = 1.0 - p_d;
    let total: f64 = x.iter().sum();

    // A: each group sees one party split evenly over H and V.
    let dk = x.map(|xk| click(xk / 2.0, p_d));
    let a_product = 0.5 * dk.iter().map(|d| d * (1.0 - d)).product::<f64>();
    let a_closed = 0.5 * q.powi(3) * (-total / 2.0).exp() * dk.iter().product::<f64>();
    check_close("A product vs closed form", a_product, a_closed)?;

    // B, C, D: one group left dark, two parties interfering in another.
    let pattern = |alone: f64, i: f64, j: f64| -> Result<f64> {
        let s = (i + j) / 2.0;
        let z = (i * j).sqrt();
        let f1 = -(0.5 * alone).exp_m1() - p_d; // q − e^{x/2}
        let f2 = -(s.exp_m1() + s.exp() * bessel_i0m1(z) + p_d); // q − e^{s} I0(z)
        if f1 > 0.0 || f2 > 0.0 {
            return Err(Error::Numerical(format!(
                "Z-gain factor sign violated: {f1:e}, {f2:e}"
            )));
        }
        let g = 0.5 * p_d * q.powi(3) * (-total).exp() * f1 * f2;
        if g < 0.0 || !g.is_finite() {
            return Err(Error::Numerical(format!("negative Z gain {g:e}")));
        }
        Ok(g)
    };
    Ok(ZGainComponents {
        a: a_closed,
        b: pattern(x[1], x[0], x[2])?,
        c: pattern(x[2], x[0], x[1])?,
        d: pattern(x[0], x[1], x[2])?,
    })
}

pub fn z_gain_components(intensities: [f64; 3], eta: f64, p_d: f64) -> Result<ZGainComponents> {
    z_gain_components_at(intensities.map(|m| m * eta), p_d)
}

/// Mean photon numbers reaching the H and V detector of a group where two
/// coherent pulses of means `xi`, `xj` meet with relative phase `theta`:
/// `(√xi − √xj)²/4 + √(xi xj)·cos²(θ/2)` and the same with `sin²`.
/// A minus sign pattern swaps the two.
#[inline]
fn group_means(xi: f64, xj: f64, theta: f64, minus: bool) -> (f64, f64) {
    let base = 0.25 * (xi.sqrt() - xj.sqrt()).powi(2);
    let cross = (xi * xj).sqrt();
    let (s, c) = (0.5 * theta).sin_cos();
    let (nh, nv) = (base + cross * c * c, base + cross * s * s);
    if minus {
        (nv, nh)
    } else {
        (nh, nv)
    }
}

/// (H-only, V-only) click probabilities of one group.
#[inline]
fn group_hv(means: (f64, f64), p_d: f64) -> (f64, f64) {
    let q = 1.0 - p_d;
    let (nh, nv) = means;
    (
        click(nh, p_d) * q * (-nv).exp(),
        click(nv, p_d) * q * (-nh).exp(),
    )
}

/// Φ+ and Φ− probabilities given per-group (h, v).
#[inline]
fn classes(g: [(f64, f64); 3]) -> (f64, f64) {
    let [(h1, v1), (h2, v2), (h3, v3)] = g;
    (
        h1 * h2 * h3 + h1 * v2 * v3 + v1 * h2 * v3 + v1 * v2 * h3,
        h1 * h2 * v3 + h1 * v2 * h3 + v1 * h2 * h3 + v1 * v2 * v3,
    )
}

/// Φ± probabilities for X-basis sign pattern `signs` at absolute phases.
#[inline]
fn x_outcomes(x: [f64; 3], signs: u8, phases: [f64; 3], p_d: f64) -> (f64, f64) {
    let minus = |i: u8| signs >> i & 1 == 1;
    let [pa, pb, pc] = phases;
    classes([
        group_hv(group_means(x[0], x[1], pa - pb, minus(0)), p_d),
        group_hv(group_means(x[1], x[2], pb - pc, minus(1)), p_d),
        group_hv(group_means(x[0], x[2], pa - pc, minus(2)), p_d),
    ])
}

/// Phase-averaged `(Q_s^{Φ+}, Q_s^{Φ−})` for sign pattern `signs`
/// (bit set = party sends |−⟩), including the 1/8 pattern weight.
pub fn x_pattern_gains_at(x: [f64; 3], signs: u8, p_d: f64) -> Result<(f64, f64)> {
    let [plus, minus] = certified_integrate("X-basis phase average", NODES_2D, [(0.0, TAU); 2], |[phi, varphi]| {
        let (p, m) = x_outcomes(x, signs, [0.0, -phi, -varphi], p_d);
        [p, m]
    })?;
    let w = 1.0 / (8.0 * TAU * TAU);
    Ok((plus * w, minus * w))
}

pub fn x_gain_components(intensities: [f64; 3], eta: f64, p_d: f64) -> Result<XGainComponents> {
    let (e, f) = x_pattern_gains_at(intensities.map(|m| m * eta), 0, p_d)?;
    Ok(XGainComponents { e, f })
}

/// `(Q_s^{Φ+}, Q_s^{Φ−})` for any basis pattern, averaged over relative
/// phases with the coherent fields pushed through the analyzer unitary
/// instead of the per-group closed forms. Used to cross-check the closed
/// forms pattern by pattern.
pub fn field_pattern_gains_at(x: [f64; 3], basis: Basis, pattern: u8, p_d: f64) -> Result<(f64, f64)> {
    let u = fock::analyzer_unitary();
    let polar = [0, 1, 2].map(|p| basis.state(pattern >> p & 1 == 1).amplitudes());
    let root = x.map(f64::sqrt);
    let q = 1.0 - p_d;
    let [plus, minus] = certified_integrate("field-level phase average", NODES_2D, [(0.0, TAU); 2], |[phi, varphi]| {
        let phases = [0.0, -phi, -varphi];
        let mut a = [Complex64::new(0.0, 0.0); 6];
        for p in 0..3 {
            let field = Complex64::from_polar(root[p], phases[p]);
            a[2 * p] = field * polar[p][0];
            a[2 * p + 1] = field * polar[p][1];
        }
        let b = u.apply(&a).map(|z| z.norm_sqr());
        let hv = [0, 1, 2].map(|g| {
            let (nh, nv) = (b[2 * g], b[2 * g + 1]);
            (click(nh, p_d) * q * (-nv).exp(), click(nv, p_d) * q * (-nh).exp())
        });
        let (p, m) = classes(hv);
        [p, m]
    })?;
    let w = 1.0 / (8.0 * TAU * TAU);
    Ok((plus * w, minus * w))
}

/// Φ0+ gain `Q_s^{Φ+}` for sign pattern `signs`; any intensity may be 0.
pub fn mermin_outcome_gains(signs: u8, intensities: [f64; 3], eta: f64, p_d: f64) -> Result<f64> {
    Ok(x_pattern_gains_at(intensities.map(|m| m * eta), signs, p_d)?.0)
}

/// Combines the closed-form components into a [`GainSet`]:
/// `Q^CZ = 4A`, `Q^EZ = 4(B+C+D)`, `Q^CZAB = 4A+2B+2D`, `Q^EZAB = 2B+4C+2D`,
/// `Q^CZAC = 4A+2C+2D`, `Q^EZAC = 4B+2C+2D`, `Q^CX = 8E`, `Q^EX = 8F`.
pub fn assemble_gain_set(z: &ZGainComponents, x: &XGainComponents, e_d: f64) -> GainSet {
    let ZGainComponents { a, b, c, d } = *z;
    GainSet {
        q_cz: 4.0 * a,
        q_ez: 4.0 * (b + c + d),
        q_czab: 4.0 * a + 2.0 * b + 2.0 * d,
        q_ezab: 2.0 * b + 4.0 * c + 2.0 * d,
        q_czac: 4.0 * a + 2.0 * c + 2.0 * d,
        q_ezac: 4.0 * b + 2.0 * c + 2.0 * d,
        q_cx: 8.0 * x.e,
        q_ex: 8.0 * x.f,
        ..Default::default()
    }
    .finish(e_d)
}

/// Full gain set for phase-randomized weak coherent pulses.
pub fn gains_wcs(intensities: [f64; 3], eta: f64, p_d: f64, e_d: f64) -> Result<GainSet> {
    let z = z_gain_components(intensities, eta, p_d)?;
    let x = x_gain_components(intensities, eta, p_d)?;
    Ok(assemble_gain_set(&z, &x, e_d))
}

/// Gains when every user's global phase is restricted to `[0, π/K)`,
/// weighted by the `1/K²` probability that all three land in the same
/// region: `Q̃ = (K/π³) ∫ Φ± dφa dφb dφc`.
pub fn phase_sliced_gains(intensities: [f64; 3], eta: f64, p_d: f64, k: u32, e_d: f64) -> Result<SlicedGains> {
    if k == 0 {
        return Err(Error::invalid("phase.k", "must be >= 1"));
    }
    let x = intensities.map(|m| m * eta);
    let width = PI / k as f64;
    let [plus, minus] = certified_integrate("phase-slice integral", NODES_3D, [(0.0, width); 3], |ph| {
        let (p, m) = x_outcomes(x, 0, ph, p_d);
        [p, m]
    })?;
    let norm = k as f64 / PI.powi(3);
    let (q_c, q_e) = (plus * norm, minus * norm);
    Ok(SlicedGains {
        k,
        q_c,
        q_e,
        eq: mix(e_d, q_c, q_e),
    })
}

/// Gains with a QND filter in front of the analyzer: only terms with at
/// most one photon per arm after the channel contribute, each weighted by
/// its Poisson probability at mean `μ·η_t`, and detected at efficiency `η_d`.
pub fn gains_qnd(intensities: [f64; 3], eta_t: f64, detector: &DetectorModel, e_d: f64) -> Result<GainSet> {
    let means = intensities.map(|m| m * eta_t);
    let table = ClickTable::new(detector.eta_d, detector.p_d, 3);
    let mut z = [(0.0, 0.0); 8];
    let mut x = [(0.0, 0.0); 8];
    for combo in 0..8u32 {
        let photons = [combo & 1, combo >> 1 & 1, combo >> 2 & 1];
        let mut w = 1.0;
        for (k, &n) in photons.iter().enumerate() {
            w *= (-means[k]).exp() * if n == 1 { means[k] } else { 1.0 };
        }
        accumulate(&mut z, &fock::pattern_yields(Basis::Z, photons, &table, 3)?, w);
        accumulate(&mut x, &fock::pattern_yields(Basis::X, photons, &table, 3)?, w);
    }
    Ok(GainSet::from_pattern_gains(&z, &x, e_d))
}

fn accumulate(acc: &mut [(f64, f64); 8], yields: &[(f64, f64); 8], w: f64) {
    for (a, y) in acc.iter_mut().zip(yields) {
        a.0 += w * y.0 / 8.0;
        a.1 += w * y.1 / 8.0;
    }
}

/// Photon-number combinations whose joint weight falls below this are skipped.
pub const HERALDED_TERM_FLOOR: f64 = 1e-18;
/// Largest neglected probability mass tolerated in a heralded gain.
pub const TRUNCATION_BUDGET: f64 = 1e-12;

/// Heralded-source gains and the neglected probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldedGains {
    pub gains: GainSet,
    pub truncation: f64,
}

/// `Σ P_n P_m P_l · Y_nml` over `n + m + l ≤ N_max`, with per-user
/// triggered photon-number distributions `stats`.
pub fn gains_heralded(stats: [&HeraldedStats; 3], eta: f64, p_d: f64, e_d: f64, n_max: u32) -> Result<HeraldedGains> {
    let table = ClickTable::new(eta, p_d, n_max);
    let mut z = [(0.0, 0.0); 8];
    let mut x = [(0.0, 0.0); 8];
    let mut kept = 0.0;
    let p = |k: usize, n: u32| stats[k].p.get(n as usize).copied().unwrap_or(0.0);
    for n in 0..=n_max {
        for m in 0..=n_max - n {
            for l in 0..=n_max - n - m {
                let w = p(0, n) * p(1, m) * p(2, l);
                if w < HERALDED_TERM_FLOOR {
                    continue;
                }
                kept += w;
                let photons = [n, m, l];
                accumulate(&mut z, &fock::pattern_yields(Basis::Z, photons, &table, n_max)?, w);
                accumulate(&mut x, &fock::pattern_yields(Basis::X, photons, &table, n_max)?, w);
            }
        }
    }
    let truncation = (1.0 - kept).max(0.0);
    if truncation > TRUNCATION_BUDGET {
        return Err(Error::TruncationBudget {
            tail: truncation,
            budget: TRUNCATION_BUDGET,
        });
    }
    Ok(HeraldedGains {
        gains: GainSet::from_pattern_gains(&z, &x, e_d),
        truncation,
    })
}
