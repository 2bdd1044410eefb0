//! Two-decoy (vacuum + weak decoy) bounds on single-photon yields and
//! error rates.
//!
//! Every estimator starts from the inclusion-exclusion sum over the eight
//! intensity patterns of one level, which strips away every term where some
//! user sent vacuum:
//!
//! ```text
//! S(μ) = Q_μμμ − P0 (Q_μμ0 + Q_μ0μ + Q_0μμ) + P0² (Q_μ00 + Q_0μ0 + Q_00μ) − P0³ Q_000
//!      = Σ_{n,m,l ≥ 1} P_n P_m P_l Y_nml
//! ```
//!
//! Weak coherent sources use the Poisson form `S'(μ) = e^{3μ} S(μ)` with
//! `P0 = e^{−μ}`; heralded sources use their triggered distribution.
//! Comparing the two levels cancels the `P1²P2` terms and leaves a lower
//! bound on `Y111`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gains::GainSet;
use crate::params::{DecoyPlan, DetectorModel};

/// Intensity a user sends in one decoy pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Vacuum,
    Decoy,
    Signal,
}

impl Level {
    pub fn intensity(self, plan: &DecoyPlan) -> f64 {
        match self {
            Level::Vacuum => 0.0,
            Level::Decoy => plan.mu1,
            Level::Signal => plan.mu2,
        }
    }

    fn symbol(self) -> char {
        match self {
            Level::Vacuum => '0',
            Level::Decoy => '1',
            Level::Signal => '2',
        }
    }
}

pub type IntensityPattern = [Level; 3];

pub fn pattern_intensities(pattern: IntensityPattern, plan: &DecoyPlan) -> [f64; 3] {
    pattern.map(|l| l.intensity(plan))
}

/// Gains for each of the 15 intensity patterns a two-decoy estimate needs:
/// every pattern mixing vacuum with a single non-vacuum level.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGrid<T> {
    entries: BTreeMap<IntensityPattern, T>,
}

impl<T> GainGrid<T> {
    pub fn required_patterns() -> Vec<IntensityPattern> {
        let mut out = vec![[Level::Vacuum; 3]];
        for level in [Level::Decoy, Level::Signal] {
            for mask in 1..8u8 {
                out.push([0, 1, 2].map(|i| if mask >> i & 1 == 1 { level } else { Level::Vacuum }));
            }
        }
        out
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (IntensityPattern, T)>) -> Result<Self> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        for p in Self::required_patterns() {
            if !entries.contains_key(&p) {
                return Err(Error::IncompleteGrid(p.iter().map(|l| l.symbol()).collect()));
            }
        }
        Ok(GainGrid { entries })
    }

    /// Evaluates `f` on every required pattern.
    pub fn build<F>(exec: Exec, f: F) -> Result<Self>
    where
        T: Send,
        F: Fn(IntensityPattern) -> Result<T> + Sync + Send,
    {
        let patterns = Self::required_patterns();
        let values = exec.map(&patterns, |&p| f(p));
        let mut entries = Vec::with_capacity(patterns.len());
        for (p, v) in patterns.into_iter().zip(values) {
            entries.push((p, v?));
        }
        Self::from_entries(entries)
    }

    pub fn get(&self, pattern: IntensityPattern) -> &T {
        &self.entries[&pattern]
    }

    /// `Σ_patterns (−p0)^{#vacuum} · value` over the seven patterns of
    /// `level` plus the all-vacuum one.
    pub fn inclusion_exclusion(&self, level: Level, p0: f64, value: impl Fn(&T) -> f64) -> f64 {
        let mut sum = 0.0;
        for mask in 0..8u8 {
            let pattern = [0, 1, 2].map(|i| if mask >> i & 1 == 1 { level } else { Level::Vacuum });
            let vacuums = 3 - mask.count_ones() as i32;
            sum += (-p0).powi(vacuums) * value(self.get(pattern));
        }
        sum
    }
}

/// Flags attached to bounds, gains and rates, rendered `;`-separated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics(Vec<&'static str>);

impl Diagnostics {
    pub fn push(&mut self, flag: &'static str) {
        if !self.0.contains(&flag) {
            self.0.push(flag);
        }
    }

    pub fn extend(&mut self, other: &Diagnostics) {
        for f in &other.0 {
            self.push(f);
        }
    }

    pub fn contains(&self, flag: &str) -> bool {
        self.0.contains(&flag)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(";"))
    }
}

/// Upper bound on a single-photon error rate. `Unbounded` when the
/// matching yield bound is not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorBound {
    Bounded(f64),
    Unbounded,
}

impl ErrorBound {
    pub fn value(self) -> Option<f64> {
        match self {
            ErrorBound::Bounded(e) => Some(e),
            ErrorBound::Unbounded => None,
        }
    }
}

/// Decoy-estimated single-photon quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhotonBounds {
    pub y111_zl: f64,
    pub y111_xl: f64,
    /// X-basis (phase) error bound, used by QCC.
    pub e111_bxu: ErrorBound,
    /// Z-basis error bound, used by QSS.
    pub e111_bzu: ErrorBound,
    pub diagnostics: Diagnostics,
}

fn finish_yield(y: f64, flag: &'static str, diag: &mut Diagnostics) -> f64 {
    if y < 0.0 {
        diag.push(flag);
        0.0
    } else {
        y
    }
}

fn finish_error(eq: f64, denom: f64, capped: &'static str, unbounded: &'static str, diag: &mut Diagnostics) -> ErrorBound {
    if denom <= 0.0 {
        diag.push(unbounded);
        return ErrorBound::Unbounded;
    }
    let e = eq / denom;
    if e > 0.5 {
        diag.push(capped);
        ErrorBound::Bounded(0.5)
    } else {
        ErrorBound::Bounded(e.max(0.0))
    }
}

fn wcs_s_prime(grid: &GainGrid<GainSet>, level: Level, mu: f64, value: impl Fn(&GainSet) -> f64) -> f64 {
    (3.0 * mu).exp() * grid.inclusion_exclusion(level, (-mu).exp(), value)
}

/// `Y111^L = [μ2⁴ S'(μ1) − μ1⁴ S'(μ2)] / [μ2³ μ1³ (μ2 − μ1)]`.
pub fn wcs_yield_lower<T>(grid: &GainGrid<T>, plan: &DecoyPlan, value: impl Fn(&T) -> f64) -> f64 {
    let (m2, m1) = (plan.mu2, plan.mu1);
    let s1 = (3.0 * m1).exp() * grid.inclusion_exclusion(Level::Decoy, (-m1).exp(), &value);
    let s2 = (3.0 * m2).exp() * grid.inclusion_exclusion(Level::Signal, (-m2).exp(), &value);
    (m2.powi(4) * s1 - m1.powi(4) * s2) / (m2.powi(3) * m1.powi(3) * (m2 - m1))
}

/// Two-decoy bounds for weak coherent sources.
pub fn wcs_bounds(grid: &GainGrid<GainSet>, plan: &DecoyPlan) -> SinglePhotonBounds {
    let mut diagnostics = Diagnostics::default();
    let y111_zl = finish_yield(wcs_yield_lower(grid, plan, GainSet::q_z), "y111_zl_floored", &mut diagnostics);
    let y111_xl = finish_yield(wcs_yield_lower(grid, plan, GainSet::q_x), "y111_xl_floored", &mut diagnostics);
    let m1 = plan.mu1;
    let e111_bxu = finish_error(
        wcs_s_prime(grid, Level::Decoy, m1, |g| g.eq_x),
        m1.powi(3) * y111_xl,
        "e111_bx_capped",
        "e111_bx_unbounded",
        &mut diagnostics,
    );
    let e111_bzu = finish_error(
        wcs_s_prime(grid, Level::Decoy, m1, |g| g.eq_z),
        m1.powi(3) * y111_zl,
        "e111_bz_capped",
        "e111_bz_unbounded",
        &mut diagnostics,
    );
    SinglePhotonBounds {
        y111_zl,
        y111_xl,
        e111_bxu,
        e111_bzu,
        diagnostics,
    }
}

/// Triggered photon-number statistics of a heralded SPDC source.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedStats {
    /// Mean pair number.
    pub mu: f64,
    /// Trigger probability per pulse.
    pub p_c: f64,
    /// `P_n` for `n = 0..=N_max`, conditioned on a trigger click.
    pub p: Vec<f64>,
    /// Upper bound on `Σ_{n > N_max} P_n`.
    pub tail: f64,
}

impl HeraldedStats {
    pub fn get(&self, n: usize) -> f64 {
        self.p.get(n).copied().unwrap_or(0.0)
    }
}

/// `P(n) = μⁿ/(1+μ)^{n+1}`, `P_c = (μη_d + p_d)/(1 + μη_d)` and
/// `P_n = P(n)[1 − (1 − p_d)(1 − η_d)ⁿ]/P_c`.
pub fn heralded_stats(mu: f64, trigger: &DetectorModel, n_max: u32) -> HeraldedStats {
    if mu == 0.0 {
        // only the vacuum term survives; it is heralded by dark counts alone
        let mut p = vec![0.0; n_max as usize + 1];
        p[0] = 1.0;
        return HeraldedStats {
            mu,
            p_c: trigger.p_d,
            p,
            tail: 0.0,
        };
    }
    let eta = trigger.eta_d;
    let p_c = (mu * eta + trigger.p_d) / (1.0 + mu * eta);
    let ratio = mu / (1.0 + mu);
    let p = (0..=n_max)
        .map(|n| {
            let thermal = ratio.powi(n as i32) / (1.0 + mu);
            thermal * crate::math::fock_click(n, eta, trigger.p_d) / p_c
        })
        .collect();
    HeraldedStats {
        mu,
        p_c,
        p,
        tail: ratio.powi(n_max as i32 + 1) / p_c,
    }
}

/// Two-decoy bounds for heralded sources; `signal` and `decoy` are the
/// triggered statistics at `μ2` and `μ1`.
pub fn heralded_bounds(grid: &GainGrid<GainSet>, signal: &HeraldedStats, decoy: &HeraldedStats) -> SinglePhotonBounds {
    let s = |level: Level, st: &HeraldedStats, f: fn(&GainSet) -> f64| grid.inclusion_exclusion(level, st.get(0), f);
    let (p1_2, p2_2) = (signal.get(1), signal.get(2));
    let (p1_1, p2_1) = (decoy.get(1), decoy.get(2));
    let denom = p1_2 * p1_2 * p1_1 * p1_1 * (p2_2 * p1_1 - p2_1 * p1_2);
    let lower = |f: fn(&GainSet) -> f64| {
        (p1_2 * p1_2 * p2_2 * s(Level::Decoy, decoy, f) - p1_1 * p1_1 * p2_1 * s(Level::Signal, signal, f)) / denom
    };
    let mut diagnostics = Diagnostics::default();
    let y111_xl = finish_yield(lower(GainSet::q_x), "y111_xl_floored", &mut diagnostics);
    let y111_zl = finish_yield(lower(GainSet::q_z), "y111_zl_floored", &mut diagnostics);
    let p1_cubed = p1_1.powi(3);
    let e111_bzu = finish_error(
        s(Level::Decoy, decoy, |g| g.eq_z),
        p1_cubed * y111_zl,
        "e111_bz_capped",
        "e111_bz_unbounded",
        &mut diagnostics,
    );
    let e111_bxu = finish_error(
        s(Level::Decoy, decoy, |g| g.eq_x),
        p1_cubed * y111_xl,
        "e111_bx_capped",
        "e111_bx_unbounded",
        &mut diagnostics,
    );
    SinglePhotonBounds {
        y111_zl,
        y111_xl,
        e111_bxu,
        e111_bzu,
        diagnostics,
    }
}

/// Outcome-resolved Φ0+ gains for the `+++` and `−−−` sign patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MerminGains {
    pub ppp: f64,
    pub mmm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MerminYieldBounds {
    pub ppp_lower: f64,
    pub ppp_upper: f64,
    pub mmm_upper: f64,
}

/// Lower and upper bounds on `Y_{+++}^{111Φ0+}` and an upper bound on
/// `Y_{−−−}^{111Φ0+}`; the upper bounds drop every multi-photon term of
/// `S'(μ1)`.
pub fn mermin_yield_bounds(grid: &GainGrid<MerminGains>, plan: &DecoyPlan) -> MerminYieldBounds {
    let m1 = plan.mu1;
    let upper = |f: fn(&MerminGains) -> f64| {
        (3.0 * m1).exp() * grid.inclusion_exclusion(Level::Decoy, (-m1).exp(), f) / m1.powi(3)
    };
    MerminYieldBounds {
        ppp_lower: wcs_yield_lower(grid, plan, |g| g.ppp).max(0.0),
        ppp_upper: upper(|g| g.ppp).max(0.0),
        mmm_upper: upper(|g| g.mmm).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, Basis, ClickTable};
    use crate::gains::{gains_wcs, mermin_outcome_gains};
    use proptest::prelude::*;

    fn plan() -> DecoyPlan {
        DecoyPlan::new(0.4, 0.005).unwrap()
    }

    fn wcs_grid(eta: f64, p_d: f64, e_d: f64) -> GainGrid<GainSet> {
        let plan = plan();
        GainGrid::build(Exec::Sequential, |p| gains_wcs(pattern_intensities(p, &plan), eta, p_d, e_d)).unwrap()
    }

    #[test]
    fn grid_patterns_and_completeness() {
        let pats = GainGrid::<()>::required_patterns();
        assert_eq!(pats.len(), 15);
        let partial: Vec<_> = pats.iter().skip(1).map(|&p| (p, ())).collect();
        assert_eq!(GainGrid::from_entries(partial), Err(Error::IncompleteGrid("000".into())));
    }

    #[test]
    fn all_zero_grid_is_degenerate() {
        let grid = wcs_grid(0.0, 0.0, 0.0);
        let b = wcs_bounds(&grid, &plan());
        assert_eq!((b.y111_zl, b.y111_xl), (0.0, 0.0));
        assert_eq!(b.e111_bxu, ErrorBound::Unbounded);
        assert_eq!(b.e111_bzu, ErrorBound::Unbounded);
        assert!(b.diagnostics.contains("e111_bx_unbounded"));
    }

    #[test]
    fn wcs_bounds_bracket_exact_values_at_zero_distance() {
        let (eta, p_d, e_d) = (0.93, 1e-7, 0.0);
        let b = wcs_bounds(&wcs_grid(eta, p_d, e_d), &plan());
        let exact = fock::exact_single_photon_stats(eta, p_d, e_d);
        assert!(b.y111_zl <= exact.y111_z() + 1e-12);
        assert!(b.y111_xl <= exact.y111_x() + 1e-12);
        assert!(b.e111_bxu.value().unwrap() >= exact.e111_bx.unwrap() - 1e-12);
        assert!(b.y111_zl > 0.9 * exact.y111_z());
    }

    #[test]
    fn heralded_stats_examples() {
        let det = DetectorModel::new(0.4, 1e-7).unwrap();
        let s = heralded_stats(0.0, &det, 12);
        assert_eq!((s.p_c, s.p[0]), (1e-7, 1.0));
        let ideal = heralded_stats(0.1, &DetectorModel::new(1.0, 0.0).unwrap(), 12);
        assert_eq!(ideal.p[0], 0.0);
        let s = heralded_stats(5e-3, &det, 12);
        let sum: f64 = s.p.iter().sum();
        assert!(s.tail < 1e-12);
        assert!((sum - 1.0).abs() <= s.tail + 1e-15);
    }

    #[test]
    fn wcs_and_heralded_estimators_agree_on_poisson_statistics() {
        // The heralded estimator with Poisson P_n reduces to the WCS one.
        let grid = wcs_grid(0.05, 1e-6, 0.01);
        let plan = plan();
        let poisson = |mu: f64| HeraldedStats {
            mu,
            p_c: 1.0,
            p: (0..=12).map(|n| (-mu).exp() * mu.powi(n) / crate::math::factorial(n as u32) as f64).collect(),
            tail: 0.0,
        };
        let w = wcs_bounds(&grid, &plan);
        let h = heralded_bounds(&grid, &poisson(plan.mu2), &poisson(plan.mu1));
        assert!((w.y111_zl - h.y111_zl).abs() < 1e-12 * w.y111_zl);
        assert!((w.y111_xl - h.y111_xl).abs() < 1e-12 * w.y111_xl);
        let (a, b) = (w.e111_bxu.value().unwrap(), h.e111_bxu.value().unwrap());
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn mermin_bounds_suppress_false_pattern_when_ideal() {
        let plan = plan();
        let grid = GainGrid::build(Exec::Sequential, |p| {
            let mu = pattern_intensities(p, &plan);
            Ok(MerminGains {
                ppp: mermin_outcome_gains(0, mu, 1.0, 0.0)?,
                mmm: mermin_outcome_gains(7, mu, 1.0, 0.0)?,
            })
        })
        .unwrap();
        let b = mermin_yield_bounds(&grid, &plan);
        assert!(b.ppp_lower <= b.ppp_upper);
        assert!(b.mmm_upper < 1e-2 * b.ppp_upper, "{b:?}");
        let zero = GainGrid::from_entries(
            GainGrid::<MerminGains>::required_patterns()
                .into_iter()
                .map(|p| (p, MerminGains { ppp: 0.0, mmm: 0.0 })),
        )
        .unwrap();
        let z = mermin_yield_bounds(&zero, &plan);
        assert_eq!((z.ppp_lower, z.ppp_upper, z.mmm_upper), (0.0, 0.0, 0.0));
    }

    /// Gains generated from yields that vanish beyond four photons in total.
    fn truncated_grid(yields: &BTreeMap<[u32; 3], f64>, weights: impl Fn(f64, u32) -> f64, plan: &DecoyPlan) -> GainGrid<f64> {
        GainGrid::from_entries(GainGrid::<f64>::required_patterns().into_iter().map(|p| {
            let mu = pattern_intensities(p, plan);
            let q = yields
                .iter()
                .map(|(nml, y)| (0..3).map(|k| weights(mu[k], nml[k])).product::<f64>() * y)
                .sum();
            (p, q)
        }))
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn estimator_is_exact_for_four_photon_truncated_sources(
            ys in proptest::collection::vec(0.0f64..1.0, 35),
            // below μ1 ≈ 0.05 the 1/μ1³ amplification of rounding error
            // alone approaches 1e-10
            mu1 in 0.05f64..0.3,
            ratio in 1.5f64..10.0,
        ) {
            let plan = DecoyPlan::new(mu1 * ratio, mu1).unwrap();
            let mut yields = BTreeMap::new();
            let mut it = ys.into_iter();
            for n in 0..=4u32 {
                for m in 0..=4 - n {
                    for l in 0..=4 - n - m {
                        yields.insert([n, m, l], it.next().unwrap());
                    }
                }
            }
            let y111 = yields[&[1, 1, 1]];
            let poisson = |mu: f64, n: u32| (-mu).exp() * mu.powi(n as i32) / crate::math::factorial(n) as f64;
            let grid = truncated_grid(&yields, poisson, &plan);
            let y = wcs_yield_lower(&grid, &plan, |q| *q);
            prop_assert!((y - y111).abs() < 1e-10, "{} vs {}", y, y111);
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn raising_dark_counts_never_lowers_error_bound(pd in 1e-8f64..1e-5, factor in 1.0f64..10.0) {
            let eta = 0.004;
            let lo = wcs_bounds(&wcs_grid(eta, pd, 0.0), &plan()).e111_bxu.value().unwrap();
            let hi = wcs_bounds(&wcs_grid(eta, pd * factor, 0.0), &plan()).e111_bxu.value().unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }
    }

    #[test]
    fn heralded_bounds_below_exact_at_short_distance() {
        let det = DetectorModel::new(0.93, 1e-7).unwrap();
        let eta = 0.93;
        let plan = DecoyPlan::new(5e-3, 5e-4).unwrap();
        let stats = |mu| heralded_stats(mu, &det, 12);
        let grid = GainGrid::build(Exec::Sequential, |p| {
            let s = p.map(|l| stats(l.intensity(&plan)));
            Ok(crate::gains::gains_heralded([&s[0], &s[1], &s[2]], eta, det.p_d, 0.0, 12)?.gains)
        })
        .unwrap();
        let b = heralded_bounds(&grid, &stats(plan.mu2), &stats(plan.mu1));
        let table = ClickTable::new(eta, det.p_d, 3);
        let x = fock::x_basis_yield(&fock::pattern_yields(Basis::X, [1, 1, 1], &table, 3).unwrap());
        assert!(b.y111_xl <= x.total() + 1e-12);
        assert!(b.y111_xl > 0.5 * x.total(), "{} vs {}", b.y111_xl, x.total());
    }
}
