//! Photon-number states through the GHZ analyzer.
//!
//! Input modes are (party, polarization) for Alice, Bob and Charlie; output
//! modes are the six detectors `1H, 1V, 2H, 2V, 3H, 3V` (indices 0..6).
//! Each party's horizontal light reaches one spatial group split evenly
//! over H and V, and its vertical light reaches another group with a
//! relative minus sign:
//!
//! ```text
//! A_H -> (3H + 3V)/√2    A_V -> (1H - 1V)/√2
//! B_H -> (1H + 1V)/√2    B_V -> (2H - 2V)/√2
//! C_H -> (2H + 2V)/√2    C_V -> (3H - 3V)/√2
//! ```
//!
//! Group 1 mixes Alice and Bob, group 2 Bob and Charlie, group 3 Alice and
//! Charlie. Every amplitude the analyzer can produce for H/V/±/R/L inputs is
//! a Gaussian integer times a power of 1/√2, so [`propagate_fock`] expands
//! the output creation-operator polynomial exactly in `i128` arithmetic and
//! only converts to `f64` at the end.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::math::factorial;

type GaussInt = Complex<i128>;

/// Occupation numbers over the six detector modes.
pub type Occupation = [u8; 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Alice = 0,
    Bob = 1,
    Charlie = 2,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Alice, Party::Bob, Party::Charlie];
}

/// Single-photon polarization state. `R = (H + iV)/√2`, `L = (H − iV)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    Plus,
    Minus,
    R,
    L,
}

impl Polarization {
    /// Normalized (H, V) amplitudes.
    pub fn amplitudes(self) -> [Complex64; 2] {
        let (c, e) = self.components();
        let scale = FRAC_1_SQRT_2.powi(e as i32);
        c.map(|z| Complex64::new(z.re as f64 * scale, z.im as f64 * scale))
    }

    /// (H, V) components scaled by `√2^e`, and `e`.
    fn components(self) -> ([GaussInt; 2], u32) {
        let one = GaussInt::new(1, 0);
        let zero = GaussInt::new(0, 0);
        let i = GaussInt::new(0, 1);
        match self {
            Polarization::H => ([one, zero], 0),
            Polarization::V => ([zero, one], 0),
            Polarization::Plus => ([one, one], 1),
            Polarization::Minus => ([one, -one], 1),
            Polarization::R => ([one, i], 1),
            Polarization::L => ([one, -i], 1),
        }
    }
}

/// Measurement basis a party prepares in. Pattern bit 0 selects the first
/// eigenstate (H, + or R), bit 1 the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub fn state(self, bit: bool) -> Polarization {
        match (self, bit) {
            (Basis::Z, false) => Polarization::H,
            (Basis::Z, true) => Polarization::V,
            (Basis::X, false) => Polarization::Plus,
            (Basis::X, true) => Polarization::Minus,
            (Basis::Y, false) => Polarization::R,
            (Basis::Y, true) => Polarization::L,
        }
    }
}

/// `photons` photons from one party in one polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSource {
    pub party: Party,
    pub polarization: Polarization,
    pub photons: u32,
}

/// A product of Fock states of mutually orthogonal source modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockInput {
    sources: Vec<PhotonSource>,
}

impl FockInput {
    pub fn new(sources: Vec<PhotonSource>) -> Result<Self> {
        for (i, a) in sources.iter().enumerate() {
            for b in &sources[i + 1..] {
                if a.party != b.party {
                    continue;
                }
                let (ca, _) = a.polarization.components();
                let (cb, _) = b.polarization.components();
                let overlap = ca[0].conj() * cb[0] + ca[1].conj() * cb[1];
                if overlap != GaussInt::new(0, 0) {
                    return Err(Error::invalid(
                        "fock input",
                        format!("{:?} sources are not orthogonal", a.party),
                    ));
                }
            }
        }
        Ok(FockInput { sources })
    }

    /// Input with `occupation[2p + s]` photons in party `p`, polarization H (s=0) or V (s=1).
    pub fn from_occupation(occupation: [u32; 6]) -> Self {
        let mut sources = Vec::new();
        for (p, party) in Party::ALL.into_iter().enumerate() {
            for (s, pol) in [Polarization::H, Polarization::V].into_iter().enumerate() {
                let n = occupation[2 * p + s];
                if n > 0 {
                    sources.push(PhotonSource {
                        party,
                        polarization: pol,
                        photons: n,
                    });
                }
            }
        }
        FockInput { sources }
    }

    /// Each party sends `photons[p]` photons in the basis state selected by bit `p` of `pattern`.
    pub fn basis_product(basis: Basis, pattern: u8, photons: [u32; 3]) -> Self {
        let sources = Party::ALL
            .into_iter()
            .enumerate()
            .filter(|&(p, _)| photons[p] > 0)
            .map(|(p, party)| PhotonSource {
                party,
                polarization: basis.state(pattern >> p & 1 == 1),
                photons: photons[p],
            })
            .collect();
        FockInput { sources }
    }

    pub fn sources(&self) -> &[PhotonSource] {
        &self.sources
    }

    pub fn total_photons(&self) -> u32 {
        self.sources.iter().map(|s| s.photons).sum()
    }
}

/// Linear map from input-mode to output-mode creation operators,
/// `m[out][in]`, with input modes ordered `A_H, A_V, B_H, B_V, C_H, C_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    pub m: [[Complex64; 6]; 6],
}

/// Integer part of the analyzer; every entry carries an extra 1/√2.
const ANALYZER: [[i8; 6]; 6] = [
    // A_H A_V B_H B_V C_H C_V
    [0, 1, 1, 0, 0, 0],   // 1H
    [0, -1, 1, 0, 0, 0],  // 1V
    [0, 0, 0, 1, 1, 0],   // 2H
    [0, 0, 0, -1, 1, 0],  // 2V
    [1, 0, 0, 0, 0, 1],   // 3H
    [1, 0, 0, 0, 0, -1],  // 3V
];

pub const MODE_LABELS: [&str; 6] = ["1H", "1V", "2H", "2V", "3H", "3V"];
pub const INPUT_LABELS: [&str; 6] = ["A_H", "A_V", "B_H", "B_V", "C_H", "C_V"];

/// The GHZ analyzer network.
pub fn analyzer_unitary() -> ModeUnitary {
    let mut m = [[Complex64::new(0.0, 0.0); 6]; 6];
    for (o, row) in ANALYZER.iter().enumerate() {
        for (i, &w) in row.iter().enumerate() {
            m[o][i] = Complex64::new(w as f64 * FRAC_1_SQRT_2, 0.0);
        }
    }
    ModeUnitary { m }
}

impl ModeUnitary {
    /// `max |(U†U − I)_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                let mut acc = Complex64::new(0.0, 0.0);
                for o in 0..6 {
                    acc += self.m[o][i].conj() * self.m[o][j];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// `U · diag(e^{iθ_k})`: a phase on each input mode.
    pub fn with_input_phases(&self, phases: [f64; 6]) -> Self {
        let mut m = self.m;
        for row in &mut m {
            for (i, v) in row.iter_mut().enumerate() {
                *v *= Complex64::from_polar(1.0, phases[i]);
            }
        }
        ModeUnitary { m }
    }

    /// Output amplitudes for input amplitudes `a` (coherent-state fields).
    pub fn apply(&self, a: &[Complex64; 6]) -> [Complex64; 6] {
        let mut out = [Complex64::new(0.0, 0.0); 6];
        for (o, row) in self.m.iter().enumerate() {
            out[o] = row.iter().zip(a).map(|(u, x)| u * x).sum();
        }
        out
    }

    /// 6×6 table of `(re, im)` pairs, one row per output mode.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("output");
        for l in INPUT_LABELS {
            s.push_str(&format!(",{l}_re,{l}_im"));
        }
        s.push('\n');
        for (o, row) in self.m.iter().enumerate() {
            s.push_str(MODE_LABELS[o]);
            for v in row {
                s.push_str(&format!(",{:.17e},{:.17e}", v.re, v.im));
            }
            s.push('\n');
        }
        s
    }
}

/// Output photon-number configurations and their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOutcomeDistribution {
    pub input: FockInput,
    /// Sorted by occupation; zero-amplitude configurations omitted.
    pub outcomes: Vec<(Occupation, f64)>,
}

impl FockOutcomeDistribution {
    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    pub fn probability(&self, occupation: &Occupation) -> f64 {
        self.outcomes
            .binary_search_by(|(o, _)| o.cmp(occupation))
            .map_or(0.0, |i| self.outcomes[i].1)
    }
}

/// Multiplies out `Π_s (Σ_j w_sj o†_j)^{n_s}` and returns the coefficient of
/// each output monomial.
fn expand<C>(sources: &[([C; 6], u32)], zero: C, one: C) -> BTreeMap<Occupation, C>
where
    C: Copy + PartialEq + std::ops::Add<Output = C> + std::ops::Mul<Output = C>,
{
    let mut poly = BTreeMap::new();
    poly.insert([0u8; 6], one);
    for (w, n) in sources {
        for _ in 0..*n {
            let mut next: BTreeMap<Occupation, C> = BTreeMap::new();
            for (occ, c) in &poly {
                for (j, &wj) in w.iter().enumerate() {
                    if wj == zero {
                        continue;
                    }
                    let mut o = *occ;
                    o[j] += 1;
                    let slot = next.entry(o).or_insert(zero);
                    *slot = *slot + *c * wj;
                }
            }
            next.retain(|_, c| *c != zero);
            poly = next;
        }
    }
    poly
}

fn occupation_factorials(o: &Occupation) -> u128 {
    o.iter().map(|&k| factorial(k as u32)).product()
}

fn input_factorials(input: &FockInput) -> u128 {
    input.sources.iter().map(|s| factorial(s.photons)).product()
}

/// Exact output distribution of `input` through the analyzer.
pub fn propagate_fock(input: &FockInput, n_max: u32) -> Result<FockOutcomeDistribution> {
    let total = input.total_photons();
    if total > n_max {
        return Err(Error::CutoffExceeded {
            photons: total,
            cutoff: n_max,
        });
    }
    let mut scale_exp = 0u32;
    let sources: Vec<([GaussInt; 6], u32)> = input
        .sources
        .iter()
        .map(|s| {
            let (c, e) = s.polarization.components();
            scale_exp += (e + 1) * s.photons;
            let base = 2 * s.party as usize;
            let mut w = [GaussInt::new(0, 0); 6];
            for (o, row) in ANALYZER.iter().enumerate() {
                w[o] = c[0] * row[base] as i128 + c[1] * row[base + 1] as i128;
            }
            (w, s.photons)
        })
        .collect();
    let poly = expand(&sources, GaussInt::new(0, 0), GaussInt::new(1, 0));
    let denom = input_factorials(input) as f64 * 2f64.powi(scale_exp as i32);
    let outcomes = poly
        .into_iter()
        .map(|(o, c)| {
            let num = c.norm_sqr() as f64 * occupation_factorials(&o) as f64;
            (o, num / denom)
        })
        .collect();
    Ok(FockOutcomeDistribution {
        input: input.clone(),
        outcomes,
    })
}

/// Floating-point propagation through an arbitrary mode transformation.
pub fn propagate_with_unitary(input: &FockInput, u: &ModeUnitary) -> FockOutcomeDistribution {
    let sources: Vec<([Complex64; 6], u32)> = input
        .sources
        .iter()
        .map(|s| {
            let c = s.polarization.amplitudes();
            let base = 2 * s.party as usize;
            let w: [Complex64; 6] = std::array::from_fn(|o| c[0] * u.m[o][base] + c[1] * u.m[o][base + 1]);
            (w, s.photons)
        })
        .collect();
    let poly = expand(&sources, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    let denom = input_factorials(input) as f64;
    let outcomes = poly
        .into_iter()
        .map(|(o, c)| (o, c.norm_sqr() * occupation_factorials(&o) as f64 / denom))
        .filter(|&(_, p)| p > 0.0)
        .collect();
    FockOutcomeDistribution {
        input: input.clone(),
        outcomes,
    }
}

/// Per-detector click probabilities `1 − (1 − p_d)(1 − η)^k`.
pub fn click_probability_set(config: &Occupation, eta: f64, p_d: f64) -> [f64; 6] {
    config.map(|k| crate::math::fock_click(k as u32, eta, p_d))
}

/// GHZ-analyzer verdict for a click pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeClass {
    PhiPlus,
    PhiMinus,
    None,
}

/// Φ+ for one click per spatial group with an even number of V clicks,
/// Φ− for an odd number; anything else is discarded.
pub fn classify(clicks: [bool; 6]) -> OutcomeClass {
    let mut odd = false;
    for g in 0..3 {
        match (clicks[2 * g], clicks[2 * g + 1]) {
            (true, false) => {}
            (false, true) => odd = !odd,
            _ => return OutcomeClass::None,
        }
    }
    if odd {
        OutcomeClass::PhiMinus
    } else {
        OutcomeClass::PhiPlus
    }
}

/// No-click and click probabilities per incident photon count at fixed η, p_d.
#[derive(Debug, Clone)]
pub struct ClickTable {
    no_click: Vec<f64>,
    click: Vec<f64>,
}

impl ClickTable {
    pub fn new(eta: f64, p_d: f64, n_max: u32) -> Self {
        let click: Vec<f64> = (0..=n_max)
            .map(|k| crate::math::fock_click(k, eta, p_d))
            .collect();
        let log_pass = (-eta).ln_1p();
        let no_click = (0..=n_max)
            .map(|k| {
                if k == 0 {
                    1.0 - p_d
                } else if eta >= 1.0 {
                    0.0
                } else {
                    (1.0 - p_d) * (k as f64 * log_pass).exp()
                }
            })
            .collect();
        ClickTable { no_click, click }
    }

    /// (Y_Φ+, Y_Φ−) contribution of one output configuration.
    #[inline]
    pub fn outcome_weights(&self, o: &Occupation) -> (f64, f64) {
        let mut h = [0.0; 3];
        let mut v = [0.0; 3];
        for g in 0..3 {
            let (kh, kv) = (o[2 * g] as usize, o[2 * g + 1] as usize);
            h[g] = self.click[kh] * self.no_click[kv];
            v[g] = self.click[kv] * self.no_click[kh];
        }
        let plus = h[0] * h[1] * h[2] + h[0] * v[1] * v[2] + v[0] * h[1] * v[2] + v[0] * v[1] * h[2];
        let minus = h[0] * h[1] * v[2] + h[0] * v[1] * h[2] + v[0] * h[1] * h[2] + v[0] * v[1] * v[2];
        (plus, minus)
    }

    pub fn yields(&self, outcomes: &[(Occupation, f64)]) -> (f64, f64) {
        outcomes.iter().fold((0.0, 0.0), |(a, b), (o, p)| {
            let (x, y) = self.outcome_weights(o);
            (a + p * x, b + p * y)
        })
    }
}

/// Probabilities (Y_Φ+, Y_Φ−) that the analyzer announces each GHZ class.
pub fn ghz_outcome_yield(input: &FockInput, eta: f64, p_d: f64, n_max: u32) -> Result<(f64, f64)> {
    let dist = propagate_fock(input, n_max)?;
    Ok(ClickTable::new(eta, p_d, n_max).yields(&dist.outcomes))
}

type CacheKey = (Basis, u8, [u32; 3]);
type DistCache = Mutex<HashMap<CacheKey, Arc<Vec<(Occupation, f64)>>>>;

/// Output distribution for a basis-product input, memoized across calls.
/// Only the click probabilities depend on η, so sweeps reuse these.
pub fn cached_distribution(
    basis: Basis,
    pattern: u8,
    photons: [u32; 3],
    n_max: u32,
) -> Result<Arc<Vec<(Occupation, f64)>>> {
    static CACHE: OnceLock<DistCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (basis, pattern, photons);
    if let Some(d) = cache.lock().expect("fock cache poisoned").get(&key) {
        return Ok(d.clone());
    }
    let input = FockInput::basis_product(basis, pattern, photons);
    let dist = Arc::new(propagate_fock(&input, n_max)?.outcomes);
    cache
        .lock()
        .expect("fock cache poisoned")
        .insert(key, dist.clone());
    Ok(dist)
}

/// (Y_Φ+, Y_Φ−) for each of the 8 patterns of `basis` at photon numbers `photons`.
pub fn pattern_yields(
    basis: Basis,
    photons: [u32; 3],
    table: &ClickTable,
    n_max: u32,
) -> Result<[(f64, f64); 8]> {
    let mut out = [(0.0, 0.0); 8];
    for (pattern, slot) in out.iter_mut().enumerate() {
        let dist = cached_distribution(basis, pattern as u8, photons, n_max)?;
        *slot = table.yields(&dist);
    }
    Ok(out)
}

/// Z-basis patterns whose three users share the same bit (HHH, VVV).
pub fn z_pattern_correct(pattern: u8) -> bool {
    pattern == 0 || pattern == 7
}

/// The outcome class that counts as correct for an X-basis sign pattern:
/// Φ+ for an even number of minus signs.
pub fn x_correct_class(pattern: u8) -> OutcomeClass {
    if pattern.count_ones().is_multiple_of(2) {
        OutcomeClass::PhiPlus
    } else {
        OutcomeClass::PhiMinus
    }
}

/// Correct and erroneous yield (each including the 1/8 pattern weight)
/// for one photon-number triple.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BasisYield {
    pub correct: f64,
    pub error: f64,
}

impl BasisYield {
    pub fn total(&self) -> f64 {
        self.correct + self.error
    }

    /// `(e_d·Y^C + (1 − e_d)·Y^E) / Y`, `None` when nothing is detected.
    pub fn error_rate(&self, e_d: f64) -> Option<f64> {
        let y = self.total();
        (y > 0.0).then(|| (e_d * self.correct + (1.0 - e_d) * self.error) / y)
    }
}

pub fn z_basis_yield(yields: &[(f64, f64); 8]) -> BasisYield {
    let mut b = BasisYield::default();
    for (p, (plus, minus)) in yields.iter().enumerate() {
        let y = (plus + minus) / 8.0;
        if z_pattern_correct(p as u8) {
            b.correct += y;
        } else {
            b.error += y;
        }
    }
    b
}

pub fn x_basis_yield(yields: &[(f64, f64); 8]) -> BasisYield {
    let mut b = BasisYield::default();
    for (p, (plus, minus)) in yields.iter().enumerate() {
        let (c, e) = match x_correct_class(p as u8) {
            OutcomeClass::PhiPlus => (plus, minus),
            _ => (minus, plus),
        };
        b.correct += c / 8.0;
        b.error += e / 8.0;
    }
    b
}

/// Exact single-photon statistics, the "infinite decoy" reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSinglePhoton {
    pub z: BasisYield,
    pub x: BasisYield,
    /// Z-basis error rate of single-photon triples, `None` if Y111^Z = 0.
    pub e111_bz: Option<f64>,
    /// X-basis error rate of single-photon triples, `None` if Y111^X = 0.
    pub e111_bx: Option<f64>,
    /// `Y_{+++}^{Φ+}/8` and `Y_{−−−}^{Φ+}/8`.
    pub y_ppp_phi_plus: f64,
    pub y_mmm_phi_plus: f64,
}

impl ExactSinglePhoton {
    pub fn y111_z(&self) -> f64 {
        self.z.total()
    }
    pub fn y111_x(&self) -> f64 {
        self.x.total()
    }
}

pub fn exact_single_photon_stats(eta: f64, p_d: f64, e_d: f64) -> ExactSinglePhoton {
    let table = ClickTable::new(eta, p_d, 3);
    // three photons never exceed the cutoff
    let zy = pattern_yields(Basis::Z, [1, 1, 1], &table, 3).expect("3 photons within cutoff");
    let xy = pattern_yields(Basis::X, [1, 1, 1], &table, 3).expect("3 photons within cutoff");
    let z = z_basis_yield(&zy);
    let x = x_basis_yield(&xy);
    ExactSinglePhoton {
        z,
        x,
        e111_bz: z.error_rate(e_d),
        e111_bx: x.error_rate(e_d),
        y_ppp_phi_plus: xy[0].0 / 8.0,
        y_mmm_phi_plus: xy[7].0 / 8.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(party: Party, pol: Polarization) -> FockInput {
        FockInput::new(vec![PhotonSource {
            party,
            polarization: pol,
            photons: 1,
        }])
        .unwrap()
    }

    #[test]
    fn analyzer_is_unitary() {
        assert!(analyzer_unitary().unitarity_error() < 1e-12);
    }

    #[test]
    fn single_photon_routes() {
        let d = propagate_fock(&single(Party::Bob, Polarization::H), 12).unwrap();
        assert_eq!(d.outcomes, vec![([0, 1, 0, 0, 0, 0], 0.5), ([1, 0, 0, 0, 0, 0], 0.5)]);
        let u = analyzer_unitary();
        // Charlie V -> (3H - 3V)/√2
        assert!((u.m[4][5].re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((u.m[5][5].re + FRAC_1_SQRT_2).abs() < 1e-16);
        // Alice H -> (3H + 3V)/√2
        assert!((u.m[4][0].re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((u.m[5][0].re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((u.m[0][2].re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((u.m[1][2].re - FRAC_1_SQRT_2).abs() < 1e-16);
    }

    #[test]
    fn hhv_input_matches_closed_form() {
        let input = FockInput::from_occupation([1, 0, 1, 0, 0, 1]);
        let d = propagate_fock(&input, 12).unwrap();
        for p in 0..=2 {
            for s in 0..=1 {
                let o = [s as u8, (1 - s) as u8, 0, 0, p as u8, (2 - p) as u8];
                let want = crate::montecarlo::hhv_closed_form(1, 1, 1, p, s);
                assert!((d.probability(&o) - want).abs() < 1e-15, "p={p} s={s}");
            }
        }
    }

    #[test]
    fn normalization_and_cutoff() {
        let input = FockInput::from_occupation([2, 1, 0, 3, 1, 2]);
        let d = propagate_fock(&input, 12).unwrap();
        assert!((d.total_probability() - 1.0).abs() < 1e-12);
        for (o, _) in &d.outcomes {
            assert_eq!(o.iter().map(|&k| k as u32).sum::<u32>(), 9);
        }
        assert_eq!(
            propagate_fock(&input, 8),
            Err(Error::CutoffExceeded {
                photons: 9,
                cutoff: 8
            })
        );
    }

    #[test]
    fn non_orthogonal_sources_rejected() {
        let src = |pol| PhotonSource {
            party: Party::Alice,
            polarization: pol,
            photons: 1,
        };
        assert!(FockInput::new(vec![src(Polarization::H), src(Polarization::Plus)]).is_err());
        assert!(FockInput::new(vec![src(Polarization::R), src(Polarization::L)]).is_ok());
    }

    #[test]
    fn click_probability_examples() {
        assert_eq!(click_probability_set(&[0; 6], 0.4, 0.0), [0.0; 6]);
        assert_eq!(click_probability_set(&[1, 0, 0, 0, 0, 0], 1.0, 0.0)[0], 1.0);
        let c = click_probability_set(&[2, 0, 0, 0, 0, 0], 0.4, 1e-7)[0];
        assert!((c - 0.640000036).abs() < 1e-15);
    }

    #[test]
    fn classification_table() {
        let bits = |s: &str| {
            let mut c = [false; 6];
            for tok in s.as_bytes().chunks(2) {
                let g = (tok[0] - b'1') as usize;
                c[2 * g + (tok[1] == b'V') as usize] = true;
            }
            c
        };
        for s in ["1H2H3H", "1H2V3V", "1V2H3V", "1V2V3H"] {
            assert_eq!(classify(bits(s)), OutcomeClass::PhiPlus, "{s}");
        }
        for s in ["1H2H3V", "1H2V3H", "1V2H3H", "1V2V3V"] {
            assert_eq!(classify(bits(s)), OutcomeClass::PhiMinus, "{s}");
        }
        assert_eq!(classify(bits("1H1V2H3H")), OutcomeClass::None);
        assert_eq!(classify(bits("1H2H")), OutcomeClass::None);
    }

    #[test]
    fn vacuum_yields() {
        let vac = FockInput::from_occupation([0; 6]);
        assert_eq!(ghz_outcome_yield(&vac, 0.4, 0.0, 12).unwrap(), (0.0, 0.0));
        let pd = 1e-3;
        let (a, b) = ghz_outcome_yield(&vac, 0.4, pd, 12).unwrap();
        let want = 4.0 * pd.powi(3) * (1.0 - pd).powi(3);
        assert!((a - want).abs() < 1e-24 && (b - want).abs() < 1e-24);
    }

    #[test]
    fn ideal_single_photons_have_no_errors() {
        let s = exact_single_photon_stats(1.0, 0.0, 0.0);
        assert_eq!(s.e111_bx, Some(0.0));
        assert_eq!(s.e111_bz, Some(0.0));
        assert!(s.y111_z() > 0.0 && s.y111_x() > 0.0);
        assert_eq!(s.y_mmm_phi_plus, 0.0);
        let half = exact_single_photon_stats(0.3, 1e-6, 0.5);
        assert!((half.e111_bx.unwrap() - 0.5).abs() < 1e-15);
        assert!((half.e111_bz.unwrap() - 0.5).abs() < 1e-15);
        // 1/4 of ideal single-photon triples are announced in each basis
        assert!((s.y111_z() - 0.25).abs() < 1e-15);
        assert!((s.y111_x() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn z_product_inputs_have_symmetric_classes() {
        let table = ClickTable::new(0.3, 1e-4, 12);
        for photons in [[1, 1, 1], [2, 1, 0], [1, 2, 3]] {
            for (p, (plus, minus)) in pattern_yields(Basis::Z, photons, &table, 12)
                .unwrap()
                .iter()
                .enumerate()
            {
                assert!((plus - minus).abs() <= 1e-14 * plus.max(1e-300), "{photons:?} {p}");
            }
        }
    }

    #[test]
    fn unitary_dump_has_six_rows() {
        let csv = analyzer_unitary().to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("output,A_H_re,A_H_im"));
    }

    fn arb_occupation() -> impl Strategy<Value = [u32; 6]> {
        proptest::array::uniform6(0u32..3).prop_filter("cutoff", |o| o.iter().sum::<u32>() <= 8)
    }

    proptest! {
        #[test]
        fn photon_number_conserved_and_normalized(occ in arb_occupation()) {
            let d = propagate_fock(&FockInput::from_occupation(occ), 12).unwrap();
            let n: u32 = occ.iter().sum();
            for (o, p) in &d.outcomes {
                prop_assert_eq!(o.iter().map(|&k| k as u32).sum::<u32>(), n);
                prop_assert!(*p >= 0.0);
            }
            prop_assert!((d.total_probability() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn input_phases_do_not_change_probabilities(
            occ in arb_occupation(),
            phases in proptest::array::uniform6(0.0f64..std::f64::consts::TAU),
        ) {
            let input = FockInput::from_occupation(occ);
            let exact = propagate_fock(&input, 12).unwrap();
            let shifted = propagate_with_unitary(&input, &analyzer_unitary().with_input_phases(phases));
            for (o, p) in &exact.outcomes {
                prop_assert!((shifted.probability(o) - p).abs() < 1e-12);
            }
            prop_assert!((shifted.total_probability() - 1.0).abs() < 1e-10);
        }
    }
}
