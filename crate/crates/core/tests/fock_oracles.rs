//! Independent checks of the Fock propagator: a Ryser-permanent transition
//! probability, and GHZ correlator symmetry for ideal single photons.

use mdiqc_core::fock::{
    analyzer_unitary, ghz_outcome_yield, propagate_fock, propagate_with_unitary, FockInput, ModeUnitary, Party,
    PhotonSource, Polarization,
};
use num_complex::Complex64;

/// Ryser's formula over an n×n complex matrix.
fn permanent(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    let mut total = Complex64::new(0.0, 0.0);
    for subset in 1u32..(1 << n) {
        let mut prod = Complex64::new(1.0, 0.0);
        for row in m {
            let s: Complex64 = (0..n).filter(|j| subset >> j & 1 == 1).map(|j| row[j]).sum();
            prod *= s;
        }
        let sign = if (n as u32 - subset.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

fn fact(k: u8) -> f64 {
    (1..=k as u32).map(f64::from).product()
}

/// `|Perm(U[out, in])|² / (Π n_in! Π n_out!)` for H/V occupations.
fn permanent_probability(u: &ModeUnitary, input: [u32; 6], output: [u8; 6]) -> f64 {
    let ins: Vec<usize> = (0..6).flat_map(|j| std::iter::repeat_n(j, input[j] as usize)).collect();
    let outs: Vec<usize> = (0..6).flat_map(|j| std::iter::repeat_n(j, output[j] as usize)).collect();
    assert_eq!(ins.len(), outs.len());
    let m: Vec<Vec<Complex64>> = outs.iter().map(|&o| ins.iter().map(|&i| u.m[o][i]).collect()).collect();
    let norm: f64 = input.iter().map(|&k| fact(k as u8)).product::<f64>() * output.iter().map(|&k| fact(k)).product::<f64>();
    permanent(&m).norm_sqr() / norm
}

#[test]
fn propagator_matches_permanents() {
    let u = analyzer_unitary();
    // (2, 1, 3) photons in H, H, V: the HHV configuration with all groups busy
    for input in [[2, 0, 1, 0, 0, 3], [1, 1, 0, 2, 1, 0], [0, 0, 3, 0, 0, 0], [1, 0, 1, 1, 2, 1]] {
        let dist = propagate_fock(&FockInput::from_occupation(input), 12).unwrap();
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);
        for (o, p) in &dist.outcomes {
            let want = permanent_probability(&u, input, *o);
            assert!((p - want).abs() < 1e-12, "{input:?} -> {o:?}: {p} vs {want}");
        }
        let float = propagate_with_unitary(&FockInput::from_occupation(input), &u);
        assert_eq!(float.outcomes.len(), dist.outcomes.len());
        for ((o1, p1), (o2, p2)) in float.outcomes.iter().zip(&dist.outcomes) {
            assert_eq!(o1, o2);
            assert!((p1 - p2).abs() < 1e-12);
        }
    }
}

fn correlator(pols: [[Polarization; 2]; 3]) -> f64 {
    let (mut signed, mut total) = (0.0, 0.0);
    for pattern in 0..8u8 {
        let sources = Party::ALL
            .into_iter()
            .enumerate()
            .map(|(p, party)| PhotonSource {
                party,
                polarization: pols[p][(pattern >> p & 1) as usize],
                photons: 1,
            })
            .collect();
        let (plus, _) = ghz_outcome_yield(&FockInput::new(sources).unwrap(), 1.0, 0.0, 3).unwrap();
        let sign = if pattern.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        signed += sign * plus;
        total += plus;
    }
    signed / total
}

#[test]
fn y_basis_correlators_mirror_xxx() {
    use Polarization::*;
    let x = [Plus, Minus];
    let y = [R, L];
    let xxx = correlator([x, x, x]);
    assert!((xxx - 1.0).abs() < 1e-12, "{xxx}");
    for c in [[x, y, y], [y, x, y], [y, y, x]] {
        let v = correlator(c);
        assert!((v + xxx).abs() < 1e-12, "{v}");
    }
    // M = <XXX> - <XYY> - <YXY> - <YYX>
    let m = xxx - correlator([x, y, y]) - correlator([y, x, y]) - correlator([y, y, x]);
    assert!((m - 4.0).abs() < 1e-12);
}
