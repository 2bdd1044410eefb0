//! Decoy bounds never claim more than the exact single-photon statistics.

use mdiqc_core::decoy::{self, GainGrid};
use mdiqc_core::fock;
use mdiqc_core::gains::gains_wcs;
use mdiqc_core::keyrates::{sweep, ProtocolVariant};
use mdiqc_core::mermin::{mermin_gain_grid, mermin_lower_bound};
use mdiqc_core::params::{ChannelModel, DecoyPlan, DetectorModel, SystemParams};
use mdiqc_core::Exec;

const SLACK: f64 = 1e-12;

fn system(eta_d: f64, e_d: f64) -> SystemParams {
    SystemParams::new(
        ChannelModel::new(0.2, 0.0).unwrap(),
        DetectorModel::new(eta_d, 1e-7).unwrap(),
        e_d,
        1.16,
    )
    .unwrap()
}

#[test]
fn wcs_bounds_bracket_exact_values() {
    let plan = DecoyPlan::new(0.4, 0.005).unwrap();
    for eta_d in [0.4, 0.93] {
        for l in (0..=150).step_by(25) {
            let p = system(eta_d, 0.0).at_distance(l as f64);
            let (eta, p_d) = (p.eta(), p.detector.p_d);
            let grid = GainGrid::build(Exec::Parallel, |pat| {
                gains_wcs(decoy::pattern_intensities(pat, &plan), eta, p_d, 0.0)
            })
            .unwrap();
            let b = decoy::wcs_bounds(&grid, &plan);
            let exact = fock::exact_single_photon_stats(eta, p_d, 0.0);
            assert!(b.y111_zl <= exact.y111_z() + SLACK, "{l} km");
            assert!(b.y111_xl <= exact.y111_x() + SLACK, "{l} km");
            assert!(b.e111_bxu.value().unwrap() >= exact.e111_bx.unwrap() - SLACK, "{l} km");
            assert!(b.e111_bzu.value().unwrap() >= exact.e111_bz.unwrap() - SLACK, "{l} km");
        }
    }
}

#[test]
fn mermin_bounds_bracket_exact_yields() {
    let plan = DecoyPlan::new(0.4, 0.005).unwrap();
    for l in [0.0, 50.0, 100.0, 150.0] {
        let p = system(0.4, 0.015).at_distance(l);
        let grid = mermin_gain_grid(&p, &plan, Exec::Parallel).unwrap();
        let b = decoy::mermin_yield_bounds(&grid, &plan);
        let exact = fock::exact_single_photon_stats(p.eta(), p.detector.p_d, 0.0);
        assert!(b.ppp_lower <= exact.y_ppp_phi_plus + SLACK);
        assert!(exact.y_ppp_phi_plus <= b.ppp_upper + SLACK);
        assert!(exact.y_mmm_phi_plus <= b.mmm_upper + SLACK);
        let m = mermin_lower_bound(&p, &plan, Exec::Sequential).unwrap();
        assert!(m.m_lower.unwrap() <= m.m_exact.unwrap() + SLACK);
    }
}

#[test]
fn heralded_and_qnd_two_decoy_below_infinite_decoy() {
    let grid: Vec<f64> = (0..=150).step_by(30).map(f64::from).collect();
    for eta_d in [0.4, 0.93] {
        let p = system(eta_d, 0.015);
        for (variant, plan) in [
            (ProtocolVariant::QssHeralded { trigger: p.detector }, DecoyPlan::new(5e-3, 5e-4).unwrap()),
            (ProtocolVariant::QssQnd, DecoyPlan::new(0.4, 0.005).unwrap()),
        ] {
            let c = sweep(&variant, &p, &plan, &grid, Exec::Parallel).unwrap();
            for pt in &c.points {
                assert!(pt.rate <= pt.rate_infinite * (1.0 + 1e-12), "{} {pt:?}", variant.name());
            }
        }
    }
}
