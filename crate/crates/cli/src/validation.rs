//! `validate`: Monte Carlo, symmetry, closed-form and bound-bracketing
//! suites at the configured working point.

use std::fmt::Write as _;

use mdiqc_core::decoy::{self, GainGrid};
use mdiqc_core::fock::{self, analyzer_unitary, Basis};
use mdiqc_core::gains::{self, field_pattern_gains_at, mermin_outcome_gains, x_pattern_gains_at};
use mdiqc_core::mermin::mermin_gain_grid;
use mdiqc_core::montecarlo::{self, McCheck, McConfig};
use mdiqc_core::params::{Config, SystemParams};

use crate::commands::{fmt_f, RunOptions};
use crate::CliError;

pub const MC_Z_LIMIT: f64 = 3.0;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const EXACT_TOL: f64 = 1e-12;
pub const SYMMETRY_DISTANCES: [f64; 5] = [0.0, 25.0, 50.0, 100.0, 150.0];
/// Photon budget for the closed-form comparison.
pub const CLOSED_FORM_PHOTONS: u32 = 6;
const DEFAULT_K: u32 = 8;
const FAULT_SIGNS: u8 = 0b001;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub reference: f64,
    pub observed: f64,
    /// Compared against `tolerance`; pass when `deviation <= tolerance`.
    pub deviation: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn pass(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub mc_config: McConfig,
    pub mc: Vec<McCheck>,
    pub rows: Vec<CheckRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(CheckRow::pass)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| !r.pass()).collect()
    }

    pub fn text(&self) -> String {
        let mut s = montecarlo::render_report(&self.mc, &self.mc_config);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:<34} dev {:>11.3e} tol {:>8.1e}  {}",
                r.suite,
                r.check,
                r.deviation,
                r.tolerance,
                if r.pass() { "PASS" } else { "FAIL" }
            );
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("suite,check,reference,observed,deviation,tolerance,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.suite,
                r.check,
                fmt_f(r.reference),
                fmt_f(r.observed),
                fmt_f(r.deviation),
                fmt_f(r.tolerance),
                r.pass()
            );
        }
        s
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Keeps the worst `(reference, observed)` pair seen.
#[derive(Default)]
struct Worst {
    reference: f64,
    observed: f64,
    deviation: f64,
}

impl Worst {
    fn relative(&mut self, reference: f64, observed: f64) {
        self.offer(reference, observed, rel(reference, observed));
    }

    fn offer(&mut self, reference: f64, observed: f64, deviation: f64) {
        if deviation > self.deviation || deviation.is_nan() {
            *self = Worst {
                reference,
                observed,
                deviation,
            };
        }
    }

    fn row(self, suite: &'static str, check: impl Into<String>, tolerance: f64) -> CheckRow {
        CheckRow {
            suite,
            check: check.into(),
            reference: self.reference,
            observed: self.observed,
            deviation: self.deviation,
            tolerance,
        }
    }
}

pub fn run_validation(config: &Config, opts: &RunOptions) -> Result<ValidationReport, CliError> {
    let system = &config.system;
    let mu = [config.decoy.mu2; 3];
    let k = config.phase.map_or(DEFAULT_K, |p| p.k);

    let samples = if opts.quick {
        config.montecarlo.quick_samples
    } else {
        config.montecarlo.samples
    };
    let mc_config = McConfig::new(samples, opts.seed, opts.shards)?;
    let (eta, p_d) = (system.eta(), system.detector.p_d);
    let mut mc = montecarlo::gain_checks(mu, eta, p_d, k, &mc_config)?;
    if opts.inject_fault {
        // the hidden fault flips Alice's sign in the analytic `+++` gain
        let (plus, _) = x_pattern_gains_at(mu.map(|m| m * eta), FAULT_SIGNS, p_d)?;
        if let Some(e) = mc.iter_mut().find(|c| c.name == "E") {
            *e = McCheck::new("E", 8.0 * plus, e.estimate);
        }
    }
    let mut rows: Vec<CheckRow> = mc
        .iter()
        .map(|c| CheckRow {
            suite: "montecarlo",
            check: format!("{} at {} km", c.name, system.channel.length_km),
            reference: c.analytic,
            observed: c.estimate.mean,
            deviation: c.z.abs(),
            tolerance: MC_Z_LIMIT,
        })
        .collect();

    rows.extend(symmetry_suite(system, mu, opts.inject_fault)?);

    let closed = montecarlo::fock_closed_form_check(CLOSED_FORM_PHOTONS, system.n_max.max(CLOSED_FORM_PHOTONS))?;
    rows.push(CheckRow {
        suite: "fock",
        check: format!("HHV closed form, n+m+l <= {CLOSED_FORM_PHOTONS}"),
        reference: 0.0,
        observed: closed.max_deviation,
        deviation: closed.max_deviation,
        tolerance: EXACT_TOL,
    });
    let unitarity = analyzer_unitary().unitarity_error();
    rows.push(CheckRow {
        suite: "fock",
        check: "analyzer unitarity".into(),
        reference: 0.0,
        observed: unitarity,
        deviation: unitarity,
        tolerance: EXACT_TOL,
    });

    let step = if opts.quick { 50 } else { 25 };
    for l in (0..=150).step_by(step) {
        rows.extend(bracketing_rows(config, &system.at_distance(l as f64))?);
    }

    Ok(ValidationReport { mc_config, mc, rows })
}

/// Symmetry checks at every distance in [`SYMMETRY_DISTANCES`].
pub fn symmetry_suite(system: &SystemParams, mu: [f64; 3], inject_fault: bool) -> Result<Vec<CheckRow>, CliError> {
    let x_signs = if inject_fault { FAULT_SIGNS } else { 0b000 };
    let mut rows = Vec::new();
    for l in SYMMETRY_DISTANCES {
        rows.extend(symmetry_rows(&system.at_distance(l), mu, x_signs)?);
    }
    Ok(rows)
}

/// HHH/VVV four-way equality (and the B–D analogues) against field-level
/// phase averages, the eight-pattern Φ0+ equalities, and the `+++` gains
/// from the closed group model against the field-level model.
fn symmetry_rows(p: &SystemParams, mu: [f64; 3], x_signs: u8) -> Result<Vec<CheckRow>, CliError> {
    let (eta, p_d) = (p.eta(), p.detector.p_d);
    let x = mu.map(|m| m * eta);
    let l = p.channel.length_km;

    let z = gains::z_gain_components_at(x, p_d)?;
    let mut four_way = Worst::default();
    for (pattern, want) in [
        (0b000, z.a),
        (0b111, z.a),
        (0b100, z.b),
        (0b110, z.b),
        (0b001, z.c),
        (0b101, z.c),
        (0b010, z.d),
        (0b011, z.d),
    ] {
        let (plus, minus) = field_pattern_gains_at(x, Basis::Z, pattern, p_d)?;
        four_way.relative(want, plus);
        four_way.relative(want, minus);
    }

    let g: Vec<f64> = (0..8u8)
        .map(|s| mermin_outcome_gains(s, mu, eta, p_d))
        .collect::<Result<_, _>>()?;
    let mut eight = Worst::default();
    for s in 0..8usize {
        let anchor = if s.count_ones() % 2 == 0 { g[0] } else { g[7] };
        eight.relative(anchor, g[s]);
    }

    let mut field = Worst::default();
    let (fp, fm) = field_pattern_gains_at(x, Basis::X, 0, p_d)?;
    let (qp, qm) = x_pattern_gains_at(x, x_signs, p_d)?;
    field.relative(qp, fp);
    field.relative(qm, fm);

    Ok(vec![
        four_way.row("symmetry", format!("Z four-way equalities at {l} km"), IDENTITY_TOL),
        eight.row("symmetry", format!("eight-pattern equalities at {l} km"), IDENTITY_TOL),
        field.row("symmetry", format!("+++ group vs field model at {l} km"), IDENTITY_TOL),
    ])
}

fn bracketing_rows(config: &Config, p: &SystemParams) -> Result<Vec<CheckRow>, CliError> {
    let plan = &config.decoy;
    let (eta, p_d, e_d) = (p.eta(), p.detector.p_d, p.e_d);
    let l = p.channel.length_km;
    let grid = GainGrid::build(mdiqc_core::Exec::Sequential, |pat| {
        gains::gains_wcs(decoy::pattern_intensities(pat, plan), eta, p_d, e_d)
    })?;
    let b = decoy::wcs_bounds(&grid, plan);
    let exact = fock::exact_single_photon_stats(eta, p_d, e_d);
    let mut rows = Vec::new();
    let mut push = |check: String, reference: f64, observed: f64, excess: f64| {
        rows.push(CheckRow {
            suite: "bounds",
            check,
            reference,
            observed,
            deviation: excess,
            tolerance: EXACT_TOL,
        })
    };
    push(format!("Y111_zl <= exact at {l} km"), exact.y111_z(), b.y111_zl, b.y111_zl - exact.y111_z());
    push(format!("Y111_xl <= exact at {l} km"), exact.y111_x(), b.y111_xl, b.y111_xl - exact.y111_x());
    if let (Some(u), Some(e)) = (b.e111_bxu.value(), exact.e111_bx) {
        push(format!("e111_bxu >= exact at {l} km"), e, u, e - u);
    }
    let mg = mermin_gain_grid(p, plan, mdiqc_core::Exec::Sequential)?;
    let mb = decoy::mermin_yield_bounds(&mg, plan);
    let (yp, ym) = (exact.y_ppp_phi_plus, exact.y_mmm_phi_plus);
    push(format!("Y+++ lower <= exact at {l} km"), yp, mb.ppp_lower, mb.ppp_lower - yp);
    push(format!("Y+++ upper >= exact at {l} km"), yp, mb.ppp_upper, yp - mb.ppp_upper);
    push(format!("Y--- upper >= exact at {l} km"), ym, mb.mmm_upper, ym - mb.mmm_upper);
    Ok(rows)
}
