//! Acceptance suite: ten end-to-end criteria on the shipped configs, one
//! PASS/FAIL line each. Exits nonzero if any criterion fails.
//!
//! ```bash
//! cargo test --release -p mdiqc-cli --test acceptance
//! ```

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mdiqc_cli::commands::{self, QssMethod, RunOptions};
use mdiqc_cli::load_config;
use mdiqc_cli::validation::{symmetry_suite, IDENTITY_TOL};
use mdiqc_core::decoy::{self, GainGrid};
use mdiqc_core::fock::{self, analyzer_unitary};
use mdiqc_core::gains::gains_wcs;
use mdiqc_core::keyrates::{naive_qss_error, KeyRateCurve};
use mdiqc_core::mermin::mermin_curve;
use mdiqc_core::montecarlo::{fock_closed_form_check, gain_checks, McConfig};
use mdiqc_core::params::{Config, SweepGrid};
use mdiqc_core::Exec;

const SLACK: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> Config {
    load_config(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn with_grid(mut c: Config, start_km: f64, stop_km: f64, step_km: f64) -> Config {
    c.sweep = Some(SweepGrid {
        start_km,
        stop_km,
        step_km,
        quick_step_km: step_km,
    });
    c
}

fn opts() -> RunOptions {
    RunOptions::default()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn cutoff(c: &KeyRateCurve) -> f64 {
    c.cutoff_km.unwrap_or(f64::NAN)
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn qcc_full_sweeps() -> Vec<(KeyRateCurve, Duration)> {
    ["qcc_eta40.conf", "qcc_eta93.conf"]
        .map(|name| {
            let (c, t) = timed(|| commands::qcc_curve(&config(name), &opts()).unwrap());
            (c, t)
        })
        .into()
}

fn c1_qcc_cutoffs(sweeps: &[(KeyRateCurve, Duration)]) -> Outcome {
    let (a, b) = (cutoff(&sweeps[0].0), cutoff(&sweeps[1].0));
    let slowest = sweeps.iter().map(|s| s.1).max().unwrap();
    let n = sweeps[0].0.points.len();
    verdict(
        within(a, 180.0, 200.0) && within(b, 200.0, 220.0) && slowest < Duration::from_secs(120) && n == 251,
        format!("cutoffs {a} km (0.40), {b} km (0.93); slowest {n}-point sweep {slowest:.1?}"),
    )
}

fn c2_pps_cutoffs() -> Outcome {
    let run = |name| {
        let c = with_grid(config(name), 100.0, 180.0, 1.0);
        cutoff(&commands::qss_curve(&c, QssMethod::Pps, &opts()).unwrap())
    };
    let (a, b) = (run("qss_pps_eta40.conf"), run("qss_pps_eta93.conf"));
    verdict(
        within(a, 120.0, 140.0) && within(b, 140.0, 160.0),
        format!("cutoffs {a} km (0.40), {b} km (0.93)"),
    )
}

fn c3_naive_error_plateau() -> Outcome {
    let mut worst: f64 = 0.375;
    for name in ["qss_pps_eta40.conf", "qss_pps_eta93.conf"] {
        let c = config(name);
        for l in (50..=150).step_by(10) {
            let e = naive_qss_error(&c.system.at_distance(l as f64), c.source.intensities)
                .unwrap()
                .unwrap_or(f64::NAN);
            worst = if (e - 0.375).abs() > (worst - 0.375).abs() || e.is_nan() { e } else { worst };
        }
    }
    verdict(
        (worst - 0.375).abs() <= 0.01,
        format!("E_x furthest from 37.5% over 50..150 km: {:.3}%", 100.0 * worst),
    )
}

fn c4_mermin() -> Outcome {
    let mut above_two = true;
    let mut at_170 = Vec::new();
    for name in ["mermin_eta40.conf", "mermin_eta93.conf"] {
        let c = config(name);
        let mut grid: Vec<f64> = (0..=150).step_by(10).map(f64::from).collect();
        grid.push(170.0);
        let rows = mermin_curve(&c.system, &c.decoy, &grid, Exec::Parallel).unwrap();
        for r in &rows {
            let m = r.m_lower.unwrap_or(0.0);
            if r.distance_km <= 150.0 {
                above_two &= m > 2.0;
            } else {
                at_170.push(m);
            }
        }
    }
    let hit = at_170.iter().any(|&m| within(m, 3.35, 3.65));
    verdict(
        above_two && hit,
        format!(
            "M_lower > 2 through 150 km: {above_two}; at 170 km {:.3} (0.40), {:.3} (0.93)",
            at_170[0], at_170[1]
        ),
    )
}

fn c5_soundness(sweeps: &[(KeyRateCurve, Duration)]) -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    for name in ["qcc_eta40.conf", "qcc_eta93.conf"] {
        let c = config(name);
        for l in (0..=150).step_by(5) {
            let p = c.system.at_distance(l as f64);
            let (eta, p_d, e_d) = (p.eta(), p.detector.p_d, p.e_d);
            let grid = GainGrid::build(Exec::Parallel, |pat| {
                gains_wcs(decoy::pattern_intensities(pat, &c.decoy), eta, p_d, e_d)
            })
            .unwrap();
            let b = decoy::wcs_bounds(&grid, &c.decoy);
            let exact = fock::exact_single_photon_stats(eta, p_d, e_d);
            let e_up = b.e111_bxu.value().unwrap_or(0.5);
            worst_excess = worst_excess
                .max(b.y111_zl - exact.y111_z())
                .max(exact.e111_bx.unwrap_or(0.0) - e_up);
        }
    }
    let ordered = sweeps
        .iter()
        .flat_map(|s| &s.0.points)
        .all(|p| p.rate <= p.rate_infinite * (1.0 + SLACK));
    let ratios: Vec<f64> = sweeps
        .iter()
        .map(|s| {
            let p = s.0.points.iter().find(|p| p.distance_km == 100.0).unwrap();
            p.rate / p.rate_infinite
        })
        .collect();
    verdict(
        worst_excess <= SLACK && ordered && ratios.iter().all(|&r| r >= 0.5),
        format!(
            "worst bound excess {worst_excess:.2e}; two <= infinite: {ordered}; ratio at 100 km {:.3}, {:.3}",
            ratios[0], ratios[1]
        ),
    )
}

fn c6_monte_carlo() -> Outcome {
    let c = config("validate.conf");
    let shards = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cfg = McConfig::new(c.montecarlo.samples, 0, shards).unwrap();
    let k = c.phase.map_or(8, |p| p.k);
    let (checks, t) = timed(|| gain_checks(c.source.intensities, c.system.eta(), c.system.detector.p_d, k, &cfg).unwrap());
    let worst = checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    verdict(
        worst < 3.0 && checks.len() == 8 && cfg.samples >= 10_000_000 && t < Duration::from_secs(180),
        format!("{} gains at {} samples, max |z| {worst:.3}, {t:.1?}", checks.len(), cfg.samples),
    )
}

fn c7_fock() -> Outcome {
    let r = fock_closed_form_check(6, 12).unwrap();
    let u = analyzer_unitary().unitarity_error();
    verdict(
        r.max_deviation <= 1e-12 && u <= 1e-12,
        format!("{} inputs, max deviation {:.2e}; unitarity {u:.2e}", r.inputs, r.max_deviation),
    )
}

fn c8_symmetry() -> Outcome {
    let c = config("validate.conf");
    let rows = symmetry_suite(&c.system, c.source.intensities, false).unwrap();
    let worst = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    verdict(
        rows.iter().all(|r| r.pass()) && worst <= IDENTITY_TOL,
        format!("{} checks, worst relative deviation {worst:.2e}", rows.len()),
    )
}

fn c9_heralded_qnd() -> Outcome {
    let mut failures = Vec::new();
    let mut at_50 = Vec::new();
    for (name, method) in [
        ("qss_heralded_eta40.conf", QssMethod::Heralded),
        ("qss_heralded_eta93.conf", QssMethod::Heralded),
        ("qss_qnd_eta40.conf", QssMethod::Qnd),
        ("qss_qnd_eta93.conf", QssMethod::Qnd),
    ] {
        let curve = commands::qss_curve(&config(name), method, &opts()).unwrap();
        let pts = &curve.points;
        let r50 = pts.iter().find(|p| p.distance_km == 50.0).unwrap().rate;
        at_50.push(r50);
        let peak = (0..pts.len()).max_by(|&i, &j| pts[i].rate.total_cmp(&pts[j].rate)).unwrap();
        let monotone = pts[peak..].windows(2).all(|w| w[1].rate <= w[0].rate * (1.0 + SLACK));
        let ordered = pts.iter().all(|p| p.rate <= p.rate_infinite * (1.0 + SLACK));
        if !(r50 > 0.0 && monotone && ordered) {
            failures.push(format!("{name}: rate(50) {r50:e}, monotone {monotone}, two <= infinite {ordered}"));
        }
    }
    let min50 = at_50.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("4 curves; smallest rate at 50 km {min50:.3e}")
        } else {
            failures.join("; ")
        },
    )
}

fn c10_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("mdiqc-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |cmd: &str, cfg: &str, threads: &str, tag: &str| -> Vec<u8> {
        let out = dir.join(format!("{cmd}-{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_mdiqc"))
            .args([cmd, "--quick", "--seed", "7", "--threads", threads, "--config"])
            .arg(configs().join(cfg))
            .arg("--out")
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "{cmd} --threads {threads} failed");
        std::fs::read(&out).unwrap()
    };
    let mut compared = 0;
    let mut same = true;
    for (cmd, cfg) in [("qcc", "qcc_eta40.conf"), ("validate", "validate.conf")] {
        let reference = run(cmd, cfg, "1", "a");
        for (threads, tag) in [("1", "b"), ("4", "c")] {
            same &= run(cmd, cfg, threads, tag) == reference;
            compared += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(same, format!("{compared} reruns byte-identical: {same}"))
}

fn main() {
    let sweeps = qcc_full_sweeps();
    let criteria: Vec<Criterion> = vec![
        ("QCC cutoff distances", Box::new(|| c1_qcc_cutoffs(&sweeps))),
        ("QSS phase post-selection cutoffs", Box::new(c2_pps_cutoffs)),
        ("naive QSS error plateau", Box::new(c3_naive_error_plateau)),
        ("Mermin curve", Box::new(c4_mermin)),
        ("decoy-bound soundness", Box::new(|| c5_soundness(&sweeps))),
        ("Monte Carlo oracle equivalence", Box::new(c6_monte_carlo)),
        ("Fock closed-form fidelity", Box::new(c7_fock)),
        ("symmetry suites", Box::new(c8_symmetry)),
        ("heralded and QND variants", Box::new(c9_heralded_qnd)),
        ("determinism", Box::new(c10_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (line, ok) = match check() {
            Ok(d) => (d, true),
            Err(d) => (d, false),
        };
        failed += usize::from(!ok);
        println!("criterion {:>2} {}  {name}: {line}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
