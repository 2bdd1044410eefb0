//! Command bodies. Each returns the CSV table (column row + data rows);
//! the caller prepends the manifest header and writes the file.

use std::fmt::Write as _;

use mdiqc_core::keyrates::{self, KeyRateCurve, OptimizedIntensities, ProtocolVariant};
use mdiqc_core::mermin::{self, MerminEstimate, LOCAL_BOUND};
use mdiqc_core::params::{Config, SourceKind};
use mdiqc_core::Exec;

use crate::CliError;

pub const QCC_COLUMNS: &str = "distance_km,rate_two_decoy,rate_infinite_decoy,raw_rate,e111_bxu,Y111_zl,diagnostics";
pub const QSS_COLUMNS: &str = "distance_km,rate_two_decoy,rate_infinite_decoy,raw_rate,e111_bzu,Y111_xl,E_x,diagnostics";
pub const MERMIN_COLUMNS: &str = "distance_km,M_lower,M_infinite_decoy,local_bound";
pub const OPTIMIZE_COLUMNS: &str = "protocol,distance_km,mu2,mu1,rate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum QssMethod {
    /// Weak coherent pulses with phase post-selection.
    Pps,
    /// Heralded SPDC sources.
    Heralded,
    /// Weak coherent pulses behind a QND photon-number filter.
    Qnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Protocol {
    Qcc,
    Pps,
    Heralded,
    Qnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub quick: bool,
    pub seed: u64,
    pub exec: Exec,
    /// Monte Carlo worker threads.
    pub shards: usize,
    pub inject_fault: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            quick: false,
            seed: 0,
            exec: Exec::Parallel,
            shards: 1,
            inject_fault: false,
        }
    }
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn distances(config: &Config, quick: bool) -> Vec<f64> {
    config.sweep.unwrap_or_default().points(quick)
}

fn require_wcs(config: &Config, command: &str) -> Result<(), CliError> {
    match config.source.kind {
        SourceKind::WeakCoherent => Ok(()),
        other => Err(CliError::Config(format!(
            "`{command}` needs source.kind = wcs, config has `{}`",
            other.name()
        ))),
    }
}

pub fn variant_for(config: &Config, protocol: Protocol) -> Result<ProtocolVariant, CliError> {
    Ok(match protocol {
        Protocol::Qcc => ProtocolVariant::Qcc,
        Protocol::Pps => {
            let k = config
                .phase
                .ok_or_else(|| CliError::Config("phase.k is required for phase post-selection".into()))?
                .k;
            ProtocolVariant::QssPhasePostSelect { k }
        }
        Protocol::Heralded => ProtocolVariant::QssHeralded {
            trigger: match config.source.kind {
                SourceKind::Heralded { trigger } => trigger,
                _ => config.system.detector,
            },
        },
        Protocol::Qnd => ProtocolVariant::QssQnd,
    })
}

/// QSS method implied by `source.kind` when `--method` is absent.
pub fn default_method(config: &Config) -> QssMethod {
    match config.source.kind {
        SourceKind::WeakCoherent => QssMethod::Pps,
        SourceKind::Heralded { .. } => QssMethod::Heralded,
        SourceKind::WeakCoherentQnd => QssMethod::Qnd,
    }
}

impl From<QssMethod> for Protocol {
    fn from(m: QssMethod) -> Self {
        match m {
            QssMethod::Pps => Protocol::Pps,
            QssMethod::Heralded => Protocol::Heralded,
            QssMethod::Qnd => Protocol::Qnd,
        }
    }
}

pub fn qcc_curve(config: &Config, opts: &RunOptions) -> Result<KeyRateCurve, CliError> {
    require_wcs(config, "qcc")?;
    let variant = variant_for(config, Protocol::Qcc)?;
    Ok(keyrates::sweep(&variant, &config.system, &config.decoy, &distances(config, opts.quick), opts.exec)?)
}

pub fn qss_curve(config: &Config, method: QssMethod, opts: &RunOptions) -> Result<KeyRateCurve, CliError> {
    let variant = variant_for(config, method.into())?;
    Ok(keyrates::sweep(&variant, &config.system, &config.decoy, &distances(config, opts.quick), opts.exec)?)
}

/// Key-rate table; `qss` selects the QSS column set.
pub fn curve_csv(curve: &KeyRateCurve) -> String {
    let qss = !matches!(curve.variant, ProtocolVariant::Qcc);
    let mut s = String::from(if qss { QSS_COLUMNS } else { QCC_COLUMNS });
    s.push('\n');
    for p in &curve.points {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            p.distance_km,
            fmt_f(p.rate),
            fmt_f(p.rate_infinite),
            fmt_f(p.raw_rate),
            fmt_opt(p.e111_upper),
            fmt_f(p.y111_lower)
        );
        if qss {
            let _ = write!(s, ",{}", fmt_opt(p.qber));
        }
        let _ = writeln!(s, ",{}", p.diagnostics);
    }
    s
}

/// `# cutoff_km` comment line for a curve.
pub fn cutoff_line(curve: &KeyRateCurve) -> String {
    match curve.cutoff_km {
        Some(l) => format!("# cutoff_km {l}\n"),
        None => "# cutoff_km none\n".into(),
    }
}

pub fn mermin_rows(config: &Config, opts: &RunOptions) -> Result<Vec<MerminEstimate>, CliError> {
    require_wcs(config, "mermin")?;
    Ok(mermin::mermin_curve(&config.system, &config.decoy, &distances(config, opts.quick), opts.exec)?)
}

pub fn mermin_csv(rows: &[MerminEstimate]) -> String {
    let mut s = format!("{MERMIN_COLUMNS}\n");
    for m in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            m.distance_km,
            fmt_opt(m.m_lower),
            fmt_opt(m.m_exact),
            LOCAL_BOUND
        );
    }
    s
}

pub fn optimize(config: &Config, protocol: Protocol, opts: &RunOptions) -> Result<Option<OptimizedIntensities>, CliError> {
    let search = config
        .optimize
        .ok_or_else(|| CliError::Config("the optimize section is required".into()))?;
    if protocol != Protocol::Heralded && protocol != Protocol::Qnd {
        require_wcs(config, "optimize")?;
    }
    let variant = variant_for(config, protocol)?;
    Ok(keyrates::optimize_intensities(&variant, &config.system, &search, opts.exec)?)
}

pub fn optimize_csv(config: &Config, protocol: Protocol, best: Option<OptimizedIntensities>) -> String {
    let mut s = format!("{OPTIMIZE_COLUMNS}\n");
    let name = match protocol {
        Protocol::Qcc => "qcc",
        Protocol::Pps => "pps",
        Protocol::Heralded => "heralded",
        Protocol::Qnd => "qnd",
    };
    let l = config.optimize.map_or(0.0, |o| o.distance_km);
    if let Some(b) = best {
        let _ = writeln!(s, "{name},{l},{},{},{}", b.plan.mu2, b.plan.mu1, fmt_f(b.rate));
    }
    s
}
