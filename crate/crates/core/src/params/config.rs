//! Flat `section.key = value` configuration documents.
//!
//! ```text
//! # QCC sweep, 40% detectors
//! channel.beta = 0.2
//! detector.eta_d = 0.4
//! detector.p_d = 1e-7
//! system.e_d = 0
//! system.f = 1.16
//! decoy.mu2 = 0.4
//! decoy.mu1 = 0.005
//! sweep.start_km = 0
//! sweep.stop_km = 250
//! ```
//!
//! Unknown and duplicated keys are rejected; every error carries the
//! offending key and its line number (0 when a required key is missing).

use std::collections::BTreeMap;

use super::{
    ChannelModel, DecoyPlan, DetectorModel, PhasePlan, SourceKind, SourceSpec, SystemParams,
};
use crate::error::{Error, Result};

/// Largest photon cutoff the exact integer expansion supports without overflow.
pub const MAX_N_MAX: u32 = 16;

const KNOWN_KEYS: &[&str] = &[
    "channel.beta",
    "channel.distance_km",
    "channel.symmetric",
    "detector.eta_d",
    "detector.p_d",
    "system.e_d",
    "system.f",
    "system.n_max",
    "source.kind",
    "source.trigger_eta_d",
    "source.trigger_p_d",
    "decoy.mu2",
    "decoy.mu1",
    "phase.k",
    "sweep.start_km",
    "sweep.stop_km",
    "sweep.step_km",
    "sweep.quick_step_km",
    "optimize.distance_km",
    "optimize.mu2_min",
    "optimize.mu2_max",
    "optimize.mu1_min",
    "optimize.mu1_max",
    "montecarlo.samples",
    "montecarlo.quick_samples",
];

/// Distance grid `start, start + step, ...` up to and including `stop`.
/// A `stop` below `start` yields an empty grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub start_km: f64,
    pub stop_km: f64,
    pub step_km: f64,
    pub quick_step_km: f64,
}

impl SweepGrid {
    pub fn points(&self, quick: bool) -> Vec<f64> {
        let step = if quick { self.quick_step_km } else { self.step_km };
        if self.stop_km < self.start_km {
            return Vec::new();
        }
        let n = ((self.stop_km - self.start_km) / step + 1e-9).floor() as usize + 1;
        // index-based so every point is reproducible bit-for-bit
        (0..n).map(|i| self.start_km + i as f64 * step).collect()
    }
}

/// Search box for intensity optimization at a fixed distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeBox {
    pub distance_km: f64,
    pub mu2: (f64, f64),
    pub mu1: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloPlan {
    pub samples: u64,
    pub quick_samples: u64,
}

impl Default for MonteCarloPlan {
    fn default() -> Self {
        MonteCarloPlan {
            samples: 10_000_000,
            quick_samples: 100_000,
        }
    }
}

/// Fully validated parameter bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub system: SystemParams,
    pub source: SourceSpec,
    pub decoy: DecoyPlan,
    pub phase: Option<PhasePlan>,
    pub sweep: Option<SweepGrid>,
    pub optimize: Option<OptimizeBox>,
    pub montecarlo: MonteCarloPlan,
}

struct Entries {
    values: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(l, _)| *l)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::Config {
                line,
                key: key.to_string(),
                message: format!("cannot parse `{v}`"),
            }),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parse(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(Error::Config {
                    line: self.line(key),
                    key: key.into(),
                    message: "must be finite".into(),
                });
            }
        }
        Ok(v)
    }

    fn required_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    /// Re-tag a constructor's `InvalidParameter` with the key's line.
    fn locate(&self, err: Error) -> Error {
        match err {
            Error::InvalidParameter { name, message } => Error::Config {
                line: self.line(name),
                key: name.to_string(),
                message,
            },
            other => other,
        }
    }
}

fn missing(key: &str) -> Error {
    Error::Config {
        line: 0,
        key: key.to_string(),
        message: "missing required key".into(),
    }
}

fn bad(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(bad(line, content, "expected `section.key = value`"));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(bad(line, key, "unknown key"));
        }
        if value.is_empty() {
            return Err(bad(line, key, "empty value"));
        }
        if let Some((first, _)) = values.insert(key.to_string(), (line, value.to_string())) {
            return Err(bad(line, key, format!("duplicate key (first set on line {first})")));
        }
    }
    let e = Entries { values };

    if let Some(sym) = e.parse::<bool>("channel.symmetric")? {
        if !sym {
            return Err(bad(
                e.line("channel.symmetric"),
                "channel.symmetric",
                "asymmetric distances are not supported",
            ));
        }
    }
    let channel = ChannelModel::new(
        e.required_f64("channel.beta")?,
        e.f64("channel.distance_km")?.unwrap_or(0.0),
    )
    .map_err(|x| e.locate(x))?;
    let detector = DetectorModel::new(
        e.required_f64("detector.eta_d")?,
        e.required_f64("detector.p_d")?,
    )
    .map_err(|x| e.locate(x))?;
    let mut system = SystemParams::new(
        channel,
        detector,
        e.required_f64("system.e_d")?,
        e.required_f64("system.f")?,
    )
    .map_err(|x| e.locate(x))?;
    if let Some(n) = e.parse::<u32>("system.n_max")? {
        if !(3..=MAX_N_MAX).contains(&n) {
            return Err(bad(
                e.line("system.n_max"),
                "system.n_max",
                format!("must lie in 3..={MAX_N_MAX}"),
            ));
        }
        system.n_max = n;
    }

    let decoy = DecoyPlan::new(e.required_f64("decoy.mu2")?, e.required_f64("decoy.mu1")?)
        .map_err(|x| e.locate(x))?;

    let kind = match e.raw("source.kind").map(|(_, v)| v).unwrap_or("wcs") {
        "wcs" => SourceKind::WeakCoherent,
        "qnd" => SourceKind::WeakCoherentQnd,
        "heralded" => {
            // Trigger detector defaults to the main detector when unspecified.
            let trigger = DetectorModel::new(
                e.f64("source.trigger_eta_d")?.unwrap_or(detector.eta_d),
                e.f64("source.trigger_p_d")?.unwrap_or(detector.p_d),
            )
            .map_err(|err| match err {
                Error::InvalidParameter { name, message } => {
                    let key = name.replace("detector.", "source.trigger_");
                    bad(e.line(&key), &key, message)
                }
                other => other,
            })?;
            SourceKind::Heralded { trigger }
        }
        other => {
            return Err(bad(
                e.line("source.kind"),
                "source.kind",
                format!("unknown source `{other}` (expected wcs, heralded or qnd)"),
            ))
        }
    };
    if !matches!(kind, SourceKind::Heralded { .. }) {
        for key in ["source.trigger_eta_d", "source.trigger_p_d"] {
            if e.raw(key).is_some() {
                return Err(bad(e.line(key), key, "only valid with source.kind = heralded"));
            }
        }
    }
    let source = SourceSpec {
        kind,
        intensities: [decoy.mu2; 3],
    };

    let phase = match e.parse::<u32>("phase.k")? {
        None => None,
        Some(k) => Some(PhasePlan::new(k).map_err(|x| e.locate(x))?),
    };

    let sweep = parse_sweep(&e)?;
    let optimize = parse_optimize(&e)?;

    let mut montecarlo = MonteCarloPlan::default();
    for (key, slot) in [
        ("montecarlo.samples", &mut montecarlo.samples),
        ("montecarlo.quick_samples", &mut montecarlo.quick_samples),
    ] {
        if let Some(n) = e.parse::<u64>(key)? {
            if n == 0 {
                return Err(bad(e.line(key), key, "must be >= 1"));
            }
            *slot = n;
        }
    }

    Ok(Config {
        system,
        source,
        decoy,
        phase,
        sweep,
        optimize,
        montecarlo,
    })
}

fn parse_sweep(e: &Entries) -> Result<Option<SweepGrid>> {
    let start = e.f64("sweep.start_km")?;
    let stop = e.f64("sweep.stop_km")?;
    let (start, stop) = match (start, stop) {
        (None, None) => {
            for key in ["sweep.step_km", "sweep.quick_step_km"] {
                if e.raw(key).is_some() {
                    return Err(bad(e.line(key), key, "sweep.start_km and sweep.stop_km required"));
                }
            }
            return Ok(None);
        }
        (Some(a), Some(b)) => (a, b),
        (None, _) => return Err(missing("sweep.start_km")),
        (_, None) => return Err(missing("sweep.stop_km")),
    };
    if start < 0.0 {
        return Err(bad(e.line("sweep.start_km"), "sweep.start_km", "must be >= 0"));
    }
    let step_km = e.f64("sweep.step_km")?.unwrap_or(1.0);
    let quick_step_km = e.f64("sweep.quick_step_km")?.unwrap_or(5.0);
    for (key, v) in [("sweep.step_km", step_km), ("sweep.quick_step_km", quick_step_km)] {
        if v <= 0.0 {
            return Err(bad(e.line(key), key, "must be > 0"));
        }
    }
    Ok(Some(SweepGrid {
        start_km: start,
        stop_km: stop,
        step_km,
        quick_step_km,
    }))
}

fn parse_optimize(e: &Entries) -> Result<Option<OptimizeBox>> {
    const KEYS: [&str; 5] = [
        "optimize.distance_km",
        "optimize.mu2_min",
        "optimize.mu2_max",
        "optimize.mu1_min",
        "optimize.mu1_max",
    ];
    let vals = KEYS
        .iter()
        .map(|k| e.f64(k))
        .collect::<Result<Vec<Option<f64>>>>()?;
    if vals.iter().all(Option::is_none) {
        return Ok(None);
    }
    if let Some(i) = vals.iter().position(Option::is_none) {
        return Err(missing(KEYS[i]));
    }
    let v: Vec<f64> = vals.into_iter().flatten().collect();
    if v[0] < 0.0 {
        return Err(bad(e.line(KEYS[0]), KEYS[0], "must be >= 0"));
    }
    for (lo, hi) in [(1, 2), (3, 4)] {
        if v[lo] <= 0.0 {
            return Err(bad(e.line(KEYS[lo]), KEYS[lo], "must be > 0"));
        }
        if v[hi] < v[lo] {
            return Err(bad(e.line(KEYS[hi]), KEYS[hi], "box upper bound below lower bound"));
        }
    }
    if v[3] >= v[2] {
        return Err(bad(
            e.line("optimize.mu1_min"),
            "optimize.mu1_min",
            "decoy range must admit mu1 < mu2",
        ));
    }
    Ok(Some(OptimizeBox {
        distance_km: v[0],
        mu2: (v[1], v[2]),
        mu1: (v[3], v[4]),
    }))
}

/// Canonical text form; `parse_config(&serialize_config(c)) == c`.
pub fn serialize_config(c: &Config) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let sys = &c.system;
    kv("channel.beta", sys.channel.beta.to_string());
    kv("channel.distance_km", sys.channel.length_km.to_string());
    kv("detector.eta_d", sys.detector.eta_d.to_string());
    kv("detector.p_d", sys.detector.p_d.to_string());
    kv("system.e_d", sys.e_d.to_string());
    kv("system.f", sys.f.to_string());
    kv("system.n_max", sys.n_max.to_string());
    kv("source.kind", c.source.kind.name().to_string());
    if let SourceKind::Heralded { trigger } = c.source.kind {
        kv("source.trigger_eta_d", trigger.eta_d.to_string());
        kv("source.trigger_p_d", trigger.p_d.to_string());
    }
    kv("decoy.mu2", c.decoy.mu2.to_string());
    kv("decoy.mu1", c.decoy.mu1.to_string());
    if let Some(p) = c.phase {
        kv("phase.k", p.k.to_string());
    }
    if let Some(g) = c.sweep {
        kv("sweep.start_km", g.start_km.to_string());
        kv("sweep.stop_km", g.stop_km.to_string());
        kv("sweep.step_km", g.step_km.to_string());
        kv("sweep.quick_step_km", g.quick_step_km.to_string());
    }
    if let Some(o) = c.optimize {
        kv("optimize.distance_km", o.distance_km.to_string());
        kv("optimize.mu2_min", o.mu2.0.to_string());
        kv("optimize.mu2_max", o.mu2.1.to_string());
        kv("optimize.mu1_min", o.mu1.0.to_string());
        kv("optimize.mu1_max", o.mu1.1.to_string());
    }
    kv("montecarlo.samples", c.montecarlo.samples.to_string());
    kv("montecarlo.quick_samples", c.montecarlo.quick_samples.to_string());
    s
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            start_km: 0.0,
            stop_km: 250.0,
            step_km: 1.0,
            quick_step_km: 5.0,
        }
    }
}
