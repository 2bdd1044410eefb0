//! Sampling oracle for the analytic gains.
//!
//! Each sample draws the users' global phases, propagates the coherent
//! field amplitudes through the analyzer [`ModeUnitary`], and draws one
//! threshold click per detector from its mean photon number `|b|²`. No
//! closed form or quadrature from [`crate::gains`] is touched.
//!
//! Samples are cut into blocks of [`BLOCK_SAMPLES`]. Block `b` of target `t`
//! draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `t << 40 | b`, so
//! the result is the same for any number of shards.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fock::{self, analyzer_unitary, Basis, FockInput, ModeUnitary, OutcomeClass};
use crate::gains;
use crate::math::{binomial, factorial};

pub const BLOCK_SAMPLES: u64 = 1 << 16;
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; 1 runs on the calling thread.
    pub shards: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64, shards: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::invalid("montecarlo.samples", "must be >= 1"));
        }
        Ok(McConfig {
            samples,
            seed,
            shards: shards.max(1),
        })
    }
}

/// Mean of a 0/1 indicator with its standard error `s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub hits: u64,
}

impl McEstimate {
    pub fn from_hits(hits: u64, samples: u64) -> Self {
        let n = samples as f64;
        let mean = hits as f64 / n;
        let var = if samples > 1 { n / (n - 1.0) * mean * (1.0 - mean) } else { 0.0 };
        McEstimate {
            mean,
            stderr: (var / n).sqrt(),
            samples,
            hits,
        }
    }

    /// Deviation from `expected` in units of the standard error a Bernoulli
    /// variable with mean `expected` would have. Using the null error keeps
    /// the score finite when no hit was observed.
    pub fn z_score(&self, expected: f64) -> f64 {
        let sigma = (expected * (1.0 - expected) / self.samples as f64).sqrt();
        let d = self.mean - expected;
        if sigma > 0.0 {
            d / sigma
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Range the users' global phases are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseWindow {
    Full,
    /// `[0, π/K)` for every user: the first matched region of phase post-selection.
    Slice { k: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McTarget {
    pub basis: Basis,
    /// Bit `p` is party `p`'s state choice.
    pub pattern: u8,
    pub window: PhaseWindow,
}

impl McTarget {
    fn stream_base(&self) -> u64 {
        let basis = match self.basis {
            Basis::Z => 0u64,
            Basis::X => 1,
            Basis::Y => 2,
        };
        let k = match self.window {
            PhaseWindow::Full => 0u64,
            PhaseWindow::Slice { k } => k as u64,
        };
        ((basis << 20 | k << 3 | self.pattern as u64) & 0xff_ffff) << 40
    }
}

/// Estimated probabilities of each outcome class for one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOutcome {
    pub phi_plus: McEstimate,
    pub phi_minus: McEstimate,
    pub any: McEstimate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    plus: u64,
    minus: u64,
    n: u64,
}

fn run_blocks(blocks: usize, shards: usize, f: impl Fn(usize) -> Tally + Sync + Send) -> Result<Vec<Tally>> {
    #[cfg(feature = "parallel")]
    if shards > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(shards)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        return Ok(pool.install(|| Exec::Parallel.map_range(blocks, f)));
    }
    let _ = shards;
    Ok(Exec::Sequential.map_range(blocks, f))
}

/// Monte Carlo estimate of the class probabilities for `target`, with mean
/// photon numbers `intensities·η` per user.
pub fn mc_coherent_gains(intensities: [f64; 3], eta: f64, p_d: f64, target: McTarget, cfg: &McConfig) -> Result<McOutcome> {
    if let PhaseWindow::Slice { k: 0 } = target.window {
        return Err(Error::invalid("phase.k", "must be >= 1"));
    }
    let u = analyzer_unitary();
    let polar: [[Complex64; 2]; 3] =
        [0, 1, 2].map(|p| target.basis.state(target.pattern >> p & 1 == 1).amplitudes());
    let root = intensities.map(|m| (m * eta).sqrt());
    let width = match target.window {
        PhaseWindow::Full => TAU,
        PhaseWindow::Slice { k } => PI / k as f64,
    };
    let q = 1.0 - p_d;
    let blocks = cfg.samples.div_ceil(BLOCK_SAMPLES) as usize;
    let tallies = run_blocks(blocks, cfg.shards, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(target.stream_base() | b as u64);
        let n = BLOCK_SAMPLES.min(cfg.samples - b as u64 * BLOCK_SAMPLES);
        sample_block(&u, &polar, root, width, q, n, &mut rng)
    })?;
    let total = tallies.iter().fold(Tally::default(), |a, t| Tally {
        plus: a.plus + t.plus,
        minus: a.minus + t.minus,
        n: a.n + t.n,
    });
    Ok(McOutcome {
        phi_plus: McEstimate::from_hits(total.plus, total.n),
        phi_minus: McEstimate::from_hits(total.minus, total.n),
        any: McEstimate::from_hits(total.plus + total.minus, total.n),
    })
}

fn sample_block(
    u: &ModeUnitary,
    polar: &[[Complex64; 2]; 3],
    root: [f64; 3],
    width: f64,
    q: f64,
    n: u64,
    rng: &mut ChaCha8Rng,
) -> Tally {
    let mut t = Tally {
        n,
        ..Tally::default()
    };
    for _ in 0..n {
        let mut a = [Complex64::new(0.0, 0.0); 6];
        for p in 0..3 {
            let field = Complex64::from_polar(root[p], width * rng.random::<f64>());
            a[2 * p] = field * polar[p][0];
            a[2 * p + 1] = field * polar[p][1];
        }
        let b = u.apply(&a);
        let clicks = b.map(|z| rng.random::<f64>() >= q * (-z.norm_sqr()).exp());
        match fock::classify(clicks) {
            OutcomeClass::PhiPlus => t.plus += 1,
            OutcomeClass::PhiMinus => t.minus += 1,
            OutcomeClass::None => {}
        }
    }
    t
}

/// One analytic-vs-sampled comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct McCheck {
    pub name: String,
    pub analytic: f64,
    pub estimate: McEstimate,
    pub z: f64,
}

impl McCheck {
    pub fn new(name: impl Into<String>, analytic: f64, estimate: McEstimate) -> Self {
        McCheck {
            name: name.into(),
            analytic,
            z: estimate.z_score(analytic),
            estimate,
        }
    }
}

/// Checks the Z-basis components A–D, the X-basis components E and F, and
/// the `K`-slice gains against sampling at one working point.
///
/// Comparisons are made on per-pattern class probabilities: a Z pattern of
/// class A–D succeeds with probability `16·{A,B,C,D}`, the `+++` pattern
/// lands in Φ+ (Φ−) with probability `8E` (`8F`), and inside the first
/// slice with probability `K²·Q̃^{C,E}`.
pub fn gain_checks(intensities: [f64; 3], eta: f64, p_d: f64, k: u32, cfg: &McConfig) -> Result<Vec<McCheck>> {
    let z = gains::z_gain_components(intensities, eta, p_d)?;
    let x = gains::x_gain_components(intensities, eta, p_d)?;
    let sliced = gains::phase_sliced_gains(intensities, eta, p_d, k, 0.0)?;
    let run = |basis, pattern, window| {
        mc_coherent_gains(
            intensities,
            eta,
            p_d,
            McTarget { basis, pattern, window },
            cfg,
        )
    };
    let mut out = Vec::new();
    // HHH, HHV, VHH, HVH in Alice/Bob/Charlie order
    for (name, pattern, value) in [("A", 0b000, z.a), ("B", 0b100, z.b), ("C", 0b001, z.c), ("D", 0b010, z.d)] {
        out.push(McCheck::new(name, 16.0 * value, run(Basis::Z, pattern, PhaseWindow::Full)?.any));
    }
    let full = run(Basis::X, 0, PhaseWindow::Full)?;
    out.push(McCheck::new("E", 8.0 * x.e, full.phi_plus));
    out.push(McCheck::new("F", 8.0 * x.f, full.phi_minus));
    let slice = run(Basis::X, 0, PhaseWindow::Slice { k })?;
    let k2 = (k as f64).powi(2);
    out.push(McCheck::new(format!("sliced_C_K{k}"), k2 * sliced.q_c, slice.phi_plus));
    out.push(McCheck::new(format!("sliced_E_K{k}"), k2 * sliced.q_e, slice.phi_minus));
    Ok(out)
}

pub fn render_report(checks: &[McCheck], cfg: &McConfig) -> String {
    let mut s = format!(
        "monte carlo: {} samples, seed {}, rng {}\n{:<14} {:>14} {:>14} {:>12} {:>8}\n",
        cfg.samples, cfg.seed, RNG_NAME, "gain", "analytic", "mc_mean", "stderr", "z"
    );
    for c in checks {
        let _ = writeln!(
            s,
            "{:<14} {:>14.6e} {:>14.6e} {:>12.3e} {:>8.3}",
            c.name, c.analytic, c.estimate.mean, c.estimate.stderr, c.z
        );
    }
    s
}

pub fn report_csv(checks: &[McCheck]) -> String {
    let mut s = String::from("gain,analytic,mc_mean,stderr,samples,z\n");
    for c in checks {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{},{}",
            c.name, c.analytic, c.estimate.mean, c.estimate.stderr, c.estimate.samples, c.z
        );
    }
    s
}

/// `P_nml^{HHV}(p, s)`: probability that Alice's `n` H photons and
/// Charlie's `l` V photons leave `p` photons in 3H (`n + l − p` in 3V) and
/// Bob's `m` H photons leave `s` in 1H (`m − s` in 1V).
pub fn hhv_closed_form(n: u32, m: u32, l: u32, p: u32, s: u32) -> f64 {
    let mut amp: i128 = 0;
    for t in p.saturating_sub(n)..=l.min(p) {
        let sign = if (l - t).is_multiple_of(2) { 1 } else { -1 };
        amp += sign * (binomial(n, p - t) * binomial(l, t)) as i128;
    }
    let amp = amp as f64 * binomial(m, s) as f64;
    let f = |k: u32| factorial(k) as f64;
    amp * amp * f(p) * f(s) * f(n + l - p) * f(m - s) / (2f64.powi((n + m + l) as i32) * f(n) * f(m) * f(l))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormReport {
    pub max_photons: u32,
    pub inputs: usize,
    pub max_deviation: f64,
}

/// Compares the general propagator with [`hhv_closed_form`] for every
/// `n + m + l ≤ max_photons`. Outputs outside the closed form's support
/// must carry zero probability and count toward the deviation.
pub fn fock_closed_form_check(max_photons: u32, n_max: u32) -> Result<ClosedFormReport> {
    let mut max_deviation: f64 = 0.0;
    let mut inputs = 0;
    for total in 0..=max_photons {
        for n in 0..=total {
            for m in 0..=total - n {
                let l = total - n - m;
                let dist = fock::propagate_fock(&FockInput::from_occupation([n, 0, m, 0, 0, l]), n_max)?;
                inputs += 1;
                let mut covered = 0.0;
                for p in 0..=n + l {
                    for s in 0..=m {
                        let o = [s as u8, (m - s) as u8, 0, 0, p as u8, (n + l - p) as u8];
                        let want = hhv_closed_form(n, m, l, p, s);
                        let got = dist.probability(&o);
                        covered += got;
                        max_deviation = max_deviation.max((got - want).abs());
                    }
                }
                max_deviation = max_deviation.max((dist.total_probability() - covered).abs());
            }
        }
    }
    Ok(ClosedFormReport {
        max_photons,
        inputs,
        max_deviation,
    })
}
