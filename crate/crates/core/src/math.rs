//! Numerical helpers shared across the crate: the modified Bessel function
//! I₀, threshold-detector click probabilities, and tensor-product
//! Gauss-Legendre quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Series/asymptotic switch point for [`bessel_i0`].
const I0_SERIES_LIMIT: f64 = 15.0;

/// Modified Bessel function of the first kind, order zero.
///
/// Power series below |x| = 15, asymptotic expansion above. Relative error
/// stays below 1e-12 over the whole real line.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < I0_SERIES_LIMIT {
        1.0 + i0_series_tail(ax)
    } else {
        i0_asymptotic(ax)
    }
}

/// `I₀(x) − 1` without cancellation for small arguments.
pub fn bessel_i0m1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < I0_SERIES_LIMIT {
        i0_series_tail(ax)
    } else {
        i0_asymptotic(ax) - 1.0
    }
}

// Σ_{k≥1} (x²/4)^k / (k!)²
fn i0_series_tail(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= y / (kf * kf);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

fn i0_asymptotic(x: f64) -> f64 {
    // e^x / sqrt(2πx) Σ_k [(2k-1)!!]² / (k! (8x)^k), truncated at the smallest term
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    x.exp() / (2.0 * PI * x).sqrt() * sum
}

/// Probability that a threshold detector fires when illuminated by a
/// Poissonian field of mean photon number `mean`: `1 − (1 − p_d)·e^{−mean}`.
#[inline]
pub fn coherent_click(mean: f64, p_d: f64) -> f64 {
    let m = mean.max(0.0);
    -(-m).exp_m1() + p_d * (-m).exp()
}

/// Probability that a threshold detector with efficiency `eta` fires when
/// `photons` photons arrive: `1 − (1 − p_d)(1 − η)^k`.
#[inline]
pub fn fock_click(photons: u32, eta: f64, p_d: f64) -> f64 {
    if photons == 0 {
        return p_d;
    }
    if eta >= 1.0 {
        return 1.0;
    }
    let log_pass = photons as f64 * (-eta).ln_1p();
    -log_pass.exp_m1() + p_d * log_pass.exp()
}

/// A one-dimensional Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Cached rule with `n` nodes.
    pub fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
            .clone()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss-Legendre integral of `f` over the box `∏ [lo_i, hi_i]`.
pub fn tensor_integrate<const D: usize, T, F>(
    nodes_per_axis: usize,
    bounds: [(f64, f64); D],
    f: F,
) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn([f64; D]) -> T,
{
    let rule = GaussLegendre::get(nodes_per_axis);
    let axes: Vec<(Vec<f64>, Vec<f64>)> = bounds.iter().map(|&(a, b)| rule.mapped(a, b)).collect();
    let n = nodes_per_axis;
    let total = n.pow(D as u32);
    let mut acc = T::default();
    let mut point = [0.0; D];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for d in (0..D).rev() {
            let i = rem % n;
            rem /= n;
            point[d] = axes[d].0[i];
            w *= axes[d].1[i];
        }
        acc = acc + f(point) * w;
    }
    acc
}

/// Relative tolerance a doubled-node quadrature must meet.
pub const QUADRATURE_RTOL: f64 = 1e-8;

/// Integrates with `n` and `2n` nodes per axis and certifies that every
/// component changed by less than [`QUADRATURE_RTOL`] relative. Returns
/// the refined estimate.
pub fn certified_integrate<const D: usize, const K: usize, F>(
    what: &'static str,
    nodes_per_axis: usize,
    bounds: [(f64, f64); D],
    f: F,
) -> Result<[f64; K]>
where
    F: Fn([f64; D]) -> [f64; K],
{
    let coarse: Vector<K> = tensor_integrate(nodes_per_axis, bounds, |p| Vector(f(p)));
    let fine: Vector<K> = tensor_integrate(2 * nodes_per_axis, bounds, |p| Vector(f(p)));
    for k in 0..K {
        let (c, r) = (coarse.0[k], fine.0[k]);
        let diff = (c - r).abs();
        let scale = c.abs().max(r.abs());
        if diff > QUADRATURE_RTOL * scale + f64::MIN_POSITIVE {
            return Err(Error::QuadratureNonConvergence {
                what,
                coarse: c,
                fine: r,
                relative: diff / scale,
            });
        }
    }
    Ok(fine.0)
}

#[derive(Clone, Copy)]
struct Vector<const K: usize>([f64; K]);

impl<const K: usize> Default for Vector<K> {
    fn default() -> Self {
        Vector([0.0; K])
    }
}

impl<const K: usize> std::ops::Add for Vector<K> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.0[k] += rhs.0[k];
        }
        self
    }
}

impl<const K: usize> std::ops::Mul<f64> for Vector<K> {
    type Output = Self;
    fn mul(mut self, w: f64) -> Self {
        for v in &mut self.0 {
            *v *= w;
        }
        self
    }
}

/// Binomial coefficient as an exact integer.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}
