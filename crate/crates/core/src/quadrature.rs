//! Quadrature rules on segments and triangles, plus a Halton sequence for
//! quasi-random sampling.

use serde::{Deserialize, Serialize};

/// Triangle rules, named by point count. Weights sum to one (multiply by area).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TriangleRule {
    /// Centroid, exact for linear integrands.
    Centroid,
    /// Three interior points, exact for quadratics.
    #[default]
    ThreePoint,
    /// Seven-point rule, exact for quintics.
    SevenPoint,
}

impl TriangleRule {
    pub fn points(self) -> Vec<([f64; 3], f64)> {
        match self {
            TriangleRule::Centroid => vec![([1.0 / 3.0; 3], 1.0)],
            TriangleRule::ThreePoint => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                vec![([a, b, b], 1.0 / 3.0), ([b, a, b], 1.0 / 3.0), ([b, b, a], 1.0 / 3.0)]
            }
            TriangleRule::SevenPoint => {
                let s15 = 15f64.sqrt();
                let a = (6.0 - s15) / 21.0;
                let b = (6.0 + s15) / 21.0;
                let wa = (155.0 - s15) / 1200.0;
                let wb = (155.0 + s15) / 1200.0;
                let (a1, b1) = (1.0 - 2.0 * a, 1.0 - 2.0 * b);
                vec![
                    ([1.0 / 3.0; 3], 9.0 / 40.0),
                    ([a1, a, a], wa),
                    ([a, a1, a], wa),
                    ([a, a, a1], wa),
                    ([b1, b, b], wb),
                    ([b, b1, b], wb),
                    ([b, b, b1], wb),
                ]
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
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
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Integrates `g` over `[a, b]` with an `n`-point Gauss–Legendre rule.
pub fn integrate_interval(a: f64, b: f64, n: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n).iter().map(|&(x, w)| w * g(mid + half * x)).sum::<f64>() * half
}

/// Composite Gauss–Legendre: `panels` equal subintervals with `n` points each.
pub fn integrate_composite(a: f64, b: f64, panels: usize, n: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        total += rule.iter().map(|&(x, w)| w * g(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h;
    }
    total
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `index`-th element of the radical-inverse (van der Corput) sequence in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Halton point in `[0,1)^dim`; `dim <= 12`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension too large");
    (0..dim).map(|k| radical_inverse(index + 1, PRIMES[k])).collect()
}
