//! Globally adaptive Gauss–Kronrod (7, 15) quadrature for vector integrands,
//! plus Gauss–Legendre rules for fixed-order tensor products.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Absolute tolerance on the summed error estimate, max-norm over components.
    pub tolerance: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_depth: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub evaluations: usize,
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    depth: u32,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<([f64; N], f64)>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let centre = f(c)?;
    for n in 0..N {
        k[n] = WGK[7] * centre[n];
        g[n] = WG[3] * centre[n];
    }
    for j in 0..7 {
        let lo = f(c - r * XGK[j])?;
        let hi = f(c + r * XGK[j])?;
        for n in 0..N {
            let s = lo[n] + hi[n];
            k[n] += WGK[j] * s;
            if j % 2 == 1 {
                g[n] += WG[j / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for n in 0..N {
        k[n] *= r;
        g[n] *= r;
        err = err.max((k[n] - g[n]).abs());
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(invalid("integrand is not finite"));
    }
    Ok((k, err))
}

/// Integrates `f` over [points[0], points[last]], treating interior points
/// as breakpoints. Fails when the tolerance is not met at `max_depth`.
pub fn integrate<const N: usize, F>(mut f: F, points: &[f64], opts: &QuadratureOptions) -> Result<Estimate<N>>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    if points.len() < 2 || points.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("quadrature breakpoints must be sorted with at least two entries"));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total_error = 0.0;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, error) = kronrod(&mut f, w[0], w[1])?;
        evaluations += 15;
        total_error += error;
        heap.push(Segment { a: w[0], b: w[1], depth: 0, value, error });
    }
    while total_error > opts.tolerance {
        let Some(worst) = heap.pop() else { break };
        if worst.depth >= opts.max_depth {
            return Err(Error::QuadratureNonconvergence { tolerance: opts.tolerance, estimate: total_error });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = kronrod(&mut f, worst.a, mid)?;
        let (rv, re) = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        total_error += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, depth: worst.depth + 1, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, depth: worst.depth + 1, value: rv, error: re });
    }
    // Sum in position order so the result does not depend on heap layout.
    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = [0.0; N];
    let mut error = 0.0;
    for s in &segments {
        for n in 0..N {
            value[n] += s.value[n];
        }
        error += s.error;
    }
    Ok(Estimate { value, error, evaluations })
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, opts: &QuadratureOptions) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let est = integrate(|x| Ok([f(x)?]), &[a, b], opts)?;
    Ok((est.value[0], est.error))
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate_scalar(|x| Ok(x.powi(6) - 3.0 * x), 0.0, 2.0, &Default::default()).unwrap();
        assert!((v - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn adapts_to_peaks() {
        let (v, err) = integrate_scalar(|x| Ok(1.0 / (1e-4 + x * x)), -1.0, 1.0, &Default::default()).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
        assert!(err < 1e-10);
    }

    #[test]
    fn step_with_breakpoint() {
        let f = |x: f64| Ok([if x < 0.3 { 1.0 } else { 2.0 }]);
        let est = integrate(f, &[0.0, 0.3, 1.0], &Default::default()).unwrap();
        assert!((est.value[0] - 1.7).abs() < 1e-14);
    }

    #[test]
    fn nonconvergence_is_an_error() {
        let opts = QuadratureOptions { tolerance: 1e-14, max_depth: 3 };
        let err = integrate_scalar(|x| Ok(x.abs().sqrt()), -1.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonconvergence { .. }));
    }

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in [1, 2, 5, 8, 12] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-13, "n={n}");
        }
    }
}
