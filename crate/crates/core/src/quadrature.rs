//! Adaptive Gauss–Kronrod and fixed Gauss–Legendre quadrature.
//!
//! The adaptive integrator is a global-subdivision G7K15 scheme in the
//! style of QUADPACK's QAG: the panel with the largest error estimate is
//! bisected until the summed estimate meets `max(abs_tol, rel_tol·|I|)` or
//! the subdivision budget runs out. Integrands may be real or complex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

/// Values that can be integrated: real or complex scalars.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

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
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral estimate with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn gk15<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let s = f1 + f2;
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).magnitude();
    (value, err)
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive G7K15 integrator.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 20_000,
        }
    }
}

impl Integrator {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<V: QuadValue, F: Fn(f64) -> V>(&self, f: F, a: f64, b: f64) -> QuadResult<V> {
        self.integrate_points(f, &[a, b])
    }

    /// Integrates over the span of `points`, which must be ascending; each
    /// consecutive pair forms an initial panel (use them for kinks and
    /// discontinuities).
    pub fn integrate_points<V: QuadValue, F: Fn(f64) -> V>(
        &self,
        f: F,
        points: &[f64],
    ) -> QuadResult<V> {
        let mut heap = BinaryHeap::new();
        let mut total = V::zero();
        let mut total_err = 0.0;
        let mut evals = 0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let (value, error) = gk15(&f, a, b);
            evals += 15;
            total = total + value;
            total_err += error;
            heap.push(Panel { a, b, value, error });
        }
        let mut subdivisions = heap.len();
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.magnitude());
            if total_err <= target {
                return QuadResult {
                    value: total,
                    error: total_err,
                    evaluations: evals,
                    converged: true,
                };
            }
            if subdivisions >= self.max_subdivisions {
                break;
            }
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) {
                // panel can no longer be split in floating point
                heap.push(Panel {
                    error: 0.0,
                    ..worst
                });
                total_err -= worst.error;
                continue;
            }
            let (v1, e1) = gk15(&f, worst.a, mid);
            let (v2, e2) = gk15(&f, mid, worst.b);
            evals += 30;
            total = total - worst.value + v1 + v2;
            total_err += e1 + e2 - worst.error;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
            subdivisions += 1;
        }
        // Re-sum to shed accumulated cancellation in the running totals.
        let mut value = V::zero();
        let mut error = 0.0;
        for p in heap.iter() {
            value = value + p.value;
            error += p.error;
        }
        QuadResult {
            value,
            error,
            evaluations: evals,
            converged: false,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 20-point rule.
    pub fn order20() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn integrate<V: QuadValue, F: Fn(f64) -> V>(&self, f: F, a: f64, b: f64) -> V {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = V::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(c + h * x) * *w;
        }
        acc * h
    }

    /// Composite rule over `panels` equal sub-panels of each consecutive
    /// pair in `points`.
    pub fn integrate_composite<V: QuadValue, F: Fn(f64) -> V>(
        &self,
        f: F,
        points: &[f64],
        panel_width: f64,
    ) -> V {
        let mut acc = V::zero();
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let panels = ((b - a) / panel_width).ceil().max(1.0) as usize;
            let step = (b - a) / panels as f64;
            for k in 0..panels {
                let lo = a + step * k as f64;
                let hi = if k + 1 == panels { b } else { lo + step };
                acc = acc + self.integrate(&f, lo, hi);
            }
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
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

/// Sorts, deduplicates and clips breakpoints to `[lo, hi]`, always
/// including both ends.
pub fn panel_points(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = interior
        .into_iter()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    pts
}

/// Breakpoints over `[lo, hi]`: uniform panels of width `core_width` on
/// `[-core, core]` and geometrically growing panels outside it.
pub fn graded_points(lo: f64, hi: f64, core: f64, core_width: f64, extra: &[f64]) -> Vec<f64> {
    let mut pts = Vec::new();
    let core = core.min(hi.abs().max(lo.abs()));
    let n_core = (2.0 * core / core_width).ceil().max(1.0) as usize;
    for k in 0..=n_core {
        pts.push(-core + 2.0 * core * k as f64 / n_core as f64);
    }
    let mut edge = core;
    let mut width = core_width;
    while edge < hi.abs().max(lo.abs()) {
        width *= 1.25;
        edge += width;
        pts.push(edge);
        pts.push(-edge);
    }
    pts.extend_from_slice(extra);
    panel_points(lo, hi, pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::order20();
        let v: f64 = gl.integrate(|x| x.powi(38) + 3.0 * x * x, -1.0, 1.0);
        assert!((v - (2.0 / 39.0 + 2.0)).abs() < 1e-13);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks_and_oscillation() {
        let q = Integrator::new(1e-12, 1e-12);
        let r = q.integrate_points(|x: f64| x.abs(), &[-1.0, 0.0, 1.0]);
        assert!((r.value - 1.0).abs() < 1e-13);
        let r = q.integrate(|x: f64| (50.0 * x).cos(), 0.0, std::f64::consts::PI);
        assert!(r.converged);
        assert!(r.value.abs() < 1e-11);
        let r = q.integrate(|x: f64| (-x).exp(), 0.0, 40.0);
        assert!((r.value - (1.0 - (-40.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn complex_integrand() {
        let q = Integrator::default();
        let r = q.integrate(|x: f64| Complex64::new(0.0, x).exp(), 0.0, std::f64::consts::PI);
        assert!((r.value.re - 0.0).abs() < 1e-10);
        assert!((r.value.im - 2.0).abs() < 1e-10);
    }

    #[test]
    fn graded_points_cover_range() {
        let p = graded_points(-1000.0, 1000.0, 10.0, 1.0, &[3.3]);
        assert_eq!(p[0], -1000.0);
        assert_eq!(*p.last().unwrap(), 1000.0);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert!(p.contains(&3.3));
    }
}
