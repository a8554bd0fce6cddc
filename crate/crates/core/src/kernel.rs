//! Impulse-response components and their Fourier–Plancherel transforms.
//!
//! Transforms follow `k*(λ) = ∫ e^{-iλt} k(t) dt`, so `‖k*‖₂² = 2π‖k‖₂²`.
//! Built-in kernels carry closed-form transforms; tabulated kernels are
//! linear interpolants of their samples and their transform is the exact
//! transform of that interpolant, evaluated from a zero-padded FFT.

use std::f64::consts::PI;
use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::quadrature::{graded_points, panel_points, Integrator};

/// Default L2 tail mass outside the effective support.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-10;
/// Tail mass used for the sinc family, whose `1/t` decay makes
/// `DEFAULT_SUPPORT_TOL` impractical for time-domain truncation.
pub const SLOW_DECAY_SUPPORT_TOL: f64 = 2e-3;
/// Absolute parity tolerance, relative to `max |k|` on the parity grid.
pub const PARITY_TOL: f64 = 1e-9;
const PARITY_GRID: usize = 1024;
const TABULATED_PAD_FACTOR: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// Unnormalised sinc, `sin(x)/x`.
pub fn sinc_unnormalized(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Normalised sinc, `sin(πt)/(πt)`.
pub fn sinc(t: f64) -> f64 {
    sinc_unnormalized(PI * t)
}

#[derive(Debug, Clone)]
struct Tabulated {
    t0: f64,
    step: f64,
    values: Vec<f64>,
    // P(λ) = Σ v_k e^{-iλ(k - kc)h} at bins j = -N/2..N/2, index j + N/2.
    spectrum: Vec<Complex64>,
    bin_width: f64,
    centre_index: f64,
    abs_sum: f64,
}

impl Tabulated {
    fn new(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "times and values differ in length ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput("tabulated kernel needs at least 2 samples".into()));
        }
        if times.iter().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tabulated kernel contains non-finite values".into()));
        }
        let n = times.len();
        let step = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
        }
        for (k, t) in times.iter().enumerate() {
            let expected = times[0] + step * k as f64;
            if (t - expected).abs() > 1e-6 * step {
                return Err(Error::InvalidInput(format!(
                    "time grid is not uniform at index {k}: {t} vs {expected}"
                )));
            }
        }

        let size = (TABULATED_PAD_FACTOR * n).next_power_of_two();
        let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        FftPlanner::<f64>::new().plan_fft_forward(size).process(&mut buf);

        let bin_width = 2.0 * PI / (size as f64 * step);
        let centre_index = (n - 1) as f64 / 2.0;
        let half = size / 2;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); size + 1];
        for (slot, j) in spectrum.iter_mut().zip(-(half as i64)..=(half as i64)) {
            let idx = j.rem_euclid(size as i64) as usize;
            let lambda = j as f64 * bin_width;
            let phase = Complex64::from_polar(1.0, lambda * centre_index * step);
            *slot = buf[idx] * phase;
        }
        Ok(Self {
            t0: times[0],
            step,
            values: values.to_vec(),
            spectrum,
            bin_width,
            centre_index,
            abs_sum: values.iter().map(|v| v.abs()).sum(),
        })
    }

    fn t_end(&self) -> f64 {
        self.t0 + self.step * (self.values.len() - 1) as f64
    }

    fn centre(&self) -> f64 {
        self.t0 + self.centre_index * self.step
    }

    fn eval(&self, t: f64) -> f64 {
        let x = (t - self.t0) / self.step;
        let last = (self.values.len() - 1) as f64;
        if !(x >= 0.0 && x <= last) {
            return 0.0;
        }
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    fn periodic_sum(&self, lambda: f64) -> Complex64 {
        let period = 2.0 * PI / self.step;
        let wraps = (lambda / period).round();
        let reduced = lambda - wraps * period;
        let size = self.spectrum.len() - 1;
        let x = reduced / self.bin_width + (size / 2) as f64;
        let i = (x.floor().max(0.0) as usize).min(size - 1);
        let frac = x - i as f64;
        let p = self.spectrum[i] * (1.0 - frac) + self.spectrum[i + 1] * frac;
        // half-integer centre flips sign on every wrap of the period
        let odd_centre = (self.centre_index.fract() - 0.5).abs() < 1e-9;
        if odd_centre && (wraps as i64).rem_euclid(2) == 1 {
            -p
        } else {
            p
        }
    }

    fn ftf(&self, lambda: f64) -> Complex64 {
        let smoothing = sinc_unnormalized(0.5 * lambda * self.step).powi(2);
        let phase = Complex64::from_polar(1.0, -lambda * self.centre());
        phase * self.periodic_sum(lambda) * (self.step * smoothing)
    }

    fn l2_squared(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| self.step / 3.0 * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]))
            .sum()
    }

    fn support_radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                let t = self.t0 + self.step * k as f64;
                r = r.max(t.abs() + self.step);
            }
        }
        if r > 0.0 {
            r.min(self.t0.abs().max(self.t_end().abs()))
        } else {
            self.step
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Triangular { delta: f64, c: f64 },
    Laplace { delta: f64, c: f64 },
    Sinc,
    HilbertSinc,
    OneSidedBox { delta: f64, c: f64 },
    Tabulated(Tabulated),
}

struct Inner {
    name: String,
    shape: Shape,
    parity: Parity,
    l2_norm: f64,
    effective_support: f64,
    support_tol: f64,
}

/// A real-valued L2 kernel with its transform. Immutable and cheap to clone.
#[derive(Clone)]
pub struct Kernel(Arc<Inner>);

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.0.name)
            .field("parity", &self.0.parity)
            .field("l2_norm", &self.0.l2_norm)
            .field("effective_support", &self.0.effective_support)
            .finish()
    }
}

fn check_delta_c(delta: f64, c: f64) -> Result<()> {
    ensure_positive("delta", delta)?;
    ensure_positive("c", c)
}

/// Triangular (Bartlett) kernel `cΔ(1 − Δ|t|)` on `|t| ≤ 1/Δ`.
pub fn make_triangular(delta: f64, c: f64) -> Result<Kernel> {
    check_delta_c(delta, c)?;
    Ok(Kernel::build(
        format!("triangular(delta={delta},c={c})"),
        Shape::Triangular { delta, c },
        DEFAULT_SUPPORT_TOL,
    ))
}

/// Laplace kernel `(cΔ/2) e^{-Δ|t|}`.
pub fn make_laplace(delta: f64, c: f64) -> Result<Kernel> {
    check_delta_c(delta, c)?;
    Ok(Kernel::build(
        format!("laplace(delta={delta},c={c})"),
        Shape::Laplace { delta, c },
        DEFAULT_SUPPORT_TOL,
    ))
}

/// Normalised sinc, the ideal low-pass filter with `k* = 1[-π, π]`.
pub fn make_sinc() -> Kernel {
    Kernel::build("sinc".into(), Shape::Sinc, SLOW_DECAY_SUPPORT_TOL)
}

/// Hilbert transform of the sinc kernel, `(1 − cos πt)/(πt)`.
pub fn make_hilbert_sinc() -> Kernel {
    Kernel::build("hilbert_sinc".into(), Shape::HilbertSinc, SLOW_DECAY_SUPPORT_TOL)
}

/// Causal box `cΔ·1[0, 1/Δ]`. Violates evenness; used to exercise the
/// family condition checks.
pub fn make_one_sided_box(delta: f64, c: f64) -> Result<Kernel> {
    check_delta_c(delta, c)?;
    Ok(Kernel::build(
        format!("one_sided_box(delta={delta},c={c})"),
        Shape::OneSidedBox { delta, c },
        DEFAULT_SUPPORT_TOL,
    ))
}

/// Kernel given by samples on a uniform grid, linearly interpolated and
/// zero outside the grid.
pub fn make_tabulated(times: &[f64], values: &[f64]) -> Result<Kernel> {
    let tab = Tabulated::new(times, values)?;
    Ok(Kernel::build("tabulated".into(), Shape::Tabulated(tab), DEFAULT_SUPPORT_TOL))
}

/// Reads a two-column `time,value` CSV (header optional) into a tabulated
/// kernel.
pub fn load_tabulated_csv<R: BufRead>(reader: R) -> Result<Kernel> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(format!("read error: {e}")))?;
        let line = line.trim().trim_start_matches('\u{feff}');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            return Err(Error::InvalidInput(format!("line {}: expected two columns", lineno + 1)));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(t), Ok(v)) => {
                times.push(t);
                values.push(v);
            }
            _ if times.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "line {}: cannot parse '{line}'",
                    lineno + 1
                )))
            }
        }
    }
    make_tabulated(&times, &values)
}

impl Kernel {
    fn build(name: String, shape: Shape, support_tol: f64) -> Kernel {
        let l2_norm = match &shape {
            Shape::Triangular { delta, c } => (2.0 * c * c * delta / 3.0).sqrt(),
            Shape::Laplace { delta, c } => (c * c * delta / 4.0).sqrt(),
            Shape::Sinc | Shape::HilbertSinc => 1.0,
            Shape::OneSidedBox { delta, c } => (c * c * delta).sqrt(),
            Shape::Tabulated(t) => t.l2_squared().sqrt(),
        };
        let effective_support = support_radius(&shape, support_tol);
        let mut inner = Inner {
            name,
            shape,
            parity: Parity::None,
            l2_norm,
            effective_support,
            support_tol,
        };
        inner.parity = match &inner.shape {
            Shape::Triangular { .. } | Shape::Laplace { .. } | Shape::Sinc => Parity::Even,
            Shape::HilbertSinc => Parity::Odd,
            Shape::OneSidedBox { .. } => Parity::None,
            Shape::Tabulated(t) => {
                let r = t.t0.abs().max(t.t_end().abs());
                detect_parity(|x| t.eval(x), r)
            }
        };
        Kernel(Arc::new(inner))
    }

    /// Same kernel with the effective support recomputed for another tail
    /// tolerance.
    pub fn with_support_tolerance(&self, tol: f64) -> Result<Kernel> {
        ensure_positive("support tolerance", tol)?;
        Ok(Kernel(Arc::new(Inner {
            name: self.0.name.clone(),
            shape: self.0.shape.clone(),
            parity: self.0.parity,
            l2_norm: self.0.l2_norm,
            effective_support: support_radius(&self.0.shape, tol),
            support_tol: tol,
        })))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn parity(&self) -> Parity {
        self.0.parity
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.l2_norm
    }

    pub fn effective_support(&self) -> f64 {
        self.0.effective_support
    }

    pub fn support_tolerance(&self) -> f64 {
        self.0.support_tol
    }

    /// Kernel value at time `t` (seconds).
    pub fn eval(&self, t: f64) -> f64 {
        match &self.0.shape {
            Shape::Triangular { delta, c } => {
                let u = delta * t.abs();
                if u <= 1.0 {
                    c * delta * (1.0 - u)
                } else {
                    0.0
                }
            }
            Shape::Laplace { delta, c } => 0.5 * c * delta * (-delta * t.abs()).exp(),
            Shape::Sinc => sinc(t),
            Shape::HilbertSinc => {
                if t == 0.0 {
                    0.0
                } else {
                    let s = (0.5 * PI * t).sin();
                    2.0 * s * s / (PI * t)
                }
            }
            Shape::OneSidedBox { delta, c } => {
                if t >= 0.0 && t * delta <= 1.0 {
                    c * delta
                } else {
                    0.0
                }
            }
            Shape::Tabulated(tab) => tab.eval(t),
        }
    }

    /// Fourier–Plancherel transform at angular frequency `lambda` (rad/s).
    pub fn ftf(&self, lambda: f64) -> Complex64 {
        match &self.0.shape {
            Shape::Triangular { delta, c } => {
                let s = sinc_unnormalized(0.5 * lambda / delta);
                Complex64::new(c * s * s, 0.0)
            }
            Shape::Laplace { delta, c } => {
                Complex64::new(c * delta * delta / (delta * delta + lambda * lambda), 0.0)
            }
            Shape::Sinc => Complex64::new(if lambda.abs() <= PI { 1.0 } else { 0.0 }, 0.0),
            Shape::HilbertSinc => {
                if lambda.abs() <= PI && lambda != 0.0 {
                    Complex64::new(0.0, -lambda.signum())
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Shape::OneSidedBox { delta, c } => {
                let x = 0.5 * lambda / delta;
                Complex64::from_polar(c * sinc_unnormalized(x), -x)
            }
            Shape::Tabulated(tab) => tab.ftf(lambda),
        }
    }

    /// `|k*(λ)|²`.
    pub fn power(&self, lambda: f64) -> f64 {
        self.ftf(lambda).norm_sqr()
    }

    /// Half-width of the spectral support for band-limited kernels.
    pub fn band_limit(&self) -> Option<f64> {
        match self.0.shape {
            Shape::Sinc | Shape::HilbertSinc => Some(PI),
            _ => None,
        }
    }

    /// Frequency `L` beyond which `∫_{|λ|>L} |k*|² dλ ≤ mass_tol`.
    pub fn spectral_extent(&self, mass_tol: f64) -> f64 {
        if let Some(b) = self.band_limit() {
            return b;
        }
        let (coef, power) = match &self.0.shape {
            Shape::Triangular { delta, c } => (32.0 * c * c * delta.powi(4) / 3.0, 3.0),
            Shape::Laplace { delta, c } => (2.0 * c * c * delta.powi(4) / 3.0, 3.0),
            Shape::OneSidedBox { delta, c } => (8.0 * c * c * delta * delta, 1.0),
            Shape::Tabulated(t) => (32.0 * t.abs_sum * t.abs_sum / (3.0 * t.step * t.step), 3.0),
            Shape::Sinc | Shape::HilbertSinc => unreachable!(),
        };
        (coef / mass_tol.max(1e-300)).powf(1.0 / power).max(self.spectral_scale())
    }

    /// Characteristic frequency scale of `k*`, used to size quadrature panels.
    pub fn spectral_scale(&self) -> f64 {
        match &self.0.shape {
            Shape::Triangular { delta, .. } | Shape::OneSidedBox { delta, .. } => PI * delta,
            Shape::Laplace { delta, .. } => *delta,
            Shape::Sinc | Shape::HilbertSinc => PI,
            Shape::Tabulated(t) => PI / t.support_radius().max(t.step),
        }
    }

    /// Characteristic time scale of `k`, used to size quadrature panels.
    pub fn time_scale(&self) -> f64 {
        match &self.0.shape {
            Shape::Triangular { delta, .. }
            | Shape::Laplace { delta, .. }
            | Shape::OneSidedBox { delta, .. } => 1.0 / delta,
            Shape::Sinc | Shape::HilbertSinc => 0.5,
            Shape::Tabulated(t) => (t.step * 8.0).min(t.support_radius()),
        }
    }

    /// Points where `k` has kinks or jumps.
    pub fn time_breakpoints(&self) -> Vec<f64> {
        match &self.0.shape {
            Shape::Triangular { delta, .. } => vec![-1.0 / delta, 0.0, 1.0 / delta],
            Shape::Laplace { .. } => vec![0.0],
            Shape::OneSidedBox { delta, .. } => vec![0.0, 1.0 / delta],
            Shape::Sinc | Shape::HilbertSinc => vec![],
            Shape::Tabulated(t) => vec![t.t0, t.t_end()],
        }
    }

    /// Points where `k*` has jumps.
    pub fn spectral_breakpoints(&self) -> Vec<f64> {
        match &self.0.shape {
            Shape::Sinc => vec![-PI, PI],
            Shape::HilbertSinc => vec![-PI, 0.0, PI],
            _ => vec![],
        }
    }

    /// Grid of panel edges covering `[-extent, extent]` in frequency,
    /// resolving oscillations of `e^{iλ·freq}`.
    pub(crate) fn spectral_points(&self, extent: f64, freq: f64, extra: &[f64]) -> Vec<f64> {
        let mut width = self.spectral_scale();
        if freq.abs() > 0.0 {
            width = width.min(PI / freq.abs());
        }
        let core = (8.0 * self.spectral_scale()).max(PI).min(extent);
        let mut pts = extra.to_vec();
        pts.extend(self.spectral_breakpoints());
        graded_points(-extent, extent, core, width, &pts)
    }
}

fn support_radius(shape: &Shape, tol: f64) -> f64 {
    match shape {
        Shape::Triangular { delta, .. } | Shape::OneSidedBox { delta, .. } => 1.0 / delta,
        Shape::Laplace { delta, c } => {
            // tail mass beyond ±R is (c²Δ/4) e^{-2ΔR}
            let r = (c * c * delta / (4.0 * tol)).ln() / (2.0 * delta);
            r.max(1e-3 / delta)
        }
        // |k(t)| ≤ M/(π|t|) bounds the tail mass by 2M²/(π²R)
        Shape::Sinc => 2.0 / (PI * PI * tol),
        Shape::HilbertSinc => 8.0 / (PI * PI * tol),
        Shape::Tabulated(t) => t.support_radius(),
    }
}

fn detect_parity(f: impl Fn(f64) -> f64, radius: f64) -> Parity {
    let mut scale: f64 = 0.0;
    let mut even_dev: f64 = 0.0;
    let mut odd_dev: f64 = 0.0;
    for k in 0..PARITY_GRID {
        let t = radius * (k as f64 + 0.5) / PARITY_GRID as f64;
        let (a, b) = (f(t), f(-t));
        scale = scale.max(a.abs()).max(b.abs());
        even_dev = even_dev.max((a - b).abs());
        odd_dev = odd_dev.max((a + b).abs());
    }
    scale = scale.max(f(0.0).abs());
    let tol = PARITY_TOL * scale.max(f64::MIN_POSITIVE);
    if even_dev <= tol {
        Parity::Even
    } else if odd_dev <= tol && f(0.0).abs() <= tol {
        Parity::Odd
    } else {
        Parity::None
    }
}

fn integrator() -> Integrator {
    Integrator::new(1e-12, 1e-12)
}

/// Self-convolution `(H∗H)(lag) = ∫ H(lag − s) H(s) ds`.
///
/// Band-limited kernels use `(1/2π) ∫ e^{iλ·lag} (H*(λ))² dλ`; all others
/// integrate in time over the effective support. For odd kernels this is
/// `−∫H(s)H(s+lag)ds`, so the value at zero lag is `−‖H‖₂²`.
pub fn autocorrelation(h: &Kernel, lag: f64) -> f64 {
    if let Some(b) = h.band_limit() {
        let pts = h.spectral_points(b, lag, &[]);
        let r = integrator().integrate_points(
            |l| {
                let v = h.ftf(l);
                let z = v * v * Complex64::from_polar(1.0, l * lag);
                z.re
            },
            &pts,
        );
        return r.value / (2.0 * PI);
    }
    let r = h.effective_support();
    let lo = (-r).max(lag - r);
    let hi = r.min(lag + r);
    if !(hi > lo) {
        return 0.0;
    }
    let bps = h.time_breakpoints();
    let interior = bps.iter().copied().chain(bps.iter().map(|b| lag - b));
    let mut pts = panel_points(lo, hi, interior);
    refine_points(&mut pts, h.time_scale());
    integrator()
        .integrate_points(|s| h.eval(lag - s) * h.eval(s), &pts)
        .value
}

/// Cross-correlation `∫ g(s) H(s + tau) ds` in the time domain over the
/// support of `g`.
pub fn cross_correlation_time(h: &Kernel, g: &Kernel, tau: f64) -> f64 {
    let r = g.effective_support();
    let mut interior: Vec<f64> = g.time_breakpoints();
    interior.extend(h.time_breakpoints().iter().map(|b| b - tau));
    let mut pts = panel_points(-r, r, interior);
    refine_points(&mut pts, g.time_scale().min(h.time_scale()));
    integrator()
        .integrate_points(|s| g.eval(s) * h.eval(s + tau), &pts)
        .value
}

/// Cross-correlation `∫ g(s) H(s + tau) ds` via Parseval,
/// `(1/2π) ∫ e^{iλτ} H*(λ) conj(g*(λ)) dλ`.
pub fn cross_correlation_freq(h: &Kernel, g: &Kernel, tau: f64, mass_tol: f64) -> f64 {
    let extent = match (h.band_limit(), g.band_limit()) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => h.spectral_extent(mass_tol).min(g.spectral_extent(mass_tol)),
    };
    let mut extra = g.spectral_breakpoints();
    extra.extend(h.spectral_breakpoints());
    let pts = if h.spectral_scale() <= g.spectral_scale() {
        h.spectral_points(extent, tau, &extra)
    } else {
        g.spectral_points(extent, tau, &extra)
    };
    let r = integrator().integrate_points(
        |l| (Complex64::from_polar(1.0, l * tau) * h.ftf(l) * g.ftf(l).conj()).re,
        &pts,
    );
    r.value / (2.0 * PI)
}

fn refine_points(pts: &mut Vec<f64>, width: f64) {
    let mut out = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / width).ceil().clamp(1.0, 4096.0) as usize;
        for k in 0..n {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
    }
    if let Some(last) = pts.last() {
        out.push(*last);
    }
    *pts = out;
}

/// Result of a weighted spectral integral `∫ |k*|² ln^p(1 + |λ|) dλ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpectralCheck {
    pub exponent: f64,
    pub lambda_max: f64,
    pub value: f64,
    pub value_doubled: f64,
    pub converged: bool,
}

/// Relative change allowed between truncations at `L` and `2L`.
pub const WEIGHTED_SPECTRAL_REL_TOL: f64 = 1e-3;

/// Log-weighted spectral integral truncated at `lambda_max`, with a
/// finiteness flag from comparing against the `2·lambda_max` truncation.
/// Exponent `1 + β` gives the Hunt condition, `4 + β` the stronger
/// condition sufficient for the functional limit theorem.
pub fn check_weighted_spectral(k: &Kernel, exponent: f64, lambda_max: f64) -> Result<WeightedSpectralCheck> {
    if !(exponent > 1.0) || !exponent.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent must be > 1, got {exponent}"
        )));
    }
    ensure_positive("lambda_max", lambda_max)?;
    let weighted = |limit: f64| -> f64 {
        let extent = k.band_limit().map_or(limit, |b| b.min(limit));
        let pts = k.spectral_points(extent, 0.0, &[0.0]);
        integrator()
            .integrate_points(|l| k.power(l) * (1.0 + l.abs()).ln().powf(exponent), &pts)
            .value
    };
    let value = weighted(lambda_max);
    let value_doubled = weighted(2.0 * lambda_max);
    let scale = value.abs().max(value_doubled.abs());
    let converged = scale == 0.0 || (value_doubled - value).abs() <= WEIGHTED_SPECTRAL_REL_TOL * scale;
    Ok(WeightedSpectralCheck {
        exponent,
        lambda_max,
        value,
        value_doubled,
        converged,
    })
}

type Constructor = dyn Fn(f64) -> Result<Kernel> + Send + Sync;

/// A controlled family `Δ ↦ g_Δ` with limit constant `c`.
#[derive(Clone)]
pub struct KernelFamily {
    name: String,
    c: f64,
    constructor: Arc<Constructor>,
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("name", &self.name)
            .field("c", &self.c)
            .finish()
    }
}

impl KernelFamily {
    pub fn custom(
        name: impl Into<String>,
        c: f64,
        constructor: impl Fn(f64) -> Result<Kernel> + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure_positive("c", c)?;
        Ok(Self {
            name: name.into(),
            c,
            constructor: Arc::new(constructor),
        })
    }

    pub fn triangular(c: f64) -> Result<Self> {
        Self::custom("triangular", c, move |d| make_triangular(d, c))
    }

    pub fn laplace(c: f64) -> Result<Self> {
        Self::custom("laplace", c, move |d| make_laplace(d, c))
    }

    pub fn one_sided_box(c: f64) -> Result<Self> {
        Self::custom("one_sided_box", c, move |d| make_one_sided_box(d, c))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn member(&self, delta: f64) -> Result<Kernel> {
        ensure_positive("delta", delta)?;
        (self.constructor)(delta)
    }
}

/// Outcome of one family condition across the sampled `Δ` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub passed: bool,
    pub per_delta: Vec<f64>,
    pub detail: String,
}

/// Numeric evidence for the four conditions on a controlled family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub family: String,
    pub c: f64,
    pub deltas: Vec<f64>,
    pub lambda_window: f64,
    pub tol: f64,
    /// finite L2 norm of each member
    pub square_integrable: ConditionCheck,
    /// `max |g(t) − g(−t)|` on a symmetric grid
    pub even: ConditionCheck,
    /// `sup_λ |g*_Δ(λ)|`, with the largest value as the reported bound
    pub bounded_transform: ConditionCheck,
    pub transform_bound: f64,
    /// `sup_{|λ| ≤ a} |g*_Δ(λ) − c|`
    pub delta_like: ConditionCheck,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.square_integrable.passed
            && self.even.passed
            && self.bounded_transform.passed
            && self.delta_like.passed
    }
}

const FAMILY_LAMBDA_GRID: usize = 4001;

/// Checks square integrability, evenness, bounded transforms and the
/// δ-like limit over a user-supplied ascending `Δ` ladder. A limit cannot
/// be verified from finitely many samples, so the δ-like condition passes
/// when the deviation is non-increasing along the ladder and its last
/// value is at most `tol`.
pub fn check_family_conditions(
    family: &KernelFamily,
    deltas: &[f64],
    lambda_window: f64,
    tol: f64,
) -> Result<ConditionReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("deltas must be non-empty".into()));
    }
    if deltas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("deltas must be strictly ascending".into()));
    }
    ensure_positive("lambda_window", lambda_window)?;
    ensure_positive("tol", tol)?;
    let c = family.c();

    let mut norms = Vec::new();
    let mut asym = Vec::new();
    let mut sups = Vec::new();
    let mut devs = Vec::new();
    for &d in deltas {
        let g = family.member(d)?;
        norms.push(g.l2_norm());

        let r = g.effective_support();
        let mut worst: f64 = 0.0;
        for k in 0..PARITY_GRID {
            let t = r * (k as f64 + 0.5) / PARITY_GRID as f64;
            worst = worst.max((g.eval(t) - g.eval(-t)).abs());
        }
        asym.push(worst);

        let span = (10.0 * lambda_window).max(10.0 * g.spectral_scale());
        let mut sup = g.ftf(0.0).norm();
        for k in 0..FAMILY_LAMBDA_GRID {
            let l = -span + 2.0 * span * k as f64 / (FAMILY_LAMBDA_GRID - 1) as f64;
            sup = sup.max(g.ftf(l).norm());
        }
        sups.push(sup);

        let mut dev: f64 = 0.0;
        for k in 0..FAMILY_LAMBDA_GRID {
            let l = -lambda_window + 2.0 * lambda_window * k as f64 / (FAMILY_LAMBDA_GRID - 1) as f64;
            dev = dev.max((g.ftf(l) - c).norm());
        }
        devs.push(dev);
    }

    let square_integrable = ConditionCheck {
        passed: norms.iter().all(|n| n.is_finite()),
        per_delta: norms,
        detail: "L2 norm per delta".into(),
    };
    let max_asym = asym.iter().cloned().fold(0.0, f64::max);
    let even = ConditionCheck {
        passed: max_asym <= tol,
        per_delta: asym,
        detail: format!("max |g(t) - g(-t)| on a {PARITY_GRID}-point grid; worst {max_asym:e}"),
    };
    let transform_bound = sups.iter().cloned().fold(0.0, f64::max);
    let bounded_transform = ConditionCheck {
        passed: transform_bound.is_finite(),
        per_delta: sups,
        detail: format!("sup |g*| over deltas = {transform_bound}"),
    };
    let monotone = devs.windows(2).all(|w| w[1] <= w[0]);
    let last = *devs.last().unwrap();
    let delta_like = ConditionCheck {
        passed: monotone && last <= tol,
        per_delta: devs,
        detail: format!(
            "sup_|l|<=a |g* - c|: non-increasing={monotone}, final={last:e}, tol={tol:e}"
        ),
    };
    Ok(ConditionReport {
        family: family.name().to_string(),
        c,
        deltas: deltas.to_vec(),
        lambda_window,
        tol,
        square_integrable,
        even,
        bounded_transform,
        transform_bound,
        delta_like,
    })
}

/// Serializable description of a single kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelSpec {
    Sinc,
    HilbertSinc,
    Triangular { delta: f64, c: f64 },
    Laplace { delta: f64, c: f64 },
    OneSidedBox { delta: f64, c: f64 },
    /// Two-column CSV `t,value` on a uniform grid.
    Tabulated { path: String },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelSpec::Sinc => Ok(make_sinc()),
            KernelSpec::HilbertSinc => Ok(make_hilbert_sinc()),
            KernelSpec::Triangular { delta, c } => make_triangular(*delta, *c),
            KernelSpec::Laplace { delta, c } => make_laplace(*delta, *c),
            KernelSpec::OneSidedBox { delta, c } => make_one_sided_box(*delta, *c),
            KernelSpec::Tabulated { path } => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::InvalidInput(format!("cannot open {path}: {e}")))?;
                load_tabulated_csv(std::io::BufReader::new(file))
            }
        }
    }
}

/// Serializable description of a δ-like family `(g_Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilySpec {
    Triangular { c: f64 },
    Laplace { c: f64 },
    OneSidedBox { c: f64 },
}

impl FamilySpec {
    pub fn build(&self) -> Result<KernelFamily> {
        match *self {
            FamilySpec::Triangular { c } => KernelFamily::triangular(c),
            FamilySpec::Laplace { c } => KernelFamily::laplace(c),
            FamilySpec::OneSidedBox { c } => KernelFamily::one_sided_box(c),
        }
    }

    pub fn c(&self) -> f64 {
        match *self {
            FamilySpec::Triangular { c } | FamilySpec::Laplace { c } | FamilySpec::OneSidedBox { c } => c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn triangular_values() {
        let k = make_triangular(1.0, 1.0).unwrap();
        assert_eq!(k.ftf(0.0).re, 1.0);
        assert_eq!(k.eval(0.5), 0.5);
        assert_eq!(k.eval(2.0), 0.0);
        assert_eq!(k.effective_support(), 1.0);
        let k = make_triangular(2.0, 3.0).unwrap();
        assert!(close(k.ftf(4.0).re, 2.124_220_254_820_713_6, 1e-12));
        assert_eq!(k.parity(), Parity::Even);
    }

    #[test]
    fn laplace_values() {
        let k = make_laplace(1.0, 1.0).unwrap();
        assert_eq!(k.ftf(0.0).re, 1.0);
        assert_eq!(k.ftf(1.0).re, 0.5);
        let k = make_laplace(3.0, 2.0).unwrap();
        assert!(close(k.eval(1.0), 0.149_361_205_103_591_83, 1e-14));
        let tail = 0.25 * 4.0 * 3.0 * (-6.0 * k.effective_support()).exp();
        assert!(tail <= DEFAULT_SUPPORT_TOL * 1.0001);
    }

    #[test]
    fn sinc_family_values() {
        let s = make_sinc();
        assert_eq!(s.ftf(1.0).re, 1.0);
        assert_eq!(s.ftf(4.0).re, 0.0);
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.l2_norm(), 1.0);
        let h = make_hilbert_sinc();
        assert_eq!(h.eval(0.0), 0.0);
        assert!(close(h.eval(1.0), 2.0 / PI, 1e-15));
        assert_eq!(h.parity(), Parity::Odd);
        assert_eq!(h.l2_norm(), 1.0);
        // transform of an odd real function is purely imaginary
        assert_eq!(h.ftf(-2.0), Complex64::new(0.0, 1.0));
        assert_eq!(h.ftf(2.0), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn hilbert_sinc_transform_sign_matches_time_domain() {
        // H*(λ) = -2i ∫_0^∞ sin(λt) H(t) dt for odd H; integrate to a large
        // cutoff where the remaining tail oscillates away.
        let h = make_hilbert_sinc();
        let q = Integrator::new(1e-9, 1e-9);
        let lambda = -2.0;
        let cutoff = 400.0;
        let pts: Vec<f64> = (0..=1600).map(|k| cutoff * k as f64 / 1600.0).collect();
        let v = q.integrate_points(|t| (lambda * t).sin() * h.eval(t), &pts).value;
        let im = -2.0 * v;
        assert!(close(im, 1.0, 1e-2), "{im}");
        assert!(close(h.ftf(lambda).im, im, 1e-2));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(make_triangular(0.0, 1.0).is_err());
        assert!(make_triangular(1.0, -1.0).is_err());
        assert!(make_laplace(f64::NAN, 1.0).is_err());
        assert!(make_laplace(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn tabulated_errors() {
        assert!(make_tabulated(&[0.0], &[1.0]).is_err());
        assert!(make_tabulated(&[0.0, 1.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(make_tabulated(&[0.0, 1.0], &[1.0, f64::NAN]).is_err());
        assert!(make_tabulated(&[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn tabulated_zero_kernel() {
        let k = make_tabulated(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        for t in [-3.0, -1.0, 0.0, 0.3, 1.0, 5.0] {
            assert_eq!(k.eval(t), 0.0);
        }
        assert_eq!(k.ftf(0.7).norm(), 0.0);
    }

    #[test]
    fn tabulated_triangular_matches_closed_form() {
        let exact = make_triangular(1.0, 1.0).unwrap();
        let times: Vec<f64> = (0..=4000).map(|k| -2.0 + 1e-3 * k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| exact.eval(*t)).collect();
        let tab = make_tabulated(&times, &values).unwrap();
        assert!(close(tab.ftf(0.0).re, 1.0, 1e-3));
        assert_eq!(tab.parity(), Parity::Even);
        for l in [0.5, 1.3, 4.0, 9.0] {
            assert!((tab.ftf(l) - exact.ftf(l)).norm() < 1e-3, "lambda {l}");
        }
        assert!(close(tab.l2_norm(), exact.l2_norm(), 1e-6));
    }

    #[test]
    fn tabulated_sinc_norm() {
        let times: Vec<f64> = (0..=8000).map(|k| -40.0 + 1e-2 * k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| sinc(*t)).collect();
        let tab = make_tabulated(&times, &values).unwrap();
        assert!(close(tab.l2_norm(), 1.0, 2e-2));
        assert_eq!(tab.parity(), Parity::Even);
        assert!(close(tab.ftf(1.0).re, 1.0, 2e-2));
    }

    #[test]
    fn tabulated_odd_detection() {
        let h = make_hilbert_sinc();
        let times: Vec<f64> = (0..=2000).map(|k| -10.0 + 1e-2 * k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| h.eval(*t)).collect();
        let tab = make_tabulated(&times, &values).unwrap();
        assert_eq!(tab.parity(), Parity::Odd);
        let values: Vec<f64> = times.iter().map(|t| h.eval(*t) + 0.1 * sinc(*t)).collect();
        assert_eq!(make_tabulated(&times, &values).unwrap().parity(), Parity::None);
    }

    #[test]
    fn csv_loading() {
        let data = "time,value\n-1,0\n0,1\n1,0\n";
        let k = load_tabulated_csv(data.as_bytes()).unwrap();
        assert_eq!(k.eval(0.5), 0.5);
        let k = load_tabulated_csv("-1,0\n0,1\n1,0\n".as_bytes()).unwrap();
        assert_eq!(k.eval(-0.25), 0.75);
        assert!(load_tabulated_csv("t,v\n0,1\nx,2\n".as_bytes()).is_err());
    }

    #[test]
    fn autocorrelation_examples() {
        let s = make_sinc();
        assert!(close(autocorrelation(&s, 0.7), 0.367_883_010_571_774_2, 1e-10));
        assert!(close(autocorrelation(&s, 0.0), 1.0, 1e-10));
        let t = make_triangular(1.0, 1.0).unwrap();
        assert_eq!(autocorrelation(&t, 2.0), 0.0);
        assert!(close(autocorrelation(&t, 0.0), 2.0 / 3.0, 1e-12));
        let h = make_hilbert_sinc();
        assert!(close(autocorrelation(&h, 0.0), -1.0, 1e-10));
    }

    #[test]
    fn autocorrelation_sinc_is_sinc() {
        let s = make_sinc();
        for k in 0..=12 {
            let lag = 0.25 * k as f64;
            assert!(close(autocorrelation(&s, lag), s.eval(lag), 1e-8), "lag {lag}");
        }
    }

    #[test]
    fn autocorrelation_is_even() {
        for k in [
            make_sinc(),
            make_hilbert_sinc(),
            make_triangular(2.0, 1.0).unwrap(),
            make_laplace(1.5, 2.0).unwrap(),
        ] {
            for lag in [0.1, 0.45, 1.3] {
                assert!(close(autocorrelation(&k, lag), autocorrelation(&k, -lag), 1e-9));
            }
            let zero = autocorrelation(&k, 0.0);
            assert!(close(zero.abs(), k.l2_norm().powi(2), 1e-8), "{}", k.name());
        }
    }

    #[test]
    fn cross_correlation_routes_agree() {
        let h = make_sinc();
        let g = make_triangular(1.0, 1.0).unwrap();
        let a = cross_correlation_time(&h, &g, 0.0);
        let b = cross_correlation_freq(&h, &g, 0.0, 1e-12);
        assert!(close(a, b, 1e-8), "{a} vs {b}");
        let h = make_hilbert_sinc();
        let g = make_laplace(2.0, 1.0).unwrap();
        let a = cross_correlation_time(&h, &g, 0.4);
        let b = cross_correlation_freq(&h, &g, 0.4, 1e-12);
        assert!(close(a, b, 1e-6), "{a} vs {b}");
    }

    #[test]
    fn weighted_spectral_examples() {
        let s = make_sinc();
        let r = check_weighted_spectral(&s, 4.5, 50.0).unwrap();
        assert!(r.converged);
        assert!(close(r.value, 8.498_532_173_768_028, 1e-8));
        let t = make_triangular(1.0, 1.0).unwrap();
        let r = check_weighted_spectral(&t, 1.5, 100.0).unwrap();
        assert!(r.converged && r.value.is_finite());
        let z = make_tabulated(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        let r = check_weighted_spectral(&z, 2.0, 10.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
        assert!(check_weighted_spectral(&s, 1.0, 10.0).is_err());
    }

    #[test]
    fn family_conditions_triangular_and_laplace() {
        let fam = KernelFamily::triangular(1.0).unwrap();
        let rep = check_family_conditions(&fam, &[1.0, 10.0, 100.0], 5.0, 1e-3).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        assert!(rep.delta_like.per_delta[2] < 25.0 / (12.0 * 1e4));
        assert!(close(rep.transform_bound, 1.0, 1e-12));

        let fam = KernelFamily::laplace(1.0).unwrap();
        let rep = check_family_conditions(&fam, &[1.0, 10.0, 100.0], 5.0, 1e-3).unwrap();
        for (d, dev) in rep.deltas.iter().zip(&rep.delta_like.per_delta) {
            assert!(close(*dev, 25.0 / (d * d + 25.0), 1e-12));
        }
        assert!(rep.square_integrable.passed && rep.even.passed && rep.bounded_transform.passed);
    }

    #[test]
    fn family_conditions_asymmetric_box_fails_evenness() {
        let fam = KernelFamily::one_sided_box(1.0).unwrap();
        let rep = check_family_conditions(&fam, &[1.0, 10.0, 100.0], 5.0, 1e-3).unwrap();
        assert!(!rep.even.passed);
        assert!(!rep.all_passed());
        let fam = KernelFamily::triangular(1.0).unwrap();
        assert!(check_family_conditions(&fam, &[], 5.0, 1e-3).is_err());
    }
}
