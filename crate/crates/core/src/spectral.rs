//! Second-order structure of `Y` and `Ẑ`: Fejér kernel, the spectral
//! pseudometric σ, the limit covariance `C_∞`, the finite-`(T, Δ)`
//! covariance of `Ẑ` and the pseudometric ρ it induces.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernel::{sinc_unnormalized, Kernel};
use crate::quadrature::{graded_points, panel_points, GaussLegendre, Integrator};

/// Number of Fejér lobes integrated explicitly on each side of zero;
/// beyond them `sin²` is replaced by its mean.
pub const FEJER_HUMPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    #[default]
    Adaptive,
    FixedGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Frequency cut-off; `None` derives it from the kernels' spectral mass.
    pub lambda_max: Option<f64>,
    /// Absolute tolerance of one-dimensional integrals.
    pub abs_tol: f64,
    /// Absolute tolerance of the Fejér-weighted double integrals.
    pub abs_tol_2d: f64,
    pub rel_tol: f64,
    pub rule: QuadratureRule,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            lambda_max: None,
            abs_tol: 1e-9,
            abs_tol_2d: 1e-6,
            rel_tol: 1e-10,
            rule: QuadratureRule::Adaptive,
        }
    }
}

impl QuadratureSettings {
    fn validate(&self) -> Result<()> {
        ensure_positive("abs_tol", self.abs_tol)?;
        ensure_positive("abs_tol_2d", self.abs_tol_2d)?;
        ensure_positive("rel_tol", self.rel_tol)?;
        if let Some(l) = self.lambda_max {
            ensure_positive("lambda_max", l)?;
        }
        Ok(())
    }

    fn integrator(&self) -> Integrator {
        Integrator::new(self.abs_tol * 1e-3, self.rel_tol)
    }

    fn extent_for(&self, k: &Kernel) -> f64 {
        self.lambda_max
            .unwrap_or_else(|| k.spectral_extent(self.abs_tol / 10.0))
            .min(k.band_limit().unwrap_or(f64::INFINITY))
    }
}

/// Fejér kernel `Φ_T(λ) = (1/2πT)(sin(Tλ/2)/(λ/2))²`.
pub fn fejer(t_span: f64, lambda: f64) -> f64 {
    let s = sinc_unnormalized(0.5 * t_span * lambda);
    t_span / (2.0 * PI) * s * s
}

/// `∫ Φ_T` by quadrature over `[−L, L]` with `TL = 2πk` plus the
/// asymptotic tail `(4/πT)(1/(2L) − 1/(T²L³))`.
pub fn fejer_integral(t_span: f64) -> Result<f64> {
    ensure_positive("T", t_span)?;
    let humps = 400;
    let l = 2.0 * PI * humps as f64 / t_span;
    let pts: Vec<f64> = (-(humps as i64)..=humps as i64)
        .map(|k| 2.0 * PI * k as f64 / t_span)
        .collect();
    let core = Integrator::new(1e-13, 1e-13)
        .integrate_points(|x| fejer(t_span, x), &pts)
        .value;
    let tail = 4.0 / (PI * t_span) * (0.5 / l - 1.0 / (t_span * t_span * l.powi(3)));
    Ok(core + tail)
}

/// `σ²(τ) = ∫ |H*(λ)|² sin²(τλ/2) dλ`.
pub fn sigma_squared(h: &Kernel, tau: f64) -> f64 {
    sigma_squared_with(h, tau, &QuadratureSettings::default())
}

pub fn sigma_squared_with(h: &Kernel, tau: f64, q: &QuadratureSettings) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let extent = q.extent_for(h);
    let pts = h.spectral_points(extent, tau, &[0.0]);
    let v = q
        .integrator()
        .integrate_points(
            |l| {
                let s = (0.5 * tau * l).sin();
                h.power(l) * s * s
            },
            &pts,
        )
        .value;
    v.max(0.0)
}

/// `σ(τ)`, the spectral pseudometric `σ(τ₁, τ₂) = σ(τ₂ − τ₁)`.
pub fn sigma(h: &Kernel, tau: f64) -> f64 {
    sigma_squared(h, tau).sqrt()
}

/// `E|Y(τ₂) − Y(τ₁)|² = (2/π) σ²(τ₂ − τ₁)`.
pub fn msq_increment_y(h: &Kernel, tau1: f64, tau2: f64) -> f64 {
    2.0 / PI * sigma_squared(h, tau2 - tau1)
}

/// `‖H*‖₂ = √(2π)‖H‖₂`.
pub fn transform_l2_norm(h: &Kernel) -> f64 {
    (2.0 * PI).sqrt() * h.l2_norm()
}

/// `C_∞(τ₁, τ₂) = (1/2π) ∫ [e^{i(τ₁−τ₂)λ}|H*|² + e^{i(τ₁+τ₂)λ}(H*)²] dλ`.
pub fn cov_limit(h: &Kernel, tau1: f64, tau2: f64) -> Result<f64> {
    cov_limit_with(h, tau1, tau2, &QuadratureSettings::default())
}

pub fn cov_limit_with(h: &Kernel, tau1: f64, tau2: f64, q: &QuadratureSettings) -> Result<f64> {
    q.validate()?;
    let extent = q.extent_for(h);
    let freq = tau1.abs().max(tau2.abs()) * 2.0;
    let pts = h.spectral_points(extent, freq, &[0.0]);
    let d = tau1 - tau2;
    let s = tau1 + tau2;
    let r = q.integrator().integrate_points(
        |l| {
            let v = h.ftf(l);
            Complex64::from_polar(v.norm_sqr(), d * l) + v * v * Complex64::from_polar(1.0, s * l)
        },
        &pts,
    );
    let value = r.value / (2.0 * PI);
    if value.im.abs() > q.abs_tol.max(q.rel_tol * value.re.abs()) {
        return Err(Error::NumericalConsistency(format!(
            "C_inf({tau1}, {tau2}) has imaginary residue {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// `d_Z(τ₁, τ₂) = (E|Z(τ₂) − Z(τ₁)|²)^{1/2}` from `C_∞`, together with the
/// bound `(2/√π) σ(τ₁, τ₂)`.
#[allow(non_snake_case)]
pub fn dZ_bound_check(h: &Kernel, tau1: f64, tau2: f64) -> Result<(f64, f64)> {
    let q = QuadratureSettings::default();
    let dz2 = limit_increment_variance(h, tau1, tau2, &q)?;
    let bound = 2.0 / PI.sqrt() * sigma(h, tau2 - tau1);
    let dz = dz2.sqrt();
    if dz > bound + 1e-8 {
        return Err(Error::NumericalConsistency(format!(
            "d_Z({tau1}, {tau2}) = {dz} exceeds (2/sqrt(pi)) sigma = {bound}"
        )));
    }
    Ok((dz, bound))
}

/// `E|Z(τ₂) − Z(τ₁)|²` computed directly from its spectral form
/// `(1/2π) ∫ [4 sin²((τ₁−τ₂)λ/2)|H*|² + (e^{iτ₁λ} − e^{iτ₂λ})²(H*)²] dλ`,
/// which avoids cancellation between covariance entries.
pub fn limit_increment_variance(h: &Kernel, tau1: f64, tau2: f64, q: &QuadratureSettings) -> Result<f64> {
    q.validate()?;
    if tau1 == tau2 {
        return Ok(0.0);
    }
    let extent = q.extent_for(h);
    let freq = tau1.abs().max(tau2.abs()) * 2.0;
    let pts = h.spectral_points(extent, freq, &[0.0]);
    let r = q.integrator().integrate_points(
        |l| {
            let v = h.ftf(l);
            let s = (0.5 * (tau1 - tau2) * l).sin();
            let e = Complex64::from_polar(1.0, tau1 * l) - Complex64::from_polar(1.0, tau2 * l);
            Complex64::new(4.0 * s * s * v.norm_sqr(), 0.0) + e * e * v * v
        },
        &pts,
    );
    let v = r.value / (2.0 * PI);
    clamp_variance(v.re, q.abs_tol, "limit increment variance")
}

fn clamp_variance(v: f64, tol: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -tol {
        Ok(0.0)
    } else {
        Err(Error::NumericalConsistency(format!("{what} is negative: {v:e}")))
    }
}

/// Upper bound `(1/c)((2/π)‖H*‖₂)^{1/2} · sup_Δ‖g*_Δ‖_∞ · √σ(τ₁, τ₂)` on
/// `ρ_{T,Δ}`, uniform in `T` and `Δ`.
pub fn rho_upper(h: &Kernel, g_family_sup: f64, c: f64, tau1: f64, tau2: f64) -> f64 {
    rho_upper_constant(h, g_family_sup, c) * sigma(h, tau2 - tau1).sqrt()
}

/// The factor `κ` with `rho_upper = κ √σ`.
pub fn rho_upper_constant(h: &Kernel, g_family_sup: f64, c: f64) -> f64 {
    (2.0 / PI * transform_l2_norm(h)).sqrt() * g_family_sup / c
}

/// Global bound `(2/c)‖H‖₂ · sup_Δ‖g*_Δ‖_∞` on ρ.
pub fn rho_global_bound(h: &Kernel, g_family_sup: f64, c: f64) -> f64 {
    2.0 / c * h.l2_norm() * g_family_sup
}

/// Kernels and settings for covariance queries.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub h: Kernel,
    pub g: Option<Kernel>,
    pub c: f64,
    pub quadrature: QuadratureSettings,
}

type SpectralFn<'a> = Box<dyn Fn(f64) -> Complex64 + Sync + 'a>;

impl CovarianceModel {
    pub fn new(h: Kernel, g: Option<Kernel>, c: f64) -> Result<Self> {
        ensure_positive("c", c)?;
        Ok(Self {
            h,
            g,
            c,
            quadrature: QuadratureSettings::default(),
        })
    }

    pub fn with_quadrature(mut self, q: QuadratureSettings) -> Result<Self> {
        q.validate()?;
        self.quadrature = q;
        Ok(self)
    }

    fn g(&self) -> Result<&Kernel> {
        self.g
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("finite-T covariance needs the kernel g".into()))
    }

    pub fn cov_limit(&self, tau1: f64, tau2: f64) -> Result<f64> {
        cov_limit_with(&self.h, tau1, tau2, &self.quadrature)
    }

    /// Essential spectral half-width of one kernel for the double integrals.
    fn extent(&self, k: &Kernel) -> f64 {
        let q = &self.quadrature;
        let natural = k
            .band_limit()
            .unwrap_or_else(|| k.spectral_extent(q.abs_tol_2d / 10.0));
        q.lambda_max.map_or(natural, |l| l.min(natural))
    }

    fn panel_width(&self, g: &Kernel, freq: f64) -> f64 {
        let mut w = self.h.spectral_scale().min(g.spectral_scale());
        if freq > 0.0 {
            w = w.min(PI / freq);
        }
        0.5 * w
    }

    fn breakpoints(&self, g: &Kernel) -> Vec<f64> {
        let mut b = self.h.spectral_breakpoints();
        b.extend(g.spectral_breakpoints());
        b.push(0.0);
        b
    }

    /// Finite-`(T, Δ)` covariance `Cov(Ẑ(τ₁), Ẑ(τ₂))`.
    pub fn cov_finite(&self, t_span: f64, tau1: f64, tau2: f64) -> Result<f64> {
        ensure_positive("T", t_span)?;
        let g = self.g()?;
        let h = &self.h;
        let d = tau1 - tau2;
        let a1: SpectralFn = Box::new(move |l| Complex64::from_polar(h.power(l), d * l));
        let b1: SpectralFn = Box::new(move |l| Complex64::new(g.power(l), 0.0));
        let cross = move |l: f64, tau: f64| Complex64::from_polar(1.0, tau * l) * h.ftf(l) * g.ftf(l).conj();
        let a2: SpectralFn = Box::new(move |l| cross(l, tau1));
        let b2: SpectralFn = Box::new(move |l| cross(l, tau2));
        let freq = tau1.abs().max(tau2.abs()).max(d.abs());
        let (eh, eg) = (self.extent(h), self.extent(g));
        let i1 = self.fejer_double_integral(t_span, (&a1, eh), (&b1, eg), freq, g);
        let i2 = self.fejer_double_integral(t_span, (&a2, eh.min(eg)), (&b2, eh.min(eg)), freq, g);
        let total = (i1 + i2) / (2.0 * PI * self.c * self.c);
        self.check_real(total, "covariance")?;
        if tau1 == tau2 {
            return clamp_variance(total.re, self.quadrature.abs_tol_2d, "variance");
        }
        Ok(total.re)
    }

    /// `ρ_{T,Δ}(τ₁, τ₂) = (E|Ẑ(τ₁) − Ẑ(τ₂)|²)^{1/2}`, integrated as an
    /// increment variance rather than assembled from covariances.
    pub fn rho_exact(&self, t_span: f64, tau1: f64, tau2: f64) -> Result<f64> {
        ensure_positive("T", t_span)?;
        let g = self.g()?;
        if tau1 == tau2 {
            return Ok(0.0);
        }
        let h = &self.h;
        let d = tau1 - tau2;
        let a1: SpectralFn = Box::new(move |l| {
            let s = (0.5 * d * l).sin();
            Complex64::new(4.0 * s * s * h.power(l), 0.0)
        });
        let b1: SpectralFn = Box::new(move |l| Complex64::new(g.power(l), 0.0));
        let diff: SpectralFn = Box::new(move |l| {
            (Complex64::from_polar(1.0, tau1 * l) - Complex64::from_polar(1.0, tau2 * l))
                * h.ftf(l)
                * g.ftf(l).conj()
        });
        let freq = tau1.abs().max(tau2.abs()).max(d.abs());
        let (eh, eg) = (self.extent(h), self.extent(g));
        let i1 = self.fejer_double_integral(t_span, (&a1, eh), (&b1, eg), freq, g);
        let i2 = self.fejer_double_integral(t_span, (&diff, eh.min(eg)), (&diff, eh.min(eg)), freq, g);
        let total = (i1 + i2) / (2.0 * PI * self.c * self.c);
        self.check_real(total, "increment variance")?;
        Ok(clamp_variance(total.re, self.quadrature.abs_tol_2d, "increment variance")?.sqrt())
    }

    fn check_real(&self, v: Complex64, what: &str) -> Result<()> {
        let tol = 10.0 * (self.quadrature.abs_tol_2d + self.quadrature.rel_tol * v.re.abs());
        if v.im.abs() > tol {
            return Err(Error::NumericalConsistency(format!(
                "{what} has imaginary residue {:e} above {tol:e}",
                v.im
            )));
        }
        Ok(())
    }

    /// `∫∫ A(λ₁) B(λ₂) Φ_T(λ₁ − λ₂) dλ₁ dλ₂` with `u = λ₁ − λ₂` outermost:
    /// `∫ Φ_T(u) C(u) du`, `C(u) = ∫ A(v + u) B(v) dv`. `A` and `B` vanish
    /// outside `[−ext_a, ext_a]` and `[−ext_b, ext_b]`.
    ///
    /// Each Fejér lobe `[2πk/T, 2π(k+1)/T]` is integrated adaptively up to
    /// [`FEJER_HUMPS`] lobes; the remainder uses the lobe-averaged weight
    /// `1/(πTu²)`.
    fn fejer_double_integral(
        &self,
        t_span: f64,
        (a, ext_a): (&SpectralFn, f64),
        (b, ext_b): (&SpectralFn, f64),
        freq: f64,
        g: &Kernel,
    ) -> Complex64 {
        let width = self.panel_width(g, freq);
        let bps = self.breakpoints(g);
        let gl = GaussLegendre::order20();
        let core = (8.0 * self.h.spectral_scale().min(g.spectral_scale())).max(PI);

        let inner = |u: f64| -> Complex64 {
            let lo = (-ext_b).max(-ext_a - u);
            let hi = ext_b.min(ext_a - u);
            if !(hi > lo) {
                return Complex64::new(0.0, 0.0);
            }
            let mut extra: Vec<f64> = bps.clone();
            extra.extend(bps.iter().map(|p| p - u));
            let pts = if hi - lo <= 2.0 * core {
                let mut p = panel_points(lo, hi, extra);
                subdivide(&mut p, width);
                p
            } else {
                graded_points(lo, hi, core, width, &extra)
            };
            pts.windows(2)
                .map(|w| gl.integrate(|v| a(v + u) * b(v), w[0], w[1]))
                .sum()
        };

        let reach = ext_a + ext_b;
        let lobe = 2.0 * PI / t_span;
        let total_humps = (reach / lobe).ceil() as usize;
        let humps = total_humps.min(FEJER_HUMPS);
        let tol = self.quadrature.abs_tol_2d / (8.0 * humps as f64);
        let integrator = Integrator {
            abs_tol: tol,
            rel_tol: self.quadrature.rel_tol,
            max_subdivisions: 64,
        };
        let fixed = self.quadrature.rule == QuadratureRule::FixedGrid;
        let lobes: Vec<Complex64> = (0..2 * humps)
            .into_par_iter()
            .map(|i| {
                let k = (i / 2) as f64;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let (lo, hi) = (sign * k * lobe, sign * ((k + 1.0) * lobe).min(reach));
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                let f = |u: f64| inner(u) * fejer(t_span, u);
                if fixed {
                    gl.integrate(f, lo, hi)
                } else {
                    integrator.integrate(f, lo, hi).value
                }
            })
            .collect();
        let mut sum: Complex64 = lobes.iter().sum();

        let start = humps as f64 * lobe;
        if start < reach {
            let panels = ((reach / start).log2() * 16.0).ceil().max(1.0) as usize;
            let mut pts: Vec<f64> = (0..=panels)
                .map(|k| start * (reach / start).powf(k as f64 / panels as f64))
                .collect();
            let kinks: Vec<f64> = bps
                .iter()
                .flat_map(|p| bps.iter().map(move |q| (p - q).abs()))
                .filter(|x| *x > start && *x < reach)
                .collect();
            pts.extend(kinks);
            let pts = panel_points(start, reach, pts);
            let tail: Complex64 = pts
                .par_windows(2)
                .map(|w| {
                    gl.integrate(|u| (inner(u) + inner(-u)) / (PI * t_span * u * u), w[0], w[1])
                })
                .collect::<Vec<_>>()
                .iter()
                .sum();
            sum += tail;
        }
        sum
    }

    /// `C_∞` Gram matrix over `taus`.
    pub fn limit_matrix(&self, taus: &[f64]) -> Result<Vec<Vec<f64>>> {
        symmetric_matrix(taus, |a, b| self.cov_limit(a, b))
    }

    /// Finite-`(T, Δ)` covariance matrix over `taus`.
    pub fn finite_matrix(&self, t_span: f64, taus: &[f64]) -> Result<Vec<Vec<f64>>> {
        symmetric_matrix(taus, |a, b| self.cov_finite(t_span, a, b))
    }
}

fn subdivide(pts: &mut Vec<f64>, width: f64) {
    let mut out = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / width).ceil().clamp(1.0, 1e5) as usize;
        for k in 0..n {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
    }
    out.extend(pts.last());
    *pts = out;
}

fn symmetric_matrix(taus: &[f64], f: impl Fn(f64, f64) -> Result<f64>) -> Result<Vec<Vec<f64>>> {
    let n = taus.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = f(taus[i], taus[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// `cov_finite` as a free function.
pub fn cov_finite(model: &CovarianceModel, t_span: f64, tau1: f64, tau2: f64) -> Result<f64> {
    model.cov_finite(t_span, tau1, tau2)
}

/// `rho_exact` as a free function.
pub fn rho_exact(model: &CovarianceModel, t_span: f64, tau1: f64, tau2: f64) -> Result<f64> {
    model.rho_exact(t_span, tau1, tau2)
}

/// Writes a τ-indexed matrix as CSV with a `tau` header column.
pub fn write_matrix_csv<W: Write>(taus: &[f64], m: &[Vec<f64>], mut w: W) -> std::io::Result<()> {
    write!(w, "tau")?;
    for t in taus {
        write!(w, ",{t}")?;
    }
    writeln!(w)?;
    for (t, row) in taus.iter().zip(m) {
        write!(w, "{t}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{
        autocorrelation, cross_correlation_time, make_hilbert_sinc, make_laplace, make_sinc, make_triangular, sinc,
    };

    #[test]
    fn fejer_values() {
        assert!((fejer(1.0, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(fejer(10.0, 2.0 * PI / 10.0).abs() < 1e-15);
        for t in [1.0, 10.0, 100.0, 1000.0] {
            assert!((fejer_integral(t).unwrap() - 1.0).abs() < 1e-6, "T={t}");
        }
    }

    #[test]
    fn sigma_closed_form_for_sinc() {
        let h = make_sinc();
        assert_eq!(sigma(&h, 0.0), 0.0);
        assert!((sigma(&h, 1.0) - PI.sqrt()).abs() < 1e-10);
        assert!((sigma_squared(&h, 2.0) - PI).abs() < 1e-9);
        for tau in [0.3, 0.75, 1.6] {
            let exact = PI - (PI * tau).sin() / tau;
            assert!((sigma_squared(&h, tau) - exact).abs() < 1e-9);
            assert_eq!(sigma(&h, tau), sigma(&h, -tau));
        }
        assert!((msq_increment_y(&h, 0.0, 1.0) - 2.0).abs() < 1e-9);
        assert_eq!(msq_increment_y(&h, 0.4, 0.4), 0.0);
    }

    #[test]
    fn cov_limit_closed_forms() {
        let s = make_sinc();
        let hs = make_hilbert_sinc();
        for (a, b) in [(0.0, 0.0), (0.5, 0.5), (0.25, 1.75), (2.0, 0.3)] {
            let v = cov_limit(&s, a, b).unwrap();
            assert!((v - (sinc(a - b) + sinc(a + b))).abs() < 1e-9);
            let w = cov_limit(&hs, a, b).unwrap();
            assert!((w - (sinc(a - b) - sinc(a + b))).abs() < 1e-9);
        }
        assert!(cov_limit(&hs, 0.0, 0.0).unwrap().abs() < 1e-12);
        assert!((cov_limit(&hs, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cov_limit_time_domain_for_laplace() {
        // C_∞ = R_H(τ₁ − τ₂) + (H∗H)(τ₁ + τ₂), both equal to the
        // self-convolution for even H
        let h = make_laplace(2.0, 1.5).unwrap();
        for (a, b) in [(0.0, 0.0), (0.3, 0.9)] {
            let v = cov_limit(&h, a, b).unwrap();
            let w = autocorrelation(&h, a - b) + autocorrelation(&h, a + b);
            assert!((v - w).abs() < 1e-8, "{v} {w}");
        }
    }

    #[test]
    fn dz_bound_examples() {
        let s = make_sinc();
        assert_eq!(dZ_bound_check(&s, 0.3, 0.3).unwrap(), (0.0, 0.0));
        let (dz, bound) = dZ_bound_check(&s, 0.0, 1.0).unwrap();
        assert!((dz * dz - (3.0 + sinc(2.0))).abs() < 1e-8);
        assert!((bound - 2.0).abs() < 1e-9);
        let (dz, bound) = dZ_bound_check(&make_hilbert_sinc(), 0.0, 1.0).unwrap();
        assert!(dz <= bound);
        let expected = (1.0 - sinc(2.0)) + 2.0 * (sinc(1.0) - sinc(1.0));
        assert!((dz * dz - expected).abs() < 1e-8);
    }

    #[test]
    fn rho_upper_examples() {
        let s = make_sinc();
        assert_eq!(rho_upper(&s, 1.0, 1.0, 0.2, 0.2), 0.0);
        let v = rho_upper(&s, 1.0, 1.0, 0.0, 1.0);
        assert!((v - 1.681_792_830_507_429).abs() < 1e-9, "{v}");
        assert!((rho_global_bound(&s, 1.0, 1.0) - 2.0).abs() < 1e-15);
    }

    /// Time-domain form of the finite covariance:
    /// `(1/c²) ∫_{−T}^{T} (1 − |w|/T)[R_Y(w+τ₁−τ₂) R_X(w) + R_YX(w+τ₁) R_YX(τ₂−w)] dw`.
    fn cov_finite_time_domain(h: &Kernel, g: &Kernel, c: f64, t: f64, tau1: f64, tau2: f64) -> f64 {
        let q = Integrator::new(1e-11, 1e-11);
        let rg = 2.0 * g.effective_support();
        let bart = |w: f64| 1.0 - w.abs() / t;
        let first = q
            .integrate_points(
                |w| bart(w) * autocorrelation(h, w + tau1 - tau2) * autocorrelation(g, w),
                &[-rg, -rg / 2.0, 0.0, rg / 2.0, rg],
            )
            .value;
        let pts: Vec<f64> = (0..=(8.0 * t) as usize).map(|k| -t + 0.25 * k as f64).collect();
        let second = q
            .integrate_points(
                |w| bart(w) * cross_correlation_time(h, g, w + tau1) * cross_correlation_time(h, g, tau2 - w),
                &pts,
            )
            .value;
        (first + second) / (c * c)
    }

    #[test]
    fn cov_finite_matches_time_domain_oracle() {
        let h = make_sinc();
        let g = make_triangular(2.0, 1.0).unwrap();
        let model = CovarianceModel::new(h.clone(), Some(g.clone()), 1.0).unwrap();
        for (a, b) in [(0.3, 0.7), (0.0, 0.0)] {
            let spectral = model.cov_finite(20.0, a, b).unwrap();
            let time = cov_finite_time_domain(&h, &g, 1.0, 20.0, a, b);
            assert!((spectral - time).abs() < 1e-5, "({a},{b}): {spectral} vs {time}");
        }
    }

    #[test]
    fn rho_exact_consistent_with_covariances() {
        let model = CovarianceModel::new(make_sinc(), Some(make_triangular(10.0, 1.0).unwrap()), 1.0).unwrap();
        let t = 50.0;
        let (a, b) = (0.1, 0.6);
        let c11 = model.cov_finite(t, a, a).unwrap();
        let c22 = model.cov_finite(t, b, b).unwrap();
        let c12 = model.cov_finite(t, a, b).unwrap();
        let rho = model.rho_exact(t, a, b).unwrap();
        assert!((rho * rho - (c11 + c22 - 2.0 * c12)).abs() < 1e-5);
        assert!(rho <= rho_upper(&model.h, 1.0, 1.0, a, b));
        assert_eq!(model.rho_exact(t, a, a).unwrap(), 0.0);
        assert!((c12 - model.cov_finite(t, b, a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn cov_finite_needs_g() {
        let model = CovarianceModel::new(make_sinc(), None, 1.0).unwrap();
        assert!(model.cov_finite(10.0, 0.0, 0.0).is_err());
        assert!(model.cov_limit(0.0, 0.0).is_ok());
    }

    #[test]
    fn matrix_csv() {
        let mut out = Vec::new();
        write_matrix_csv(&[0.0, 0.5], &[vec![2.0, 1.0], vec![1.0, 1.5]], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "tau,0,0.5\n0,2,1\n0.5,1,1.5\n");
    }
}
