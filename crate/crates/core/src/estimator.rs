//! Sample cross-correlogram `Ĥ(τ) = (1/cT) ∫₀ᵀ Y(t+τ) X(t) dt`, its mean and
//! the centred, scaled fluctuation `Ẑ(τ) = √T (Ĥ(τ) − EĤ(τ))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernel::{cross_correlation_freq, cross_correlation_time, Kernel};
use crate::signal::{NoiseSeed, SampledPath};

/// Riemann rule for the time integral of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiemannRule {
    /// `Σ_{t_j ∈ [0,T)}`, matching the left-point simulation.
    #[default]
    Left,
    /// Trapezoid over `[0, T]`.
    Trapezoid,
}

const LATTICE_TOL: f64 = 1e-6;

/// Nearest lattice index of `tau`.
pub fn snap_tau(tau: f64, dt: f64) -> i64 {
    (tau / dt).round() as i64
}

fn lattice_index(x: f64, dt: f64, what: &str) -> Result<i64> {
    let k = (x / dt).round();
    if (x / dt - k).abs() > LATTICE_TOL * (1.0 + k.abs()).max(1.0) {
        return Err(Error::InvalidInput(format!(
            "{what}={x} is not a multiple of dt={dt}"
        )));
    }
    Ok(k as i64)
}

/// `Ĥ(τ)` on `tau_grid` with the left-point rule.
pub fn cross_correlogram(y: &SampledPath, x: &SampledPath, c: f64, t_span: f64, tau_grid: &[f64]) -> Result<Vec<f64>> {
    cross_correlogram_with_rule(y, x, c, t_span, tau_grid, RiemannRule::Left)
}

pub fn cross_correlogram_with_rule(
    y: &SampledPath,
    x: &SampledPath,
    c: f64,
    t_span: f64,
    tau_grid: &[f64],
    rule: RiemannRule,
) -> Result<Vec<f64>> {
    ensure_positive("c", c)?;
    ensure_positive("T", t_span)?;
    if y.grid != x.grid {
        return Err(Error::InvalidInput("Y and X must share one time grid".into()));
    }
    if tau_grid.is_empty() {
        return Ok(Vec::new());
    }
    let grid = y.grid;
    let dt = grid.dt;
    let n_t = lattice_index(t_span, dt, "T")?;
    let origin = lattice_index(-grid.t_start, dt, "-t_start")?;
    let lags: Vec<i64> = tau_grid.iter().map(|t| snap_tau(*t, dt)).collect();
    let k_min = *lags.iter().min().unwrap();
    let k_max = *lags.iter().max().unwrap();
    let last_j = match rule {
        RiemannRule::Left => n_t - 1,
        RiemannRule::Trapezoid => n_t,
    };
    let first = origin + k_min.min(0);
    let last = origin + last_j + k_max.max(0);
    if first < 0 || last >= grid.n as i64 {
        return Err(Error::Coverage {
            need_start: (k_min.min(0)) as f64 * dt,
            need_end: (last_j + k_max.max(0)) as f64 * dt,
            have_start: grid.t_start,
            have_end: grid.t_end(),
        });
    }
    let o = origin as usize;
    let xs = &x.values[o..=o + last_j as usize];
    let scale = dt / (c * t_span);
    Ok(lags
        .iter()
        .map(|&k| {
            let ys = &y.values[(origin + k) as usize..];
            let mut s: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
            if rule == RiemannRule::Trapezoid {
                let end = xs.len() - 1;
                s -= 0.5 * (xs[0] * ys[0] + xs[end] * ys[end]);
            }
            s * scale
        })
        .collect())
}

/// `EĤ(τ) = (1/c) ∫ g(s) H(s+τ) ds`. Integrates in time over the support of
/// `g` unless `g` is band-limited, in which case Parseval is used.
pub fn theoretical_bias(h: &Kernel, g: &Kernel, c: f64, tau: f64) -> f64 {
    let v = if g.band_limit().is_some() {
        cross_correlation_freq(h, g, tau, 1e-12)
    } else {
        cross_correlation_time(h, g, tau)
    };
    v / c
}

/// Frequency-domain evaluation of [`theoretical_bias`].
pub fn theoretical_bias_freq(h: &Kernel, g: &Kernel, c: f64, tau: f64) -> f64 {
    cross_correlation_freq(h, g, tau, 1e-12) / c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramEstimate {
    pub tau_grid: Vec<f64>,
    /// `tau_grid` after snapping to the simulation lattice.
    pub tau_snapped: Vec<f64>,
    pub h_hat: Vec<f64>,
    pub h_mean: Vec<f64>,
    pub z_hat: Vec<f64>,
    #[serde(rename = "T")]
    pub t_span: f64,
    pub delta: f64,
    pub c: f64,
    pub dt: f64,
    pub seed: Option<NoiseSeed>,
}

/// Metadata written next to an estimate CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSidecar {
    #[serde(rename = "T")]
    pub t_span: f64,
    pub delta: f64,
    pub c: f64,
    pub dt: f64,
    pub seed: Option<NoiseSeed>,
}

impl CorrelogramEstimate {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tau_grid: Vec<f64>,
        h_hat: Vec<f64>,
        h_mean: Vec<f64>,
        t_span: f64,
        delta: f64,
        c: f64,
        dt: f64,
        seed: Option<NoiseSeed>,
    ) -> Result<Self> {
        if h_hat.len() != tau_grid.len() || h_mean.len() != tau_grid.len() {
            return Err(Error::InvalidInput("estimate arrays must match tau_grid".into()));
        }
        ensure_positive("T", t_span)?;
        let tau_snapped = tau_grid.iter().map(|t| snap_tau(*t, dt) as f64 * dt).collect();
        let mut est = Self {
            tau_grid,
            tau_snapped,
            h_hat,
            h_mean,
            z_hat: Vec::new(),
            t_span,
            delta,
            c,
            dt,
            seed,
        };
        est.z_hat = centered_process(&est);
        Ok(est)
    }

    /// Simulated paths in, estimate with quadrature mean out.
    #[allow(clippy::too_many_arguments)]
    pub fn from_paths(
        y: &SampledPath,
        x: &SampledPath,
        h: &Kernel,
        g: &Kernel,
        c: f64,
        delta: f64,
        t_span: f64,
        tau_grid: &[f64],
        seed: Option<NoiseSeed>,
    ) -> Result<Self> {
        let h_hat = cross_correlogram(y, x, c, t_span, tau_grid)?;
        let h_mean = tau_grid.iter().map(|t| theoretical_bias(h, g, c, *t)).collect();
        Self::new(tau_grid.to_vec(), h_hat, h_mean, t_span, delta, c, y.grid.dt, seed)
    }

    pub fn sidecar(&self) -> EstimateSidecar {
        EstimateSidecar {
            t_span: self.t_span,
            delta: self.delta,
            c: self.c,
            dt: self.dt,
            seed: self.seed,
        }
    }

    /// Columns `tau,h_hat,h_mean,z_hat`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,h_hat,h_mean,z_hat")?;
        for i in 0..self.tau_grid.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.tau_snapped[i], self.h_hat[i], self.h_mean[i], self.z_hat[i]
            )?;
        }
        Ok(())
    }
}

/// `√T (Ĥ − EĤ)` per τ.
pub fn centered_process(est: &CorrelogramEstimate) -> Vec<f64> {
    let root = est.t_span.sqrt();
    est.h_hat
        .iter()
        .zip(&est.h_mean)
        .map(|(a, m)| root * (a - m))
        .collect()
}
