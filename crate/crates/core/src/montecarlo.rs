//! Replication harness for `Ẑ`: ensemble moments, covariance, normality,
//! supremum tails, bound coverage and moduli of continuity.
//!
//! Replication `r` draws its noise from stream `base_seed.stream_id + r`,
//! and results are gathered in replication order before any reduction, so
//! every output is independent of the number of worker threads.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::{BoundMethod, TailBoundReport};
use crate::error::{Error, Result};
use crate::estimator::{cross_correlogram, snap_tau, theoretical_bias};
use crate::kernel::{FamilySpec, Kernel, KernelSpec};
use crate::signal::{dt_resolution_warning, NoiseSeed, PairSimulator, SampledPath, TimeGrid};
use crate::spectral::cov_limit;

/// Terms of the Kolmogorov series.
pub const KS_SERIES_TERMS: usize = 100;
/// Largest `|sample|` accepted by the degenerate (zero-variance) test.
pub const DEGENERATE_THRESHOLD: f64 = 1e-8;
/// Eigenvalue floor for the `C_∞` Gram matrix.
pub const GRAM_EIGEN_FLOOR: f64 = -1e-8;
/// Multiple of the standard error allowed in coverage checks.
pub const COVERAGE_SE_MULTIPLE: f64 = 3.0;

/// `(h, δ)` ladders for the modulus-of-continuity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusConfig {
    pub h_ladder: Vec<f64>,
    pub delta_thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub h: KernelSpec,
    pub g_family: FamilySpec,
    #[serde(rename = "T")]
    pub t_span: f64,
    pub delta: f64,
    pub dt: f64,
    pub tau_grid: Vec<f64>,
    pub replications: usize,
    pub base_seed: NoiseSeed,
    /// `[a, b]`; the supremum is taken over its dt lattice.
    pub interval: [f64; 2],
    #[serde(default)]
    pub modulus: Option<ModulusConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.interval;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::InvalidParameter(format!("interval must satisfy a <= b, got [{a}, {b}]")));
        }
        if self.replications < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        for (name, v) in [("T", self.t_span), ("delta", self.delta), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.tau_grid.is_empty() {
            return Err(Error::InvalidInput("tau_grid is empty".into()));
        }
        let slack = 1e-9 * (1.0 + a.abs().max(b.abs()));
        if let Some(t) = self.tau_grid.iter().find(|t| **t < a - slack || **t > b + slack) {
            return Err(Error::InvalidInput(format!("tau={t} lies outside [{a}, {b}]")));
        }
        Ok(())
    }
}

/// Per-τ ensemble moments of `Ẑ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauStats {
    pub tau: f64,
    pub mean: f64,
    pub variance: f64,
    /// Jackknife standard error of `variance`.
    pub variance_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// The zero-variance threshold test was used.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauKs {
    pub tau: f64,
    pub limit_variance: f64,
    pub ks: KsResult,
}

/// Empirical survival function `P{S > x}` from grouped samples. Samples in
/// one group may be dependent; groups are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    groups: Vec<Vec<f64>>,
    total: usize,
}

impl EmpiricalTail {
    pub fn from_groups(mut groups: Vec<Vec<f64>>) -> Result<Self> {
        groups.retain(|g| !g.is_empty());
        if groups.is_empty() {
            return Err(Error::InvalidInput("no samples".into()));
        }
        for g in &mut groups {
            g.sort_by(f64::total_cmp);
        }
        let total = groups.iter().map(Vec::len).sum();
        Ok(Self { groups, total })
    }

    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        Self::from_groups(samples.iter().map(|s| vec![*s]).collect())
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    fn exceed(g: &[f64], x: f64) -> usize {
        g.len() - g.partition_point(|v| *v <= x)
    }

    pub fn survival(&self, x: f64) -> f64 {
        let count: usize = self.groups.iter().map(|g| Self::exceed(g, x)).sum();
        count as f64 / self.total as f64
    }

    /// Ratio-estimator standard error; binomial for singleton groups.
    pub fn standard_error(&self, x: f64) -> f64 {
        let p = self.survival(x);
        let k = self.groups.len() as f64;
        if k < 2.0 {
            return 0.0;
        }
        let ss: f64 = self
            .groups
            .iter()
            .map(|g| (Self::exceed(g, x) as f64 - p * g.len() as f64).powi(2))
            .sum();
        (k / (k - 1.0) * ss).sqrt() / self.total as f64
    }

    pub fn max(&self) -> f64 {
        self.groups.iter().map(|g| g[g.len() - 1]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `x,survival,se` on `xs`.
    pub fn write_csv<W: Write>(&self, xs: &[f64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,survival,se")?;
        for x in xs {
            writeln!(w, "{},{},{}", x, self.survival(*x), self.standard_error(*x))?;
        }
        Ok(())
    }

    /// Default evaluation grid: 51 points from 0 to the largest sample.
    pub fn default_grid(&self) -> Vec<f64> {
        let top = self.max().max(0.0);
        (0..=50).map(|k| top * k as f64 / 50.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: BoundMethod,
    pub x: f64,
    pub empirical: f64,
    pub se: f64,
    pub bound: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub h: f64,
    pub delta: f64,
    pub probability: f64,
    pub se: f64,
}

/// Aggregated output of [`run_replications`].
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub config: ExperimentConfig,
    /// Snapped `tau_grid`.
    pub tau_grid: Vec<f64>,
    /// dt lattice of `[a, b]`.
    pub lattice: Vec<f64>,
    pub lattice_spacing: f64,
    /// `Ẑ` per replication on `tau_grid`.
    pub z_samples: Vec<Vec<f64>>,
    /// `Ẑ` per replication on `lattice`.
    pub lattice_samples: Vec<Vec<f64>>,
    pub ensemble_stats: Vec<TauStats>,
    pub empirical_cov: Vec<Vec<f64>>,
    /// Jackknife standard errors of `empirical_cov`.
    pub cov_se: Vec<Vec<f64>>,
    pub ks_results: Vec<TauKs>,
    /// `sup_{[a,b]} |Ẑ|` over the lattice.
    pub sup_tail: EmpiricalTail,
    /// `sup |Y|` over windows of length `b − a`, grouped by replication.
    pub y_abs_tail: EmpiricalTail,
    /// `sup Y` over the same windows.
    pub y_onesided_tail: EmpiricalTail,
    pub coverage: Vec<CoverageRow>,
    pub moduli: Vec<ModulusRow>,
    pub warnings: Vec<String>,
}

/// JSON summary of a [`MonteCarloResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub config: ExperimentConfig,
    pub lattice_spacing: f64,
    pub ensemble_stats: Vec<TauStats>,
    pub empirical_cov: Vec<Vec<f64>>,
    pub cov_se: Vec<Vec<f64>>,
    pub ks_results: Vec<TauKs>,
    pub sup_tail_samples: usize,
    pub sup_tail_max: f64,
    pub coverage: Vec<CoverageRow>,
    pub moduli: Vec<ModulusRow>,
    pub warnings: Vec<String>,
}

impl MonteCarloResult {
    pub fn summary(&self) -> MonteCarloSummary {
        MonteCarloSummary {
            config: self.config.clone(),
            lattice_spacing: self.lattice_spacing,
            ensemble_stats: self.ensemble_stats.clone(),
            empirical_cov: self.empirical_cov.clone(),
            cov_se: self.cov_se.clone(),
            ks_results: self.ks_results.clone(),
            sup_tail_samples: self.sup_tail.len(),
            sup_tail_max: self.sup_tail.max(),
            coverage: self.coverage.clone(),
            moduli: self.moduli.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Index of `tau` in `tau_grid` after snapping.
    pub fn tau_index(&self, tau: f64) -> Option<usize> {
        let k = snap_tau(tau, self.lattice_spacing);
        self.tau_grid
            .iter()
            .position(|t| snap_tau(*t, self.lattice_spacing) == k)
    }

    /// `tau,mean,variance,variance_se,limit_variance,ks_statistic,p_value`.
    pub fn write_stats_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,mean,variance,variance_se,limit_variance,ks_statistic,p_value")?;
        for (s, k) in self.ensemble_stats.iter().zip(&self.ks_results) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.tau, s.mean, s.variance, s.variance_se, k.limit_variance, k.ks.statistic, k.ks.p_value
            )?;
        }
        Ok(())
    }

    /// `tau1,tau2,cov,se`.
    pub fn write_cov_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau1,tau2,cov,se")?;
        for (i, t1) in self.tau_grid.iter().enumerate() {
            for (j, t2) in self.tau_grid.iter().enumerate() {
                writeln!(w, "{},{},{},{}", t1, t2, self.empirical_cov[i][j], self.cov_se[i][j])?;
            }
        }
        Ok(())
    }

    /// Long format `replication,tau,z` over the lattice.
    pub fn write_lattice_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "replication,tau,z")?;
        for (r, row) in self.lattice_samples.iter().enumerate() {
            for (t, z) in self.lattice.iter().zip(row) {
                writeln!(w, "{r},{t},{z}")?;
            }
        }
        Ok(())
    }

    /// `method,x,empirical,se,bound,valid`.
    pub fn write_coverage_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_coverage_csv(&self.coverage, &mut w)
    }

    /// `h,delta,probability,se`.
    pub fn write_moduli_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "h,delta,probability,se")?;
        for m in &self.moduli {
            writeln!(w, "{},{},{},{}", m.h, m.delta, m.probability, m.se)?;
        }
        Ok(())
    }
}

pub fn write_coverage_csv<W: Write>(rows: &[CoverageRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,x,empirical,se,bound,valid")?;
    for c in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            c.method.as_str(),
            c.x,
            c.empirical,
            c.se,
            c.bound,
            c.valid
        )?;
    }
    Ok(())
}

struct Replication {
    z_tau: Vec<f64>,
    z_lattice: Vec<f64>,
    y_abs: Vec<f64>,
    y_max: Vec<f64>,
}

fn lattice_of(a: f64, b: f64, dt: f64) -> Vec<f64> {
    let lo = snap_tau(a, dt);
    let hi = snap_tau(b, dt);
    (lo..=hi).map(|k| k as f64 * dt).collect()
}

struct Setup {
    h: Kernel,
    c: f64,
    tau_grid: Vec<f64>,
    lattice: Vec<f64>,
    all_taus: Vec<f64>,
    means: Vec<f64>,
    sim: PairSimulator,
    warnings: Vec<String>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.h.build()?;
        let family = cfg.g_family.build()?;
        let g = family.member(cfg.delta)?;
        let c = family.c();
        let dt = cfg.dt;
        let [a, b] = cfg.interval;

        let tau_grid: Vec<f64> = cfg.tau_grid.iter().map(|t| snap_tau(*t, dt) as f64 * dt).collect();
        let lattice = lattice_of(a, b, dt);
        let mut all_taus = tau_grid.clone();
        all_taus.extend_from_slice(&lattice);
        let means: Vec<f64> = all_taus.iter().map(|t| theoretical_bias(&h, &g, c, *t)).collect();

        let tau_lo = all_taus.iter().cloned().fold(0.0, f64::min);
        let tau_hi = all_taus.iter().cloned().fold(0.0, f64::max);
        let grid = TimeGrid::covering(tau_lo, cfg.t_span - dt + tau_hi, dt)?;
        let sim = PairSimulator::new(&h, &g, grid)?;
        let mut warnings: Vec<String> = [dt_resolution_warning(&h, dt), dt_resolution_warning(&g, dt)]
            .into_iter()
            .flatten()
            .collect();
        warnings.dedup();
        Ok(Self {
            h,
            c,
            tau_grid,
            lattice,
            all_taus,
            means,
            sim,
            warnings,
        })
    }
}

fn replication_seed(cfg: &ExperimentConfig, r: usize) -> NoiseSeed {
    cfg.base_seed.with_stream(cfg.base_seed.stream_id.wrapping_add(r as u64))
}

/// The `(Y, X)` paths of replication `r`, as simulated by [`run_replications`].
pub fn replication_paths(cfg: &ExperimentConfig, r: usize) -> Result<(SampledPath, SampledPath)> {
    Setup::new(cfg)?.sim.simulate(replication_seed(cfg, r))
}

/// Runs `cfg.replications` replications on `workers` threads.
pub fn run_replications(cfg: &ExperimentConfig, workers: usize) -> Result<MonteCarloResult> {
    let Setup {
        h,
        c,
        tau_grid,
        lattice,
        all_taus,
        means,
        sim,
        warnings,
    } = Setup::new(cfg)?;
    let dt = cfg.dt;

    let window = lattice.len();
    let root_t = cfg.t_span.sqrt();
    let k_tau = tau_grid.len();
    let one = |r: usize| -> Result<Replication> {
        let (y, x) = sim.simulate(replication_seed(cfg, r))?;
        let h_hat = cross_correlogram(&y, &x, c, cfg.t_span, &all_taus)?;
        let z: Vec<f64> = h_hat.iter().zip(&means).map(|(v, m)| root_t * (v - m)).collect();
        let (y_abs, y_max) = y
            .values
            .chunks_exact(window)
            .map(|w| {
                w.iter()
                    .fold((0.0f64, f64::NEG_INFINITY), |(m, s), v| (m.max(v.abs()), s.max(*v)))
            })
            .unzip();
        Ok(Replication {
            z_tau: z[..k_tau].to_vec(),
            z_lattice: z[k_tau..].to_vec(),
            y_abs,
            y_max,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let reps: Vec<Result<Replication>> = pool.install(|| (0..cfg.replications).into_par_iter().map(one).collect());
    let mut z_samples = Vec::with_capacity(reps.len());
    let mut lattice_samples = Vec::with_capacity(reps.len());
    let mut y_abs = Vec::with_capacity(reps.len());
    let mut y_max = Vec::with_capacity(reps.len());
    for (index, rep) in reps.into_iter().enumerate() {
        let rep = rep.map_err(|e| Error::Replication {
            index,
            source: Box::new(e),
        })?;
        z_samples.push(rep.z_tau);
        lattice_samples.push(rep.z_lattice);
        y_abs.push(rep.y_abs);
        y_max.push(rep.y_max);
    }

    let columns: Vec<Vec<f64>> = (0..k_tau).map(|i| z_samples.iter().map(|r| r[i]).collect()).collect();
    let mut empirical_cov = vec![vec![0.0; k_tau]; k_tau];
    let mut cov_se = vec![vec![0.0; k_tau]; k_tau];
    for i in 0..k_tau {
        for j in i..k_tau {
            let (v, se) = covariance_jackknife(&columns[i], &columns[j]);
            empirical_cov[i][j] = v;
            empirical_cov[j][i] = v;
            cov_se[i][j] = se;
            cov_se[j][i] = se;
        }
    }
    let ensemble_stats = (0..k_tau)
        .map(|i| TauStats {
            tau: tau_grid[i],
            mean: mean(&columns[i]),
            variance: empirical_cov[i][i],
            variance_se: cov_se[i][i],
        })
        .collect();
    let ks_results = (0..k_tau)
        .map(|i| {
            let limit_variance = cov_limit(&h, tau_grid[i], tau_grid[i])?;
            Ok(TauKs {
                tau: tau_grid[i],
                limit_variance,
                ks: normality_test(&columns[i], limit_variance)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sups: Vec<f64> = lattice_samples
        .iter()
        .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();

    let mut result = MonteCarloResult {
        config: cfg.clone(),
        tau_grid,
        lattice,
        lattice_spacing: dt,
        z_samples,
        lattice_samples,
        ensemble_stats,
        empirical_cov,
        cov_se,
        ks_results,
        sup_tail: EmpiricalTail::from_samples(&sups)?,
        y_abs_tail: EmpiricalTail::from_groups(y_abs)?,
        y_onesided_tail: EmpiricalTail::from_groups(y_max)?,
        coverage: Vec::new(),
        moduli: Vec::new(),
        warnings,
    };
    if let Some(m) = &cfg.modulus {
        result.moduli = modulus_of_continuity(&result, &m.h_ladder, &m.delta_thresholds)?;
    }
    Ok(result)
}

/// Tails of `sup |Y|` and `sup Y` over windows of length `span` for the
/// stationary output `Y = H∗dW`. Each replication simulates a path of
/// length `path_length` and contributes one group of window suprema.
pub fn stationary_sup_tails(
    h: &Kernel,
    span: f64,
    dt: f64,
    path_length: f64,
    replications: usize,
    seed: NoiseSeed,
    workers: usize,
) -> Result<(EmpiricalTail, EmpiricalTail)> {
    if !(span >= 0.0 && path_length > span && dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= span < path_length and dt > 0, got span={span}, path_length={path_length}, dt={dt}"
        )));
    }
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be >= 1".into()));
    }
    let grid = TimeGrid::covering(0.0, path_length, dt)?;
    let sim = PairSimulator::new(h, h, grid)?;
    let window = snap_tau(span, dt) as usize + 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let reps: Vec<Result<(Vec<f64>, Vec<f64>)>> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|r| {
                let (y, _) = sim.simulate(seed.with_stream(seed.stream_id.wrapping_add(r as u64)))?;
                Ok(y.values
                    .chunks_exact(window)
                    .map(|w| w.iter().fold((0.0f64, f64::NEG_INFINITY), |(m, s), v| (m.max(v.abs()), s.max(*v))))
                    .unzip())
            })
            .collect()
    });
    let mut abs = Vec::with_capacity(replications);
    let mut one = Vec::with_capacity(replications);
    for (index, rep) in reps.into_iter().enumerate() {
        let (a, o) = rep.map_err(|e| Error::Replication {
            index,
            source: Box::new(e),
        })?;
        abs.push(a);
        one.push(o);
    }
    Ok((EmpiricalTail::from_groups(abs)?, EmpiricalTail::from_groups(one)?))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample covariance with its jackknife standard error.
fn covariance_jackknife(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let cov = sxy / (n - 1.0);
    if x.len() < 3 {
        return (cov, f64::NAN);
    }
    // leave-one-out: S_(-i) = S − n/(n−1) (x_i − x̄)(y_i − ȳ)
    let loo: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| (sxy - n / (n - 1.0) * (a - mx) * (b - my)) / (n - 2.0))
        .collect();
    let m = mean(&loo);
    let var = (n - 1.0) / n * loo.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    (cov, var.sqrt())
}

/// Asymptotic Kolmogorov survival `P{K > λ}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.0 {
        // small-λ form of the CDF converges fast here
        let mut cdf = 0.0;
        for k in 1..=KS_SERIES_TERMS {
            let m = (2 * k - 1) as f64;
            cdf += (-(m * std::f64::consts::PI).powi(2) / (8.0 * lambda * lambda)).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut s = 0.0;
        for k in 1..=KS_SERIES_TERMS {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against `N(0, variance0)`. The
/// p-value uses the asymptotic distribution with Stephens' finite-sample
/// scaling `(√n + 0.12 + 0.11/√n) D`. With `variance0 = 0` the test passes
/// iff every `|sample| ≤ DEGENERATE_THRESHOLD`.
pub fn normality_test(samples: &[f64], variance0: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if !(variance0 >= 0.0) || !variance0.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be finite and >= 0, got {variance0}")));
    }
    if variance0 == 0.0 {
        let top = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let pass = top <= DEGENERATE_THRESHOLD;
        return Ok(KsResult {
            statistic: top,
            p_value: if pass { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let dist = Normal::new(0.0, variance0.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = dist.cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0f64, f64::max);
    let root = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival((root + 0.12 + 0.11 / root) * d),
        degenerate: false,
    })
}

/// `M` exact draws of the limit `Z` on `tau_grid` through the symmetric
/// square root of the `C_∞` Gram matrix. Rows are draws.
pub fn sample_limit_z(h: &Kernel, tau_grid: &[f64], m: usize, seed: NoiseSeed) -> Result<Vec<Vec<f64>>> {
    if tau_grid.is_empty() || m == 0 {
        return Err(Error::InvalidInput("need a non-empty tau grid and M >= 1".into()));
    }
    let k = tau_grid.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = cov_limit(h, tau_grid[i], tau_grid[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let root = symmetric_root(gram)?;
    let mut rng = seed.rng();
    let mut xi = vec![0.0; k];
    Ok((0..m)
        .map(|_| {
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            (0..k)
                .map(|i| (0..k).map(|j| root[(i, j)] * xi[j]).sum())
                .collect()
        })
        .collect())
}

fn symmetric_root(gram: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(gram);
    if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
        if min < GRAM_EIGEN_FLOOR {
            return Err(Error::NumericalConsistency(format!(
                "Gram matrix has eigenvalue {min:e} below {GRAM_EIGEN_FLOOR:e}"
            )));
        }
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&sqrt) * v.transpose())
}

/// Compares bound reports with empirical tails. Pointwise reports use
/// `|Ẑ(τ)|` at `settings["tau"]`; sup reports use `sup_{[a,b]} |Ẑ|`.
pub fn ci_coverage(result: &MonteCarloResult, bounds: &[TailBoundReport]) -> Result<Vec<CoverageRow>> {
    let mut rows = Vec::new();
    for rep in bounds {
        let pointwise;
        let tail = match rep.method {
            BoundMethod::Theorem3Pointwise => {
                let tau = *rep
                    .settings
                    .get("tau")
                    .ok_or_else(|| Error::InvalidInput("pointwise report lacks settings.tau".into()))?;
                let i = result
                    .tau_index(tau)
                    .ok_or_else(|| Error::InvalidInput(format!("tau={tau} not in the experiment's tau grid")))?;
                let abs: Vec<f64> = result.z_samples.iter().map(|r| r[i].abs()).collect();
                pointwise = EmpiricalTail::from_samples(&abs)?;
                &pointwise
            }
            _ => &result.sup_tail,
        };
        for (x, bound) in rep.x_values.iter().zip(&rep.bound_values) {
            let empirical = tail.survival(*x);
            let se = tail.standard_error(*x);
            rows.push(CoverageRow {
                method: rep.method,
                x: *x,
                empirical,
                se,
                bound: *bound,
                valid: empirical <= bound + COVERAGE_SE_MULTIPLE * se,
            });
        }
    }
    Ok(rows)
}

/// Empirical `P{sup_{|τ₂−τ₁|<h} |Ẑ(τ₂) − Ẑ(τ₁)| > δ}` on the lattice for
/// every `(h, δ)`.
pub fn modulus_of_continuity(result: &MonteCarloResult, h_ladder: &[f64], delta_thresholds: &[f64]) -> Result<Vec<ModulusRow>> {
    let spacing = result.lattice_spacing;
    if let Some(h_min) = h_ladder.iter().cloned().reduce(f64::min) {
        if spacing > h_min / 4.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "lattice spacing {spacing} exceeds a quarter of the smallest h {h_min}"
            )));
        }
    }
    let mut rows = Vec::new();
    for &h in h_ladder {
        // largest lag k with k·spacing < h
        let max_lag = ((h / spacing) * (1.0 - 1e-12)).ceil() as usize - 1;
        let osc: Vec<f64> = result
            .lattice_samples
            .iter()
            .map(|z| {
                let mut m = 0.0f64;
                for lag in 1..=max_lag.min(z.len().saturating_sub(1)) {
                    for i in 0..z.len() - lag {
                        m = m.max((z[i + lag] - z[i]).abs());
                    }
                }
                m
            })
            .collect();
        let tail = EmpiricalTail::from_samples(&osc)?;
        for &delta in delta_thresholds {
            rows.push(ModulusRow {
                h,
                delta,
                probability: tail.survival(delta),
                se: tail.standard_error(delta),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::theorem3_report;
    use crate::kernel::{make_hilbert_sinc, make_sinc, sinc};
    use rand::Rng;

    fn normal_samples(n: usize, sd: f64, stream: u64) -> Vec<f64> {
        let mut rng = NoiseSeed::new(99, stream).rng();
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    }

    #[test]
    fn kolmogorov_series_matches_reference() {
        // scipy.special.kolmogorov
        assert!((kolmogorov_survival(1.0) - 0.269_999_671_677).abs() < 1e-10);
        assert!((kolmogorov_survival(0.5) - 0.963_945_243_665).abs() < 1e-10);
        assert!((kolmogorov_survival(1.36) - 0.049_485_876_755).abs() < 1e-10);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(5.0) < 1e-20);
    }

    #[test]
    fn ks_self_consistency() {
        let passed = (0..100)
            .filter(|s| normality_test(&normal_samples(500, 1.5, *s), 2.25).unwrap().p_value > 0.01)
            .count();
        assert!(passed >= 98, "{passed}");
        // wrong variance is detected
        let p = normality_test(&normal_samples(2000, 1.5, 7), 1.0).unwrap().p_value;
        assert!(p < 1e-6);
    }

    #[test]
    fn ks_degenerate_and_errors() {
        let r = normality_test(&[0.0; 20], 0.0).unwrap();
        assert!(r.degenerate && r.p_value == 1.0);
        assert_eq!(normality_test(&[0.0, 1.0], 0.0).unwrap().p_value, 0.0);
        assert!(normality_test(&[], 1.0).is_err());
    }

    #[test]
    fn jackknife_matches_sample_covariance() {
        let x = normal_samples(200, 1.0, 1);
        let y: Vec<f64> = x.iter().zip(normal_samples(200, 1.0, 2)).map(|(a, b)| a + b).collect();
        let (v, se) = covariance_jackknife(&x, &x);
        let m = mean(&x);
        let direct = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 199.0;
        assert!((v - direct).abs() < 1e-12);
        assert!(se > 0.0 && se < 0.3);
        let (c, _) = covariance_jackknife(&x, &y);
        assert!((c - direct).abs() < 0.3);
    }

    #[test]
    fn empirical_tail_basics() {
        let t = EmpiricalTail::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.survival(0.0), 1.0);
        assert_eq!(t.survival(2.0), 0.5);
        assert_eq!(t.survival(4.0), 0.0);
        let p: f64 = 0.5;
        assert!((t.standard_error(2.0) - (p * (1.0 - p) / 3.0).sqrt()).abs() < 1e-12);
        let g = EmpiricalTail::from_groups(vec![vec![1.0, 5.0], vec![2.0, 3.0], vec![]]).unwrap();
        assert_eq!(g.group_count(), 2);
        assert_eq!(g.survival(2.5), 0.5);
        let mut prev = 1.0;
        for x in g.default_grid() {
            let s = g.survival(x);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn limit_sampler_moments() {
        let draws = sample_limit_z(&make_hilbert_sinc(), &[0.0], 100, NoiseSeed::new(1, 0)).unwrap();
        assert!(draws.iter().all(|d| d[0].abs() < 1e-6));
        let taus = [0.0, 0.5];
        let draws = sample_limit_z(&make_sinc(), &taus, 10_000, NoiseSeed::new(2, 0)).unwrap();
        let a: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let b: Vec<f64> = draws.iter().map(|d| d[1]).collect();
        let (v, _) = covariance_jackknife(&a, &a);
        let (c, _) = covariance_jackknife(&a, &b);
        assert!((v / 2.0 - 1.0).abs() < 0.05, "{v}");
        let target = 2.0 * sinc(0.5);
        assert!((c / target - 1.0).abs() < 0.05, "{c} vs {target}");
    }

    #[test]
    fn rng_streams_differ() {
        let mut a = NoiseSeed::new(5, 0).rng();
        let mut b = NoiseSeed::new(5, 1).rng();
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    fn small_config(m: usize) -> ExperimentConfig {
        ExperimentConfig {
            h: KernelSpec::Triangular { delta: 1.0, c: 1.0 },
            g_family: FamilySpec::Triangular { c: 1.0 },
            t_span: 20.0,
            delta: 5.0,
            dt: 0.05,
            tau_grid: vec![0.0, 0.5],
            replications: m,
            base_seed: NoiseSeed::new(11, 0),
            interval: [0.0, 1.0],
            modulus: Some(ModulusConfig {
                h_ladder: vec![0.5, 0.25],
                delta_thresholds: vec![0.1, 100.0],
            }),
        }
    }

    #[test]
    fn replications_are_consistent_and_deterministic() {
        let r = run_replications(&small_config(2), 1).unwrap();
        for (i, s) in r.ensemble_stats.iter().enumerate() {
            let col: Vec<f64> = r.z_samples.iter().map(|z| z[i]).collect();
            let m = mean(&col);
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            assert!((s.variance - var).abs() < 1e-12);
            assert_eq!(s.variance, r.empirical_cov[i][i]);
        }
        // tau grid values coincide with lattice values at the same τ
        assert_eq!(r.z_samples[0][1], r.lattice_samples[0][10]);
        let a = run_replications(&small_config(6), 1).unwrap();
        let b = run_replications(&small_config(6), 3).unwrap();
        assert_eq!(a.z_samples, b.z_samples);
        assert_eq!(a.moduli, b.moduli);
        for m in &a.moduli {
            if m.delta == 100.0 {
                assert_eq!(m.probability, 0.0);
            }
        }
    }

    #[test]
    fn coverage_and_modulus_preconditions() {
        let r = run_replications(&small_config(4), 1).unwrap();
        assert!(modulus_of_continuity(&r, &[0.1], &[0.1]).is_err());
        let mut ones = theorem3_report(1.0, 0.5, &[0.5, 1.0]).unwrap();
        ones.bound_values = vec![1.0, 1.0];
        let rows = ci_coverage(&r, &[ones]).unwrap();
        assert!(rows.iter().all(|c| c.valid));
        let bad = theorem3_report(1.0, 0.3, &[1.0]).unwrap();
        assert!(ci_coverage(&r, &[bad]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = small_config(1);
        assert!(c.validate().is_err());
        c.replications = 2;
        c.tau_grid = vec![1.5];
        assert!(c.validate().is_err());
    }
}
