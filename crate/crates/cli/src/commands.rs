//! The five subcommands. Each parses its section of the config, writes its
//! outputs through an [`OutputSet`] and finishes with a manifest.

use std::path::PathBuf;

use irfcorr::bounds::{
    corollary1_report, corollary2_report, pointwise_ci, theorem3_report, theorem4_report, BoundMethod,
    TailBoundReport, Theorem4Settings,
};
use irfcorr::estimator::CorrelogramEstimate;
use irfcorr::kernel::{check_family_conditions, FamilySpec, KernelSpec};
use irfcorr::montecarlo::{
    ci_coverage, replication_paths, run_replications, stationary_sup_tails, EmpiricalTail, ExperimentConfig,
};
use irfcorr::signal::{
    dt_resolution_warning, required_pad, simulate_output, wiener_increments, NoiseSeed, PairSimulator,
    SampledPath, TimeGrid,
};
use irfcorr::spectral::CovarianceModel;
use serde::{Deserialize, Serialize};

use crate::config::EffectiveConfig;
use crate::manifest::OutputSet;
use crate::{CliError, Command};

/// Δ ladder used when a config does not give one.
pub const DEFAULT_DELTAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub workers: usize,
    pub emit_paths: bool,
}

pub fn dispatch(cmd: Command, cfg: &EffectiveConfig, ctx: &Context) -> Result<(), CliError> {
    match cmd {
        Command::CheckKernel => check_kernel(cfg, ctx),
        Command::Simulate => simulate(cfg, ctx),
        Command::Estimate => estimate(cfg, ctx),
        Command::Bounds => bounds(cfg, ctx),
        Command::Montecarlo => montecarlo(cfg, ctx),
    }
}

fn default_deltas() -> Vec<f64> {
    DEFAULT_DELTAS.to_vec()
}

fn finish(out: OutputSet, cfg: &EffectiveConfig, failure: Option<CliError>) -> Result<(), CliError> {
    let code = failure.as_ref().map_or(0, |e| e.code);
    out.finish(cfg, code)?;
    failure.map_or(Ok(()), Err)
}

fn write_path(out: &mut OutputSet, stem: &str, path: &SampledPath) -> Result<(), CliError> {
    out.write_with(&format!("{stem}.csv"), |w| path.write_csv(w))?;
    out.write_with(&format!("{stem}.bin"), |w| path.write_binary(w))
}

// check-kernel

#[derive(Debug, Deserialize)]
struct CheckKernelConfig {
    family: FamilySpec,
    #[serde(default = "default_deltas")]
    deltas: Vec<f64>,
    #[serde(default = "default_lambda_window")]
    lambda_window: f64,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn default_lambda_window() -> f64 {
    5.0
}

fn default_tol() -> f64 {
    1e-3
}

fn check_kernel(cfg: &EffectiveConfig, ctx: &Context) -> Result<(), CliError> {
    let c: CheckKernelConfig = cfg.parse()?;
    let family = c.family.build()?;
    let report = check_family_conditions(&family, &c.deltas, c.lambda_window, c.tol)?;
    let mut out = OutputSet::create(&ctx.out)?;
    out.write_json("condition_report.json", &report)?;
    let failure = (!report.all_passed()).then(|| {
        let failed: Vec<&str> = [
            ("square_integrable", report.square_integrable.passed),
            ("even", report.even.passed),
            ("bounded_transform", report.bounded_transform.passed),
            ("delta_like", report.delta_like.passed),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect();
        CliError::domain(format!("{}: failed {}", report.family, failed.join(", ")))
    });
    finish(out, cfg, failure)
}

// simulate

#[derive(Debug, Deserialize)]
struct SimulateConfig {
    g_family: FamilySpec,
    #[serde(default = "default_deltas")]
    deltas: Vec<f64>,
    #[serde(default)]
    h: Option<KernelSpec>,
    #[serde(default)]
    t_start: f64,
    dt: f64,
    n: usize,
    seed: NoiseSeed,
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    t_start: f64,
    dt: f64,
    n: usize,
    pad: usize,
    seed: NoiseSeed,
    files: Vec<String>,
    warnings: Vec<String>,
}

fn delta_stem(delta: f64) -> String {
    format!("x_delta_{delta}")
}

fn simulate(cfg: &EffectiveConfig, ctx: &Context) -> Result<(), CliError> {
    let c: SimulateConfig = cfg.parse()?;
    let grid = TimeGrid::new(c.t_start, c.dt, c.n)?;
    if c.deltas.is_empty() {
        return Err(CliError::usage("deltas must be non-empty"));
    }
    let family = c.g_family.build()?;
    let gs = c
        .deltas
        .iter()
        .map(|d| family.member(*d))
        .collect::<irfcorr::Result<Vec<_>>>()?;
    let h = c.h.as_ref().map(KernelSpec::build).transpose()?;

    // One increment array shared by every output, so the X_Δ are driven by
    // the same W.
    let pad = gs.iter().chain(h.as_ref()).map(|k| required_pad(k, c.dt)).max().unwrap_or(0);
    let inc = wiener_increments(&grid, pad, c.seed);
    let mut warnings = Vec::new();
    let mut out = OutputSet::create(&ctx.out)?;
    let mut files = Vec::new();
    for (d, g) in c.deltas.iter().zip(&gs) {
        warnings.extend(dt_resolution_warning(g, c.dt));
        let path = simulate_output(g, &inc, grid, pad)?;
        let stem = delta_stem(*d);
        write_path(&mut out, &stem, &path)?;
        files.push(stem);
    }
    if let Some(h) = &h {
        warnings.extend(dt_resolution_warning(h, c.dt));
        let path = simulate_output(h, &inc, grid, pad)?;
        write_path(&mut out, "y", &path)?;
        files.push("y".into());
    }
    out.write_json(
        "simulate.json",
        &SimulateSummary {
            t_start: c.t_start,
            dt: c.dt,
            n: c.n,
            pad,
            seed: c.seed,
            files,
            warnings,
        },
    )?;
    finish(out, cfg, None)
}

// estimate

#[derive(Debug, Deserialize)]
struct EstimateConfig {
    h: KernelSpec,
    g_family: FamilySpec,
    delta: f64,
    #[serde(rename = "T")]
    t_span: f64,
    dt: f64,
    tau_grid: Vec<f64>,
    seed: NoiseSeed,
    /// Simulate on `[min(0, τ_min), path_span]` instead of the minimal span.
    #[serde(default)]
    path_span: Option<f64>,
}

fn estimate(cfg: &EffectiveConfig, ctx: &Context) -> Result<(), CliError> {
    let c: EstimateConfig = cfg.parse()?;
    if c.tau_grid.is_empty() {
        return Err(CliError::usage("tau_grid must be non-empty"));
    }
    let h = c.h.build()?;
    let family = c.g_family.build()?;
    let g = family.member(c.delta)?;
    let tau_lo = c.tau_grid.iter().cloned().fold(0.0, f64::min);
    let tau_hi = c.tau_grid.iter().cloned().fold(0.0, f64::max);
    let hi = c.path_span.unwrap_or(c.t_span - c.dt + tau_hi);
    let grid = TimeGrid::covering(tau_lo, hi, c.dt)?;
    let (y, x) = PairSimulator::new(&h, &g, grid)?.simulate(c.seed)?;
    let est = CorrelogramEstimate::from_paths(&y, &x, &h, &g, family.c(), c.delta, c.t_span, &c.tau_grid, Some(c.seed))?;

    let mut out = OutputSet::create(&ctx.out)?;
    out.write_with("estimate.csv", |w| est.write_csv(w))?;
    out.write_json("estimate.json", &est)?;
    if ctx.emit_paths {
        write_path(&mut out, "y", &y)?;
        write_path(&mut out, "x", &x)?;
    }
    finish(out, cfg, None)
}

// bounds

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
enum YTailSpec {
    /// Empirical tails of the stationary output, simulated.
    MonteCarlo {
        replications: usize,
        path_length: f64,
        dt: f64,
        seed: NoiseSeed,
    },
    /// `P ≤ 1`.
    Trivial,
}

#[derive(Debug, Deserialize)]
struct BoundsConfig {
    h: KernelSpec,
    g_family: FamilySpec,
    delta: f64,
    #[serde(rename = "T")]
    t_span: f64,
    interval: [f64; 2],
    x_grid: Vec<f64>,
    #[serde(default = "all_methods")]
    methods: Vec<BoundMethod>,
    /// τ of the pointwise bound; defaults to the left end of `interval`.
    #[serde(default)]
    tau: Option<f64>,
    #[serde(default = "default_r")]
    r: f64,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default)]
    y_tail: Option<YTailSpec>,
    #[serde(default)]
    theorem4: Theorem4Settings,
}

fn all_methods() -> Vec<BoundMethod> {
    vec![
        BoundMethod::Theorem3Pointwise,
        BoundMethod::Theorem4Sup,
        BoundMethod::Corollary1,
        BoundMethod::Corollary2,
    ]
}

fn default_r() -> f64 {
    0.5
}

fn default_gamma() -> f64 {
    0.5
}

#[derive(Debug, Serialize)]
struct BoundFailure {
    method: BoundMethod,
    error: String,
}

fn bounds(cfg: &EffectiveConfig, ctx: &Context) -> Result<(), CliError> {
    let c: BoundsConfig = cfg.parse()?;
    if c.methods.is_empty() {
        return Err(CliError::usage("methods must be non-empty"));
    }
    let [a, b] = c.interval;
    let needs_y = c
        .methods
        .iter()
        .any(|m| matches!(m, BoundMethod::Corollary1 | BoundMethod::Corollary2));
    let y_spec = match (needs_y, c.y_tail) {
        (true, None) => return Err(CliError::usage("corollary bounds need a y_tail section")),
        (_, spec) => spec,
    };
    let h = c.h.build()?;
    let family = c.g_family.build()?;
    let g = family.member(c.delta)?;
    let model = CovarianceModel::new(h.clone(), Some(g), family.c())?;

    let y_tails: Option<(EmpiricalTail, EmpiricalTail)> = match y_spec {
        Some(YTailSpec::MonteCarlo {
            replications,
            path_length,
            dt,
            seed,
        }) if needs_y => Some(stationary_sup_tails(&h, b - a, dt, path_length, replications, seed, ctx.workers)?),
        _ => None,
    };
    let abs_tail = |x: f64| y_tails.as_ref().map_or(1.0, |(t, _)| t.survival(x));
    let one_tail = |x: f64| y_tails.as_ref().map_or(1.0, |(_, t)| t.survival(x));

    let mut out = OutputSet::create(&ctx.out)?;
    let mut problems = Vec::new();
    for method in &c.methods {
        let report: irfcorr::Result<TailBoundReport> = match method {
            BoundMethod::Theorem3Pointwise => {
                let tau = c.tau.unwrap_or(a);
                model
                    .cov_finite(c.t_span, tau, tau)
                    .and_then(|var| theorem3_report(var, tau, &c.x_grid))
            }
            BoundMethod::Theorem4Sup => theorem4_report(&model, c.t_span, a, b, c.r, &c.x_grid, &c.theorem4),
            BoundMethod::Corollary1 => corollary1_report(&h, a, b, &c.x_grid, c.gamma, &one_tail),
            BoundMethod::Corollary2 => corollary2_report(&h, a, b, &c.x_grid, &abs_tail),
        };
        let name = method.as_str();
        match report {
            Ok(mut rep) => {
                if matches!(method, BoundMethod::Corollary1 | BoundMethod::Corollary2) {
                    let source = match (&y_tails, y_spec) {
                        (Some((t, _)), _) => format!("Y tail: {} window suprema in {} groups", t.len(), t.group_count()),
                        _ => "Y tail: trivial bound 1".to_string(),
                    };
                    rep.notes.push(source);
                }
                if rep.degenerate {
                    problems.push(format!("{name}: degenerate ({})", rep.notes.join("; ")));
                }
                out.write_json(&format!("bounds_{name}.json"), &rep)?;
            }
            Err(e) => {
                let err = CliError::from(e.clone());
                if err.code == 2 {
                    return Err(err);
                }
                problems.push(format!("{name}: {e}"));
                out.write_json(
                    &format!("bounds_{name}.error.json"),
                    &BoundFailure {
                        method: *method,
                        error: e.to_string(),
                    },
                )?;
            }
        }
    }
    let failure = (!problems.is_empty()).then(|| CliError::domain(problems.join("\n")));
    finish(out, cfg, failure)
}

// montecarlo

#[derive(Debug, Deserialize)]
struct MonteCarloConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    /// Adds `u·(E Ẑ(τ)²)^{1/2}` with `2K(u) = 1 − confidence` to each
    /// pointwise coverage grid.
    #[serde(default)]
    pointwise_confidence: Option<f64>,
    #[serde(default = "default_coverage_x")]
    coverage_x: Vec<f64>,
}

fn default_coverage_x() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0]
}

fn montecarlo(cfg: &EffectiveConfig, ctx: &Context) -> Result<(), CliError> {
    let c: MonteCarloConfig = cfg.parse()?;
    let exp = &c.experiment;
    exp.validate()?;
    let mut result = run_replications(exp, ctx.workers)?;

    let family = exp.g_family.build()?;
    let model = CovarianceModel::new(exp.h.build()?, Some(family.member(exp.delta)?), family.c())?;
    let mut reports = Vec::new();
    for &tau in &result.tau_grid {
        let var = model.cov_finite(exp.t_span, tau, tau)?;
        let mut xs = c.coverage_x.clone();
        if let Some(conf) = c.pointwise_confidence {
            // The CI is stated for Ĥ; scaling by √T gives the |Ẑ| threshold.
            let ci = pointwise_ci(var, exp.t_span, conf)?;
            xs.push(ci.half_width * exp.t_span.sqrt());
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        reports.push(theorem3_report(var, tau, &xs)?);
    }
    result.coverage = ci_coverage(&result, &reports)?;

    let mut out = OutputSet::create(&ctx.out)?;
    out.write_json("summary.json", &result.summary())?;
    out.write_with("stats.csv", |w| result.write_stats_csv(w))?;
    out.write_with("cov.csv", |w| result.write_cov_csv(w))?;
    out.write_with("sup_tail.csv", |w| result.sup_tail.write_csv(&result.sup_tail.default_grid(), w))?;
    out.write_with("y_sup_tail.csv", |w| {
        result.y_abs_tail.write_csv(&result.y_abs_tail.default_grid(), w)
    })?;
    out.write_with("y_onesided_tail.csv", |w| {
        result.y_onesided_tail.write_csv(&result.y_onesided_tail.default_grid(), w)
    })?;
    out.write_with("coverage.csv", |w| result.write_coverage_csv(w))?;
    if exp.modulus.is_some() {
        out.write_with("moduli.csv", |w| result.write_moduli_csv(w))?;
    }
    if ctx.emit_paths {
        out.write_with("lattice_z.csv", |w| result.write_lattice_csv(w))?;
        let (y, x) = replication_paths(exp, 0)?;
        write_path(&mut out, "y_rep0", &y)?;
        write_path(&mut out, "x_rep0", &x)?;
    }
    finish(out, cfg, None)
}
