//! Tail bounds for `Ẑ` and its Gaussian limit `Z`.

use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::entropy::{c_r, covering_number, log_grid_integral, Pseudometric};
use crate::error::{ensure_positive, Error, Result};
use crate::kernel::{autocorrelation, Kernel};
use crate::spectral::{rho_upper_constant, sigma, CovarianceModel};

/// Argument tolerance of bisection and golden-section searches.
pub const SEARCH_TOL: f64 = 1e-10;
/// Iteration cap of bisection and golden-section searches.
pub const SEARCH_MAX_ITER: usize = 200;
/// Grid size for infima and suprema over `[a, b]` before polishing.
pub const INF_GRID: usize = 513;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Theorem3Pointwise,
    Theorem4Sup,
    Corollary1,
    Corollary2,
}

impl BoundMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMethod::Theorem3Pointwise => "theorem3_pointwise",
            BoundMethod::Theorem4Sup => "theorem4_sup",
            BoundMethod::Corollary1 => "corollary1",
            BoundMethod::Corollary2 => "corollary2",
        }
    }
}

/// Bound curve with the intermediates used to compute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub method: BoundMethod,
    #[serde(rename = "x")]
    pub x_values: Vec<f64>,
    /// `min(raw, 1)`.
    #[serde(rename = "bound")]
    pub bound_values: Vec<f64>,
    pub raw_bound_values: Vec<f64>,
    pub constants: BTreeMap<String, f64>,
    pub settings: BTreeMap<String, f64>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl TailBoundReport {
    fn new(method: BoundMethod, x_values: Vec<f64>, raw: Vec<f64>) -> Self {
        Self {
            method,
            bound_values: raw.iter().map(|v| v.min(1.0)).collect(),
            raw_bound_values: raw,
            x_values,
            constants: BTreeMap::new(),
            settings: BTreeMap::new(),
            degenerate: false,
            notes: Vec::new(),
        }
    }

    /// Bound at `x`, or `None` if `x` is not on the report grid.
    pub fn at(&self, x: f64) -> Option<f64> {
        self.x_values
            .iter()
            .position(|v| (*v - x).abs() <= 1e-12 * (1.0 + x.abs()))
            .map(|i| self.bound_values[i])
    }
}

/// One bound value with its flags and intermediates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub value: f64,
    pub degenerate: bool,
    pub constants: BTreeMap<String, f64>,
}

fn check_x_grid(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("x grid is empty".into()));
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("x grid must be ascending, finite and non-negative".into()));
    }
    Ok(())
}

/// `K(x) = (1 + √2 x)^{1/2} e^{−x/√2}`.
pub fn k_of_x(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("x must be >= 0, got {x}")));
    }
    Ok((1.0 + SQRT_2 * x).sqrt() * (-x / SQRT_2).exp())
}

/// Standard normal upper tail `P{ξ > z}`.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Bisection for `f(x) = 0` with `f(lo) > 0 > f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..SEARCH_MAX_ITER {
        if hi - lo <= SEARCH_TOL * (1.0 + lo.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimisation on `[lo, hi]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..SEARCH_MAX_ITER {
        if hi - lo <= SEARCH_TOL * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid search on `n` points followed by golden-section polishing around
/// the best point. Returns `(argmin, min)`.
pub(crate) fn grid_min(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    if a == b {
        return (a, f(a));
    }
    let n = n.max(3);
    let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let (i, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let lo = xs[i.saturating_sub(1)];
    let hi = xs[(i + 1).min(n - 1)];
    let (x, v) = golden_min(&f, lo, hi);
    if v < vals[i] {
        (x, v)
    } else {
        (xs[i], vals[i])
    }
}

/// Pointwise confidence half-width for `Ĥ(τ)` from the bound
/// `P{|Ẑ(τ)| ≥ y} ≤ 2K(y / (E Ẑ(τ)²)^{1/2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseCi {
    pub half_width: f64,
    /// Root of `2K(u) = 1 − confidence`.
    pub u: f64,
    /// Set when the variance is zero: the interval collapses and relative
    /// statements are meaningless.
    pub degenerate: bool,
}

pub fn pointwise_ci(var_hat: f64, t_span: f64, confidence: f64) -> Result<PointwiseCi> {
    ensure_positive("T", t_span)?;
    if !(var_hat >= 0.0) || !var_hat.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be finite and >= 0, got {var_hat}")));
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::InvalidParameter(format!("confidence must lie in [0, 1), got {confidence}")));
    }
    let target = 1.0 - confidence;
    let f = |u: f64| 2.0 * k_of_x(u).unwrap() - target;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NumericalConsistency("bisection failed to bracket 2K(u) = 1 - confidence".into()));
        }
    }
    let u = bisect(f, 0.0, hi);
    Ok(PointwiseCi {
        half_width: u * (var_hat / t_span).sqrt(),
        u,
        degenerate: var_hat == 0.0,
    })
}

/// `min(1, 2K(x/√var))` on an x grid for `|Ẑ(τ)|`, with `var = E Ẑ(τ)²`.
pub fn theorem3_report(var_hat: f64, tau: f64, x_values: &[f64]) -> Result<TailBoundReport> {
    check_x_grid(x_values)?;
    if !(var_hat >= 0.0) || !var_hat.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be finite and >= 0, got {var_hat}")));
    }
    let raw = x_values
        .iter()
        .map(|x| {
            if var_hat == 0.0 {
                if *x > 0.0 {
                    0.0
                } else {
                    2.0
                }
            } else {
                2.0 * k_of_x(x / var_hat.sqrt()).unwrap()
            }
        })
        .collect();
    let mut rep = TailBoundReport::new(BoundMethod::Theorem3Pointwise, x_values.to_vec(), raw);
    rep.constants.insert("var_Z".into(), var_hat);
    rep.settings.insert("tau".into(), tau);
    rep.degenerate = var_hat == 0.0;
    Ok(rep)
}

/// `b²(τ) = (H∗H)(2τ) − inf_{s∈[a,b]} (H∗H)(2s)` with the infimum cached.
#[derive(Debug, Clone)]
pub struct BFunction {
    h: Kernel,
    a: f64,
    b: f64,
    inf: f64,
    argmin: f64,
}

impl BFunction {
    pub fn new(h: &Kernel, a: f64, b: f64) -> Result<Self> {
        if !(b >= a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("need a <= b, got [{a}, {b}]")));
        }
        let (argmin, inf) = grid_min(|s| autocorrelation(h, 2.0 * s), a, b, INF_GRID);
        Ok(Self {
            h: h.clone(),
            a,
            b,
            inf,
            argmin,
        })
    }

    /// `inf_{[a,b]} (H∗H)(2τ)`.
    pub fn infimum(&self) -> f64 {
        self.inf
    }

    pub fn argmin(&self) -> f64 {
        self.argmin
    }

    pub fn squared(&self, tau: f64) -> Result<f64> {
        if tau < self.a - 1e-12 || tau > self.b + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "tau={tau} outside [{}, {}]",
                self.a, self.b
            )));
        }
        Ok((autocorrelation(&self.h, 2.0 * tau) - self.inf).max(0.0))
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        Ok(self.squared(tau)?.sqrt())
    }

    /// `sup_{[a,b]} b(τ)` on the refinement grid, polished.
    pub fn supremum(&self) -> f64 {
        let (_, neg) = grid_min(
            |s| -(autocorrelation(&self.h, 2.0 * s) - self.inf).max(0.0),
            self.a,
            self.b,
            INF_GRID,
        );
        (-neg).max(0.0).sqrt()
    }

    /// `B_{[a,b]} = 16‖H‖₂² − 16 inf_{[a,b]} (H∗H)(2τ)`.
    pub fn b_constant(&self) -> f64 {
        16.0 * self.h.l2_norm().powi(2) - 16.0 * self.inf
    }
}

/// `b²(τ)` for a single query.
pub fn b_squared(h: &Kernel, a: f64, b: f64, tau: f64) -> Result<f64> {
    BFunction::new(h, a, b)?.squared(tau)
}

/// `b(τ) = (b²(τ))^{1/2}`.
pub fn b_function(h: &Kernel, a: f64, b: f64, tau: f64) -> Result<f64> {
    BFunction::new(h, a, b)?.eval(tau)
}

/// Corollary 2: `2 P{sup|Y| > x/(2√2)} + 4 exp(−x²/B_{[a,b]})`.
pub fn corollary2_bound(h: &Kernel, a: f64, b: f64, x: f64, y_tail: &dyn Fn(f64) -> f64) -> Result<BoundEvaluation> {
    let bf = BFunction::new(h, a, b)?;
    corollary2_with(&bf, x, y_tail)
}

fn corollary2_with(bf: &BFunction, x: f64, y_tail: &dyn Fn(f64) -> f64) -> Result<BoundEvaluation> {
    ensure_positive("x", x)?;
    let big_b = bf.b_constant();
    let degenerate = big_b <= 0.0;
    let gaussian = if degenerate { 0.0 } else { 4.0 * (-x * x / big_b).exp() };
    let value = 2.0 * y_tail(x / (2.0 * SQRT_2)) + gaussian;
    let mut constants = BTreeMap::new();
    constants.insert("B_ab".into(), big_b);
    constants.insert("inf_HH".into(), bf.infimum());
    Ok(BoundEvaluation {
        value,
        degenerate,
        constants,
    })
}

pub fn corollary2_report(
    h: &Kernel,
    a: f64,
    b: f64,
    x_values: &[f64],
    y_tail: &dyn Fn(f64) -> f64,
) -> Result<TailBoundReport> {
    check_x_grid(x_values)?;
    let bf = BFunction::new(h, a, b)?;
    let evals: Vec<BoundEvaluation> = x_values
        .iter()
        .map(|x| corollary2_with(&bf, *x, y_tail))
        .collect::<Result<_>>()?;
    let mut rep = TailBoundReport::new(
        BoundMethod::Corollary2,
        x_values.to_vec(),
        evals.iter().map(|e| e.value).collect(),
    );
    rep.constants = evals[0].constants.clone();
    rep.degenerate = evals[0].degenerate;
    rep.settings.insert("a".into(), a);
    rep.settings.insert("b".into(), b);
    if rep.degenerate {
        rep.notes.push("B_ab <= 0: Gaussian term dropped".into());
    }
    Ok(rep)
}

/// Corollary 1: `2 P{sup Y > γx/√2} + 2 P{ξ·sup_b > (1 − γ)x}` with ξ
/// standard normal. `sup_b = None` computes `sup_{[a,b]} b` from `h`.
pub fn corollary1_bound(
    h: &Kernel,
    a: f64,
    b: f64,
    x: f64,
    gamma: f64,
    y_onesided_tail: &dyn Fn(f64) -> f64,
    sup_b: Option<f64>,
) -> Result<BoundEvaluation> {
    let sup_b = match sup_b {
        Some(s) => s,
        None => BFunction::new(h, a, b)?.supremum(),
    };
    corollary1_with(x, gamma, y_onesided_tail, sup_b)
}

fn corollary1_with(x: f64, gamma: f64, y_tail: &dyn Fn(f64) -> f64, sup_b: f64) -> Result<BoundEvaluation> {
    ensure_positive("x", x)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if !(sup_b >= 0.0) || !sup_b.is_finite() {
        return Err(Error::InvalidParameter(format!("sup_b must be finite and >= 0, got {sup_b}")));
    }
    let threshold = (1.0 - gamma) * x;
    let gaussian = if sup_b == 0.0 {
        0.0
    } else {
        2.0 * normal_tail(threshold / sup_b)
    };
    let value = 2.0 * y_tail(gamma * x / SQRT_2) + gaussian;
    let mut constants = BTreeMap::new();
    constants.insert("sup_b".into(), sup_b);
    constants.insert("gamma".into(), gamma);
    Ok(BoundEvaluation {
        value,
        degenerate: false,
        constants,
    })
}

pub fn corollary1_report(
    h: &Kernel,
    a: f64,
    b: f64,
    x_values: &[f64],
    gamma: f64,
    y_onesided_tail: &dyn Fn(f64) -> f64,
) -> Result<TailBoundReport> {
    check_x_grid(x_values)?;
    let sup_b = BFunction::new(h, a, b)?.supremum();
    let evals: Vec<BoundEvaluation> = x_values
        .iter()
        .map(|x| corollary1_with(*x, gamma, y_onesided_tail, sup_b))
        .collect::<Result<_>>()?;
    let mut rep = TailBoundReport::new(
        BoundMethod::Corollary1,
        x_values.to_vec(),
        evals.iter().map(|e| e.value).collect(),
    );
    rep.constants = evals[0].constants.clone();
    rep.settings.insert("a".into(), a);
    rep.settings.insert("b".into(), b);
    Ok(rep)
}

/// Which pseudometric supplies the covering numbers in Theorem 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RhoSurrogate {
    /// `κ√σ`, valid for every `(T, Δ)`.
    Upper,
    /// ρ at the given `(T, Δ)` on a uniform grid of `points` τ values.
    Exact { points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Theorem4Settings {
    /// `sup_Δ ‖g*_Δ‖_∞`; `None` uses `sup |g*|` of the model's kernel.
    pub g_family_sup: Option<f64>,
    pub surrogate: RhoSurrogate,
    /// τ grid size for `inf E Ẑ(τ)²` before polishing.
    pub variance_grid: usize,
    /// θ grid size for the infimum over Θ before polishing.
    pub theta_grid: usize,
}

impl Default for Theorem4Settings {
    fn default() -> Self {
        Self {
            g_family_sup: None,
            surrogate: RhoSurrogate::Upper,
            variance_grid: 11,
            theta_grid: 64,
        }
    }
}

/// Intermediates of Theorem 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Constants {
    pub c_r: f64,
    pub sup_rho: f64,
    pub eps_t_delta: f64,
    pub inf_var_z: f64,
    pub theta_star: f64,
    pub entropy_term: f64,
    pub a_t_delta: f64,
    pub g_family_sup: f64,
    /// Θ was empty and θ = 1/2 was used.
    pub degenerate: bool,
}

impl Theorem4Constants {
    pub fn bound(&self, x: f64) -> f64 {
        2.0 * (-x / self.a_t_delta).exp()
    }

    fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("C_r", self.c_r),
            ("sup_rho", self.sup_rho),
            ("eps_T_delta", self.eps_t_delta),
            ("inf_var_Z", self.inf_var_z),
            ("theta_star", self.theta_star),
            ("entropy_term", self.entropy_term),
            ("A_T_delta", self.a_t_delta),
            ("g_family_sup", self.g_family_sup),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// `sup_λ |g*(λ)|` on a grid spanning ten spectral scales.
pub fn transform_sup(g: &Kernel) -> f64 {
    let span = 10.0 * g.spectral_scale();
    let n = 4001;
    (0..n)
        .map(|k| g.ftf(-span + 2.0 * span * k as f64 / (n - 1) as f64).norm())
        .fold(g.ftf(0.0).norm(), f64::max)
}

/// Computes `A_{T,Δ}` and its intermediates.
///
/// ```text
/// A = (C_r/ln2)^{1/2} (inf_τ E Ẑ(τ)²)^{1/2}
///     + inf_{θ∈Θ} e²/(θ(1−θ)) ∫₀^{θε} ln(1 + N(ε'(ln2/C_r)^{1/2})) dε'
/// ```
///
/// with `Θ = {θ ∈ (0,1) : N(θε) > e² − 1}`. When Θ is empty, θ = 1/2 is
/// used and the result is flagged degenerate.
pub fn theorem4_constants(
    model: &CovarianceModel,
    t_span: f64,
    a: f64,
    b: f64,
    r: f64,
    settings: &Theorem4Settings,
) -> Result<Theorem4Constants> {
    ensure_positive("T", t_span)?;
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("need a < b, got [{a}, {b}]")));
    }
    let cr = c_r(r)?;
    let g = model
        .g
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("Theorem 4 needs the kernel g".into()))?;
    let g_sup = settings.g_family_sup.unwrap_or_else(|| transform_sup(g));

    let (metric, sup_rho) = match settings.surrogate {
        RhoSurrogate::Upper => {
            let kappa = rho_upper_constant(&model.h, g_sup, model.c);
            let (_, neg) = grid_min(|u| -sigma(&model.h, u), 0.0, b - a, INF_GRID);
            (Pseudometric::rho_upper(&model.h, g_sup, model.c)?, kappa * (-neg).max(0.0).sqrt())
        }
        RhoSurrogate::Exact { points } => {
            let n = points.max(2);
            let grid: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
            let m = Pseudometric::rho_exact(model, t_span, &grid)?;
            let mut sup: f64 = 0.0;
            for x in &grid {
                for y in &grid {
                    sup = sup.max(m.dist(*x, *y));
                }
            }
            (m, sup)
        }
    };
    let scale = (LN_2 / cr).sqrt();
    let eps = sup_rho / scale;

    let var_err = std::cell::RefCell::new(None);
    let (_, inf_var) = grid_min(
        |tau| match model.cov_finite(t_span, tau, tau) {
            Ok(v) => v,
            Err(e) => {
                var_err.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        },
        a,
        b,
        settings.variance_grid,
    );
    if let Some(e) = var_err.into_inner() {
        return Err(e);
    }
    let first = inf_var.max(0.0).sqrt() / scale;

    if eps == 0.0 {
        return Ok(Theorem4Constants {
            c_r: cr,
            sup_rho,
            eps_t_delta: 0.0,
            inf_var_z: inf_var,
            theta_star: 0.5,
            entropy_term: 0.0,
            a_t_delta: first,
            g_family_sup: g_sup,
            degenerate: true,
        });
    }

    // cumulative ∫₀^s ln(1 + N(ε' · scale)) dε' on a log grid over (0, ε]
    let log_n = |e: f64| -> Result<Option<f64>> {
        match covering_number(&metric, a, b, e * scale) {
            Ok(n) => Ok(Some((1.0 + n as f64).ln())),
            Err(Error::InfiniteMassiveness { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let whole = log_grid_integral(eps, log_n)?;
    if whole.divergent {
        return Err(Error::Divergent(format!(
            "entropy integral up to eps={eps} diverges (fitted slope {})",
            whole.slope
        )));
    }
    let cumulative = CumulativeIntegral::new(eps, whole.eps_min, &log_n)?;

    let massive = |theta: f64| -> Result<bool> {
        let n = covering_number(&metric, a, b, theta * eps)?;
        Ok(n as f64 > E * E - 1.0)
    };
    // Θ is an interval (0, θ_max) since N is nonincreasing in ε
    let theta_max = if !massive(1e-9)? {
        0.0
    } else if massive(1.0 - 1e-9)? {
        1.0
    } else {
        let mut lo = 1e-9;
        let mut hi = 1.0 - 1e-9;
        for _ in 0..SEARCH_MAX_ITER {
            if hi - lo <= SEARCH_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if massive(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let objective = |theta: f64| E * E / (theta * (1.0 - theta)) * cumulative.at(theta * eps);
    let degenerate = theta_max <= 0.0;
    let (theta_star, entropy_term) = if degenerate {
        (0.5, objective(0.5))
    } else {
        let hi = theta_max.min(1.0 - 1e-6);
        grid_min(objective, 1e-6_f64.min(hi), hi, settings.theta_grid)
    };
    Ok(Theorem4Constants {
        c_r: cr,
        sup_rho,
        eps_t_delta: eps,
        inf_var_z: inf_var,
        theta_star,
        entropy_term,
        a_t_delta: first + entropy_term,
        g_family_sup: g_sup,
        degenerate,
    })
}

/// Piecewise-linear cumulative integral of a tabulated integrand on a log
/// grid, with the constant extension on `[0, ε_min]`.
struct CumulativeIntegral {
    grid: Vec<f64>,
    cumulative: Vec<f64>,
    values: Vec<f64>,
}

impl CumulativeIntegral {
    fn new(upper: f64, eps_min: f64, f: &dyn Fn(f64) -> Result<Option<f64>>) -> Result<Self> {
        let decades = (upper / eps_min).log10();
        let n = (crate::entropy::EPS_POINTS_PER_DECADE as f64 * decades).round() as usize;
        let grid: Vec<f64> = (0..=n)
            .map(|k| eps_min * 10f64.powf(decades * k as f64 / n as f64))
            .collect();
        let mut values = Vec::with_capacity(grid.len());
        for e in &grid {
            values.push(f(*e)?.ok_or(Error::InfiniteMassiveness { eps: *e })?);
        }
        let mut cumulative = vec![eps_min * values[0]];
        for k in 0..n {
            let prev = cumulative[k];
            cumulative.push(prev + 0.5 * (grid[k + 1] - grid[k]) * (values[k] + values[k + 1]));
        }
        Ok(Self {
            grid,
            cumulative,
            values,
        })
    }

    fn at(&self, s: f64) -> f64 {
        if s <= self.grid[0] {
            return s * self.values[0];
        }
        let k = self.grid.partition_point(|g| *g <= s).min(self.grid.len() - 1);
        let (g0, g1) = (self.grid[k - 1], self.grid[k]);
        let w = ((s - g0) / (g1 - g0)).clamp(0.0, 1.0);
        let v = self.values[k - 1] + w * (self.values[k] - self.values[k - 1]);
        self.cumulative[k - 1] + 0.5 * (s - g0) * (self.values[k - 1] + v)
    }
}

/// Theorem 4: `P{sup_{[a,b]} |Ẑ| > x} ≤ 2 exp(−x / A_{T,Δ})`.
pub fn theorem4_bound(model: &CovarianceModel, t_span: f64, a: f64, b: f64, r: f64, x: f64) -> Result<BoundEvaluation> {
    ensure_positive("x", x)?;
    let k = theorem4_constants(model, t_span, a, b, r, &Theorem4Settings::default())?;
    Ok(BoundEvaluation {
        value: k.bound(x),
        degenerate: k.degenerate,
        constants: k.as_map(),
    })
}

pub fn theorem4_report(
    model: &CovarianceModel,
    t_span: f64,
    a: f64,
    b: f64,
    r: f64,
    x_values: &[f64],
    settings: &Theorem4Settings,
) -> Result<TailBoundReport> {
    check_x_grid(x_values)?;
    let k = theorem4_constants(model, t_span, a, b, r, settings)?;
    Ok(theorem4_report_from(&k, t_span, a, b, r, x_values))
}

/// Report for precomputed constants.
pub fn theorem4_report_from(k: &Theorem4Constants, t_span: f64, a: f64, b: f64, r: f64, x_values: &[f64]) -> TailBoundReport {
    let raw = x_values.iter().map(|x| k.bound(*x)).collect();
    let mut rep = TailBoundReport::new(BoundMethod::Theorem4Sup, x_values.to_vec(), raw);
    rep.constants = k.as_map();
    rep.degenerate = k.degenerate;
    for (key, v) in [("T", t_span), ("a", a), ("b", b), ("r", r)] {
        rep.settings.insert(key.into(), v);
    }
    if k.degenerate {
        rep.notes.push("Theta is empty; theta = 1/2 used".into());
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_hilbert_sinc, make_sinc, make_triangular};

    #[test]
    fn k_values() {
        assert_eq!(k_of_x(0.0).unwrap(), 1.0);
        assert!((k_of_x(1.0).unwrap() - 0.766_117_300_099).abs() < 1e-11);
        assert!((k_of_x(10.0).unwrap() - 3.304_972_377e-3).abs() < 1e-12);
        assert!(k_of_x(-1.0).is_err());
        let mut prev = k_of_x(1.0).unwrap();
        for k in 1..200 {
            let v = k_of_x(1.0 + 0.1 * k as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn pointwise_ci_values() {
        let ci = pointwise_ci(4.0, 100.0, 0.0).unwrap();
        assert!((ci.u - 1.903_980_134_635).abs() < 1e-8);
        assert!((ci.half_width - ci.u * 0.2).abs() < 1e-15);
        let ci = pointwise_ci(2.0, 500.0, 0.9).unwrap();
        assert!((ci.u - 5.806_738_303_576).abs() < 1e-8);
        let ci = pointwise_ci(0.0, 500.0, 0.9).unwrap();
        assert_eq!(ci.half_width, 0.0);
        assert!(ci.degenerate);
        assert!(pointwise_ci(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn b_function_sinc() {
        let h = make_sinc();
        let bf = BFunction::new(&h, 0.0, 1.0).unwrap();
        assert!((bf.infimum() + 0.217_233_628_211).abs() < 1e-9);
        assert!((2.0 * bf.argmin() - 1.430_296_653_124).abs() < 1e-6);
        assert!((bf.squared(0.0).unwrap() - 1.217_233_628_211).abs() < 1e-9);
        assert!(bf.squared(bf.argmin()).unwrap() < 1e-12);
        assert!((bf.b_constant() - 19.475_738_051_38).abs() < 1e-7);
        assert!(bf.squared(1.5).is_err());
        assert!((bf.supremum() - 1.217_233_628_211f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn b_function_triangular_support() {
        let h = make_triangular(1.0, 1.0).unwrap();
        assert!(b_squared(&h, 0.0, 2.0, 1.2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn corollary2_values() {
        let h = make_sinc();
        let none = |_: f64| 0.0;
        let v = corollary2_bound(&h, 0.0, 1.0, 10.0, &none).unwrap();
        assert!((v.value - 4.0 * (-100.0 / 19.475_738_051_38f64).exp()).abs() < 1e-9);
        assert!((v.constants["B_ab"] - 19.475_738_051_38).abs() < 1e-7);
        let far = corollary2_bound(&h, 0.0, 1.0, 200.0, &none).unwrap();
        assert!(far.value < 1e-100);
        let rep = corollary2_report(&h, 0.0, 1.0, &[1.0, 4.0, 8.0], &|_| 1.0).unwrap();
        assert_eq!(rep.bound_values, vec![1.0, 1.0, 1.0]);
        assert!(rep.raw_bound_values[0] > 2.0);
    }

    #[test]
    fn corollary2_hilbert_constant() {
        let h = make_hilbert_sinc();
        let bf = BFunction::new(&h, 0.0, 1.0).unwrap();
        assert!((bf.infimum() + 1.0).abs() < 1e-9);
        assert!((bf.b_constant() - 32.0).abs() < 1e-7);
    }

    #[test]
    fn corollary1_edge_cases() {
        let h = make_sinc();
        let zero = |_: f64| 0.0;
        let v = corollary1_bound(&h, 0.0, 1.0, 3.0, 1.0, &zero, Some(0.0)).unwrap();
        assert_eq!(v.value, 0.0);
        // with γ = 1 the Gaussian term is 2·P{ξ > 0} = 1
        let v = corollary1_bound(&h, 0.0, 1.0, 3.0, 1.0, &zero, Some(0.5)).unwrap();
        assert!((v.value - 1.0).abs() < 1e-15);
        let v = corollary1_bound(&h, 0.0, 1.0, 3.0, 0.0, &|u| if u <= 0.0 { 1.0 } else { 0.0 }, Some(0.5)).unwrap();
        assert!(v.value >= 2.0);
        let rep = corollary1_report(&h, 0.0, 1.0, &[2.0, 6.0], 0.5, &zero).unwrap();
        let sup_b = rep.constants["sup_b"];
        assert!((rep.raw_bound_values[1] - 2.0 * normal_tail(3.0 / sup_b)).abs() < 1e-12);
        assert!(corollary1_bound(&h, 0.0, 1.0, 3.0, 1.5, &zero, Some(0.5)).is_err());
    }

    #[test]
    fn golden_section_finds_minimum() {
        let (x, v) = golden_min(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
    }
}
