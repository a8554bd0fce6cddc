//! Covering numbers, metric entropy and entropy integrals on an interval.

use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernel::Kernel;
use crate::spectral::{rho_upper_constant, sigma, CovarianceModel};

/// Points on which translation-invariant profiles are tabulated.
pub const PROFILE_POINTS: usize = 4096;
/// Points per decade of ε in entropy integrals.
pub const EPS_POINTS_PER_DECADE: usize = 64;
/// Decades of ε resolved below the upper limit of an entropy integral.
pub const EPS_DECADES: usize = 10;
/// Slope margin of the divergence heuristic.
pub const DIVERGENCE_MARGIN: f64 = 0.1;
const BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudometricKind {
    UniformD,
    Sigma,
    SqrtSigma,
    RhoUpper,
    RhoExact,
    Custom,
}

#[derive(Debug)]
struct Profile {
    step: f64,
    values: Vec<f64>,
    running_max: Vec<f64>,
}

type ProfileFn = dyn Fn(f64) -> f64 + Send + Sync;
type DistFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

enum Distance {
    /// `dist(τ₁, τ₂) = p(|τ₂ − τ₁|)`.
    Invariant(Arc<ProfileFn>),
    General(Arc<DistFn>),
    /// Distances between fixed grid points, off-grid points snap to the
    /// nearest grid point.
    Grid { points: Vec<f64>, matrix: Vec<Vec<f64>> },
}

/// A pseudometric on ℝ with covering-number queries.
pub struct Pseudometric {
    kind: PseudometricKind,
    distance: Distance,
    profiles: Mutex<Vec<(u64, Arc<Profile>)>>,
}

impl std::fmt::Debug for Pseudometric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pseudometric")
            .field("kind", &self.kind)
            .field("translation_invariant", &self.translation_invariant())
            .finish()
    }
}

impl Pseudometric {
    fn with(kind: PseudometricKind, distance: Distance) -> Self {
        Self {
            kind,
            distance,
            profiles: Mutex::new(Vec::new()),
        }
    }

    /// `|τ₁ − τ₂|`.
    pub fn uniform_d() -> Self {
        Self::with(PseudometricKind::UniformD, Distance::Invariant(Arc::new(|u: f64| u)))
    }

    /// `σ(τ₂ − τ₁)`.
    pub fn sigma(h: &Kernel) -> Self {
        let h = h.clone();
        Self::with(
            PseudometricKind::Sigma,
            Distance::Invariant(Arc::new(move |u| sigma(&h, u))),
        )
    }

    /// `√σ(τ₂ − τ₁)`.
    pub fn sqrt_sigma(h: &Kernel) -> Self {
        let h = h.clone();
        Self::with(
            PseudometricKind::SqrtSigma,
            Distance::Invariant(Arc::new(move |u| sigma(&h, u).sqrt())),
        )
    }

    /// The uniform upper bound `κ √σ` on ρ.
    pub fn rho_upper(h: &Kernel, g_family_sup: f64, c: f64) -> Result<Self> {
        ensure_positive("c", c)?;
        if !(g_family_sup >= 0.0) || !g_family_sup.is_finite() {
            return Err(Error::InvalidParameter(format!("g_family_sup must be finite and >= 0, got {g_family_sup}")));
        }
        let kappa = rho_upper_constant(h, g_family_sup, c);
        let h = h.clone();
        Ok(Self::with(
            PseudometricKind::RhoUpper,
            Distance::Invariant(Arc::new(move |u| kappa * sigma(&h, u).sqrt())),
        ))
    }

    /// ρ at finite `(T, Δ)` on `grid`, from the covariance matrix of `Ẑ`.
    pub fn rho_exact(model: &CovarianceModel, t_span: f64, grid: &[f64]) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidInput("rho_exact needs a non-empty grid".into()));
        }
        let cov = model.finite_matrix(t_span, grid)?;
        let n = grid.len();
        let mut matrix = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                matrix[i][j] = (cov[i][i] + cov[j][j] - 2.0 * cov[i][j]).max(0.0).sqrt();
            }
        }
        Self::from_grid(PseudometricKind::RhoExact, grid, matrix)
    }

    /// Pseudometric given by a distance matrix over grid points.
    pub fn from_grid(kind: PseudometricKind, grid: &[f64], matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("distance matrix does not match grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("grid must be strictly ascending".into()));
        }
        Ok(Self::with(
            kind,
            Distance::Grid {
                points: grid.to_vec(),
                matrix,
            },
        ))
    }

    /// Translation-invariant pseudometric from its profile `p(|τ₂ − τ₁|)`.
    pub fn invariant(kind: PseudometricKind, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::with(kind, Distance::Invariant(Arc::new(profile)))
    }

    /// Arbitrary pseudometric; covering numbers use greedy covering.
    pub fn general(kind: PseudometricKind, dist: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::with(kind, Distance::General(Arc::new(dist)))
    }

    pub fn kind(&self) -> PseudometricKind {
        self.kind
    }

    pub fn translation_invariant(&self) -> bool {
        matches!(self.distance, Distance::Invariant(_))
    }

    pub fn dist(&self, tau1: f64, tau2: f64) -> f64 {
        match &self.distance {
            Distance::Invariant(p) => p((tau2 - tau1).abs()),
            Distance::General(d) => d(tau1, tau2),
            Distance::Grid { points, matrix } => matrix[nearest(points, tau1)][nearest(points, tau2)],
        }
    }

    fn profile(&self, span: f64) -> Option<Arc<Profile>> {
        let Distance::Invariant(p) = &self.distance else {
            return None;
        };
        let key = span.to_bits();
        let mut cache = self.profiles.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, prof)) = cache.iter().find(|(k, _)| *k == key) {
            return Some(prof.clone());
        }
        let step = span / (PROFILE_POINTS - 1) as f64;
        let values: Vec<f64> = (0..PROFILE_POINTS).map(|k| p(k as f64 * step)).collect();
        let mut running_max = Vec::with_capacity(values.len());
        let mut m = f64::NEG_INFINITY;
        for v in &values {
            m = m.max(*v);
            running_max.push(m);
        }
        let prof = Arc::new(Profile {
            step,
            values,
            running_max,
        });
        cache.push((key, prof.clone()));
        Some(prof)
    }

    /// Largest `δ ≤ span` with `sup_{0≤u≤δ} p(u) ≤ eps`, or `None` when it
    /// collapses to zero.
    fn half_width(&self, span: f64, eps: f64) -> Option<f64> {
        let Distance::Invariant(p) = &self.distance else {
            unreachable!()
        };
        let prof = self.profile(span).unwrap();
        let Some(k) = prof.running_max.iter().position(|m| *m > eps) else {
            return Some(span);
        };
        if k == 0 {
            return None;
        }
        let mut lo = (k - 1) as f64 * prof.step;
        let mut hi = k as f64 * prof.step;
        debug_assert!(prof.values[k - 1] <= eps);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if p(mid) <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo > 0.0).then_some(lo)
    }
}

fn nearest(points: &[f64], x: f64) -> usize {
    match points.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i == points.len() => i - 1,
        Err(i) => {
            if x - points[i - 1] <= points[i] - x {
                i - 1
            } else {
                i
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringMethod {
    /// `⌈(b − a)/(2δ(ε))⌉` from the distance profile.
    Profile,
    /// Greedy farthest-point covering of a grid; an upper bound.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub count: u64,
    pub method: CoveringMethod,
    /// Largest distance from a point to its nearest centre (greedy only).
    pub achieved_radius: Option<f64>,
}

/// Grid size for greedy covering of general pseudometrics.
pub const GREEDY_GRID: usize = 513;

/// Number of closed `eps`-balls covering `[a, b]`.
pub fn covering_number(p: &Pseudometric, a: f64, b: f64, eps: f64) -> Result<u64> {
    Ok(covering(p, a, b, eps)?.count)
}

pub fn covering(p: &Pseudometric, a: f64, b: f64, eps: f64) -> Result<Covering> {
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("need a < b, got [{a}, {b}]")));
    }
    ensure_positive("eps", eps)?;
    match &p.distance {
        Distance::Invariant(_) => {
            let span = b - a;
            let delta = p.half_width(span, eps).ok_or(Error::InfiniteMassiveness { eps })?;
            let count = (span / (2.0 * delta) - 1e-9).ceil().max(1.0) as u64;
            Ok(Covering {
                count,
                method: CoveringMethod::Profile,
                achieved_radius: None,
            })
        }
        Distance::General(_) => {
            let pts: Vec<f64> = (0..GREEDY_GRID)
                .map(|k| a + (b - a) * k as f64 / (GREEDY_GRID - 1) as f64)
                .collect();
            Ok(greedy(&pts, eps, |i, j| p.dist(pts[i], pts[j])))
        }
        Distance::Grid { points, matrix } => {
            let idx: Vec<usize> = (0..points.len())
                .filter(|&i| points[i] >= a - 1e-12 && points[i] <= b + 1e-12)
                .collect();
            if idx.is_empty() {
                return Err(Error::InvalidInput(format!("no grid points inside [{a}, {b}]")));
            }
            let sub: Vec<f64> = idx.iter().map(|&i| points[i]).collect();
            Ok(greedy(&sub, eps, |i, j| matrix[idx[i]][idx[j]]))
        }
    }
}

fn greedy(points: &[f64], eps: f64, dist: impl Fn(usize, usize) -> f64) -> Covering {
    let n = points.len();
    let mut nearest = vec![f64::INFINITY; n];
    let mut centre = 0;
    let mut count = 0u64;
    loop {
        count += 1;
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist(centre, i));
        }
        let (far, radius) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc });
        if radius <= eps {
            return Covering {
                count,
                method: CoveringMethod::Greedy,
                achieved_radius: Some(radius),
            };
        }
        centre = far;
    }
}

/// Covering numbers and entropies over an ε ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub interval: [f64; 2],
    pub epsilons: Vec<f64>,
    pub covering_numbers: Vec<u64>,
    pub entropies: Vec<f64>,
}

impl EntropyProfile {
    /// Evaluates the profile on `epsilons`, sorted into descending order.
    pub fn compute(p: &Pseudometric, a: f64, b: f64, epsilons: &[f64]) -> Result<Self> {
        let mut eps = epsilons.to_vec();
        eps.sort_by(|x, y| y.total_cmp(x));
        let mut counts = Vec::with_capacity(eps.len());
        for e in &eps {
            counts.push(covering_number(p, a, b, *e)?);
        }
        Ok(Self {
            interval: [a, b],
            entropies: counts.iter().map(|n| (*n as f64).ln()).collect(),
            epsilons: eps,
            covering_numbers: counts,
        })
    }

    /// Columns `eps,N,H`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,N,H")?;
        for i in 0..self.epsilons.len() {
            writeln!(w, "{},{},{}", self.epsilons[i], self.covering_numbers[i], self.entropies[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyIntegral {
    pub value: f64,
    /// Heuristic: fitted growth of the integrand over the two smallest
    /// resolved decades is at least `ε^{−1+margin}`, or massiveness is
    /// infinite somewhere.
    pub divergent: bool,
    /// Fitted `d ln f / d ln ε` over the two smallest decades.
    pub slope: f64,
    pub eps_min: f64,
}

/// `∫₀ᵘ f(ε) dε` for a nonincreasing, possibly singular `f`, by the
/// trapezoid rule on a log-spaced grid plus `ε_min f(ε_min)` for `[0, ε_min]`.
/// `f` returning `None` marks infinite massiveness.
pub(crate) fn log_grid_integral(upper: f64, f: impl Fn(f64) -> Result<Option<f64>>) -> Result<EntropyIntegral> {
    let n = EPS_POINTS_PER_DECADE * EPS_DECADES;
    let eps_min = upper * 10f64.powi(-(EPS_DECADES as i32));
    let grid: Vec<f64> = (0..=n)
        .map(|k| eps_min * 10f64.powf(EPS_DECADES as f64 * k as f64 / n as f64))
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for e in &grid {
        match f(*e)? {
            Some(v) => values.push(v),
            None => {
                return Ok(EntropyIntegral {
                    value: f64::INFINITY,
                    divergent: true,
                    slope: f64::NEG_INFINITY,
                    eps_min,
                })
            }
        }
    }
    let mut value = eps_min * values[0];
    for k in 0..n {
        value += 0.5 * (grid[k + 1] - grid[k]) * (values[k] + values[k + 1]);
    }
    let fit = 2 * EPS_POINTS_PER_DECADE;
    let slope = fitted_slope(&grid[..=fit], &values[..=fit]);
    Ok(EntropyIntegral {
        value,
        divergent: slope < -1.0 + DIVERGENCE_MARGIN,
        slope,
        eps_min,
    })
}

fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `∫₀ᵘ H^power([a, b], ε) dε` with `H = ln N`.
pub fn entropy_integral(p: &Pseudometric, a: f64, b: f64, u: f64, power: f64) -> Result<EntropyIntegral> {
    ensure_positive("u", u)?;
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::InvalidParameter(format!("power must be positive, got {power}")));
    }
    log_grid_integral(u, |eps| match covering_number(p, a, b, eps) {
        Ok(n) => Ok(Some((n as f64).ln().powf(power))),
        Err(Error::InfiniteMassiveness { .. }) => Ok(None),
        Err(e) => Err(e),
    })
}

/// `C_r = r^{−2}|ln(1 − r)| − r^{−1}`.
pub fn c_r(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("r must lie in (0, 1), got {r}")));
    }
    if r < 1e-3 {
        // Σ_{k≥2} r^{k−2}/k
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 2..40 {
            sum += term / k as f64;
            term *= r;
        }
        return Ok(sum);
    }
    Ok(-(-r).ln_1p() / (r * r) - 1.0 / r)
}

/// `ε_{T,Δ} = (C_r / ln 2)^{1/2} · sup ρ`.
pub fn epsilon_t_delta(r: f64, sup_rho: f64) -> Result<f64> {
    if !(sup_rho >= 0.0) || !sup_rho.is_finite() {
        return Err(Error::InvalidParameter(format!("sup_rho must be finite and >= 0, got {sup_rho}")));
    }
    Ok((c_r(r)? / std::f64::consts::LN_2).sqrt() * sup_rho)
}
