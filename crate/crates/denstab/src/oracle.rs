//! Ground-truth quantities for analytic density models: level-set mass under
//! the population measure, content-to-level inversion, band probabilities,
//! and Monte Carlo estimates of pointwise inclusion probabilities and risk
//! curves.

use crate::error::{check_alpha, check_bandwidth, check_lambda, Error, Result};
use crate::kde::{DensityModel, EmpiricalKde, SmoothedOracle};
use crate::kernel::KernelSpec;
use crate::levelset::{self, Integrator, LevelSetQuery};
use crate::mixture::GaussianMixture;
use crate::points::PointSet;
use crate::rng::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Width at which the level bisection in [`true_lambda_alpha`] stops.
pub const LAMBDA_BISECTION_TOL: f64 = 1e-9;
/// Scan intervals used to bracket level crossings in one dimension.
const MASS_SCAN_INTERVALS: usize = 4096;
/// Bisection refinements per bracketed crossing.
const ROOT_REFINE_ITERS: usize = 48;
/// Cells per axis for the two-dimensional mass grid.
const MASS_GRID_2D: usize = 1500;

/// Mass, under the model's population measure, of the region where the
/// model's density strictly exceeds `lambda`. Levels at or below zero cover
/// everything and return 1. Analytic models only (mixture or smoothed
/// mixture); the smoothed case finds the region from the smoothed density
/// but measures it with the base distribution.
pub fn mass_above(model: &DensityModel, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::invalid("lambda", "level must be finite"));
    }
    if lambda <= 0.0 {
        return Ok(1.0);
    }
    match model.dim() {
        1 => {
            let scan = Scan1d::build(model)?;
            mass_above_scanned(model, &scan, lambda)
        }
        2 => {
            let cache = GridMass2d::build(model)?;
            Ok(cache.mass_above(lambda))
        }
        d => Err(Error::invalid(
            "model",
            format!("mass computations support d <= 2, got {d}"),
        )),
    }
}

/// The largest level whose super-level region holds population mass at
/// least alpha: bisection on the level, bracketed between zero and just
/// above the density maximum.
pub fn true_lambda_alpha(model: &DensityModel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    match model.dim() {
        1 => {
            let scan = Scan1d::build(model)?;
            let top = scan.vals.iter().cloned().fold(0.0, f64::max);
            let mut hi = top * 1.000001 + 1e-300;
            let mut tries = 0;
            while mass_above_scanned(model, &scan, hi)? >= alpha {
                hi *= 2.0;
                tries += 1;
                if tries > 60 {
                    return Err(Error::numerical(
                        "true_lambda_alpha",
                        "bisection bracket never empties the level set",
                    ));
                }
            }
            let mut lo = 0.0;
            while hi - lo > LAMBDA_BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if mass_above_scanned(model, &scan, mid)? >= alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        2 => {
            let cache = GridMass2d::build(model)?;
            let top = cache.top();
            let mut hi = top * 1.000001 + 1e-300;
            if cache.mass_above(hi) >= alpha {
                return Err(Error::numerical(
                    "true_lambda_alpha",
                    "bisection bracket never empties the level set",
                ));
            }
            let mut lo = 0.0;
            while hi - lo > LAMBDA_BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if cache.mass_above(mid) >= alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        d => Err(Error::invalid(
            "model",
            format!("mass computations support d <= 2, got {d}"),
        )),
    }
}

/// Population probability of the band {u : |p_h(u) - lambda| < epsilon}
/// where p_h is the base density smoothed at bandwidth h (h = 0 gives the
/// base density itself). One-dimensional bases only.
pub fn r_band_probability(
    base: &GaussianMixture,
    kernel: &KernelSpec,
    h: f64,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "band half-width must be positive and finite"));
    }
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", "bandwidth must be nonnegative and finite"));
    }
    let model = if h == 0.0 {
        DensityModel::Oracle(base.clone())
    } else {
        DensityModel::Smoothed(SmoothedOracle::new(base.clone(), kernel.clone(), h)?)
    };
    if model.dim() != 1 {
        return Err(Error::invalid("base", "band probabilities support d = 1 only"));
    }
    let scan = Scan1d::build(&model)?;
    let outer = if lambda - epsilon <= 0.0 {
        1.0
    } else {
        mass_above_scanned(&model, &scan, lambda - epsilon)?
    };
    let inner = mass_above_scanned(&model, &scan, lambda + epsilon)?;
    Ok(outer - inner)
}

/// Density values of a model on a fixed scan grid; built once so repeated
/// level queries (bisection) reuse the expensive evaluations.
struct Scan1d {
    xs: Vec<f64>,
    vals: Vec<f64>,
}

impl Scan1d {
    fn build(model: &DensityModel) -> Result<Scan1d> {
        let (lo, hi) = levelset::model_domain(model)?;
        let (lo, hi) = (lo[0], hi[0]);
        let n = MASS_SCAN_INTERVALS;
        let mut xs = Vec::with_capacity(n + 1);
        let mut vals = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            xs.push(x);
            vals.push(model.density(&[x])?);
        }
        Ok(Scan1d { xs, vals })
    }
}

/// Mass of {density > lambda} for a positive level: bracket each level
/// crossing on the scan grid, refine it by bisection, then sum exact base
/// CDF increments over the sub-intervals that lie above the level.
fn mass_above_scanned(model: &DensityModel, scan: &Scan1d, lambda: f64) -> Result<f64> {
    let base_cdf = |x: f64| -> f64 {
        match model {
            DensityModel::Oracle(m) => m.cdf_1d(x),
            DensityModel::Smoothed(s) => s.base().cdf_1d(x),
            _ => unreachable!("scan built only for analytic models"),
        }
    };
    let n = scan.xs.len() - 1;
    let mut cuts: Vec<f64> = Vec::new();
    for i in 0..n {
        let ga = scan.vals[i] - lambda;
        let gb = scan.vals[i + 1] - lambda;
        if ga == 0.0 {
            cuts.push(scan.xs[i]);
        } else if ga * gb < 0.0 {
            let mut a = scan.xs[i];
            let mut b = scan.xs[i + 1];
            let mut fa = ga;
            for _ in 0..ROOT_REFINE_ITERS {
                let mid = 0.5 * (a + b);
                let fm = model.density(&[mid])? - lambda;
                if fa * fm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            cuts.push(0.5 * (a + b));
        }
    }
    if scan.vals[n] == lambda {
        cuts.push(scan.xs[n]);
    }
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(scan.xs[0]);
    bounds.extend(cuts);
    bounds.push(scan.xs[n]);
    let mut mass = 0.0;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        if model.density(&[0.5 * (a + b)])? > lambda {
            mass += base_cdf(b) - base_cdf(a);
        }
    }
    Ok(mass)
}

/// Midpoint-grid masses for a two-dimensional analytic model, sorted by
/// density so level queries reduce to a prefix-sum lookup.
struct GridMass2d {
    /// Cell densities sorted descending.
    sorted: Vec<f64>,
    /// prefix[k] = mass of the k densest cells.
    prefix: Vec<f64>,
}

impl GridMass2d {
    fn build(model: &DensityModel) -> Result<GridMass2d> {
        if !matches!(model, DensityModel::Oracle(_) | DensityModel::Smoothed(_)) {
            return Err(Error::invalid("model", "mass computations need an analytic model"));
        }
        if matches!(model, DensityModel::Smoothed(_)) {
            return Err(Error::invalid(
                "model",
                "two-dimensional smoothed masses are not supported; smooth the mixture in closed form instead",
            ));
        }
        let (lo, hi) = levelset::model_domain(model)?;
        let n = MASS_GRID_2D;
        let (cx, cy) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
        let cell = cx * cy;
        let mut weighted: Vec<f64> = Vec::with_capacity(n * n);
        for i in 0..n {
            let x = lo[0] + (i as f64 + 0.5) * cx;
            for j in 0..n {
                let y = lo[1] + (j as f64 + 0.5) * cy;
                weighted.push(model.density(&[x, y])?);
            }
        }
        weighted.sort_by(|a, b| b.partial_cmp(a).expect("densities are finite"));
        let mut prefix = Vec::with_capacity(weighted.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in &weighted {
            acc += v * cell;
            prefix.push(acc);
        }
        Ok(GridMass2d { sorted: weighted, prefix })
    }

    fn top(&self) -> f64 {
        self.sorted.first().copied().unwrap_or(0.0)
    }

    fn mass_above(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 1.0;
        }
        let k = self.sorted.partition_point(|&v| v > lambda);
        self.prefix[k]
    }
}

/// Largest absolute slope of the mixture density on a fine grid; the
/// Lipschitz constant used in bias bounds.
pub fn max_abs_density_deriv_1d(m: &GaussianMixture, grid_n: usize) -> f64 {
    let (lo, hi) = m.bounds(9.0);
    let (lo, hi) = (lo[0], hi[0]);
    let mut best = 0.0f64;
    for i in 0..grid_n {
        let x = lo + (hi - lo) * i as f64 / (grid_n - 1) as f64;
        best = best.max(m.density_deriv_1d(x).abs());
    }
    best
}

/// Pointwise inclusion probabilities pi_h(u) = P(fitted density at u exceeds
/// lambda) estimated over independent replications, with binomial errors.
#[derive(Clone, Debug)]
pub struct PiEstimate {
    pub probs: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub reps: usize,
}

pub fn pi_h_mc(
    base: &GaussianMixture,
    kernel: &KernelSpec,
    h: f64,
    lambda: f64,
    u_grid: &PointSet,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<PiEstimate> {
    check_bandwidth(h)?;
    check_lambda(lambda)?;
    if kernel.dim != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: kernel.dim });
    }
    if !u_grid.is_empty() && u_grid.dim() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: u_grid.dim() });
    }
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample point"));
    }
    if reps < 100 {
        return Err(Error::invalid("reps", "inclusion probabilities need at least 100 replications"));
    }
    let rows: Result<Vec<Vec<u8>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = Rng::stream(seed, r as u64);
            let sample = base.sample_n(n, &mut rng);
            let kde = EmpiricalKde::fit(sample, kernel.clone(), h)?;
            Ok(u_grid.iter().map(|u| u8::from(kde.density(u) > lambda)).collect())
        })
        .collect();
    let rows = rows?;
    let mut counts = vec![0u64; u_grid.len()];
    for row in &rows {
        for (c, &b) in counts.iter_mut().zip(row) {
            *c += u64::from(b);
        }
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / reps as f64).collect();
    let std_errors = probs.iter().map(|&p| (p * (1.0 - p) / reps as f64).sqrt()).collect();
    Ok(PiEstimate { probs, std_errors, reps })
}

/// Mean symmetric-difference loss per bandwidth over fresh samples, with
/// standard errors and the empirical argmin. The same sample is reused
/// across the bandwidth grid within a replication (common random numbers).
#[derive(Clone, Debug, Serialize)]
pub struct RiskCurve {
    pub h_grid: Vec<f64>,
    pub mean_loss: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub argmin: usize,
}

pub fn risk_curve_mc(
    base: &GaussianMixture,
    kernel: &KernelSpec,
    query: &LevelSetQuery,
    h_grid: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<RiskCurve> {
    if h_grid.is_empty() {
        return Err(Error::invalid("h_grid", "bandwidth grid is empty"));
    }
    for &h in h_grid {
        check_bandwidth(h)?;
    }
    if kernel.dim != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: kernel.dim });
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least two sample points"));
    }
    if reps < 50 {
        return Err(Error::invalid("reps", "risk curves need at least 50 replications"));
    }
    let truth = DensityModel::Oracle(base.clone());
    let true_lambda = match query {
        LevelSetQuery::ByLevel(l) => {
            check_lambda(*l)?;
            *l
        }
        LevelSetQuery::ByContent(a) => true_lambda_alpha(&truth, *a)?,
    };
    let resolved = LevelSetQuery::ByLevel(true_lambda);
    let integrator = Integrator::default_for_dim(base.dim());
    let rows: Result<Vec<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = Rng::stream(seed, r as u64);
            let sample = base.sample_n(n, &mut rng);
            let mut row = Vec::with_capacity(h_grid.len());
            for &h in h_grid {
                let kde = EmpiricalKde::fit(sample.clone(), kernel.clone(), h)?;
                let threshold = match query {
                    LevelSetQuery::ByLevel(l) => *l,
                    LevelSetQuery::ByContent(a) => levelset::estimate_lambda_alpha(&kde, *a)?,
                };
                let est = DensityModel::Empirical(kde);
                let loss = levelset::symmetric_difference_loss(
                    &truth,
                    &est,
                    threshold,
                    &resolved,
                    &integrator,
                )?;
                row.push(loss.value);
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;
    let k = h_grid.len();
    let mut mean_loss = vec![0.0; k];
    for row in &rows {
        for (m, &v) in mean_loss.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean_loss {
        *m /= reps as f64;
    }
    let mut std_errors = vec![0.0; k];
    for row in &rows {
        for (s, (&v, &m)) in std_errors.iter_mut().zip(row.iter().zip(&mean_loss)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std_errors {
        *s = (*s / (reps as f64 * (reps - 1) as f64)).sqrt();
    }
    let argmin = mean_loss
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("losses are finite"))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    Ok(RiskCurve { h_grid: h_grid.to_vec(), mean_loss, std_errors, argmin })
}

/// A Monte Carlo value with its standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ValueSe {
    pub value: f64,
    pub std_error: f64,
}

/// Bundle of ground-truth quantities for one (level or content, h, epsilon)
/// configuration; serialized into validation reports.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TheoryProbe {
    pub h: f64,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda_alpha: Option<f64>,
    pub r_h_eps: Option<f64>,
    pub pi_h: Option<Vec<f64>>,
    pub xi_mc: Option<ValueSe>,
    pub loss_mc: Option<ValueSe>,
}
