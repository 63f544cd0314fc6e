//! Split-based instability statistics for level-set clustering.
//!
//! Everything here consumes one parent sample together with a three-way
//! split of its indices: two halves X and Y that each get their own density
//! estimate, and a holdout Z on which the two estimates are compared. The
//! fixed-level instability is the fraction of holdout points claimed by
//! exactly one of the two estimated level sets; the fixed-content variant
//! first resolves each estimate's level from its own sample. The total
//! variation distance between the two fitted densities is available either
//! as a deterministic quadrature or as an importance-sampled estimate.
//! Repeating the split yields pointwise confidence bands over a bandwidth
//! grid, and those curves drive the bandwidth selection rules.

use std::io;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_alpha, check_bandwidth, check_lambda, Error, Result};
use crate::kde::EmpiricalKde;
use crate::kernel::KernelSpec;
use crate::levelset::{estimate_lambda_alpha, lambda_from_density_values};
use crate::points::PointSet;
use crate::rng::Rng;

/// Default spacing of quadrature nodes for [`gamma_numeric`], as a fraction
/// of the bandwidth.
const GAMMA_STEP_FRACTION: f64 = 1.0 / 24.0;

/// Fewest quadrature nodes per contiguous support interval in one dimension
/// (and per axis in two). Keeps narrow intervals from degenerating to a
/// handful of trapezoids.
const GAMMA_MIN_NODES: usize = 65;

/// Per-axis node cap for the two-dimensional quadrature. Requests that
/// exceed it are refused with a pointer to [`gamma_importance`].
const GAMMA_MAX_AXIS_NODES: usize = 3000;

/// Index partition of a parent sample into the two estimation halves and
/// the holdout, plus a count of indices dropped to equalize part sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitTriple {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    /// Indices of the parent left out of all three parts (at most 2).
    pub dropped: usize,
}

impl SplitTriple {
    /// Checks that the parts are nonempty, equally sized, pairwise disjoint,
    /// in range for `parent`, and together with `dropped` account for every
    /// parent point.
    pub fn validate(&self, parent: &PointSet) -> Result<()> {
        let n = parent.len();
        let m = self.x.len();
        if m == 0 || self.y.len() != m || self.z.len() != m {
            return Err(Error::invalid("split", "parts must be nonempty and equally sized"));
        }
        if 3 * m + self.dropped != n {
            return Err(Error::invalid(
                "split",
                format!("parts plus dropped must cover the parent: 3*{m} + {} != {n}", self.dropped),
            ));
        }
        let mut seen = vec![false; n];
        for &i in self.x.iter().chain(&self.y).chain(&self.z) {
            if i >= n {
                return Err(Error::invalid("split", format!("index {i} out of range for {n} points")));
            }
            if seen[i] {
                return Err(Error::invalid("split", format!("index {i} appears in more than one part")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Draws a uniformly random three-way split of `parent` with equal part
/// sizes floor(n/3); any remainder indices are dropped. Deterministic in
/// `seed`.
pub fn split_three(parent: &PointSet, seed: u64) -> Result<SplitTriple> {
    let mut rng = Rng::seed_from_u64(seed);
    split_three_with(parent, &mut rng)
}

fn split_three_with(parent: &PointSet, rng: &mut Rng) -> Result<SplitTriple> {
    let n = parent.len();
    if n < 3 {
        return Err(Error::invalid("parent", format!("need at least 3 points to split, got {n}")));
    }
    let m = n / 3;
    let perm = rng.permutation(n);
    Ok(SplitTriple {
        x: perm[..m].to_vec(),
        y: perm[m..2 * m].to_vec(),
        z: perm[2 * m..3 * m].to_vec(),
        dropped: n - 3 * m,
    })
}

fn fit_halves(
    parent: &PointSet,
    split: &SplitTriple,
    kernel: KernelSpec,
    h: f64,
) -> Result<(EmpiricalKde, EmpiricalKde)> {
    split.validate(parent)?;
    let kx = EmpiricalKde::fit(parent.gather(&split.x), kernel, h)?;
    let ky = EmpiricalKde::fit(parent.gather(&split.y), kernel, h)?;
    Ok((kx, ky))
}

fn disagreement_fraction(
    parent: &PointSet,
    z: &[usize],
    kx: &EmpiricalKde,
    ky: &EmpiricalKde,
    lambda_x: f64,
    lambda_y: f64,
) -> f64 {
    let disagree = z
        .iter()
        .filter(|&&i| {
            let p = parent.point(i);
            (kx.density(p) > lambda_x) != (ky.density(p) > lambda_y)
        })
        .count();
    disagree as f64 / z.len() as f64
}

/// Fixed-level instability: the fraction of holdout points that belong to
/// exactly one of the two level sets {p_X > lambda} and {p_Y > lambda}.
/// Values are multiples of 1/|Z| in [0, 1].
pub fn xi_fixed_lambda(
    parent: &PointSet,
    split: &SplitTriple,
    kernel: KernelSpec,
    h: f64,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    let (kx, ky) = fit_halves(parent, split, kernel, h)?;
    Ok(disagreement_fraction(parent, &split.z, &kx, &ky, lambda, lambda))
}

/// Fixed-content instability: each half resolves its own level as the
/// ceil(m*alpha)-th largest of its own-sample density values, and the
/// holdout is compared across the two resulting sets.
pub fn xi_fixed_alpha(
    parent: &PointSet,
    split: &SplitTriple,
    kernel: KernelSpec,
    h: f64,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let (kx, ky) = fit_halves(parent, split, kernel, h)?;
    let lambda_x = estimate_lambda_alpha(&kx, alpha)?;
    let lambda_y = estimate_lambda_alpha(&ky, alpha)?;
    Ok(disagreement_fraction(parent, &split.z, &kx, &ky, lambda_x, lambda_y))
}

/// Axis meaning for an [`InstabilityCurve`] grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveAxis {
    Bandwidth,
    Level,
}

/// Pointwise quantile envelopes attached to a curve built from repeated
/// splits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveBands {
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

/// An instability statistic evaluated along a grid, optionally with
/// repeated-split confidence bands.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstabilityCurve {
    pub axis: CurveAxis,
    pub grid: Vec<f64>,
    /// Mean statistic per grid value (over splits when `n_splits > 1`).
    pub values: Vec<f64>,
    pub bands: Option<CurveBands>,
    pub n_splits: usize,
}

impl InstabilityCurve {
    /// Writes the curve as CSV with header
    /// `grid_value,instability,lower,median,upper`; the band columns are
    /// left empty when no bands are attached.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "grid_value,instability,lower,median,upper")?;
        for (i, (&g, &v)) in self.grid.iter().zip(&self.values).enumerate() {
            match &self.bands {
                Some(b) => writeln!(w, "{g},{v},{},{},{}", b.lower[i], b.median[i], b.upper[i])?,
                None => writeln!(w, "{g},{v},,,")?,
            }
        }
        Ok(())
    }
}

fn validate_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda_grid", "grid must be nonempty"));
    }
    for &l in grid {
        check_lambda(l)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("lambda_grid", "grid must be strictly increasing"));
    }
    Ok(())
}

fn validate_h_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("h_grid", "grid must be nonempty"));
    }
    for &h in grid {
        check_bandwidth(h)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("h_grid", "grid must be strictly increasing"));
    }
    Ok(())
}

/// Fixed-level instability along a whole level grid from a single split.
/// The two halves are fitted once and the holdout densities are evaluated
/// once, so entry i equals [`xi_fixed_lambda`] at `lambda_grid[i]` exactly.
pub fn tree_instability(
    parent: &PointSet,
    split: &SplitTriple,
    kernel: KernelSpec,
    h: f64,
    lambda_grid: &[f64],
) -> Result<InstabilityCurve> {
    validate_lambda_grid(lambda_grid)?;
    let (kx, ky) = fit_halves(parent, split, kernel, h)?;
    let pz: Vec<(f64, f64)> = split
        .z
        .iter()
        .map(|&i| {
            let p = parent.point(i);
            (kx.density(p), ky.density(p))
        })
        .collect();
    let m = pz.len() as f64;
    let values = lambda_grid
        .iter()
        .map(|&l| pz.iter().filter(|&&(px, py)| (px > l) != (py > l)).count() as f64 / m)
        .collect();
    Ok(InstabilityCurve {
        axis: CurveAxis::Level,
        grid: lambda_grid.to_vec(),
        values,
        bands: None,
        n_splits: 1,
    })
}

/// Node spacing policy for [`gamma_numeric`].
#[derive(Clone, Copy, Debug)]
pub struct GammaGrid {
    /// Node spacing as a fraction of the bandwidth.
    pub step_fraction: f64,
    /// Fewest nodes per contiguous interval (per axis in two dimensions).
    pub min_nodes: usize,
}

impl Default for GammaGrid {
    fn default() -> Self {
        GammaGrid { step_fraction: GAMMA_STEP_FRACTION, min_nodes: GAMMA_MIN_NODES }
    }
}

fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn trapezoid<F: FnMut(f64) -> f64>(a: f64, b: f64, n_nodes: usize, mut f: F) -> f64 {
    debug_assert!(n_nodes >= 2 && b > a);
    let dt = (b - a) / (n_nodes - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n_nodes {
        let t = a + dt * k as f64;
        let w = if k == 0 || k == n_nodes - 1 { 0.5 } else { 1.0 };
        acc += w * f(t);
    }
    acc * dt
}

fn nodes_for(a: f64, b: f64, h: f64, grid: &GammaGrid) -> usize {
    let by_step = ((b - a) / (h * grid.step_fraction)).ceil() as usize + 1;
    by_step.max(grid.min_nodes).max(2)
}

/// Total variation distance between two fitted densities,
/// (1/2) integral of |p_X - p_Y|, by deterministic quadrature.
///
/// Both estimates must share the kernel and the bandwidth. In one dimension
/// with a compact kernel the integrand is evaluated only on the merged
/// union of the per-point support intervals, so widely separated samples
/// cost nothing extra; the Gaussian kernel falls back to a single padded
/// interval. In two dimensions a tensor trapezoid rule over the padded
/// joint bounding box is used and oversized requests are refused in favor
/// of [`gamma_importance`].
pub fn gamma_numeric(x: &EmpiricalKde, y: &EmpiricalKde, grid: GammaGrid) -> Result<f64> {
    if x.kernel() != y.kernel() {
        return Err(Error::invalid("kernel", "total variation requires both fits to share a kernel"));
    }
    if x.h() != y.h() {
        return Err(Error::invalid("h", "total variation requires both fits to share a bandwidth"));
    }
    if !(grid.step_fraction.is_finite() && grid.step_fraction > 0.0) || grid.min_nodes < 2 {
        return Err(Error::invalid("grid", "step fraction must be positive and min_nodes at least 2"));
    }
    let h = x.h();
    let kernel = x.kernel();
    match kernel.dim {
        1 => {
            let support: Vec<(f64, f64)> = match kernel.cover_radius() {
                Some(r) => {
                    let rad = r * h;
                    let ivals = x
                        .points()
                        .iter()
                        .chain(y.points().iter())
                        .map(|p| (p[0] - rad, p[0] + rad))
                        .collect();
                    merge_intervals(ivals)
                }
                None => {
                    let pad = kernel.axis_padding() * h;
                    let (xl, xh) = x.points().bounds().expect("fitted kde is nonempty");
                    let (yl, yh) = y.points().bounds().expect("fitted kde is nonempty");
                    vec![(xl[0].min(yl[0]) - pad, xh[0].max(yh[0]) + pad)]
                }
            };
            let mut total = 0.0;
            for (a, b) in support {
                let n_nodes = nodes_for(a, b, h, &grid);
                total += trapezoid(a, b, n_nodes, |t| {
                    0.5 * (x.density(&[t]) - y.density(&[t])).abs()
                });
            }
            Ok(total)
        }
        2 => {
            let pad = kernel.axis_padding() * h;
            let (xl, xh) = x.points().bounds().expect("fitted kde is nonempty");
            let (yl, yh) = y.points().bounds().expect("fitted kde is nonempty");
            let lo = [xl[0].min(yl[0]) - pad, xl[1].min(yl[1]) - pad];
            let hi = [xh[0].max(yh[0]) + pad, xh[1].max(yh[1]) + pad];
            let nx = nodes_for(lo[0], hi[0], h, &grid);
            let ny = nodes_for(lo[1], hi[1], h, &grid);
            if nx > GAMMA_MAX_AXIS_NODES || ny > GAMMA_MAX_AXIS_NODES {
                return Err(Error::numerical(
                    "gamma_numeric",
                    format!(
                        "quadrature grid {nx}x{ny} exceeds the {GAMMA_MAX_AXIS_NODES} per-axis cap; \
                         use gamma_importance instead"
                    ),
                ));
            }
            let dx = (hi[0] - lo[0]) / (nx - 1) as f64;
            let dy = (hi[1] - lo[1]) / (ny - 1) as f64;
            let mut total = 0.0;
            for i in 0..nx {
                let u = lo[0] + dx * i as f64;
                let wx = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
                let mut row = 0.0;
                for j in 0..ny {
                    let v = lo[1] + dy * j as f64;
                    let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
                    let q = [u, v];
                    row += wy * 0.5 * (x.density(&q) - y.density(&q)).abs();
                }
                total += wx * row;
            }
            Ok(total * dx * dy)
        }
        d => Err(Error::invalid("dim", format!("total variation quadrature supports 1 or 2 dimensions, got {d}"))),
    }
}

/// Total variation distance by importance sampling.
///
/// Each draw picks one of the two samples with probability 1/2, then a
/// uniformly random point of it, then adds a kernel-distributed offset
/// scaled by `h`; that is a draw from the mixture (p_X + p_Y)/2, under
/// which |p_X - p_Y| / (p_X + p_Y) has mean exactly the total variation
/// distance. The estimate is an average of values in [0, 1], so its
/// standard error is at most 1 / (2 sqrt(n_draws)). Deterministic in
/// `seed`.
pub fn gamma_importance(
    x: &PointSet,
    y: &PointSet,
    kernel: KernelSpec,
    h: f64,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::invalid("n_draws", "need at least one draw"));
    }
    let kx = EmpiricalKde::fit(x.clone(), kernel, h)?;
    let ky = EmpiricalKde::fit(y.clone(), kernel, h)?;
    let mut rng = Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    let mut u = vec![0.0; kernel.dim];
    for _ in 0..n_draws {
        let from_x = rng.next_u64() & 1 == 0;
        let source = if from_x { &kx } else { &ky };
        let idx = rng.below(source.points().len() as u64) as usize;
        let center = source.points().point(idx);
        let offset = kernel.sample(&mut rng);
        for j in 0..kernel.dim {
            u[j] = center[j] + h * offset[j];
        }
        let px = kx.density(&u);
        let py = ky.density(&u);
        let denom = px + py;
        if denom <= 0.0 {
            return Err(Error::numerical(
                "gamma_importance",
                "a proposal draw landed where both densities vanish",
            ));
        }
        acc += (px - py).abs() / denom;
    }
    Ok(acc / n_draws as f64)
}

/// Which statistic a repeated-split band tracks along the bandwidth grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandMeasure {
    /// Fixed-level instability at the given level.
    XiLambda(f64),
    /// Fixed-content instability at the given content.
    XiAlpha(f64),
    /// Total variation distance between the two half fits.
    Gamma,
}

/// Linear-interpolation sample quantile on a sorted slice: position
/// p * (n - 1), interpolating between the bracketing order statistics.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn curve_for_split(
    parent: &PointSet,
    split: &SplitTriple,
    measure: BandMeasure,
    kernel: KernelSpec,
    h_grid: &[f64],
) -> Result<Vec<f64>> {
    h_grid
        .iter()
        .map(|&h| match measure {
            BandMeasure::XiLambda(l) => xi_fixed_lambda(parent, split, kernel, h, l),
            BandMeasure::XiAlpha(a) => xi_fixed_alpha(parent, split, kernel, h, a),
            BandMeasure::Gamma => {
                let kx = EmpiricalKde::fit(parent.gather(&split.x), kernel, h)?;
                let ky = EmpiricalKde::fit(parent.gather(&split.y), kernel, h)?;
                gamma_numeric(&kx, &ky, GammaGrid::default())
            }
        })
        .collect()
}

/// Repeats the three-way split `n_splits` times, evaluates `measure` along
/// `h_grid` for each split, and returns the per-bandwidth mean curve with
/// pointwise quantile bands at probabilities (1-level)/2, 1/2, and
/// 1-(1-level)/2.
///
/// Split s uses the dedicated stream `Rng::stream(seed, s)`, and the
/// reductions run in a fixed order, so the result is identical regardless
/// of thread count. With `n_splits = 1` the bands degenerate to the curve
/// itself.
pub fn confidence_bands(
    parent: &PointSet,
    measure: BandMeasure,
    kernel: KernelSpec,
    h_grid: &[f64],
    n_splits: usize,
    level: f64,
    seed: u64,
) -> Result<InstabilityCurve> {
    if n_splits == 0 {
        return Err(Error::invalid("n_splits", "need at least one split"));
    }
    if !(level.is_finite() && level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("band level must lie in (0, 1), got {level}")));
    }
    validate_h_grid(h_grid)?;
    match measure {
        BandMeasure::XiLambda(l) => check_lambda(l)?,
        BandMeasure::XiAlpha(a) => check_alpha(a)?,
        BandMeasure::Gamma => {}
    }
    let rows = (0..n_splits)
        .into_par_iter()
        .map(|s| {
            let mut rng = Rng::stream(seed, s as u64);
            let split = split_three_with(parent, &mut rng)?;
            curve_for_split(parent, &split, measure, kernel, h_grid)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let m = h_grid.len();
    let mut values = vec![0.0; m];
    for row in &rows {
        for (v, r) in values.iter_mut().zip(row) {
            *v += r;
        }
    }
    for v in &mut values {
        *v /= n_splits as f64;
    }

    let lo_p = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(m);
    let mut median = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut col = vec![0.0; n_splits];
    for j in 0..m {
        for (c, row) in col.iter_mut().zip(&rows) {
            *c = row[j];
        }
        col.sort_by(f64::total_cmp);
        lower.push(quantile_type7(&col, lo_p));
        median.push(quantile_type7(&col, 0.5));
        upper.push(quantile_type7(&col, 1.0 - lo_p));
    }

    Ok(InstabilityCurve {
        axis: CurveAxis::Bandwidth,
        grid: h_grid.to_vec(),
        values,
        bands: Some(CurveBands { lower, median, upper }),
        n_splits,
    })
}

/// How a bandwidth is read off an instability curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Find the first genuine interior local maximum past any leading
    /// plateau, then take the first later grid point where the curve drops
    /// strictly below the threshold. Without such a maximum the whole curve
    /// is searched from the start.
    XiRule,
    /// Take the first grid point where the curve is at or below the
    /// threshold.
    GammaRule,
}

/// Outcome of [`select_bandwidth`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BandwidthChoice {
    Chosen { index: usize, h: f64 },
    /// No grid point qualified; reports where the curve was smallest.
    NotFound { argmin_index: usize, argmin_h: f64, min_value: f64 },
}

/// Applies a selection rule to a curve at threshold `beta`.
pub fn select_bandwidth(
    curve: &InstabilityCurve,
    beta: f64,
    rule: SelectionRule,
) -> Result<BandwidthChoice> {
    if curve.grid.is_empty() || curve.grid.len() != curve.values.len() {
        return Err(Error::invalid("curve", "curve must be nonempty with matching grid and values"));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid("beta", format!("threshold must be positive and finite, got {beta}")));
    }
    let v = &curve.values;
    let chosen = match rule {
        SelectionRule::GammaRule => v.iter().position(|&u| u <= beta),
        SelectionRule::XiRule => {
            let mut peak = None;
            for i in 1..v.len().saturating_sub(1) {
                let is_max = v[i] >= v[i - 1]
                    && v[i] >= v[i + 1]
                    && (v[i] > v[i - 1] || v[i] > v[i + 1]);
                // A flat start of the curve is not a feature to descend
                // from: maxima whose whole prefix sits at the starting
                // value are ignored.
                if is_max && !v[..=i].iter().all(|&u| u == v[0]) {
                    peak = Some(i);
                    break;
                }
            }
            let start = peak.map_or(0, |i| i + 1);
            (start..v.len()).find(|&j| v[j] < beta)
        }
    };
    match chosen {
        Some(index) => Ok(BandwidthChoice::Chosen { index, h: curve.grid[index] }),
        None => {
            let argmin_index = v
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("curve is nonempty");
            Ok(BandwidthChoice::NotFound {
                argmin_index,
                argmin_h: curve.grid[argmin_index],
                min_value: v[argmin_index],
            })
        }
    }
}

/// Fixed-content instability on the full grid product, row-major with the
/// bandwidth as the outer index: entry `i * alpha_grid.len() + j` is
/// [`xi_fixed_alpha`] at `(h_grid[i], alpha_grid[j])` exactly. Each
/// bandwidth fits the two halves once and reuses their own-sample and
/// holdout density values across the whole content grid.
pub fn xi_alpha_heatmap(
    parent: &PointSet,
    split: &SplitTriple,
    kernel: KernelSpec,
    h_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<Vec<f64>> {
    validate_h_grid(h_grid)?;
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha_grid", "grid must be nonempty"));
    }
    for &a in alpha_grid {
        check_alpha(a)?;
    }
    if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("alpha_grid", "grid must be strictly increasing"));
    }
    split.validate(parent)?;
    let rows = h_grid
        .par_iter()
        .map(|&h| {
            let kx = EmpiricalKde::fit(parent.gather(&split.x), kernel, h)?;
            let ky = EmpiricalKde::fit(parent.gather(&split.y), kernel, h)?;
            let own_x: Vec<f64> = kx.points().iter().map(|p| kx.density(p)).collect();
            let own_y: Vec<f64> = ky.points().iter().map(|p| ky.density(p)).collect();
            let pz: Vec<(f64, f64)> = split
                .z
                .iter()
                .map(|&i| {
                    let p = parent.point(i);
                    (kx.density(p), ky.density(p))
                })
                .collect();
            let m = pz.len() as f64;
            let row: Vec<f64> = alpha_grid
                .iter()
                .map(|&alpha| {
                    let lx = lambda_from_density_values(&own_x, alpha);
                    let ly = lambda_from_density_values(&own_y, alpha);
                    pz.iter().filter(|&&(px, py)| (px > lx) != (py > ly)).count() as f64 / m
                })
                .collect();
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::mixture::GaussianMixture;

    const EPAN_1D: KernelSpec = KernelSpec { family: KernelFamily::Epanechnikov, dim: 1 };
    const GAUSS_1D: KernelSpec = KernelSpec { family: KernelFamily::Gaussian, dim: 1 };
    const SPHERE_1D: KernelSpec = KernelSpec { family: KernelFamily::Spherical, dim: 1 };

    /// Quadrature bias allowance for the default gamma grid.
    const GAMMA_QUAD_TOL: f64 = 1e-3;
    /// Absolute slack added on top of Monte Carlo standard error budgets.
    const MC_SLACK: f64 = 2e-3;

    fn benchmark_parent(n: usize, seed: u64) -> PointSet {
        let mix = GaussianMixture::benchmark_1d();
        let mut rng = Rng::seed_from_u64(seed);
        mix.sample_n(n, &mut rng)
    }

    fn contiguous_split(m: usize) -> SplitTriple {
        SplitTriple {
            x: (0..m).collect(),
            y: (m..2 * m).collect(),
            z: (2 * m..3 * m).collect(),
            dropped: 0,
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let parent = benchmark_parent(600, 1);
        let s = split_three(&parent, 42).unwrap();
        assert_eq!((s.x.len(), s.y.len(), s.z.len(), s.dropped), (200, 200, 200, 0));
        s.validate(&parent).unwrap();

        let again = split_three(&parent, 42).unwrap();
        assert_eq!(s, again);
        let other = split_three(&parent, 43).unwrap();
        assert_ne!(s.x, other.x);

        let parent = benchmark_parent(601, 2);
        let s = split_three(&parent, 0).unwrap();
        assert_eq!((s.x.len(), s.dropped), (200, 1));
        s.validate(&parent).unwrap();

        let tiny = PointSet::from_1d(vec![0.0, 1.0]).unwrap();
        assert!(split_three(&tiny, 0).is_err());
    }

    #[test]
    fn split_validate_rejects_bad_partitions() {
        let parent = benchmark_parent(9, 3);
        let ok = contiguous_split(3);
        ok.validate(&parent).unwrap();

        let mut overlap = contiguous_split(3);
        overlap.y[0] = overlap.x[0];
        assert!(overlap.validate(&parent).is_err());

        let mut out_of_range = contiguous_split(3);
        out_of_range.z[2] = 9;
        assert!(out_of_range.validate(&parent).is_err());

        let mut unequal = contiguous_split(3);
        unequal.z.pop();
        assert!(unequal.validate(&parent).is_err());

        let mut wrong_total = contiguous_split(3);
        wrong_total.dropped = 1;
        assert!(wrong_total.validate(&parent).is_err());
    }

    #[test]
    fn identical_halves_give_zero_everywhere() {
        // The parent repeats one block three times, so X and Y are the same
        // multiset and the two fits agree pointwise.
        let block: Vec<f64> = vec![0.0, 0.4, 1.1, 2.5, 3.0, 3.3, 6.8, 7.2];
        let mut data = block.clone();
        data.extend_from_slice(&block);
        data.extend_from_slice(&block);
        let parent = PointSet::from_1d(data).unwrap();
        let split = contiguous_split(block.len());

        for lambda in [0.0, 0.05, 0.2] {
            assert_eq!(xi_fixed_lambda(&parent, &split, EPAN_1D, 0.8, lambda).unwrap(), 0.0);
        }
        for alpha in [0.3, 0.5, 0.9] {
            assert_eq!(xi_fixed_alpha(&parent, &split, EPAN_1D, 0.8, alpha).unwrap(), 0.0);
        }
        let curve = tree_instability(&parent, &split, EPAN_1D, 0.8, &[0.01, 0.1, 0.3]).unwrap();
        assert!(curve.values.iter().all(|&v| v == 0.0));

        let kx = EmpiricalKde::fit(parent.gather(&split.x), EPAN_1D, 0.8).unwrap();
        let ky = EmpiricalKde::fit(parent.gather(&split.y), EPAN_1D, 0.8).unwrap();
        assert_eq!(gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap(), 0.0);
        let gi = gamma_importance(kx.points(), ky.points(), EPAN_1D, 0.8, 500, 9).unwrap();
        assert_eq!(gi, 0.0);
    }

    #[test]
    fn xi_range_and_extreme_levels() {
        let parent = benchmark_parent(120, 4);
        let split = split_three(&parent, 5).unwrap();
        let m = split.z.len() as f64;

        // Far above the densities' reach both sets are empty; far below,
        // membership still differs only where exactly one support covers.
        assert_eq!(xi_fixed_lambda(&parent, &split, EPAN_1D, 0.5, 10.0).unwrap(), 0.0);

        for lambda in [1e-12, 0.02, 0.05, 0.09, 0.15, 0.3] {
            let v = xi_fixed_lambda(&parent, &split, EPAN_1D, 0.5, lambda).unwrap();
            assert!((0.0..=1.0).contains(&v));
            let scaled = v * m;
            assert!((scaled - scaled.round()).abs() < 1e-9, "not a multiple of 1/|Z|: {v}");
        }
        for alpha in [0.1, 0.5, 0.9] {
            let v = xi_fixed_alpha(&parent, &split, EPAN_1D, 0.5, alpha).unwrap();
            assert!((0.0..=1.0).contains(&v));
            let scaled = v * m;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn swapping_halves_changes_nothing() {
        let parent = benchmark_parent(150, 6);
        let split = split_three(&parent, 7).unwrap();
        let swapped = SplitTriple {
            x: split.y.clone(),
            y: split.x.clone(),
            z: split.z.clone(),
            dropped: split.dropped,
        };
        let a = xi_fixed_lambda(&parent, &split, EPAN_1D, 0.6, 0.07).unwrap();
        let b = xi_fixed_lambda(&parent, &swapped, EPAN_1D, 0.6, 0.07).unwrap();
        assert_eq!(a, b);
        let a = xi_fixed_alpha(&parent, &split, EPAN_1D, 0.6, 0.5).unwrap();
        let b = xi_fixed_alpha(&parent, &swapped, EPAN_1D, 0.6, 0.5).unwrap();
        assert_eq!(a, b);

        let kx = EmpiricalKde::fit(parent.gather(&split.x), EPAN_1D, 0.6).unwrap();
        let ky = EmpiricalKde::fit(parent.gather(&split.y), EPAN_1D, 0.6).unwrap();
        let g_xy = gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap();
        let g_yx = gamma_numeric(&ky, &kx, GammaGrid::default()).unwrap();
        assert_eq!(g_xy, g_yx);
    }

    #[test]
    fn tree_curve_matches_pointwise_statistic_exactly() {
        let parent = benchmark_parent(240, 8);
        let split = split_three(&parent, 9).unwrap();
        let grid = [0.0, 0.01, 0.03, 0.05, 0.08, 0.1, 0.13, 0.2, 0.3];
        let curve = tree_instability(&parent, &split, EPAN_1D, 0.7, &grid).unwrap();
        assert_eq!(curve.axis, CurveAxis::Level);
        for (i, &l) in grid.iter().enumerate() {
            let direct = xi_fixed_lambda(&parent, &split, EPAN_1D, 0.7, l).unwrap();
            assert_eq!(curve.values[i], direct, "level {l}");
        }
    }

    #[test]
    fn zero_level_counts_support_mismatches() {
        // With a compact kernel, p > 0 exactly on the union of open balls of
        // radius h around the sample, so the statistic at level zero counts
        // holdout points covered by exactly one half's support.
        let parent = benchmark_parent(90, 10);
        let split = split_three(&parent, 11).unwrap();
        let h = 0.3;
        let xs: Vec<f64> = split.x.iter().map(|&i| parent.point(i)[0]).collect();
        let ys: Vec<f64> = split.y.iter().map(|&i| parent.point(i)[0]).collect();
        let near = |c: &[f64], z: f64| c.iter().any(|&p| (z - p).abs() < h);
        let expected = split
            .z
            .iter()
            .filter(|&&i| {
                let z = parent.point(i)[0];
                near(&xs, z) != near(&ys, z)
            })
            .count() as f64
            / split.z.len() as f64;
        let got = xi_fixed_lambda(&parent, &split, EPAN_1D, h, 0.0).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn gamma_is_one_for_disjoint_supports() {
        let x = PointSet::from_1d(vec![0.0]).unwrap();
        let y = PointSet::from_1d(vec![10.0]).unwrap();
        let kx = EmpiricalKde::fit(x.clone(), EPAN_1D, 1.0).unwrap();
        let ky = EmpiricalKde::fit(y.clone(), EPAN_1D, 1.0).unwrap();
        let g = gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap();
        assert!((g - 1.0).abs() < GAMMA_QUAD_TOL, "gamma {g}");

        // Importance sampling sees |p_X - p_Y| / (p_X + p_Y) = 1 at every
        // draw, so the estimate is exactly one.
        let gi = gamma_importance(&x, &y, EPAN_1D, 1.0, 200, 3).unwrap();
        assert_eq!(gi, 1.0);

        // Effectively disjoint Gaussian fits exercise the unbounded-support
        // interval construction.
        let kx = EmpiricalKde::fit(x, GAUSS_1D, 0.3).unwrap();
        let ky = EmpiricalKde::fit(y, GAUSS_1D, 0.3).unwrap();
        let g = gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap();
        assert!((g - 1.0).abs() < GAMMA_QUAD_TOL, "gaussian gamma {g}");
    }

    #[test]
    fn gamma_shrinks_as_bandwidth_grows() {
        let parent = benchmark_parent(600, 12);
        let split = contiguous_split(200);
        let mut last = f64::INFINITY;
        for h in [0.2, 0.5, 1.0, 2.0, 4.0, 7.0, 10.0] {
            let kx = EmpiricalKde::fit(parent.gather(&split.x), EPAN_1D, h).unwrap();
            let ky = EmpiricalKde::fit(parent.gather(&split.y), EPAN_1D, h).unwrap();
            let g = gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap();
            assert!((0.0..=1.0 + GAMMA_QUAD_TOL).contains(&g));
            assert!(g <= last + GAMMA_QUAD_TOL, "gamma rose from {last} to {g} at h={h}");
            last = g;
        }
    }

    #[test]
    fn gamma_rejects_mismatched_fits() {
        let parent = benchmark_parent(60, 13);
        let a = EmpiricalKde::fit(parent.gather(&(0..30).collect::<Vec<_>>()), EPAN_1D, 0.5).unwrap();
        let b = EmpiricalKde::fit(parent.gather(&(30..60).collect::<Vec<_>>()), EPAN_1D, 0.7).unwrap();
        assert!(gamma_numeric(&a, &b, GammaGrid::default()).is_err());
        let c = EmpiricalKde::fit(parent.gather(&(30..60).collect::<Vec<_>>()), GAUSS_1D, 0.5).unwrap();
        assert!(gamma_numeric(&a, &c, GammaGrid::default()).is_err());
    }

    #[test]
    fn gamma_importance_agrees_with_quadrature() {
        let parent = benchmark_parent(300, 14);
        let split = contiguous_split(100);
        let kx = EmpiricalKde::fit(parent.gather(&split.x), EPAN_1D, 1.0).unwrap();
        let ky = EmpiricalKde::fit(parent.gather(&split.y), EPAN_1D, 1.0).unwrap();
        let reference = gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap();

        let n_draws = 4000;
        let se = (reference * (1.0 - reference) / n_draws as f64).sqrt();
        let mut within = 0;
        for seed in 0..40 {
            let g = gamma_importance(kx.points(), ky.points(), EPAN_1D, 1.0, n_draws, seed).unwrap();
            if (g - reference).abs() <= 3.0 * se + MC_SLACK {
                within += 1;
            }
        }
        assert!(within >= 38, "only {within}/40 importance runs near {reference}");

        let a = gamma_importance(kx.points(), ky.points(), EPAN_1D, 1.0, 1000, 77).unwrap();
        let b = gamma_importance(kx.points(), ky.points(), EPAN_1D, 1.0, 1000, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_two_dimensional_smoke() {
        let kernel = KernelSpec { family: KernelFamily::Spherical, dim: 2 };
        let x = PointSet::new(2, vec![0.0, 0.0, 0.2, 0.1, -0.1, 0.3]).unwrap();
        let y = PointSet::new(2, vec![5.0, 5.0, 5.2, 5.1, 4.9, 5.3]).unwrap();
        let kx = EmpiricalKde::fit(x.clone(), kernel, 0.5).unwrap();
        let ky = EmpiricalKde::fit(y.clone(), kernel, 0.5).unwrap();
        // Identical fits integrate to zero; disjoint clouds to one. The box
        // spans about 7 units at h = 0.5, within the per-axis node cap.
        let same = gamma_numeric(&kx, &kx, GammaGrid::default()).unwrap();
        assert_eq!(same, 0.0);
        let g = gamma_numeric(&kx, &ky, GammaGrid::default()).unwrap();
        assert!((g - 1.0).abs() < 5.0 * GAMMA_QUAD_TOL, "2d gamma {g}");

        // A box needing more nodes per axis than the cap is refused.
        let far = PointSet::new(2, vec![0.0, 0.0, 400.0, 400.0]).unwrap();
        let kf = EmpiricalKde::fit(far, kernel, 0.5).unwrap();
        let kg = EmpiricalKde::fit(y, kernel, 0.5).unwrap();
        assert!(gamma_numeric(&kf, &kg, GammaGrid::default()).is_err());
    }

    /// The expected fixed-level instability equals the integral of
    /// 2 pi(u) (1 - pi(u)) against the sampling density, where pi(u) is the
    /// probability that a fresh half-sample's estimate exceeds the level at
    /// u. Both sides are estimated by Monte Carlo with a shared
    /// configuration and must agree within their combined error budgets.
    #[test]
    fn mean_instability_matches_membership_variance_integral() {
        let mix = GaussianMixture::benchmark_1d();
        let (n_half, h, lambda) = (8usize, 0.6, 0.12);
        let reps = 2000usize;
        let master = 7701u64;

        // Left side: mean instability over independent triples.
        let split = contiguous_split(n_half);
        let mut xi = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = Rng::stream(master, r as u64);
            let parent = mix.sample_n(3 * n_half, &mut rng);
            xi.push(xi_fixed_lambda(&parent, &split, EPAN_1D, h, lambda).unwrap());
        }
        let mean = xi.iter().sum::<f64>() / reps as f64;
        let var = xi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se_mean = (var / reps as f64).sqrt();

        // Right side: estimate pi on a grid from fresh half-samples, then
        // integrate 2 pi (1 - pi) times the mixture density.
        let nodes = 701usize;
        let (lo, hi) = (-5.0, 12.5);
        let du = (hi - lo) / (nodes - 1) as f64;
        let mut hits = vec![0u32; nodes];
        for r in 0..reps {
            let mut rng = Rng::stream(master, 100_000 + r as u64);
            let half = mix.sample_n(n_half, &mut rng);
            let kde = EmpiricalKde::fit(half, EPAN_1D, h).unwrap();
            for (k, hit) in hits.iter_mut().enumerate() {
                let u = lo + du * k as f64;
                if kde.density(&[u]) > lambda {
                    *hit += 1;
                }
            }
        }
        let mut integral = 0.0;
        let mut integral_se = 0.0;
        for (k, &c) in hits.iter().enumerate() {
            let u = lo + du * k as f64;
            let w = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
            let p = mix.density(&[u]);
            let pi = c as f64 / reps as f64;
            let se_pi = (pi * (1.0 - pi) / reps as f64).sqrt();
            integral += w * 2.0 * pi * (1.0 - pi) * p;
            // First-order error of 2 pi (1 - pi) in pi, padded by the
            // second-order term.
            integral_se += w * 2.0 * se_pi * ((1.0 - 2.0 * pi).abs() + se_pi) * p;
        }
        integral *= du;
        integral_se *= du;

        let budget = 3.0 * (se_mean + integral_se) + MC_SLACK;
        assert!(
            (mean - integral).abs() <= budget,
            "mean {mean} vs integral {integral}, budget {budget}"
        );
    }

    /// The variance of the statistic is bounded by
    /// xi (( n + 1) / (2 n) - xi) with n the holdout size, checked here
    /// empirically over fresh triples with a three-standard-error margin.
    #[test]
    fn variance_respects_quadratic_bound() {
        let mix = GaussianMixture::benchmark_1d();
        let n_half = 8usize;
        let reps = 1500usize;
        let half_factor = (n_half as f64 + 1.0) / (2.0 * n_half as f64);
        let split = contiguous_split(n_half);

        for (hi, &h) in [0.3, 0.6, 1.0, 2.0, 4.0].iter().enumerate() {
            let mut xi = Vec::with_capacity(reps);
            for r in 0..reps {
                let mut rng = Rng::stream(88_000 + hi as u64, r as u64);
                let parent = mix.sample_n(3 * n_half, &mut rng);
                xi.push(xi_fixed_lambda(&parent, &split, EPAN_1D, h, 0.09).unwrap());
            }
            let mean = xi.iter().sum::<f64>() / reps as f64;
            let var = xi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se_mean = (var / reps as f64).sqrt();

            let bound = mean * (half_factor - mean);
            let se_bound = (half_factor - 2.0 * mean).abs() * se_mean;
            let se_var = var * (2.0 / (reps - 1) as f64).sqrt();
            assert!(
                var <= bound + 3.0 * (se_bound + se_var) + 1e-4,
                "h={h}: var {var} above bound {bound}"
            );

            // Chebyshev consequence of the same bound: deviations beyond a
            // quarter are rarer than bound / 0.0625 allows.
            let tail = xi.iter().filter(|v| (*v - mean).abs() > 0.25).count() as f64 / reps as f64;
            assert!(
                tail <= (bound + 3.0 * se_bound) / 0.0625 + 0.02,
                "h={h}: tail {tail} vs bound {bound}"
            );
        }
    }

    /// For bandwidths below half the minimum spacing, each density value is
    /// a single kernel term, so level-set membership is exactly "within
    /// h t* of some sample point" for an explicit t*. The statistic must
    /// match that distance rule bit for bit, and shrinking h further scales
    /// its mean like h itself.
    #[test]
    fn small_bandwidth_reduces_to_distance_rule_and_linear_scaling() {
        let mix = GaussianMixture::benchmark_1d();
        let n_half = 8usize;
        let split = contiguous_split(n_half);

        let mut rng = Rng::seed_from_u64(314);
        let parent = mix.sample_n(3 * n_half, &mut rng);
        let spacing = parent.min_spacing().unwrap();
        let h = 0.45 * spacing;
        // Epanechnikov: K(t)/ (m h) > lambda iff |t| < t*.
        let lambda = 0.5 * 0.75 / (n_half as f64 * h);
        let t_star = (1.0 - n_half as f64 * h * lambda / 0.75).sqrt();
        let radius = h * t_star;
        let coord = |i: usize| parent.point(i)[0];
        let near = |part: &[usize], z: f64| part.iter().any(|&i| (z - coord(i)).abs() < radius);
        let expected = split
            .z
            .iter()
            .filter(|&&i| near(&split.x, coord(i)) != near(&split.y, coord(i)))
            .count() as f64
            / n_half as f64;
        let got = xi_fixed_lambda(&parent, &split, EPAN_1D, h, lambda).unwrap();
        assert_eq!(got, expected);

        // Halving h four times: the mean statistic at fixed level tracks h
        // within broad Monte Carlo bounds.
        let reps = 800usize;
        let level = 0.05;
        let mut means = Vec::new();
        for (k, &h) in [0.02, 0.01, 0.005, 0.0025, 0.00125].iter().enumerate() {
            let mut acc = 0.0;
            for r in 0..reps {
                let mut rng = Rng::stream(55_000 + k as u64, r as u64);
                let p = mix.sample_n(3 * n_half, &mut rng);
                acc += xi_fixed_lambda(&p, &split, EPAN_1D, h, level).unwrap();
            }
            means.push(acc / reps as f64);
        }
        assert!(means[4] > 0.0, "smallest bandwidth saw no disagreements");
        let ratio = means[0] / means[2];
        assert!((2.0..=8.0).contains(&ratio), "xi(0.02)/xi(0.005) = {ratio}, means {means:?}");
        for w in means.windows(2) {
            assert!(w[1] <= w[0] + 0.01, "means not decreasing: {means:?}");
        }
    }

    #[test]
    fn statistic_vanishes_beyond_density_sup() {
        let parent = benchmark_parent(120, 15);
        let split = split_three(&parent, 16).unwrap();
        // Uniform kernel: sup of the estimate is at most 1 / (2 h)
        // regardless of the sample, so a level just above is never crossed.
        let h = 0.7;
        let lambda = 1.01 / (2.0 * h);
        assert_eq!(xi_fixed_lambda(&parent, &split, SPHERE_1D, h, lambda).unwrap(), 0.0);
        // Epanechnikov at a huge bandwidth: sup is at most 0.75 / h.
        for h in [9.0, 12.0, 30.0] {
            assert_eq!(xi_fixed_lambda(&parent, &split, EPAN_1D, h, 0.09).unwrap(), 0.0);
        }
    }

    #[test]
    fn bands_are_deterministic_ordered_and_degenerate_for_one_split() {
        let parent = benchmark_parent(300, 17);
        let grid = [6.0, 8.0, 10.0];
        let a = confidence_bands(&parent, BandMeasure::XiLambda(0.09), EPAN_1D, &grid, 8, 0.9, 21).unwrap();
        let b = confidence_bands(&parent, BandMeasure::XiLambda(0.09), EPAN_1D, &grid, 8, 0.9, 21).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.axis, CurveAxis::Bandwidth);
        assert_eq!(a.n_splits, 8);
        let bands = a.bands.as_ref().unwrap();
        for j in 0..grid.len() {
            assert!(bands.lower[j] <= bands.median[j] && bands.median[j] <= bands.upper[j]);
        }
        // At h = 10 the estimate's sup is at most 0.075 < 0.09, so every
        // split's statistic is exactly zero there.
        assert_eq!(a.values[2], 0.0);
        assert_eq!(bands.upper[2], 0.0);

        let single = confidence_bands(&parent, BandMeasure::XiLambda(0.09), EPAN_1D, &grid, 1, 0.9, 21).unwrap();
        let sb = single.bands.as_ref().unwrap();
        assert_eq!(sb.lower, single.values);
        assert_eq!(sb.median, single.values);
        assert_eq!(sb.upper, single.values);
    }

    #[test]
    fn bands_cover_alpha_and_gamma_measures() {
        let parent = benchmark_parent(120, 18);
        let grid = [1.0, 2.0];
        let alpha = confidence_bands(&parent, BandMeasure::XiAlpha(0.5), EPAN_1D, &grid, 4, 0.8, 31).unwrap();
        assert!(alpha.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let gamma = confidence_bands(&parent, BandMeasure::Gamma, EPAN_1D, &grid, 4, 0.8, 31).unwrap();
        assert!(gamma.values.iter().all(|v| (0.0..=1.0 + GAMMA_QUAD_TOL).contains(v)));
        assert!(gamma.values[1] <= gamma.values[0] + GAMMA_QUAD_TOL);
    }

    #[test]
    fn bands_reject_bad_parameters() {
        let parent = benchmark_parent(30, 19);
        let grid = [0.5, 1.0];
        assert!(confidence_bands(&parent, BandMeasure::Gamma, EPAN_1D, &grid, 0, 0.9, 0).is_err());
        assert!(confidence_bands(&parent, BandMeasure::Gamma, EPAN_1D, &grid, 2, 1.0, 0).is_err());
        assert!(confidence_bands(&parent, BandMeasure::Gamma, EPAN_1D, &[], 2, 0.9, 0).is_err());
        assert!(confidence_bands(&parent, BandMeasure::Gamma, EPAN_1D, &[1.0, 1.0], 2, 0.9, 0).is_err());
        assert!(confidence_bands(&parent, BandMeasure::XiLambda(-1.0), EPAN_1D, &grid, 2, 0.9, 0).is_err());
        assert!(confidence_bands(&parent, BandMeasure::XiAlpha(1.5), EPAN_1D, &grid, 2, 0.9, 0).is_err());
    }

    fn curve_of(values: Vec<f64>) -> InstabilityCurve {
        let grid = (0..values.len()).map(|i| i as f64).collect();
        InstabilityCurve { axis: CurveAxis::Bandwidth, grid, values, bands: None, n_splits: 1 }
    }

    #[test]
    fn selection_rules_on_prescribed_curves() {
        // Threshold rule: first value at or below beta.
        let c = curve_of(vec![1.0, 0.4, 0.1]);
        assert_eq!(
            select_bandwidth(&c, 0.2, SelectionRule::GammaRule).unwrap(),
            BandwidthChoice::Chosen { index: 2, h: 2.0 }
        );

        // Peak-then-drop rule: descend from the first interior maximum.
        let c = curve_of(vec![0.0, 0.3, 0.1, 0.25, 0.02]);
        assert_eq!(
            select_bandwidth(&c, 0.05, SelectionRule::XiRule).unwrap(),
            BandwidthChoice::Chosen { index: 4, h: 4.0 }
        );
        // The drop must be strict: a value equal to beta does not qualify.
        assert_eq!(
            select_bandwidth(&c, 0.1, SelectionRule::XiRule).unwrap(),
            BandwidthChoice::Chosen { index: 4, h: 4.0 }
        );

        // A flat start is not a peak; with no genuine maximum the whole
        // curve is searched.
        let c = curve_of(vec![0.3, 0.3, 0.1]);
        assert_eq!(
            select_bandwidth(&c, 0.2, SelectionRule::XiRule).unwrap(),
            BandwidthChoice::Chosen { index: 2, h: 2.0 }
        );

        // A maximum after a varying prefix counts even when flat on top.
        let c = curve_of(vec![0.0, 0.3, 0.3, 0.1, 0.02]);
        assert_eq!(
            select_bandwidth(&c, 0.05, SelectionRule::XiRule).unwrap(),
            BandwidthChoice::Chosen { index: 4, h: 4.0 }
        );

        // Nothing qualifies: the minimizer is reported instead.
        let c = curve_of(vec![0.5, 0.4, 0.45]);
        match select_bandwidth(&c, 0.1, SelectionRule::XiRule).unwrap() {
            BandwidthChoice::NotFound { argmin_index, argmin_h, min_value } => {
                assert_eq!(argmin_index, 1);
                assert_eq!(argmin_h, 1.0);
                assert_eq!(min_value, 0.4);
            }
            other => panic!("expected NotFound, got {other:?}"),
        }

        assert!(select_bandwidth(&curve_of(vec![]), 0.1, SelectionRule::XiRule).is_err());
        assert!(select_bandwidth(&c, 0.0, SelectionRule::GammaRule).is_err());
    }

    #[test]
    fn heatmap_is_row_major_and_consistent_with_direct_calls() {
        let parent = benchmark_parent(150, 20);
        let split = split_three(&parent, 23).unwrap();
        let h_grid = [0.4, 0.8, 1.6];
        let alpha_grid = [0.2, 0.5, 0.8];
        let grid = xi_alpha_heatmap(&parent, &split, EPAN_1D, &h_grid, &alpha_grid).unwrap();
        assert_eq!(grid.len(), h_grid.len() * alpha_grid.len());
        for (i, &h) in h_grid.iter().enumerate() {
            for (j, &alpha) in alpha_grid.iter().enumerate() {
                let direct = xi_fixed_alpha(&parent, &split, EPAN_1D, h, alpha).unwrap();
                assert_eq!(grid[i * alpha_grid.len() + j], direct, "h={h} alpha={alpha}");
            }
        }
        assert!(xi_alpha_heatmap(&parent, &split, EPAN_1D, &h_grid, &[]).is_err());
        assert!(xi_alpha_heatmap(&parent, &split, EPAN_1D, &h_grid, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn quantile_interpolates_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&v, 0.0), 1.0);
        assert_eq!(quantile_type7(&v, 1.0), 4.0);
        assert_eq!(quantile_type7(&v, 0.5), 2.5);
        assert_eq!(quantile_type7(&v, 0.25), 1.75);
        assert_eq!(quantile_type7(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn curve_csv_layout() {
        let mut curve = curve_of(vec![0.25, 0.125]);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "grid_value,instability,lower,median,upper\n0,0.25,,,\n1,0.125,,,\n");

        curve.bands = Some(CurveBands {
            lower: vec![0.2, 0.1],
            median: vec![0.25, 0.125],
            upper: vec![0.3, 0.15],
        });
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "grid_value,instability,lower,median,upper");
        assert_eq!(lines[1], "0,0.25,0.2,0.25,0.3");
        assert_eq!(lines[2], "1,0.125,0.1,0.125,0.15");
    }
}
