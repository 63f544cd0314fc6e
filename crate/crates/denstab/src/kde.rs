//! Density models: exact kernel density estimates, binned estimates on a
//! regular grid, analytic mixtures, and kernel-smoothed mixtures.
//!
//! All variants evaluate through [`DensityModel::density`]. Evaluation is
//! pure and deterministic: one-dimensional empirical sums always run in
//! sorted-coordinate order, multivariate sums in data order, so the same
//! query always reproduces the same floating-point value regardless of the
//! calling context.

use crate::error::{check_bandwidth, Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::mixture::GaussianMixture;
use crate::numeric;
use crate::points::PointSet;

/// Exact kernel density estimate (1/n) sum_i h^-d K((u - X_i)/h).
#[derive(Clone, Debug)]
pub struct EmpiricalKde {
    points: PointSet,
    kernel: KernelSpec,
    h: f64,
    /// Sorted copy of the coordinates when d = 1; enables windowed sums for
    /// compact kernels and fixes the summation order.
    sorted: Vec<f64>,
}

impl EmpiricalKde {
    pub fn fit(points: PointSet, kernel: KernelSpec, h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        if points.is_empty() {
            return Err(Error::invalid("points", "cannot fit a density to zero points"));
        }
        if kernel.dim != points.dim() {
            return Err(Error::DimensionMismatch { expected: kernel.dim, got: points.dim() });
        }
        let sorted = if points.dim() == 1 {
            let mut xs = points.coords().to_vec();
            xs.sort_by(|a, b| a.partial_cmp(b).expect("coordinates are finite"));
            xs
        } else {
            Vec::new()
        };
        Ok(EmpiricalKde { points, kernel, h, sorted })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        let n = self.points.len() as f64;
        let h = self.h;
        if self.dim() == 1 {
            let x = u[0];
            let (lo, hi) = match self.kernel.cover_radius() {
                Some(r) => {
                    let lo = self.sorted.partition_point(|&v| v < x - h * r);
                    let hi = self.sorted.partition_point(|&v| v <= x + h * r);
                    (lo, hi)
                }
                None => (0, self.sorted.len()),
            };
            let mut sum = 0.0;
            for &xi in &self.sorted[lo..hi] {
                sum += self.kernel.value(&[(x - xi) / h]);
            }
            sum / (n * h)
        } else {
            let d = self.dim();
            let mut t = vec![0.0; d];
            let mut sum = 0.0;
            for p in self.points.iter() {
                for k in 0..d {
                    t[k] = (u[k] - p[k]) / h;
                }
                sum += self.kernel.value(&t);
            }
            sum / (n * h.powi(d as i32))
        }
    }

    /// Density at every query point, in query order.
    pub fn density_many(&self, queries: &PointSet) -> Result<Vec<f64>> {
        if queries.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: queries.dim() });
        }
        Ok(queries.iter().map(|q| self.density(q)).collect())
    }

    /// Upper bound scan for the maximum density: sample points plus, in
    /// d = 1, midpoints of adjacent sorted points (where sums of two
    /// overlapping bumps can exceed both endpoint values).
    pub fn sup_hint(&self) -> f64 {
        let mut best = 0.0f64;
        for p in self.points.iter() {
            best = best.max(self.density(p));
        }
        if self.dim() == 1 {
            for w in self.sorted.windows(2) {
                best = best.max(self.density(&[0.5 * (w[0] + w[1])]));
            }
        }
        best
    }
}

/// Kernel density estimate accelerated by linear binning onto a regular
/// grid: the kernel is convolved with the binned masses at the grid nodes
/// and evaluation interpolates between nodes (d = 1 or 2).
#[derive(Clone, Debug)]
pub struct BinnedKde {
    kernel: KernelSpec,
    h: f64,
    dim: usize,
    lo: Vec<f64>,
    step: Vec<f64>,
    n_nodes: Vec<usize>,
    /// Density values at grid nodes, row-major (last axis fastest).
    node_density: Vec<f64>,
}

impl BinnedKde {
    pub fn fit(points: &PointSet, kernel: KernelSpec, h: f64, n_bins: usize) -> Result<Self> {
        check_bandwidth(h)?;
        if points.is_empty() {
            return Err(Error::invalid("points", "cannot fit a density to zero points"));
        }
        if kernel.dim != points.dim() {
            return Err(Error::DimensionMismatch { expected: kernel.dim, got: points.dim() });
        }
        if n_bins < 2 {
            return Err(Error::invalid("n_bins", format!("need at least 2 bins, got {n_bins}")));
        }
        let dim = points.dim();
        if dim > 2 {
            return Err(Error::invalid("points", "binned estimation supports d <= 2"));
        }
        let (mins, maxs) = points.bounds().expect("nonempty");
        let pad = kernel.axis_padding() * h;
        let lo: Vec<f64> = mins.iter().map(|m| m - pad).collect();
        let hi: Vec<f64> = maxs.iter().map(|m| m + pad).collect();
        let n_nodes = vec![n_bins; dim];
        let step: Vec<f64> =
            lo.iter().zip(&hi).map(|(l, u)| (u - l) / (n_bins - 1) as f64).collect();

        // Linear binning: each point splits its mass between the surrounding
        // grid nodes proportionally to proximity.
        let total_nodes: usize = n_nodes.iter().product();
        let mut mass = vec![0.0; total_nodes];
        let w = 1.0 / points.len() as f64;
        for p in points.iter() {
            let mut idx = [0usize; 2];
            let mut frac = [0.0f64; 2];
            for a in 0..dim {
                let t = (p[a] - lo[a]) / step[a];
                let i = (t.floor() as usize).min(n_bins - 2);
                idx[a] = i;
                frac[a] = (t - i as f64).clamp(0.0, 1.0);
            }
            match dim {
                1 => {
                    mass[idx[0]] += w * (1.0 - frac[0]);
                    mass[idx[0] + 1] += w * frac[0];
                }
                _ => {
                    let ny = n_bins;
                    for (dx, wx) in [(0, 1.0 - frac[0]), (1, frac[0])] {
                        for (dy, wy) in [(0, 1.0 - frac[1]), (1, frac[1])] {
                            mass[(idx[0] + dx) * ny + idx[1] + dy] += w * wx * wy;
                        }
                    }
                }
            }
        }

        // Discrete convolution of binned mass with the kernel at grid nodes.
        let node_density = match dim {
            1 => {
                let reach = Self::reach(&kernel, h, step[0], n_bins);
                let row: Vec<f64> =
                    (0..=reach).map(|k| kernel.value(&[k as f64 * step[0] / h]) / h).collect();
                let mut out = vec![0.0; n_bins];
                for (j, o) in out.iter_mut().enumerate() {
                    let kmin = j.saturating_sub(reach);
                    let kmax = (j + reach).min(n_bins - 1);
                    let mut s = 0.0;
                    for k in kmin..=kmax {
                        s += mass[k] * row[j.abs_diff(k)];
                    }
                    *o = s;
                }
                out
            }
            _ => {
                let rx = Self::reach(&kernel, h, step[0], n_bins);
                let ry = Self::reach(&kernel, h, step[1], n_bins);
                let h2 = h * h;
                let mut table = vec![0.0; (rx + 1) * (ry + 1)];
                for dx in 0..=rx {
                    for dy in 0..=ry {
                        let t = [dx as f64 * step[0] / h, dy as f64 * step[1] / h];
                        table[dx * (ry + 1) + dy] = kernel.value(&t) / h2;
                    }
                }
                let ny = n_bins;
                let mut out = vec![0.0; n_bins * n_bins];
                for jx in 0..n_bins {
                    for jy in 0..n_bins {
                        let mut s = 0.0;
                        for kx in jx.saturating_sub(rx)..=(jx + rx).min(n_bins - 1) {
                            let dx = jx.abs_diff(kx);
                            for ky in jy.saturating_sub(ry)..=(jy + ry).min(n_bins - 1) {
                                let m = mass[kx * ny + ky];
                                if m > 0.0 {
                                    s += m * table[dx * (ry + 1) + jy.abs_diff(ky)];
                                }
                            }
                        }
                        out[jx * ny + jy] = s;
                    }
                }
                out
            }
        };

        Ok(BinnedKde { kernel, h, dim, lo, step, n_nodes, node_density })
    }

    /// Number of grid steps the kernel support spans.
    fn reach(kernel: &KernelSpec, h: f64, step: f64, n_bins: usize) -> usize {
        let radius = h * kernel.cover_radius().unwrap_or(6.0);
        ((radius / step).ceil() as usize).min(n_bins - 1)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..self.dim {
            let span = self.step[a] * (self.n_nodes[a] - 1) as f64;
            if u[a] < self.lo[a] || u[a] > self.lo[a] + span {
                return 0.0;
            }
            let t = (u[a] - self.lo[a]) / self.step[a];
            let i = (t.floor() as usize).min(self.n_nodes[a] - 2);
            idx[a] = i;
            frac[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        match self.dim {
            1 => {
                let d = &self.node_density;
                d[idx[0]] * (1.0 - frac[0]) + d[idx[0] + 1] * frac[0]
            }
            _ => {
                let ny = self.n_nodes[1];
                let d = &self.node_density;
                let f00 = d[idx[0] * ny + idx[1]];
                let f01 = d[idx[0] * ny + idx[1] + 1];
                let f10 = d[(idx[0] + 1) * ny + idx[1]];
                let f11 = d[(idx[0] + 1) * ny + idx[1] + 1];
                let (fx, fy) = (frac[0], frac[1]);
                f00 * (1.0 - fx) * (1.0 - fy)
                    + f01 * (1.0 - fx) * fy
                    + f10 * fx * (1.0 - fy)
                    + f11 * fx * fy
            }
        }
    }

    pub fn sup_hint(&self) -> f64 {
        self.node_density.iter().cloned().fold(0.0, f64::max)
    }
}

/// The smoothed population density p_h: the base mixture convolved with the
/// scaled kernel. Gaussian kernels use the closed form (component variances
/// grow by h^2); compact kernels integrate by adaptive quadrature.
#[derive(Clone, Debug)]
pub struct SmoothedOracle {
    base: GaussianMixture,
    kernel: KernelSpec,
    h: f64,
    gaussian_closed_form: Option<GaussianMixture>,
}

/// Absolute quadrature tolerance for compact-kernel convolutions in d = 1.
pub const SMOOTHED_QUAD_TOL_1D: f64 = 1e-8;
/// Richardson-certified tolerance for the d = 2 tensor rule.
pub const SMOOTHED_QUAD_TOL_2D: f64 = 1e-6;

impl SmoothedOracle {
    pub fn new(base: GaussianMixture, kernel: KernelSpec, h: f64) -> Result<Self> {
        if !h.is_finite() || h < 0.0 {
            return Err(Error::invalid("h", format!("smoothing bandwidth must be >= 0, got {h}")));
        }
        if kernel.dim != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: kernel.dim });
        }
        let gaussian_closed_form = if kernel.family == KernelFamily::Gaussian {
            Some(base.convolved_with_gaussian(h))
        } else {
            None
        };
        Ok(SmoothedOracle { base, kernel, h, gaussian_closed_form })
    }

    pub fn base(&self) -> &GaussianMixture {
        &self.base
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        if self.h == 0.0 {
            return Ok(self.base.density(u));
        }
        if let Some(cf) = &self.gaussian_closed_form {
            return Ok(cf.density(u));
        }
        let r = self.kernel.cover_radius().expect("non-gaussian kernels have compact support");
        match self.dim() {
            1 => {
                let x = u[0];
                numeric::adaptive_quad(
                    &|z: f64| self.kernel.value(&[z]) * self.base.density(&[x - self.h * z]),
                    -r,
                    r,
                    SMOOTHED_QUAD_TOL_1D,
                )
            }
            2 => numeric::tensor_quad_2d(
                &|zx, zy| {
                    self.kernel.value(&[zx, zy])
                        * self.base.density(&[u[0] - self.h * zx, u[1] - self.h * zy])
                },
                -r,
                r,
                -r,
                r,
                129,
                SMOOTHED_QUAD_TOL_2D,
            ),
            d => Err(Error::invalid("dim", format!("smoothed evaluation supports d <= 2, got {d}"))),
        }
    }
}

/// Convolved density p_h(u) for a mixture and kernel, without keeping the
/// intermediate model around.
pub fn smoothed_density(
    base: &GaussianMixture,
    kernel: &KernelSpec,
    h: f64,
    u: &[f64],
) -> Result<f64> {
    SmoothedOracle::new(base.clone(), *kernel, h)?.density(u)
}

/// Any evaluable density: empirical, binned, analytic, or smoothed analytic.
#[derive(Clone, Debug)]
pub enum DensityModel {
    Empirical(EmpiricalKde),
    Binned(BinnedKde),
    Oracle(GaussianMixture),
    Smoothed(SmoothedOracle),
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Empirical(m) => m.dim(),
            DensityModel::Binned(m) => m.dim(),
            DensityModel::Oracle(m) => m.dim(),
            DensityModel::Smoothed(m) => m.dim(),
        }
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        match self {
            DensityModel::Empirical(m) => Ok(m.density(u)),
            DensityModel::Binned(m) => Ok(m.density(u)),
            DensityModel::Oracle(m) => Ok(m.density(u)),
            DensityModel::Smoothed(m) => m.density(u),
        }
    }

    /// Densities at every query point, in query order; empty input gives an
    /// empty output.
    pub fn eval_many(&self, queries: &PointSet) -> Result<Vec<f64>> {
        if queries.dim() != self.dim() && !queries.is_empty() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: queries.dim() });
        }
        queries.iter().map(|q| self.density(q)).collect()
    }

    /// Scan-based upper estimate of the density maximum, used to size level
    /// grids. Exact to scan resolution, not a certified bound.
    pub fn sup_hint(&self) -> Result<f64> {
        match self {
            DensityModel::Empirical(m) => Ok(m.sup_hint()),
            DensityModel::Binned(m) => Ok(m.sup_hint()),
            DensityModel::Oracle(m) => {
                if m.dim() == 1 {
                    Ok(m.sup_density_1d(8193))
                } else {
                    Ok(self.grid_scan_sup(257)?)
                }
            }
            DensityModel::Smoothed(_) => self.grid_scan_sup(1025),
        }
    }

    fn grid_scan_sup(&self, per_axis: usize) -> Result<f64> {
        let (lo, hi) = match self {
            DensityModel::Oracle(m) => m.bounds(9.0),
            DensityModel::Smoothed(m) => {
                let (lo, hi) = m.base().bounds(9.0);
                let pad = m.h() * m.kernel().axis_padding();
                (lo.iter().map(|v| v - pad).collect(), hi.iter().map(|v| v + pad).collect())
            }
            _ => unreachable!("grid scan is only used for analytic models"),
        };
        let mut best = 0.0f64;
        match self.dim() {
            1 => {
                for i in 0..per_axis {
                    let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (per_axis - 1) as f64;
                    best = best.max(self.density(&[x])?);
                }
            }
            2 => {
                for i in 0..per_axis {
                    let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (per_axis - 1) as f64;
                    for j in 0..per_axis {
                        let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (per_axis - 1) as f64;
                        best = best.max(self.density(&[x, y])?);
                    }
                }
            }
            d => {
                return Err(Error::invalid("dim", format!("sup scan supports d <= 2, got {d}")));
            }
        }
        Ok(best)
    }

    pub fn as_empirical(&self) -> Option<&EmpiricalKde> {
        match self {
            DensityModel::Empirical(m) => Some(m),
            _ => None,
        }
    }
}
