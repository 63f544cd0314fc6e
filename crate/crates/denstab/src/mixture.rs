//! Isotropic Gaussian mixtures: the analytic ground-truth densities used by
//! the oracle and the synthetic data generators.

use crate::error::{Error, Result};
use crate::numeric;
use crate::points::PointSet;
use crate::rng::Rng;

/// Mixture of isotropic Gaussian components in d dimensions. Weights are
/// normalized to sum to exactly 1 at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    scales: Vec<f64>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, scales: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != scales.len() {
            return Err(Error::invalid(
                "components",
                format!(
                    "weights/means/scales must be nonempty and equal length, got {}/{}/{}",
                    weights.len(),
                    means.len(),
                    scales.len()
                ),
            ));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::invalid("means", "all means must share one dimension >= 1"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "weights",
                format!("weights must sum to 1 (got {total})"),
            ));
        }
        if scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::invalid("scales", "scales must be finite and positive"));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(GaussianMixture { weights, means, scales, dim })
    }

    /// One-dimensional convenience constructor.
    pub fn new_1d(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let means = means.into_iter().map(|m| vec![m]).collect();
        Self::new(weights, means, sds)
    }

    /// The three-component benchmark (4/7) N(0,1) + (2/7) N(3.5,1) + (1/7) N(7,1).
    pub fn benchmark_1d() -> Self {
        Self::new_1d(
            vec![4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0],
            vec![0.0, 3.5, 7.0],
            vec![1.0, 1.0, 1.0],
        )
        .expect("benchmark parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        let mut total = 0.0;
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.scales) {
            let r2: f64 = u.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
            let norm = (numeric::SQRT_2PI * s).powi(self.dim as i32);
            total += w * (-0.5 * r2 / (s * s)).exp() / norm;
        }
        total
    }

    /// Density derivative in d = 1, closed form. Used to bound the Lipschitz
    /// constant by a grid maximum.
    pub fn density_deriv_1d(&self, x: f64) -> f64 {
        assert_eq!(self.dim, 1, "density_deriv_1d requires a one-dimensional mixture");
        let mut total = 0.0;
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.scales) {
            let z = (x - m[0]) / s;
            total += w * (-z / s) * numeric::normal_pdf(z) / s;
        }
        total
    }

    /// CDF in d = 1: sum of component normal CDFs.
    pub fn cdf_1d(&self, x: f64) -> f64 {
        assert_eq!(self.dim, 1, "cdf_1d requires a one-dimensional mixture");
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((w, m), s)| w * numeric::normal_cdf((x - m[0]) / s))
            .sum()
    }

    /// One draw: pick a component by weight, then an isotropic normal.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let s = self.scales[k];
        self.means[k].iter().map(|m| m + s * rng.standard_normal()).collect()
    }

    pub fn sample_n(&self, n: usize, rng: &mut Rng) -> PointSet {
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            data.extend(self.sample(rng));
        }
        PointSet::new(self.dim, data).expect("sampled coordinates are finite")
    }

    /// Box that holds all but ~1e-9 of the mass: componentwise
    /// mean +- pad_sigmas * scale, unioned over components.
    pub fn bounds(&self, pad_sigmas: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (m, s) in self.means.iter().zip(&self.scales) {
            for d in 0..self.dim {
                lo[d] = lo[d].min(m[d] - pad_sigmas * s);
                hi[d] = hi[d].max(m[d] + pad_sigmas * s);
            }
        }
        (lo, hi)
    }

    /// Convolution with a gaussian kernel of bandwidth h has the closed form
    /// of the same mixture with component scales sqrt(s^2 + h^2).
    pub fn convolved_with_gaussian(&self, h: f64) -> Self {
        let scales = self.scales.iter().map(|s| (s * s + h * h).sqrt()).collect();
        GaussianMixture {
            weights: self.weights.clone(),
            means: self.means.clone(),
            scales,
            dim: self.dim,
        }
    }

    /// Grid-scan upper bound for the density maximum (d = 1 exact to grid
    /// resolution; used to size level grids).
    pub fn sup_density_1d(&self, grid_n: usize) -> f64 {
        assert_eq!(self.dim, 1);
        let (lo, hi) = self.bounds(9.0);
        let mut best = 0.0f64;
        for i in 0..grid_n {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (grid_n - 1) as f64;
            best = best.max(self.density(&[x]));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Reference pdf/cdf values computed independently with scipy.stats.norm.
    const ORACLE_EPS: f64 = 1e-13;

    #[test]
    fn benchmark_density_matches_reference() {
        let m = GaussianMixture::benchmark_1d();
        let cases = [
            (0.0, 0.22821635528642242),
            (2.0, 0.067857220586292913),
            (3.5, 0.11460685346829917),
            (5.545, 0.033858591582435205),
            (7.0, 0.057241092261151871),
            (-1.25, 0.1043723429386665),
        ];
        for (x, want) in cases {
            assert_abs_diff_eq!(m.density(&[x]), want, epsilon = ORACLE_EPS);
        }
    }

    #[test]
    fn benchmark_cdf_matches_reference() {
        let m = GaussianMixture::benchmark_1d();
        let cases = [
            (0.0, 0.28578075116562157),
            (2.0, 0.57751630877093874),
            (3.5, 0.7141860161089848),
            (7.0, 0.92850496311954411),
            (10.0, 0.99980715741257853),
        ];
        for (x, want) in cases {
            assert_abs_diff_eq!(m.cdf_1d(x), want, epsilon = ORACLE_EPS);
        }
    }

    #[test]
    fn density_has_three_modes_on_fine_grid() {
        let m = GaussianMixture::benchmark_1d();
        let n = 4001;
        let (lo, hi) = (-4.0, 11.0);
        let vals: Vec<f64> = (0..n)
            .map(|i| m.density(&[lo + (hi - lo) * i as f64 / (n - 1) as f64]))
            .collect();
        let mut maxima = 0;
        for i in 1..n - 1 {
            if vals[i] > vals[i - 1] && vals[i] > vals[i + 1] {
                maxima += 1;
            }
        }
        assert_eq!(maxima, 3);
    }

    #[test]
    fn sampler_matches_closed_form_moments() {
        // Benchmark mixture: mean 2, variance 7.5 exactly.
        let m = GaussianMixture::benchmark_1d();
        let mut rng = Rng::seed_from_u64(11);
        let n = 400_000;
        let pts = m.sample_n(n, &mut rng);
        let mean: f64 = pts.coords().iter().sum::<f64>() / n as f64;
        let var: f64 =
            pts.coords().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
        assert!((var - 7.5).abs() < 0.1, "var {var}");
    }

    #[test]
    fn gaussian_convolution_closed_form() {
        // N(0,1) convolved at h=1 is N(0,2): density 1/(2 sqrt(pi)) at 0.
        let m = GaussianMixture::new_1d(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        let c = m.convolved_with_gaussian(1.0);
        assert_abs_diff_eq!(c.density(&[0.0]), 0.28209479177387814, epsilon = 1e-15);
        // h=0 leaves the mixture unchanged.
        let same = m.convolved_with_gaussian(0.0);
        assert_eq!(same.density(&[0.7]), m.density(&[0.7]));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = GaussianMixture::benchmark_1d();
        let eps = 1e-6;
        for x in [-1.0, 0.3, 2.0, 4.4, 6.9] {
            let fd = (m.density(&[x + eps]) - m.density(&[x - eps])) / (2.0 * eps);
            assert_abs_diff_eq!(m.density_deriv_1d(x), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(GaussianMixture::new_1d(vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture::new_1d(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(GaussianMixture::new_1d(vec![], vec![], vec![]).is_err());
        assert!(GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0]
        )
        .is_err());
    }

    #[test]
    fn bounds_cover_all_components() {
        let m = GaussianMixture::benchmark_1d();
        let (lo, hi) = m.bounds(9.0);
        assert_eq!(lo, vec![-9.0]);
        assert_eq!(hi, vec![16.0]);
    }
}
