//! Level sets of density models: membership by level, level resolution by
//! probability content, and symmetric-difference loss against an analytic
//! ground truth.

use crate::error::{check_alpha, check_lambda, Error, Result};
use crate::kde::{DensityModel, EmpiricalKde};
use crate::oracle;
use crate::points::PointSet;
use crate::rng::Rng;

/// How a level set is indexed: directly by density level, or by the
/// probability content it must hold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelSetQuery {
    ByLevel(f64),
    ByContent(f64),
}

/// A level set represented on a finite set of evaluation points: the point
/// belongs to the set iff its density strictly exceeds the threshold.
#[derive(Clone, Debug)]
pub struct SampleLevelSet {
    pub threshold: f64,
    pub eval_points: PointSet,
    pub density_values: Vec<f64>,
    pub member_mask: Vec<bool>,
}

impl SampleLevelSet {
    pub fn n_members(&self) -> usize {
        self.member_mask.iter().filter(|&&m| m).count()
    }

    pub fn member_indices(&self) -> Vec<usize> {
        (0..self.member_mask.len()).filter(|&i| self.member_mask[i]).collect()
    }

    /// CSV rows `coord_0,...,coord_{d-1},density,member` with LF endings.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for (i, p) in self.eval_points.iter().enumerate() {
            for c in p {
                write!(w, "{c},")?;
            }
            writeln!(w, "{},{}", self.density_values[i], u8::from(self.member_mask[i]))?;
        }
        Ok(())
    }
}

/// Membership of each point in {u : model(u) > lambda}; strictly greater,
/// so boundary points where the density equals lambda are excluded.
pub fn membership(model: &DensityModel, lambda: f64, points: &PointSet) -> Result<SampleLevelSet> {
    check_lambda(lambda)?;
    let density_values = model.eval_many(points)?;
    let member_mask = density_values.iter().map(|&v| v > lambda).collect();
    Ok(SampleLevelSet {
        threshold: lambda,
        eval_points: points.clone(),
        density_values,
        member_mask,
    })
}

/// The largest level whose estimated set holds empirical mass at least
/// alpha, where the empirical measure is taken over the estimator's own
/// sample: the ceil(n*alpha)-th largest of the fitted density values at the
/// sample points (descending sort, duplicate values kept).
pub fn estimate_lambda_alpha(kde: &EmpiricalKde, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let values: Vec<f64> = kde.points().iter().map(|p| kde.density(p)).collect();
    Ok(lambda_from_density_values(&values, alpha))
}

/// Quantile core of [`estimate_lambda_alpha`], separated so the tie and
/// ordering conventions can be tested on prescribed value lists.
pub fn lambda_from_density_values(values: &[f64], alpha: f64) -> f64 {
    assert!(!values.is_empty());
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("density values are finite"));
    let k = ((n as f64 * alpha).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Level set by probability content: resolve the level from the estimator's
/// own sample, then take membership of `eval_points` at that level.
pub fn content_level_set(
    kde: &EmpiricalKde,
    alpha: f64,
    eval_points: &PointSet,
) -> Result<SampleLevelSet> {
    let lambda = estimate_lambda_alpha(kde, alpha)?;
    if eval_points.dim() != kde.dim() && !eval_points.is_empty() {
        return Err(Error::DimensionMismatch { expected: kde.dim(), got: eval_points.dim() });
    }
    let density_values: Vec<f64> = eval_points.iter().map(|p| kde.density(p)).collect();
    let member_mask = density_values.iter().map(|&v| v > lambda).collect();
    Ok(SampleLevelSet {
        threshold: lambda,
        eval_points: eval_points.clone(),
        density_values,
        member_mask,
    })
}

/// How the symmetric-difference mass is integrated.
#[derive(Clone, Copy, Debug)]
pub enum Integrator {
    /// Midpoint rule on a regular grid over the union of the model domains.
    Grid { cells_per_axis: usize },
    /// Monte Carlo draws from the true density.
    MonteCarlo { draws: usize, seed: u64 },
}

impl Integrator {
    /// Grid quadrature in low dimension, Monte Carlo above it.
    pub fn default_for_dim(dim: usize) -> Integrator {
        match dim {
            1 => Integrator::Grid { cells_per_axis: 2000 },
            2 => Integrator::Grid { cells_per_axis: 400 },
            _ => Integrator::MonteCarlo { draws: 1_000_000, seed: 0 },
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LossEstimate {
    pub value: f64,
    /// Binomial standard error (Monte Carlo integrator only).
    pub std_error: Option<f64>,
    /// Per-axis cell width (grid integrator only).
    pub cell_size: Option<f64>,
}

/// Probability mass, under the true density, of the region where the true
/// level set and the estimated one disagree. The true set is L(lambda) or
/// M(alpha) of `truth` per the query; the estimated set is
/// {u : est_model(u) > est_threshold}.
pub fn symmetric_difference_loss(
    truth: &DensityModel,
    est_model: &DensityModel,
    est_threshold: f64,
    query: &LevelSetQuery,
    integrator: &Integrator,
) -> Result<LossEstimate> {
    check_lambda(est_threshold)?;
    if truth.dim() != est_model.dim() {
        return Err(Error::DimensionMismatch { expected: truth.dim(), got: est_model.dim() });
    }
    let true_lambda = match query {
        LevelSetQuery::ByLevel(l) => {
            check_lambda(*l)?;
            *l
        }
        LevelSetQuery::ByContent(a) => oracle::true_lambda_alpha(truth, *a)?,
    };
    let disagree = |u: &[f64]| -> Result<(f64, bool)> {
        let p = truth.density(u)?;
        let in_true = p > true_lambda;
        let in_est = est_model.density(u)? > est_threshold;
        Ok((p, in_true != in_est))
    };

    match *integrator {
        Integrator::Grid { cells_per_axis } => {
            if cells_per_axis == 0 {
                return Err(Error::invalid("cells_per_axis", "need at least 1 cell"));
            }
            let (lo, hi) = union_domain(truth, est_model)?;
            match truth.dim() {
                1 => {
                    let cell = (hi[0] - lo[0]) / cells_per_axis as f64;
                    let mut mass = 0.0;
                    for i in 0..cells_per_axis {
                        let x = lo[0] + (i as f64 + 0.5) * cell;
                        let (p, diff) = disagree(&[x])?;
                        if diff {
                            mass += p * cell;
                        }
                    }
                    Ok(LossEstimate { value: mass, std_error: None, cell_size: Some(cell) })
                }
                2 => {
                    let cx = (hi[0] - lo[0]) / cells_per_axis as f64;
                    let cy = (hi[1] - lo[1]) / cells_per_axis as f64;
                    let mut mass = 0.0;
                    for i in 0..cells_per_axis {
                        let x = lo[0] + (i as f64 + 0.5) * cx;
                        for j in 0..cells_per_axis {
                            let y = lo[1] + (j as f64 + 0.5) * cy;
                            let (p, diff) = disagree(&[x, y])?;
                            if diff {
                                mass += p * cx * cy;
                            }
                        }
                    }
                    Ok(LossEstimate {
                        value: mass,
                        std_error: None,
                        cell_size: Some(cx.max(cy)),
                    })
                }
                d => Err(Error::invalid(
                    "integrator",
                    format!("grid integration supports d <= 2, got {d}; use MonteCarlo"),
                )),
            }
        }
        Integrator::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::invalid("draws", "need at least 1 draw"));
            }
            let mut rng = Rng::seed_from_u64(seed);
            let mut hits = 0usize;
            for _ in 0..draws {
                let u = sample_from_truth(truth, &mut rng)?;
                let (_, diff) = disagree(&u)?;
                hits += usize::from(diff);
            }
            let f = hits as f64 / draws as f64;
            let se = (f * (1.0 - f) / draws as f64).sqrt();
            Ok(LossEstimate { value: f, std_error: Some(se), cell_size: None })
        }
    }
}

/// Bounding box covering where either model carries mass.
fn union_domain(a: &DensityModel, b: &DensityModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let (la, ha) = model_domain(a)?;
    let (lb, hb) = model_domain(b)?;
    let lo = la.iter().zip(&lb).map(|(x, y)| x.min(*y)).collect();
    let hi = ha.iter().zip(&hb).map(|(x, y)| x.max(*y)).collect();
    Ok((lo, hi))
}

pub(crate) fn model_domain(m: &DensityModel) -> Result<(Vec<f64>, Vec<f64>)> {
    match m {
        DensityModel::Empirical(k) => {
            let (lo, hi) = k.points().bounds().expect("fitted models are nonempty");
            let pad = k.h() * k.kernel().axis_padding();
            Ok((lo.iter().map(|v| v - pad).collect(), hi.iter().map(|v| v + pad).collect()))
        }
        DensityModel::Binned(_) => Err(Error::invalid(
            "model",
            "binned models do not expose a domain; integrate against the exact variant",
        )),
        DensityModel::Oracle(mix) => Ok(mix.bounds(9.0)),
        DensityModel::Smoothed(s) => {
            let (lo, hi) = s.base().bounds(9.0);
            let pad = s.h() * s.kernel().axis_padding();
            Ok((lo.iter().map(|v| v - pad).collect(), hi.iter().map(|v| v + pad).collect()))
        }
    }
}

/// Exact draw from an analytic truth model: mixture draws directly; the
/// smoothed mixture draws from the base and perturbs by h times a kernel
/// draw (the definition of the convolution).
fn sample_from_truth(truth: &DensityModel, rng: &mut Rng) -> Result<Vec<f64>> {
    match truth {
        DensityModel::Oracle(m) => Ok(m.sample(rng)),
        DensityModel::Smoothed(s) => {
            let mut u = s.base().sample(rng);
            let w = s.kernel().sample(rng);
            for (ui, wi) in u.iter_mut().zip(w) {
                *ui += s.h() * wi;
            }
            Ok(u)
        }
        _ => Err(Error::invalid(
            "truth",
            "Monte Carlo integration needs an analytic truth model (oracle or smoothed)",
        )),
    }
}
