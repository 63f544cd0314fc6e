//! Connected components of sample level sets, cluster trees over a level
//! grid, and detection of levels whose clustering is stable under small
//! level perturbations.

use crate::error::{Error, Result};
use crate::kde::DensityModel;
use crate::oracle;
use crate::points::{euclidean, PointSet};
use serde::Serialize;

/// Default single-linkage radius for a kernel estimate at bandwidth h: two
/// support balls of radius h touch. For the Gaussian kernel (unbounded
/// support) the same rule is used as a heuristic.
pub fn default_linking_radius(h: f64) -> f64 {
    2.0 * h
}

/// Number of levels in [`default_lambda_grid`].
pub const DEFAULT_GRID_LEVELS: usize = 256;

/// Uniform level grid from 0 to (slightly above) the model's maximum, so
/// every component is born and dies inside the grid.
pub fn default_lambda_grid(model: &DensityModel) -> Result<Vec<f64>> {
    let top = model.sup_hint()?;
    let n = DEFAULT_GRID_LEVELS;
    Ok((0..n).map(|k| top * k as f64 / (n - 1) as f64).collect())
}

/// Single-linkage component labels for the member points of a sample level
/// set. Non-members get no label; labels are numbered by first member
/// occurrence, so the output is deterministic in the point order.
#[derive(Clone, Debug)]
pub struct ComponentLabeling {
    pub labels: Vec<Option<usize>>,
    pub n_components: usize,
}

impl ComponentLabeling {
    /// Member indices grouped by component label.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_components];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(i);
            }
        }
        out
    }
}

/// Two member points share a component iff a chain of member points
/// connects them with consecutive gaps at most `linking_radius`.
pub fn connected_components(
    points: &PointSet,
    member_mask: &[bool],
    linking_radius: f64,
) -> Result<ComponentLabeling> {
    if !(linking_radius > 0.0) || !linking_radius.is_finite() {
        return Err(Error::invalid("linking_radius", "radius must be positive and finite"));
    }
    if member_mask.len() != points.len() {
        return Err(Error::invalid("member_mask", "mask length must match the point count"));
    }
    let members: Vec<usize> = (0..points.len()).filter(|&i| member_mask[i]).collect();
    let mut uf = UnionFind::new(members.len());
    // Sweep over members ordered by first coordinate: points farther apart
    // than the radius along any single axis cannot link, so the inner scan
    // stops at the first too-distant first coordinate.
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| {
        points.point(members[a])[0]
            .partial_cmp(&points.point(members[b])[0])
            .expect("coordinates are finite")
    });
    for (pos, &a) in order.iter().enumerate() {
        let pa = points.point(members[a]);
        for &b in &order[pos + 1..] {
            let pb = points.point(members[b]);
            if pb[0] - pa[0] > linking_radius {
                break;
            }
            if euclidean(pa, pb) <= linking_radius {
                uf.union(a, b);
            }
        }
    }
    let mut labels = vec![None; points.len()];
    let mut next = 0usize;
    let mut canon: Vec<Option<usize>> = vec![None; members.len()];
    for (k, &i) in members.iter().enumerate() {
        let root = uf.find(k);
        let c = *canon[root].get_or_insert_with(|| {
            let c = next;
            next += 1;
            c
        });
        labels[i] = Some(c);
    }
    Ok(ComponentLabeling { labels, n_components: next })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Attach the larger root index under the smaller so labeling by
            // first occurrence stays deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// One cluster: a maximal run of levels over which a connected component
/// persists without splitting.
#[derive(Clone, Debug)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Level at which the component first appears (as a root or at a split).
    pub birth_lambda: f64,
    /// First grid level at which the component is gone: it either split
    /// into the children or ran out of member points. Nodes alive at the top
    /// of the grid die there.
    pub death_lambda: f64,
    /// Probability content of the whole level set at the birth level.
    pub birth_alpha: f64,
    pub death_alpha: f64,
    /// Indices (into the input points) of the members when the node was born.
    pub members_at_birth: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ClusterTree {
    pub lambda_grid: Vec<f64>,
    pub nodes: Vec<TreeNode>,
    pub roots: Vec<usize>,
}

/// JSON view of a node: members are reported as a count, not a list.
#[derive(Clone, Debug, Serialize)]
pub struct TreeNodeExport {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub birth_lambda: f64,
    pub death_lambda: f64,
    pub birth_alpha: f64,
    pub death_alpha: f64,
    pub member_count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterTreeExport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_levels: usize,
    pub n_leaves: usize,
    pub n_splits: usize,
    pub nodes: Vec<TreeNodeExport>,
}

impl ClusterTree {
    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.children.is_empty()).map(|n| n.id).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// Nodes with at least two children, with the level at which they split.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter(|n| n.children.len() >= 2)
            .map(|n| (n.id, n.death_lambda))
            .collect()
    }

    pub fn n_splits(&self) -> usize {
        self.splits().len()
    }

    pub fn export(&self) -> ClusterTreeExport {
        ClusterTreeExport {
            lambda_min: self.lambda_grid.first().copied().unwrap_or(0.0),
            lambda_max: self.lambda_grid.last().copied().unwrap_or(0.0),
            n_levels: self.lambda_grid.len(),
            n_leaves: self.n_leaves(),
            n_splits: self.n_splits(),
            nodes: self
                .nodes
                .iter()
                .map(|n| TreeNodeExport {
                    id: n.id,
                    parent: n.parent,
                    children: n.children.clone(),
                    birth_lambda: n.birth_lambda,
                    death_lambda: n.death_lambda,
                    birth_alpha: n.birth_alpha,
                    death_alpha: n.death_alpha,
                    member_count: n.members_at_birth.len(),
                })
                .collect(),
        }
    }
}

fn validate_grid(lambda_grid: &[f64]) -> Result<()> {
    if lambda_grid.is_empty() {
        return Err(Error::invalid("lambda_grid", "level grid is empty"));
    }
    for w in lambda_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("lambda_grid", "levels must be strictly increasing"));
        }
    }
    if !lambda_grid.iter().all(|l| l.is_finite() && *l >= 0.0) {
        return Err(Error::invalid("lambda_grid", "levels must be finite and nonnegative"));
    }
    Ok(())
}

/// Probability content of the level set at `lambda`: the population mass
/// for analytic models, the fraction of the supplied points for sample
/// models.
fn content_at(model: &DensityModel, densities: &[f64], lambda: f64) -> Result<f64> {
    match model {
        DensityModel::Oracle(_) | DensityModel::Smoothed(_) => oracle::mass_above(model, lambda),
        DensityModel::Empirical(_) | DensityModel::Binned(_) => {
            if densities.is_empty() {
                return Ok(0.0);
            }
            Ok(densities.iter().filter(|&&v| v > lambda).count() as f64 / densities.len() as f64)
        }
    }
}

/// Build the cluster tree of `model` over the level grid, with components
/// represented by the supplied points. Components are tracked level to
/// level by point-set containment: a component at the next level belongs to
/// the unique current component holding its points (memberships only
/// shrink as the level rises, and linked points stay linked).
pub fn build_tree(
    model: &DensityModel,
    points: &PointSet,
    lambda_grid: &[f64],
    linking_radius: f64,
) -> Result<ClusterTree> {
    validate_grid(lambda_grid)?;
    if !(linking_radius > 0.0) || !linking_radius.is_finite() {
        return Err(Error::invalid("linking_radius", "radius must be positive and finite"));
    }
    let densities = model.eval_many(points)?;
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    // Node id currently carrying each component label at the previous level.
    let mut active: Vec<usize> = Vec::new();
    let mut prev_labels: Vec<Option<usize>> = vec![None; points.len()];

    for (k, &lambda) in lambda_grid.iter().enumerate() {
        let mask: Vec<bool> = densities.iter().map(|&v| v > lambda).collect();
        let labeling = connected_components(points, &mask, linking_radius)?;
        let groups = labeling.groups();

        if k == 0 {
            for g in &groups {
                let id = nodes.len();
                nodes.push(TreeNode {
                    id,
                    parent: None,
                    children: Vec::new(),
                    birth_lambda: lambda,
                    death_lambda: *lambda_grid.last().expect("grid is nonempty"),
                    birth_alpha: content_at(model, &densities, lambda)?,
                    death_alpha: 0.0,
                    members_at_birth: g.clone(),
                });
                roots.push(id);
                active.push(id);
            }
        } else {
            // Map each new component to the node owning its points.
            let mut heirs: Vec<Vec<usize>> = vec![Vec::new(); active.len()];
            for (c, g) in groups.iter().enumerate() {
                let old = prev_labels[g[0]]
                    .expect("membership shrinks as the level rises, so the point was a member");
                heirs[old].push(c);
            }
            let mut next_active = vec![usize::MAX; groups.len()];
            for (old, comps) in heirs.iter().enumerate() {
                let node_id = active[old];
                match comps.len() {
                    0 => {
                        // Extinct: no member survived this level.
                        nodes[node_id].death_lambda = lambda;
                    }
                    1 => {
                        next_active[comps[0]] = node_id;
                    }
                    _ => {
                        // Split: the node dies here and each fragment is a child.
                        nodes[node_id].death_lambda = lambda;
                        for &c in comps {
                            let id = nodes.len();
                            nodes.push(TreeNode {
                                id,
                                parent: Some(node_id),
                                children: Vec::new(),
                                birth_lambda: lambda,
                                death_lambda: *lambda_grid.last().expect("grid is nonempty"),
                                birth_alpha: 0.0,
                                death_alpha: 0.0,
                                members_at_birth: groups[c].clone(),
                            });
                            nodes[node_id].children.push(id);
                            next_active[c] = id;
                        }
                    }
                }
            }
            active = next_active;
        }
        prev_labels = labeling.labels;
    }

    // Fill the content labels once the levels are settled.
    for n in &mut nodes {
        if n.birth_alpha == 0.0 && !n.members_at_birth.is_empty() {
            n.birth_alpha = content_at(model, &densities, n.birth_lambda)?;
        }
        n.death_alpha = content_at(model, &densities, n.death_lambda)?;
    }
    Ok(ClusterTree { lambda_grid: lambda_grid.to_vec(), nodes, roots })
}

/// Why a level failed (or passed) the stability test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityReason {
    Ok,
    CountChanged,
    NestingViolated,
}

#[derive(Clone, Debug, Serialize)]
pub struct StableLevelReport {
    pub lambda: f64,
    pub h: f64,
    pub epsilon: f64,
    pub stable: bool,
    pub reason: StabilityReason,
    /// The level window (lambda - eps, lambda + eps) ran off the grid, so
    /// the verdict only covers the in-grid part.
    pub truncated: bool,
    pub n_components: usize,
}

/// For each grid level, check whether the component count is constant and
/// the components nest consistently over the open window of half-width
/// epsilon around it.
pub fn detect_stable_levels(
    model: &DensityModel,
    points: &PointSet,
    h: f64,
    epsilon: f64,
    lambda_grid: &[f64],
    linking_radius: f64,
) -> Result<Vec<StableLevelReport>> {
    validate_grid(lambda_grid)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "window half-width must be positive and finite"));
    }
    let max_step = lambda_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    if !(max_step < epsilon / 2.0) {
        return Err(Error::invalid(
            "lambda_grid",
            format!("grid step {max_step} must be finer than epsilon/2 = {}", epsilon / 2.0),
        ));
    }
    let densities = model.eval_many(points)?;
    let labelings: Vec<ComponentLabeling> = lambda_grid
        .iter()
        .map(|&lambda| {
            let mask: Vec<bool> = densities.iter().map(|&v| v > lambda).collect();
            connected_components(points, &mask, linking_radius)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(lambda_grid.len());
    for (k, &lambda) in lambda_grid.iter().enumerate() {
        let window: Vec<usize> = (0..lambda_grid.len())
            .filter(|&j| (lambda_grid[j] - lambda).abs() < epsilon)
            .collect();
        let truncated = lambda - epsilon < lambda_grid[0] - 1e-015
            || lambda + epsilon > lambda_grid[lambda_grid.len() - 1] + 1e-015;
        let count = labelings[k].n_components;
        let mut reason = StabilityReason::Ok;
        if window.iter().any(|&j| labelings[j].n_components != count) {
            reason = StabilityReason::CountChanged;
        } else {
            // Counts agree: components at the higher level must map into
            // distinct components at the lower one, for each adjacent pair.
            'pairs: for w in window.windows(2) {
                let (lo, hi) = (&labelings[w[0]], &labelings[w[1]]);
                let mut taken = vec![false; lo.n_components];
                let mut seen = vec![false; hi.n_components];
                for i in 0..points.len() {
                    if let Some(c) = hi.labels[i] {
                        if seen[c] {
                            continue;
                        }
                        seen[c] = true;
                        let under = lo.labels[i]
                            .expect("membership shrinks as the level rises");
                        if taken[under] {
                            reason = StabilityReason::NestingViolated;
                            break 'pairs;
                        }
                        taken[under] = true;
                    }
                }
            }
        }
        out.push(StableLevelReport {
            lambda,
            h,
            epsilon,
            stable: reason == StabilityReason::Ok,
            reason,
            truncated,
            n_components: count,
        });
    }
    Ok(out)
}
