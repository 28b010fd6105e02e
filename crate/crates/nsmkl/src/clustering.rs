//! Kernel k-means over target training samples and softmax membership
//! probabilities for train and query points.
//!
//! Distances to cluster means never leave the RKHS: with Gram matrix K,
//! d²(x, c) = K_xx − (2/|c|)·Σ_{j∈c} K_xj + (1/|c|²)·Σ_{j,l∈c} K_jl.
//! Memberships are p_c(x) = exp(−d²(x,c)/T) / Σ_{c'} exp(−d²(x,c')/T), so
//! nearer clusters get higher probability.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_LLOYD_ITER: usize = 200;

/// Fitted kernel k-means state: hard assignment plus the per-cluster terms
/// needed to evaluate RKHS distances for new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub cluster_count: usize,
    /// Hard assignment, one cluster index per training point.
    pub labels: Vec<usize>,
    /// Training-point indices per cluster; every cluster is non-empty.
    pub members: Vec<Vec<usize>>,
    /// (1/|c|²)·Σ_{j,l∈c} K_jl per cluster.
    pub within_terms: Vec<f64>,
    /// Scale-adaptive softmax temperature: mean squared distance of training
    /// points to their own cluster (1 when that mean degenerates to 0).
    pub temperature: f64,
    /// Which kernel(s) the clustering ran on, for provenance.
    pub base_gram_ref: String,
    pub seed: u64,
    /// Within-cluster objective after each assignment pass of the kept run.
    pub objective_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// n×C one-hot assignment matrix.
    pub fn assignment_matrix(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.labels.len(), self.cluster_count));
        for (i, &c) in self.labels.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        m
    }

    /// The trivial single-cluster model over the given training Gram.
    pub fn single(gram: &Array2<f64>, base_gram_ref: impl Into<String>) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 || gram.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "training gram must be square and non-empty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let labels = vec![0usize; n];
        let members = vec![(0..n).collect::<Vec<_>>()];
        let stats = ClusterStats::compute(gram, &labels, 1);
        let objective = stats.objective(gram, &labels);
        Ok(Self {
            cluster_count: 1,
            labels,
            members,
            within_terms: stats.within_terms.clone(),
            temperature: temperature_from_objective(objective, n),
            base_gram_ref: base_gram_ref.into(),
            seed: 0,
            objective_trace: vec![objective],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_count == 0 {
            return Err(Error::InvalidParam("cluster model has no clusters".into()));
        }
        if self.members.len() != self.cluster_count || self.within_terms.len() != self.cluster_count
        {
            return Err(Error::Internal("cluster model shape mismatch".into()));
        }
        if self.members.iter().any(|m| m.is_empty()) {
            return Err(Error::EmptyClusterCollapse);
        }
        if self.labels.iter().any(|&c| c >= self.cluster_count) {
            return Err(Error::Internal("cluster label out of range".into()));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(Error::InvalidParam(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Soft cluster memberships; rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub probs: Array2<f64>,
}

struct ClusterStats {
    sizes: Vec<usize>,
    within_terms: Vec<f64>,
    /// row_sums[(i, c)] = Σ_{j∈c} K_ij
    row_sums: Array2<f64>,
}

impl ClusterStats {
    fn compute(gram: &Array2<f64>, labels: &[usize], c: usize) -> Self {
        let n = labels.len();
        let mut sizes = vec![0usize; c];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut row_sums = Array2::<f64>::zeros((n, c));
        for i in 0..n {
            for j in 0..n {
                row_sums[(i, labels[j])] += gram[(i, j)];
            }
        }
        let mut within_terms = vec![0.0; c];
        for i in 0..n {
            within_terms[labels[i]] += row_sums[(i, labels[i])];
        }
        for cl in 0..c {
            if sizes[cl] > 0 {
                within_terms[cl] /= (sizes[cl] * sizes[cl]) as f64;
            }
        }
        Self {
            sizes,
            within_terms,
            row_sums,
        }
    }

    fn distance_sq(&self, gram: &Array2<f64>, i: usize, c: usize) -> f64 {
        let size = self.sizes[c] as f64;
        (gram[(i, i)] - 2.0 * self.row_sums[(i, c)] / size + self.within_terms[c]).max(0.0)
    }

    fn objective(&self, gram: &Array2<f64>, labels: &[usize]) -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, &c)| self.distance_sq(gram, i, c))
            .sum()
    }
}

fn temperature_from_objective(objective: f64, n: usize) -> f64 {
    let mean = objective / n as f64;
    if mean > 1e-300 {
        mean
    } else {
        1.0
    }
}

/// Point-to-point squared RKHS distance via the kernel trick.
fn point_distance_sq(gram: &Array2<f64>, i: usize, j: usize) -> f64 {
    (gram[(i, i)] - 2.0 * gram[(i, j)] + gram[(j, j)]).max(0.0)
}

fn seed_indices(gram: &Array2<f64>, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = gram.nrows();
    let mut chosen = Vec::with_capacity(c);
    chosen.push(rng.gen_range(0..n));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| point_distance_sq(gram, i, chosen[0]))
        .collect();
    while chosen.len() < c {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            // all remaining distances vanished; fall back to any unchosen index
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(point_distance_sq(gram, i, next));
        }
    }
    chosen
}

/// One Lloyd run from a k-means++-style seeding. Returns the final labels and
/// the per-iteration objective values, or `None` when a cluster emptied and
/// could not be repaired.
fn lloyd_run(gram: &Array2<f64>, c: usize, rng: &mut ChaCha8Rng) -> Option<(Vec<usize>, Vec<f64>)> {
    let n = gram.nrows();
    let seeds = seed_indices(gram, c, rng);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (cl, &s) in seeds.iter().enumerate() {
                let d = point_distance_sq(gram, i, s);
                if d < best_d {
                    best_d = d;
                    best = cl;
                }
            }
            best
        })
        .collect();
    repair_empty_clusters(gram, &mut labels, c)?;

    let mut objectives = Vec::new();
    for _ in 0..MAX_LLOYD_ITER {
        let stats = ClusterStats::compute(gram, &labels, c);
        objectives.push(stats.objective(gram, &labels));
        let mut next: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = labels[i];
                let mut best_d = stats.distance_sq(gram, i, labels[i]);
                for cl in 0..c {
                    let d = stats.distance_sq(gram, i, cl);
                    if d < best_d {
                        best_d = d;
                        best = cl;
                    }
                }
                best
            })
            .collect();
        repair_empty_clusters(gram, &mut next, c)?;
        if next == labels {
            break;
        }
        labels = next;
    }
    Some((labels, objectives))
}

/// Reseeds each empty cluster at the point farthest from its current cluster.
fn repair_empty_clusters(gram: &Array2<f64>, labels: &mut [usize], c: usize) -> Option<()> {
    for _ in 0..c {
        let stats = ClusterStats::compute(gram, labels, c);
        let empty = match stats.sizes.iter().position(|&s| s == 0) {
            None => return Some(()),
            Some(e) => e,
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            if stats.sizes[l] < 2 {
                continue; // moving the sole member would just shift the hole
            }
            let d = stats.distance_sq(gram, i, l);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        labels[far?] = empty;
    }
    let stats = ClusterStats::compute(gram, labels, c);
    if stats.sizes.iter().all(|&s| s > 0) {
        Some(())
    } else {
        None
    }
}

/// Kernel k-means with distance-weighted seeding; keeps the best of
/// `restarts` runs. Deterministic for a given seed.
pub fn kernel_kmeans(
    gram: &Array2<f64>,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel> {
    let n = gram.nrows();
    if gram.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "training gram must be square and non-empty, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if clusters == 0 {
        return Err(Error::InvalidParam("clusters must be ≥ 1".into()));
    }
    if clusters > n {
        return Err(Error::InvalidParam(format!(
            "clusters ({clusters}) cannot exceed samples ({n})"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidParam("restarts must be ≥ 1".into()));
    }
    if clusters == 1 {
        return ClusterModel::single(gram, "caller-supplied gram");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for _ in 0..restarts {
        let Some((labels, objectives)) = lloyd_run(gram, clusters, &mut rng) else {
            continue;
        };
        let stats = ClusterStats::compute(gram, &labels, clusters);
        let objective = stats.objective(gram, &labels);
        let better = match &best {
            None => true,
            Some((obj, _, _)) => objective < *obj,
        };
        if better {
            best = Some((objective, labels, objectives));
        }
    }
    let (objective, labels, objective_trace) = best.ok_or(Error::EmptyClusterCollapse)?;
    let stats = ClusterStats::compute(gram, &labels, clusters);
    let mut members = vec![Vec::new(); clusters];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let model = ClusterModel {
        cluster_count: clusters,
        labels,
        members,
        within_terms: stats.within_terms,
        temperature: temperature_from_objective(objective, n),
        base_gram_ref: "caller-supplied gram".into(),
        seed,
        objective_trace,
    };
    model.validate()?;
    Ok(model)
}

/// Softmax memberships of query points against a fitted cluster model.
///
/// `gram_query_vs_train` is the m×n kernel between queries and the training
/// points the model was fitted on; `gram_query_diag` holds κ(y,y) per query.
pub fn memberships(
    model: &ClusterModel,
    gram_query_vs_train: &Array2<f64>,
    gram_query_diag: &[f64],
    temperature: f64,
) -> Result<Membership> {
    model.validate()?;
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidParam(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let m = gram_query_vs_train.nrows();
    let n = model.n();
    if gram_query_vs_train.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "query gram has {} columns for {n} training points",
            gram_query_vs_train.ncols()
        )));
    }
    if gram_query_diag.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} diagonal entries for {m} queries",
            gram_query_diag.len()
        )));
    }
    let c = model.cluster_count;
    let mut probs = Array2::<f64>::zeros((m, c));
    let mut d2 = vec![0.0f64; c];
    for y in 0..m {
        for (cl, members) in model.members.iter().enumerate() {
            let mut cross = 0.0;
            for &j in members {
                cross += gram_query_vs_train[(y, j)];
            }
            let size = members.len() as f64;
            d2[cl] =
                (gram_query_diag[y] - 2.0 * cross / size + model.within_terms[cl]).max(0.0);
        }
        let min_d2 = d2.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for cl in 0..c {
            let w = ((min_d2 - d2[cl]) / temperature).exp();
            probs[(y, cl)] = w;
            total += w;
        }
        for cl in 0..c {
            probs[(y, cl)] /= total;
        }
    }
    Ok(Membership { probs })
}

/// Memberships of the training points themselves.
pub fn train_memberships(
    model: &ClusterModel,
    training_gram: &Array2<f64>,
    temperature: f64,
) -> Result<Membership> {
    let diag: Vec<f64> = (0..training_gram.nrows())
        .map(|i| training_gram[(i, i)])
        .collect();
    memberships(model, training_gram, &diag, temperature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};
    use ndarray::array;
    use rand::Rng;

    fn blob_views(seed: u64) -> (Array2<f64>, Vec<usize>) {
        // two far-separated Gaussian-ish blobs, 8 points each
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (label, centre) in [(0usize, -10.0f64), (1usize, 10.0f64)] {
            for _ in 0..8 {
                pts.push([centre + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
                truth.push(label);
            }
        }
        let view = Array2::from_shape_fn((pts.len(), 2), |(i, j)| pts[i][j]);
        (view, truth)
    }

    #[test]
    fn single_cluster_holds_every_point() {
        let view = array![[0.0], [1.0], [5.0]];
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let model = kernel_kmeans(&g.values, 1, 0, 4).unwrap();
        assert_eq!(model.labels, vec![0, 0, 0]);
        assert_eq!(model.members[0].len(), 3);
    }

    #[test]
    fn two_blobs_are_recovered_with_purity_one() {
        let (view, truth) = blob_views(4);
        let g = gram(&view, &view, &KernelSpec::linear(0)).unwrap();
        let model = kernel_kmeans(&g.values, 2, 7, 8).unwrap();
        // assignment equals generating labels up to permutation
        let flips: usize = truth
            .iter()
            .zip(&model.labels)
            .filter(|(t, l)| *t != *l)
            .count();
        let purity = (flips.max(truth.len() - flips)) as f64 / truth.len() as f64;
        assert!((purity - 1.0).abs() < 1e-15, "purity {purity}");
    }

    #[test]
    fn n_clusters_give_singletons_and_zero_objective() {
        let view = array![[0.0], [1.0], [2.0], [3.5]];
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let model = kernel_kmeans(&g.values, 4, 1, 8).unwrap();
        assert!(model.members.iter().all(|m| m.len() == 1));
        let last = model.objective_trace.last().copied().unwrap();
        assert!(last.abs() < 1e-12, "objective {last}");
    }

    #[test]
    fn more_clusters_than_points_is_an_error() {
        let view = array![[0.0], [1.0]];
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        assert!(kernel_kmeans(&g.values, 3, 0, 2).is_err());
    }

    #[test]
    fn fitting_is_deterministic_for_a_seed() {
        let (view, _) = blob_views(11);
        let g = gram(&view, &view, &KernelSpec::rbf(0, 2.0)).unwrap();
        let a = kernel_kmeans(&g.values, 2, 42, 8).unwrap();
        let b = kernel_kmeans(&g.values, 2, 42, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn objective_is_non_increasing_over_iterations() {
        let (view, _) = blob_views(2);
        let g = gram(&view, &view, &KernelSpec::rbf(0, 3.0)).unwrap();
        let model = kernel_kmeans(&g.values, 3, 5, 8).unwrap();
        for w in model.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "objective increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn equidistant_query_gets_uniform_memberships() {
        // two singleton clusters at ±1 on a line, query at the origin
        let view = array![[-1.0], [1.0]];
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let model = kernel_kmeans(&g.values, 2, 0, 4).unwrap();
        let query = array![[0.0]];
        let q = gram(&query, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let mem = memberships(&model, &q.values, &[1.0], model.temperature).unwrap();
        assert!((mem.probs[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((mem.probs[(0, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vanishing_temperature_gives_one_hot_membership() {
        let view = array![[-1.0], [1.0]];
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let model = kernel_kmeans(&g.values, 2, 0, 4).unwrap();
        let query = array![[-0.8]];
        let q = gram(&query, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let qd = [1.0];
        let mem = memberships(&model, &q.values, &qd, 1e-9).unwrap();
        let near = model.labels[0]; // cluster containing the point at -1
        assert!((mem.probs[(0, near)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_two_cluster_softmax() {
        // linear kernel on training points {0, 1}: query 0 sits at squared
        // distance 0 from the {0} cluster and 1 from the {1} cluster.
        let model = ClusterModel {
            cluster_count: 2,
            labels: vec![0, 1],
            members: vec![vec![0], vec![1]],
            within_terms: vec![0.0, 1.0],
            temperature: 1.0,
            base_gram_ref: "linear test gram".into(),
            seed: 0,
            objective_trace: vec![0.0],
        };
        let q = array![[0.0, 0.0]];
        let mem = memberships(&model, &q, &[0.0], 1.0).unwrap();
        assert!((mem.probs[(0, 0)] - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((mem.probs[(0, 1)] - 0.268_941_421_369_995_1).abs() < 1e-15);
    }

    #[test]
    fn membership_rows_sum_to_one() {
        let (view, _) = blob_views(8);
        let g = gram(&view, &view, &KernelSpec::rbf(0, 2.0)).unwrap();
        let model = kernel_kmeans(&g.values, 3, 3, 8).unwrap();
        let mem = train_memberships(&model, &g.values, model.temperature).unwrap();
        for row in mem.probs.rows() {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        // membership energy never exceeds the sample count
        let energy: f64 = mem.probs.iter().map(|v| v * v).sum();
        assert!(energy <= view.nrows() as f64 + 1e-9);
    }

    #[test]
    fn non_positive_temperature_is_rejected() {
        let view = array![[-1.0], [1.0]];
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let model = kernel_kmeans(&g.values, 2, 0, 4).unwrap();
        assert!(memberships(&model, &g.values, &[1.0, 1.0], 0.0).is_err());
    }
}
