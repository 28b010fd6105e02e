//! The trained classifier: fitting pipeline, null-space projection of
//! queries, and thresholded decisions.
//!
//! A query y scores
//!
//! ```text
//! f(y) = Σ_c p_c(y) · Σ_g μ_cg · [κ_g(y,x_1)p_c(x_1), …, κ_g(y,x_n)p_c(x_n)] λ
//! ```
//!
//! Targets are pulled towards 1 during training while non-targets land near
//! the null space around 0, so the raw score with "larger = more target-like"
//! is the default decision statistic; `ScoreMode::OneDistance` scores
//! proximity to 1 instead.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusterModel};
use crate::dataio::{FeatureDataset, MklConfig};
use crate::kernels::{
    average_gram, build_localised_stack, gram, precomputed_gram, rbf_width, GramMatrix,
    KernelKind, KernelSpec, LocalisedKernelStack,
};
use crate::solver::{self, DualVector, SolveTrace, WeightVector};
use crate::{Error, Result};

/// What the scores CSV carries: the raw projection value, or its negated
/// distance to the training target 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    Raw,
    OneDistance,
}

impl ScoreMode {
    pub fn apply(&self, score: f64) -> f64 {
        match self {
            ScoreMode::Raw => score,
            ScoreMode::OneDistance => -(score - 1.0).abs(),
        }
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ScoreMode::Raw),
            "one-distance" => Ok(ScoreMode::OneDistance),
            other => Err(Error::InvalidParam(format!(
                "unknown score mode {other:?}; expected raw or one-distance"
            ))),
        }
    }
}

/// Immutable trained model; all fields are fixed at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: MklConfig,
    pub kernel_specs: Vec<KernelSpec>,
    pub sample_ids: Vec<String>,
    /// Retained feature views; empty when the kernels are precomputed.
    pub train_views: Vec<Array2<f64>>,
    /// Retained training Grams for precomputed kernels.
    pub train_grams: Option<Vec<Array2<f64>>>,
    /// Softmax memberships of the training points, n×C.
    pub memberships: Array2<f64>,
    pub cluster: ClusterModel,
    pub mu: WeightVector,
    pub lambda: DualVector,
    pub trace: SolveTrace,
}

/// Scores for a batch of queries, one row per query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub sample_ids: Vec<String>,
    pub scores: Vec<f64>,
    /// `Some` once a threshold has been applied; true = target.
    pub decisions: Option<Vec<bool>>,
}

impl TrainedModel {
    pub fn n(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn view_count(&self) -> usize {
        self.kernel_specs.len()
    }

    pub fn is_precomputed(&self) -> bool {
        self.kernel_specs
            .iter()
            .any(|s| s.kind == KernelKind::Precomputed)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::NotTrained("no training samples".into()));
        }
        if self.lambda.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "λ has {} entries for {n} samples",
                self.lambda.len()
            )));
        }
        if self.memberships.nrows() != n
            || self.memberships.ncols() != self.cluster.cluster_count
        {
            return Err(Error::DimensionMismatch(
                "membership matrix does not match cluster model".into(),
            ));
        }
        if self.mu.cluster_count() != self.cluster.cluster_count
            || self.mu.kernels_per_cluster() != self.kernel_specs.len()
        {
            return Err(Error::DimensionMismatch(
                "weight blocking does not match clusters and kernels".into(),
            ));
        }
        if self.is_precomputed() {
            match &self.train_grams {
                Some(grams) if grams.len() == self.kernel_specs.len() => {}
                _ => {
                    return Err(Error::NotTrained(
                        "precomputed model must retain its training grams".into(),
                    ))
                }
            }
        } else if self.train_views.len() != self.kernel_specs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} views for {} kernel specs",
                self.train_views.len(),
                self.kernel_specs.len()
            )));
        }
        self.cluster.validate()?;
        Ok(())
    }

    /// Recomputes the training Grams from the retained state.
    pub fn training_grams(&self) -> Result<Vec<GramMatrix>> {
        if let Some(grams) = &self.train_grams {
            return grams
                .iter()
                .zip(&self.kernel_specs)
                .map(|(values, spec)| {
                    Ok(GramMatrix {
                        values: values.clone(),
                        spec: spec.clone(),
                    })
                })
                .collect();
        }
        self.kernel_specs
            .iter()
            .enumerate()
            .map(|(g, spec)| gram(&self.train_views[g], &self.train_views[g], spec))
            .collect()
    }

    /// Rebuilds the localised kernel stack the model was trained on.
    pub fn rebuild_stack(&self) -> Result<LocalisedKernelStack> {
        let grams = self.training_grams()?;
        build_localised_stack(&grams, &self.memberships)
    }

    /// Scores queries given as feature views matching the training views.
    pub fn project(&self, queries: &FeatureDataset) -> Result<ScoreReport> {
        self.validate()?;
        if self.is_precomputed() {
            return Err(Error::InvalidParam(
                "model uses precomputed kernels; call project_precomputed with query grams".into(),
            ));
        }
        if queries.view_count() != self.view_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} query views for {} training views",
                queries.view_count(),
                self.view_count()
            )));
        }
        queries.validate()?;
        let mut query_grams = Vec::with_capacity(self.view_count());
        let mut query_diags = Vec::with_capacity(self.view_count());
        for (g, spec) in self.kernel_specs.iter().enumerate() {
            let train_view = &self.train_views[g];
            let query_view = &queries.views[g];
            if query_view.ncols() != train_view.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "view {g}: query has {} features, training had {}",
                    query_view.ncols(),
                    train_view.ncols()
                )));
            }
            query_grams.push(gram(query_view, train_view, spec)?.values);
            query_diags.push(self_kernel_diag(query_view, spec));
        }
        self.project_rows(&query_grams, &query_diags, queries.sample_ids.clone())
    }

    /// Scores queries given as precomputed m×n kernel rows per view plus the
    /// per-view self-kernel values κ_g(y,y).
    pub fn project_precomputed(
        &self,
        query_grams: &[Array2<f64>],
        query_diags: &[Vec<f64>],
        sample_ids: Vec<String>,
    ) -> Result<ScoreReport> {
        self.validate()?;
        if query_grams.len() != self.view_count() || query_diags.len() != self.view_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} query grams / {} diags for {} views",
                query_grams.len(),
                query_diags.len(),
                self.view_count()
            )));
        }
        self.project_rows(query_grams, query_diags, sample_ids)
    }

    fn project_rows(
        &self,
        query_grams: &[Array2<f64>],
        query_diags: &[Vec<f64>],
        sample_ids: Vec<String>,
    ) -> Result<ScoreReport> {
        let n = self.n();
        let m = sample_ids.len();
        for (g, q) in query_grams.iter().enumerate() {
            if q.nrows() != m || q.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "query gram {g} is {}x{}, expected {m}x{n}",
                    q.nrows(),
                    q.ncols()
                )));
            }
            if query_diags[g].len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "query diag {g} has {} entries for {m} queries",
                    query_diags[g].len()
                )));
            }
        }

        // memberships of the queries on the clustering kernel (uniform view average)
        let probs = if self.cluster.cluster_count == 1 {
            Array2::from_elem((m, 1), 1.0)
        } else {
            let mut avg_gram = Array2::<f64>::zeros((m, n));
            for q in query_grams {
                avg_gram += q;
            }
            avg_gram /= query_grams.len() as f64;
            let mut avg_diag = vec![0.0f64; m];
            for diag in query_diags {
                for (slot, v) in avg_diag.iter_mut().zip(diag) {
                    *slot += v;
                }
            }
            for v in avg_diag.iter_mut() {
                *v /= query_diags.len() as f64;
            }
            clustering::memberships(&self.cluster, &avg_gram, &avg_diag, self.cluster.temperature)?
                .probs
        };

        // score contribution of pair (c,g) for query y: μ_cg · Σ_i Q_g[y,i]·p_c(x_i)·λ_i
        let c_count = self.cluster.cluster_count;
        let mut scores = vec![0.0f64; m];
        for c in 0..c_count {
            let weighted_train: Array1<f64> = Array1::from_shape_fn(n, |i| {
                self.memberships[(i, c)] * self.lambda.values()[i]
            });
            for (g, q) in query_grams.iter().enumerate() {
                let w = self.mu.weight(c, g);
                if w == 0.0 {
                    continue;
                }
                let projected = q.dot(&weighted_train);
                for (y, slot) in scores.iter_mut().enumerate() {
                    *slot += probs[(y, c)] * w * projected[y];
                }
            }
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Internal("non-finite score".into()));
        }
        Ok(ScoreReport {
            sample_ids,
            scores,
            decisions: None,
        })
    }
}

fn self_kernel_diag(view: &Array2<f64>, spec: &KernelSpec) -> Vec<f64> {
    match spec.kind {
        KernelKind::Rbf => vec![1.0; view.nrows()],
        KernelKind::Linear => view.rows().into_iter().map(|r| r.dot(&r)).collect(),
        KernelKind::Precomputed => unreachable!("precomputed diag is caller-supplied"),
    }
}

/// Labels a report: target iff score ≥ threshold.
pub fn decide(report: &ScoreReport, threshold: f64) -> ScoreReport {
    let decisions = report.scores.iter().map(|&s| s >= threshold).collect();
    ScoreReport {
        sample_ids: report.sample_ids.clone(),
        scores: report.scores.clone(),
        decisions: Some(decisions),
    }
}

/// Fits with RBF kernels per view, widths set to half the mean pairwise
/// distance of each view.
pub fn fit(train: &FeatureDataset, cfg: &MklConfig) -> Result<TrainedModel> {
    let specs = train
        .views
        .iter()
        .enumerate()
        .map(|(g, view)| Ok(KernelSpec::rbf(g, rbf_width(view)?)))
        .collect::<Result<Vec<_>>>()?;
    fit_with_specs(train, &specs, cfg)
}

/// Fits with explicit kernel specs (one per view, in view order).
pub fn fit_with_specs(
    train: &FeatureDataset,
    specs: &[KernelSpec],
    cfg: &MklConfig,
) -> Result<TrainedModel> {
    train.validate()?;
    cfg.validate()?;
    if specs.len() != train.view_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} kernel specs for {} views",
            specs.len(),
            train.view_count()
        )));
    }
    if specs.iter().any(|s| s.kind == KernelKind::Precomputed) {
        return Err(Error::InvalidParam(
            "use fit_precomputed for precomputed kernels".into(),
        ));
    }
    let grams = specs
        .iter()
        .enumerate()
        .map(|(g, spec)| gram(&train.views[g], &train.views[g], spec))
        .collect::<Result<Vec<_>>>()?;
    let model = fit_on_grams(&grams, train.sample_ids.clone(), cfg)?;
    let model = TrainedModel {
        train_views: train.views.clone(),
        train_grams: None,
        ..model
    };
    model.validate()?;
    Ok(model)
}

/// Fits on externally supplied training Grams (validated for symmetry/PSD).
pub fn fit_precomputed(
    grams: Vec<Array2<f64>>,
    sample_ids: Vec<String>,
    cfg: &MklConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let wrapped = grams
        .into_iter()
        .enumerate()
        .map(|(g, values)| precomputed_gram(values, g))
        .collect::<Result<Vec<_>>>()?;
    let model = fit_on_grams(&wrapped, sample_ids, cfg)?;
    let model = TrainedModel {
        train_grams: Some(wrapped.into_iter().map(|g| g.values).collect()),
        ..model
    };
    model.validate()?;
    Ok(model)
}

fn fit_on_grams(
    grams: &[GramMatrix],
    sample_ids: Vec<String>,
    cfg: &MklConfig,
) -> Result<TrainedModel> {
    let n = sample_ids.len();
    if grams.is_empty() || n == 0 {
        return Err(Error::InvalidParam("nothing to fit".into()));
    }
    if grams[0].values.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "grams are {}x{} but there are {n} sample ids",
            grams[0].values.nrows(),
            grams[0].values.ncols()
        )));
    }
    if cfg.regime == crate::dataio::Regime::SingleKernel && grams.len() != 1 {
        return Err(Error::InvalidParam(format!(
            "single-kernel regime expects one view, got {}",
            grams.len()
        )));
    }

    let clustering_gram = average_gram(grams)?;
    let gram_ref = format!("uniform-average({} views)", grams.len());
    let effective_clusters = if cfg.regime.is_global() { 1 } else { cfg.clusters };
    let mut cluster = if effective_clusters == 1 {
        ClusterModel::single(&clustering_gram, gram_ref)?
    } else {
        if effective_clusters > n {
            return Err(Error::InvalidParam(format!(
                "clusters ({effective_clusters}) cannot exceed samples ({n})"
            )));
        }
        let mut model = clustering::kernel_kmeans(
            &clustering_gram,
            effective_clusters,
            cfg.rng_seed,
            cfg.kmeans_restarts,
        )?;
        model.base_gram_ref = gram_ref;
        model
    };
    if let Some(t) = cfg.temperature {
        cluster.temperature = t;
    }

    let memberships = if cluster.cluster_count == 1 {
        Array2::from_elem((n, 1), 1.0)
    } else {
        clustering::train_memberships(&cluster, &clustering_gram, cluster.temperature)?.probs
    };

    let stack = build_localised_stack(grams, &memberships)?;
    let outcome = solver::train(&stack, cfg)?;

    let model = TrainedModel {
        config: cfg.clone(),
        kernel_specs: grams.iter().map(|g| g.spec.clone()).collect(),
        sample_ids,
        train_views: Vec::new(),
        train_grams: None,
        memberships,
        cluster,
        mu: outcome.mu,
        lambda: outcome.lambda,
        trace: outcome.trace,
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Regime;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(seed: u64, n: usize, views: usize) -> FeatureDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views = (0..views)
            .map(|_| Array2::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0)))
            .collect();
        FeatureDataset {
            views,
            sample_ids: (0..n).map(|i| format!("s{i}")).collect(),
            labels: None,
        }
    }

    #[test]
    fn scalar_model_with_tiny_delta_scores_its_point_near_one() {
        let train = FeatureDataset {
            views: vec![array![[0.3, -0.2]]],
            sample_ids: vec!["only".into()],
            labels: None,
        };
        let mut cfg = MklConfig::new(2.0, 2.0, 1e-9);
        cfg.clusters = 1;
        cfg.regime = Regime::SingleKernel;
        let specs = [KernelSpec::rbf(0, 1.0)];
        let model = fit_with_specs(&train, &specs, &cfg).unwrap();
        let report = model.project(&train).unwrap();
        // f(x₁) = κ(x₁,x₁)/(δ+1) = 1/(1+δ)
        assert!((report.scores[0] - 1.0 / (1.0 + 1e-9)).abs() < 1e-12);
    }

    #[test]
    fn query_equal_to_training_point_reproduces_kernel_row_projection() {
        let train = toy_dataset(3, 8, 1);
        let mut cfg = MklConfig::new(2.0, 2.0, 0.5);
        cfg.clusters = 1;
        cfg.regime = Regime::SingleKernel;
        let model = fit(&train, &cfg).unwrap();
        let query = FeatureDataset {
            views: vec![train.views[0].slice(ndarray::s![0..1, ..]).to_owned()],
            sample_ids: vec!["q".into()],
            labels: None,
        };
        let report = model.project(&query).unwrap();
        let g = gram(&train.views[0], &train.views[0], &model.kernel_specs[0]).unwrap();
        let want: f64 = g
            .values
            .row(0)
            .iter()
            .zip(model.lambda.values())
            .map(|(k, l)| k * l)
            .sum();
        assert!((report.scores[0] - want).abs() < 1e-12);
    }

    #[test]
    fn score_decomposes_linearly_over_weight_entries() {
        let train = toy_dataset(5, 10, 2);
        let mut cfg = MklConfig::new(2.0, 2.0, 1.0);
        cfg.clusters = 2;
        let model = fit(&train, &cfg).unwrap();
        let queries = toy_dataset(6, 4, 2);
        let full = model.project(&queries).unwrap();
        let c = model.cluster.cluster_count;
        let g = model.view_count();
        let mut recombined = vec![0.0f64; queries.n()];
        for cl in 0..c {
            for view in 0..g {
                let mut single = model.clone();
                let mut raw = Array1::<f64>::zeros(c * g);
                raw[cl * g + view] = 1.0;
                single.mu = WeightVector::new(raw, c, g).unwrap();
                let part = single.project(&queries).unwrap();
                let w = model.mu.weight(cl, view);
                for (acc, p) in recombined.iter_mut().zip(part.scores) {
                    *acc += w * p;
                }
            }
        }
        for (a, b) in full.scores.iter().zip(recombined) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn identical_inputs_give_bitwise_identical_scores() {
        let train = toy_dataset(9, 12, 2);
        let mut cfg = MklConfig::new(2.0, 4.0 / 3.0, 2.0);
        cfg.clusters = 2;
        let model = fit(&train, &cfg).unwrap();
        let queries = toy_dataset(10, 5, 2);
        let a = model.project(&queries).unwrap();
        let b = model.project(&queries).unwrap();
        for (x, y) in a.scores.iter().zip(b.scores.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn training_scores_concentrate_near_one_for_small_delta() {
        let train = toy_dataset(12, 20, 2);
        let mut cfg = MklConfig::new(2.0, 2.0, 1e-3 * 20.0);
        cfg.clusters = 2;
        let model = fit(&train, &cfg).unwrap();
        let report = model.project(&train).unwrap();
        let mean = report.scores.iter().sum::<f64>() / report.scores.len() as f64;
        assert!((mean - 1.0).abs() < 0.15, "mean training score {mean}");
    }

    #[test]
    fn permuting_cluster_indices_leaves_scores_unchanged() {
        let train = toy_dataset(20, 12, 2);
        let mut cfg = MklConfig::new(2.0, 2.0, 1.2);
        cfg.clusters = 3;
        let model = fit(&train, &cfg).unwrap();
        let c = model.cluster.cluster_count;
        let g = model.view_count();
        assert_eq!(c, 3);
        let perm = [2usize, 0, 1]; // cluster c becomes perm[c]
        let mut permuted = model.clone();
        for (old, &new) in perm.iter().enumerate() {
            permuted.cluster.members[new] = model.cluster.members[old].clone();
            permuted.cluster.within_terms[new] = model.cluster.within_terms[old];
            for i in 0..model.n() {
                permuted.memberships[(i, new)] = model.memberships[(i, old)];
            }
        }
        for (i, &l) in model.cluster.labels.iter().enumerate() {
            permuted.cluster.labels[i] = perm[l];
        }
        let mut raw = Array1::<f64>::zeros(c * g);
        for old in 0..c {
            for view in 0..g {
                raw[perm[old] * g + view] = model.mu.weight(old, view);
            }
        }
        permuted.mu = WeightVector::new(raw, c, g).unwrap();

        let queries = toy_dataset(21, 6, 2);
        let a = model.project(&queries).unwrap();
        let b = permuted.project(&queries).unwrap();
        for (x, y) in a.scores.iter().zip(b.scores.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn decide_labels_by_threshold() {
        let report = ScoreReport {
            sample_ids: vec!["a".into(), "b".into()],
            scores: vec![0.9, 0.1],
            decisions: None,
        };
        let labeled = decide(&report, 0.5);
        assert_eq!(labeled.decisions, Some(vec![true, false]));
        let all_target = decide(&report, f64::NEG_INFINITY);
        assert_eq!(all_target.decisions, Some(vec![true, true]));
    }

    #[test]
    fn decisions_at_the_dev_eer_threshold_reproduce_hter_error_rates() {
        use crate::metrics::{eer_threshold, hter, EvalSet, Orientation};
        use crate::synth::{locality_dataset, LocalitySpec};

        let (train, dev_data) = locality_dataset(&LocalitySpec::default().with_seed(41)).unwrap();
        let (_, test_data) = locality_dataset(&LocalitySpec::default().with_seed(42)).unwrap();
        let mut cfg = MklConfig::new(2.0, 2.0, 0.1 * train.n() as f64);
        cfg.clusters = 3;
        let model = fit(&train, &cfg).unwrap();

        let dev = EvalSet::new(
            model.project(&dev_data).unwrap().scores,
            dev_data.labels.clone().unwrap(),
        )
        .unwrap();
        let test_scores = model.project(&test_data).unwrap();
        let test_labels = test_data.labels.clone().unwrap();
        let test = EvalSet::new(test_scores.scores.clone(), test_labels.clone()).unwrap();

        let point = eer_threshold(&dev, Orientation::HigherIsTarget).unwrap();
        let report = hter(&dev, &test, Orientation::HigherIsTarget).unwrap();

        // label with decide() at the same threshold and recount the rates
        let decided = decide(&test_scores, point.threshold);
        let decisions = decided.decisions.unwrap();
        let mut frr = 0.0;
        let mut far = 0.0;
        let mut targets = 0.0;
        let mut nontargets = 0.0;
        for (accepted, label) in decisions.iter().zip(&test_labels) {
            if label.target {
                targets += 1.0;
                if !accepted {
                    frr += 1.0;
                }
            } else {
                nontargets += 1.0;
                if *accepted {
                    far += 1.0;
                }
            }
        }
        assert_eq!(report.frr, frr / targets);
        assert_eq!(report.far, far / nontargets);
        assert_eq!(report.hter, (frr / targets + far / nontargets) / 2.0);
    }

    #[test]
    fn score_mode_one_distance_prefers_scores_near_one() {
        let m = ScoreMode::OneDistance;
        assert!(m.apply(1.0) > m.apply(0.4));
        assert!(m.apply(0.9) > m.apply(1.3));
        assert_eq!(ScoreMode::Raw.apply(0.37), 0.37);
    }

    #[test]
    fn single_kernel_regime_rejects_multiple_views() {
        let train = toy_dataset(7, 8, 2);
        let mut cfg = MklConfig::new(2.0, 2.0, 1.0);
        cfg.regime = Regime::SingleKernel;
        assert!(fit(&train, &cfg).is_err());
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let train = toy_dataset(1, 8, 2);
        let mut cfg = MklConfig::new(2.0, 2.0, 1.0);
        cfg.clusters = 2;
        let model = fit(&train, &cfg).unwrap();
        let wrong_views = toy_dataset(2, 4, 1);
        assert!(model.project(&wrong_views).is_err());
        let mut wrong_dim = toy_dataset(2, 4, 2);
        wrong_dim.views[1] = Array2::zeros((4, 7));
        assert!(model.project(&wrong_dim).is_err());
    }

    #[test]
    fn precomputed_round_trip_scores_queries() {
        let train = toy_dataset(30, 9, 2);
        let specs = [KernelSpec::rbf(0, 1.0), KernelSpec::rbf(1, 2.0)];
        let grams: Vec<Array2<f64>> = specs
            .iter()
            .enumerate()
            .map(|(g, s)| gram(&train.views[g], &train.views[g], s).unwrap().values)
            .collect();
        let mut cfg = MklConfig::new(2.0, 2.0, 1.0);
        cfg.clusters = 2;
        let pre = fit_precomputed(grams, train.sample_ids.clone(), &cfg).unwrap();
        assert!(pre.is_precomputed());

        let queries = toy_dataset(31, 4, 2);
        let q_grams: Vec<Array2<f64>> = specs
            .iter()
            .enumerate()
            .map(|(g, s)| gram(&queries.views[g], &train.views[g], s).unwrap().values)
            .collect();
        let q_diags: Vec<Vec<f64>> = vec![vec![1.0; queries.n()], vec![1.0; queries.n()]];
        let report = pre
            .project_precomputed(&q_grams, &q_diags, queries.sample_ids.clone())
            .unwrap();

        // must match the feature-space model built from the same kernels
        let reference = fit_with_specs(&train, &specs, &cfg).unwrap();
        let want = reference.project(&queries).unwrap();
        for (a, b) in report.scores.iter().zip(want.scores.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
