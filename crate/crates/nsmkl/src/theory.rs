//! Numeric Rademacher-complexity diagnostics for the four regularisation
//! regimes, the ‖λ‖₂ bound check, and the generalisation-bound assembly.
//!
//! The complexity bound for the localised joint matrix-norm class is
//!
//! ```text
//! (Λ·r/n) · (CG)^{1/2 − 1/(4p) − 1/(4q)} · √(Σ_c Σ_i p_c²(x_i))
//! ```
//!
//! Other regimes differ only through the cap they put on Σ_cg μ_cg, which
//! enters the bound under a square root. These are diagnostics: the module
//! computes bounds, it does not certify them.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Regime;
use crate::kernels::lp_norm;
use crate::model::TrainedModel;
use crate::solver::compute_u;
use crate::{Error, Result};

/// Inputs to the bound computations.
///
/// `lambda_radius` is the Ivanov radius Λ. It is not directly observable from
/// a trained model; [`BoundInput::from_model`] uses the empirical surrogate
/// Λ̂ = √(λᵀKλ) actually attained by the trained dual vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    pub clusters: usize,
    pub kernels: usize,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub lambda_radius: f64,
    /// r with κ(x,x) ≤ r² over the training set.
    pub kernel_bound: f64,
    /// Σ_c Σ_i p_c²(x_i); at most n for probability-vector rows.
    pub membership_energy: f64,
    pub delta: f64,
}

impl BoundInput {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.kernels == 0 || self.n == 0 {
            return Err(Error::InvalidParam("counts must be positive".into()));
        }
        if self.p < 1.0 || self.q < 1.0 {
            return Err(Error::InvalidParam("p and q must be ≥ 1".into()));
        }
        let positives = [
            self.lambda_radius,
            self.kernel_bound,
            self.membership_energy,
            self.delta,
        ];
        if positives.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParam(
                "radius, kernel bound, energy, and delta must be positive".into(),
            ));
        }
        if self.membership_energy > self.n as f64 + 1e-9 {
            return Err(Error::InvalidParam(format!(
                "membership energy {} exceeds n={}",
                self.membership_energy, self.n
            )));
        }
        Ok(())
    }

    /// Extracts bound inputs from a trained model, using the attained
    /// Λ̂ = √(λᵀKλ) as an empirical surrogate for the Ivanov radius.
    pub fn from_model(model: &TrainedModel) -> Result<Self> {
        model.validate()?;
        let stack = model.rebuild_stack()?;
        let u = compute_u(&stack, &model.lambda)?;
        let attained: f64 = model
            .mu
            .values()
            .iter()
            .zip(u.iter())
            .map(|(m, v)| m * v)
            .sum();
        let grams = model.training_grams()?;
        let max_self = grams
            .iter()
            .flat_map(|g| (0..g.values.nrows()).map(|i| g.values[(i, i)]))
            .fold(0.0f64, f64::max);
        let energy: f64 = model.memberships.iter().map(|v| v * v).sum();
        let input = Self {
            clusters: model.cluster.cluster_count,
            kernels: model.view_count(),
            p: model.config.p,
            q: model.config.q,
            n: model.n(),
            lambda_radius: attained.max(f64::MIN_POSITIVE).sqrt(),
            kernel_bound: max_self.max(f64::MIN_POSITIVE).sqrt(),
            membership_energy: energy,
            delta: model.config.delta,
        };
        input.validate()?;
        Ok(input)
    }
}

/// Bound values per regularisation regime plus the Prop-style ratio factors
/// of the joint matrix-norm bound against each alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub joint_matrix: f64,
    pub joint_vector: f64,
    pub disjoint_vector: f64,
    pub disjoint_matrix: f64,
    pub ratio_joint_vector: f64,
    pub ratio_disjoint_vector: f64,
    pub ratio_disjoint_matrix: f64,
    /// √n/δ, the a-priori cap on ‖λ‖₂.
    pub lambda_norm_bound: f64,
}

/// Cap on Σ_cg μ_cg over the regime's feasible set.
pub fn weight_sum_cap(regime: Regime, p: f64, q: f64, clusters: usize, kernels: usize) -> f64 {
    let c = clusters as f64;
    let g = kernels as f64;
    let total = c * g;
    match regime {
        Regime::JointMatrix | Regime::NonLocalised | Regime::SingleKernel => {
            total.powf(1.0 - 1.0 / (2.0 * p) - 1.0 / (2.0 * q))
        }
        Regime::JointVector => total.powf(1.0 - 1.0 / p),
        Regime::DisjointVector => c * g.powf(1.0 - 1.0 / p),
        Regime::DisjointMatrix => c * g.powf(1.0 - 1.0 / (2.0 * p) - 1.0 / (2.0 * q)),
    }
}

/// Complexity bound of the localised joint matrix-norm class.
pub fn rademacher_bound(input: &BoundInput) -> Result<f64> {
    input.validate()?;
    let cg = (input.clusters * input.kernels) as f64;
    let exponent = 0.5 - 1.0 / (4.0 * input.p) - 1.0 / (4.0 * input.q);
    Ok(input.lambda_radius * input.kernel_bound / input.n as f64
        * cg.powf(exponent)
        * input.membership_energy.sqrt())
}

fn bound_for_cap(input: &BoundInput, cap: f64) -> f64 {
    input.lambda_radius * input.kernel_bound / input.n as f64
        * cap.sqrt()
        * input.membership_energy.sqrt()
}

/// Bounds for all four regimes plus ratio factors. For q ≤ p the joint
/// matrix-norm bound must be the smallest; a violation indicates a formula
/// bug and reports as an internal error.
pub fn regime_bounds(input: &BoundInput) -> Result<BoundReport> {
    input.validate()?;
    let (c, g) = (input.clusters, input.kernels);
    let (p, q) = (input.p, input.q);
    let joint_matrix = bound_for_cap(input, weight_sum_cap(Regime::JointMatrix, p, q, c, g));
    let joint_vector = bound_for_cap(input, weight_sum_cap(Regime::JointVector, p, q, c, g));
    let disjoint_vector = bound_for_cap(input, weight_sum_cap(Regime::DisjointVector, p, q, c, g));
    let disjoint_matrix = bound_for_cap(input, weight_sum_cap(Regime::DisjointMatrix, p, q, c, g));

    let cg = (c * g) as f64;
    let cf = c as f64;
    let gf = g as f64;
    let e = 1.0 / (4.0 * p) - 1.0 / (4.0 * q);
    let shrink = -1.0 / (4.0 * p) - 1.0 / (4.0 * q);
    let report = BoundReport {
        joint_matrix,
        joint_vector,
        disjoint_vector,
        disjoint_matrix,
        ratio_joint_vector: cg.powf(e),
        ratio_disjoint_vector: cf.powf(shrink) * gf.powf(e),
        ratio_disjoint_matrix: cf.powf(shrink),
        lambda_norm_bound: (input.n as f64).sqrt() / input.delta,
    };
    if q <= p {
        let slack = 1e-12 * joint_matrix.max(1.0);
        for (name, other) in [
            ("joint-vector", joint_vector),
            ("disjoint-vector", disjoint_vector),
            ("disjoint-matrix", disjoint_matrix),
        ] {
            if joint_matrix > other + slack {
                return Err(Error::Internal(format!(
                    "bound ordering violated: joint-matrix {joint_matrix} > {name} {other}"
                )));
            }
        }
    }
    Ok(report)
}

/// Outcome of sampling feasible weight vectors against the analytic cap on
/// their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSumReport {
    pub cap: f64,
    pub max_observed: f64,
    pub uniform_sum: f64,
    pub trials: usize,
}

/// Samples `trials` weight vectors on the regime's constraint surface and
/// verifies none exceeds the analytic cap on Σμ (a violation is a formula
/// bug). Returns the observed maximum together with the uniform point's sum,
/// which attains the cap exactly.
pub fn empirical_weight_sums(
    regime: Regime,
    p: f64,
    q: f64,
    clusters: usize,
    kernels: usize,
    trials: usize,
    seed: u64,
) -> Result<WeightSumReport> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be ≥ 1".into()));
    }
    if p < 1.0 || q < 1.0 {
        return Err(Error::InvalidParam("p and q must be ≥ 1".into()));
    }
    if clusters == 0 || kernels == 0 {
        return Err(Error::InvalidParam("counts must be positive".into()));
    }
    let cap = weight_sum_cap(regime, p, q, clusters, kernels);
    let total = clusters * kernels;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_observed = 0.0f64;
    for _ in 0..trials {
        let raw = Array1::from_shape_fn(total, |_| rng.gen_range(1e-6..1.0f64));
        let mu = project_to_surface(regime, &raw, p, q, clusters, kernels)?;
        let sum: f64 = mu.iter().sum();
        if sum > cap + 1e-10 {
            return Err(Error::Internal(format!(
                "feasible weight sum {sum} exceeds cap {cap}"
            )));
        }
        max_observed = max_observed.max(sum);
    }
    let uniform = project_to_surface(
        regime,
        &Array1::from_elem(total, 1.0),
        p,
        q,
        clusters,
        kernels,
    )?;
    let uniform_sum: f64 = uniform.iter().sum();
    Ok(WeightSumReport {
        cap,
        max_observed,
        uniform_sum,
        trials,
    })
}

/// Scales a nonnegative vector onto the regime's constraint surface.
fn project_to_surface(
    regime: Regime,
    raw: &Array1<f64>,
    p: f64,
    q: f64,
    clusters: usize,
    kernels: usize,
) -> Result<Array1<f64>> {
    let mut mu = raw.clone();
    match regime {
        Regime::JointMatrix | Regime::NonLocalised | Regime::SingleKernel => {
            let t = (lp_norm(&mu, p)? * lp_norm(&mu, q)?).sqrt();
            mu.mapv_inplace(|v| v / t);
        }
        Regime::JointVector => {
            let t = lp_norm(&mu, p)?;
            mu.mapv_inplace(|v| v / t);
        }
        Regime::DisjointVector | Regime::DisjointMatrix => {
            for c in 0..clusters {
                let span = ndarray::s![c * kernels..(c + 1) * kernels];
                let block = mu.slice(span).to_owned();
                let t = if regime == Regime::DisjointVector {
                    lp_norm(&block, p)?
                } else {
                    (lp_norm(&block, p)? * lp_norm(&block, q)?).sqrt()
                };
                mu.slice_mut(span).mapv_inplace(|v| v / t);
            }
        }
    }
    Ok(mu)
}

/// ‖λ‖₂ against its a-priori cap √n/δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaNormDiagnostic {
    pub lambda_l2: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn lambda_norm_check(model: &TrainedModel) -> Result<LambdaNormDiagnostic> {
    model.validate()?;
    let lambda_l2 = model.lambda.l2_norm();
    let bound = (model.n() as f64).sqrt() / model.config.delta;
    Ok(LambdaNormDiagnostic {
        lambda_l2,
        bound,
        pass: lambda_l2 <= bound + 1e-9,
    })
}

/// Three-term generalisation bound: empirical loss + complexity term +
/// 3·B_l·√(ln(2/Δ)/(2n)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralisationBound {
    pub empirical_loss: f64,
    pub complexity_term: f64,
    pub confidence_term: f64,
    pub total: f64,
}

pub fn generalisation_bound(
    empirical_loss: f64,
    input: &BoundInput,
    loss_bound: f64,
    confidence: f64,
) -> Result<GeneralisationBound> {
    if !(0.0..1.0).contains(&confidence) || confidence <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "confidence level must lie in (0,1), got {confidence}"
        )));
    }
    if loss_bound <= 0.0 {
        return Err(Error::InvalidParam("loss bound must be positive".into()));
    }
    let complexity_term = rademacher_bound(input)?;
    let confidence_term =
        3.0 * loss_bound * ((2.0 / confidence).ln() / (2.0 * input.n as f64)).sqrt();
    Ok(GeneralisationBound {
        empirical_loss,
        complexity_term,
        confidence_term,
        total: empirical_loss + complexity_term + confidence_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(c: usize, g: usize, p: f64, q: f64, n: usize, energy: f64) -> BoundInput {
        BoundInput {
            clusters: c,
            kernels: g,
            p,
            q,
            n,
            lambda_radius: 1.0,
            kernel_bound: 1.0,
            membership_energy: energy,
            delta: 1.0,
        }
    }

    #[test]
    fn trivial_class_collapses_to_radius_over_sqrt_n() {
        let n = 25;
        let b = rademacher_bound(&input(1, 1, 2.0, 2.0, n, n as f64)).unwrap();
        assert!((b - 1.0 / (n as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn worked_bound_value() {
        // Λ=r=1, n=100, C=3, G=7, p=q=2, energy=50 → 21^{1/4}·√50/100
        let b = rademacher_bound(&input(3, 7, 2.0, 2.0, 100, 50.0)).unwrap();
        assert!((b - 0.151_370_005_201_754_56).abs() < 1e-12, "got {b}");
    }

    #[test]
    fn bound_scales_with_sqrt_of_membership_energy() {
        let full = rademacher_bound(&input(2, 3, 2.0, 1.0, 50, 40.0)).unwrap();
        let half = rademacher_bound(&input(2, 3, 2.0, 1.0, 50, 20.0)).unwrap();
        assert!((half - full / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bound_monotone_in_counts_radius_and_samples() {
        let base = input(2, 2, 2.0, 4.0 / 3.0, 40, 20.0);
        let b0 = rademacher_bound(&base).unwrap();
        let mut more_clusters = base.clone();
        more_clusters.clusters = 3;
        assert!(rademacher_bound(&more_clusters).unwrap() >= b0);
        let mut more_kernels = base.clone();
        more_kernels.kernels = 5;
        assert!(rademacher_bound(&more_kernels).unwrap() >= b0);
        let mut bigger_radius = base.clone();
        bigger_radius.lambda_radius = 2.0;
        assert!(rademacher_bound(&bigger_radius).unwrap() >= b0);
        // fixed energy ratio: energy/n constant while n grows
        let mut more_samples = base.clone();
        more_samples.n = 160;
        more_samples.membership_energy = 80.0;
        assert!(rademacher_bound(&more_samples).unwrap() <= b0);
    }

    #[test]
    fn single_cluster_disjoint_bounds_equal_joint_bounds() {
        let report = regime_bounds(&input(1, 4, 2.0, 1.0, 30, 30.0)).unwrap();
        assert!((report.joint_matrix - report.disjoint_matrix).abs() < 1e-15);
        assert!((report.joint_vector - report.disjoint_vector).abs() < 1e-15);
    }

    #[test]
    fn prop_ratio_for_two_by_two_p2_q1() {
        let report = regime_bounds(&input(2, 2, 2.0, 1.0, 30, 30.0)).unwrap();
        assert!((report.ratio_joint_vector - 0.840_896_415_253_714_5).abs() < 1e-12);
        // the ratio factor matches the actual bound quotient
        let quotient = report.joint_matrix / report.joint_vector;
        assert!((report.ratio_joint_vector - quotient).abs() < 1e-12);
    }

    #[test]
    fn all_ratio_factors_match_their_bound_quotients() {
        for (c, g, p, q) in [(2usize, 3usize, 2.0, 1.0), (3, 2, 4.0, 4.0 / 3.0), (5, 7, 8.0, 2.0)] {
            let report = regime_bounds(&input(c, g, p, q, 50, 25.0)).unwrap();
            let pairs = [
                (report.ratio_joint_vector, report.joint_vector),
                (report.ratio_disjoint_vector, report.disjoint_vector),
                (report.ratio_disjoint_matrix, report.disjoint_matrix),
            ];
            for (factor, other) in pairs {
                let quotient = report.joint_matrix / other;
                assert!(
                    (factor - quotient).abs() < 1e-12,
                    "C={c} G={g} p={p} q={q}: factor {factor} vs quotient {quotient}"
                );
            }
        }
    }

    #[test]
    fn equal_exponents_make_matrix_and_vector_classes_coincide() {
        let report = regime_bounds(&input(3, 2, 2.0, 2.0, 30, 30.0)).unwrap();
        assert!((report.ratio_joint_vector - 1.0).abs() < 1e-15);
        assert!((report.joint_matrix - report.joint_vector).abs() < 1e-15);
    }

    #[test]
    fn joint_matrix_bound_is_smallest_when_q_le_p() {
        let grid = [32.0 / 31.0, 4.0 / 3.0, 2.0, 8.0];
        for &p in &grid {
            for &q in &grid {
                if q > p {
                    continue;
                }
                for c in [1usize, 2, 5] {
                    for g in [1usize, 3, 7] {
                        let report = regime_bounds(&input(c, g, p, q, 64, 40.0)).unwrap();
                        for other in [
                            report.joint_vector,
                            report.disjoint_vector,
                            report.disjoint_matrix,
                        ] {
                            assert!(report.joint_matrix <= other + 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_weights_attain_the_cap_and_sampling_respects_it() {
        for regime in [
            Regime::JointMatrix,
            Regime::JointVector,
            Regime::DisjointVector,
            Regime::DisjointMatrix,
        ] {
            let report = empirical_weight_sums(regime, 2.0, 1.0, 2, 3, 500, 7).unwrap();
            assert!(
                (report.uniform_sum - report.cap).abs() <= 1e-10,
                "{regime}: uniform {} vs cap {}",
                report.uniform_sum,
                report.cap
            );
            assert!(report.max_observed <= report.cap + 1e-10);
        }
    }

    #[test]
    fn one_hot_weight_sum_is_one_and_below_cap() {
        let mut raw = Array1::from_elem(6, 0.0);
        raw[2] = 5.0;
        let mu = project_to_surface(Regime::JointMatrix, &raw, 2.0, 1.0, 2, 3).unwrap();
        let sum: f64 = mu.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(sum <= weight_sum_cap(Regime::JointMatrix, 2.0, 1.0, 2, 3) + 1e-12);
    }

    #[test]
    fn lambda_norm_bound_halves_when_delta_doubles() {
        use crate::dataio::MklConfig;
        use crate::model::fit;
        use crate::synth::{locality_dataset, LocalitySpec};

        let (train, _) = locality_dataset(&LocalitySpec::default().with_seed(61)).unwrap();
        let mut cfg = MklConfig::new(2.0, 2.0, 0.2 * train.n() as f64);
        cfg.clusters = 3;
        let base = lambda_norm_check(&fit(&train, &cfg).unwrap()).unwrap();
        assert!(base.pass);

        let mut doubled_cfg = cfg.clone();
        doubled_cfg.delta *= 2.0;
        let doubled = lambda_norm_check(&fit(&train, &doubled_cfg).unwrap()).unwrap();
        assert!((doubled.bound - base.bound / 2.0).abs() < 1e-12);
        assert!(doubled.pass, "‖λ‖₂ {} above halved bound {}", doubled.lambda_l2, doubled.bound);
    }

    #[test]
    fn scalar_model_lambda_norm_is_half_of_unit_bound() {
        use crate::dataio::{FeatureDataset, MklConfig, Regime};
        use crate::kernels::KernelSpec;
        use crate::model::fit_with_specs;
        use ndarray::array;

        let train = FeatureDataset {
            views: vec![array![[0.7, -0.1]]],
            sample_ids: vec!["only".into()],
            labels: None,
        };
        let mut cfg = MklConfig::new(2.0, 2.0, 1.0);
        cfg.clusters = 1;
        cfg.regime = Regime::SingleKernel;
        let model = fit_with_specs(&train, &[KernelSpec::rbf(0, 1.0)], &cfg).unwrap();
        let check = lambda_norm_check(&model).unwrap();
        // λ = 1/(δ+κ(x,x)) = 1/2, bound √1/1 = 1
        assert!((check.lambda_l2 - 0.5).abs() < 1e-12);
        assert!((check.bound - 1.0).abs() < 1e-15);
        assert!(check.pass);
    }

    #[test]
    fn generalisation_bound_is_the_three_term_sum() {
        let inp = input(2, 3, 2.0, 2.0, 50, 25.0);
        let b = generalisation_bound(0.12, &inp, 1.0, 0.05).unwrap();
        let complexity = rademacher_bound(&inp).unwrap();
        let confidence = 3.0 * ((2.0 / 0.05f64).ln() / 100.0).sqrt();
        assert!((b.total - (0.12 + complexity + confidence)).abs() < 1e-15);
    }
}
