//! Property tests for the norm machinery, memberships, and metrics.

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use nsmkl::clustering::{kernel_kmeans, train_memberships};
use nsmkl::dataio::Label;
use nsmkl::kernels::{gram, lp_norm, lpq_matrix_norm_of_outer, KernelSpec};
use nsmkl::metrics::{auc, EvalSet, Orientation};

fn grid_exponent() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![
        32.0 / 31.0,
        16.0 / 15.0,
        8.0 / 7.0,
        4.0 / 3.0,
        2.0,
        4.0,
        8.0,
        10.0,
    ])
}

proptest! {
    /// The matrix mixed norm of an outer product factors into the two vector
    /// norms; checked against the direct column-wise double sum.
    #[test]
    fn outer_product_norm_factorises(
        v in prop::collection::vec(0.0f64..5.0, 1..12),
        p in grid_exponent(),
        q in grid_exponent(),
    ) {
        let v = Array1::from_vec(v);
        let factored = lpq_matrix_norm_of_outer(&v, p, q).unwrap();
        let len = v.len();
        let mut outer_sum = 0.0;
        for s in 0..len {
            let mut inner = 0.0;
            for t in 0..len {
                inner += (v[t] * v[s]).abs().powf(p);
            }
            outer_sum += inner.powf(q / p);
        }
        let direct = outer_sum.powf(1.0 / q);
        prop_assert!((factored - direct).abs() <= 1e-10 * direct.max(1e-300));
    }

    /// ℓ_p norms are absolutely homogeneous and monotone in no coordinate
    /// direction downwards.
    #[test]
    fn lp_norm_is_homogeneous(
        v in prop::collection::vec(0.0f64..4.0, 1..10),
        p in grid_exponent(),
        scale in 0.0f64..7.0,
    ) {
        let v = Array1::from_vec(v);
        let scaled = v.mapv(|x| x * scale);
        let lhs = lp_norm(&scaled, p).unwrap();
        let rhs = scale * lp_norm(&v, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-12));
    }

    /// Softmax memberships are probability rows whatever the data and the
    /// temperature, and their squared mass never exceeds the sample count.
    #[test]
    fn memberships_are_probability_rows(
        seed in 0u64..500,
        clusters in 1usize..5,
        temperature in 1e-3f64..10.0,
    ) {
        let mut points = Vec::new();
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        for _ in 0..12 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            points.push((state >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0);
        }
        let view = Array2::from_shape_vec((12, 1), points).unwrap();
        let g = gram(&view, &view, &KernelSpec::rbf(0, 1.0)).unwrap();
        let model = kernel_kmeans(&g.values, clusters, seed, 4).unwrap();
        let mem = train_memberships(&model, &g.values, temperature).unwrap();
        let mut energy = 0.0;
        for row in mem.probs.rows() {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for &v in row.iter() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                energy += v * v;
            }
        }
        prop_assert!(energy <= 12.0 + 1e-9);
    }

    /// AUC depends only on the score ordering: any strictly increasing
    /// transform leaves it unchanged.
    #[test]
    fn auc_is_rank_based(
        scores in prop::collection::vec(-5.0f64..5.0, 4..30),
        flags in prop::collection::vec(any::<bool>(), 4..30),
        alpha in 0.01f64..3.0,
        beta in -2.0f64..2.0,
    ) {
        let n = scores.len().min(flags.len());
        let scores = &scores[..n];
        let labels: Vec<Label> = flags[..n]
            .iter()
            .map(|&t| Label { target: t, instrument: None })
            .collect();
        let n_targets = labels.iter().filter(|l| l.target).count();
        prop_assume!(n_targets > 0 && n_targets < n);
        let base = EvalSet::new(scores.to_vec(), labels.clone()).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (alpha * s).exp() + beta).collect();
        let mapped = EvalSet::new(transformed, labels).unwrap();
        let a = auc(&base, Orientation::HigherIsTarget).unwrap();
        let b = auc(&mapped, Orientation::HigherIsTarget).unwrap();
        // exp can merge distinct scores only by underflow; tolerate roundoff
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}
