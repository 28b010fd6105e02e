//! # nsmkl
//!
//! One-class classification with localised multiple kernel learning on the
//! regularised Fisher null space.
//!
//! The model regresses target (bona fide) training samples onto the constant 1
//! in a reproducing kernel Hilbert space. The effective kernel is a nonnegative
//! combination of per-cluster, per-view Gram matrices: training points are
//! grouped by kernel k-means, soft cluster memberships rescale each base
//! kernel, and the combination weights are learned jointly under a matrix
//! mixed-norm constraint, so each data cluster can favour different feature
//! views. Training alternates a closed-form weight update with a regularised
//! symmetric positive-definite solve until the dual vector reaches a fixed
//! point.
//!
//! ## Modules
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`dataio`] | CSV feature/label loading, config, model archive (`nsmkl-v1`) |
//! | [`kernels`] | RBF/linear/precomputed kernels, Gram matrices, localised kernel stacks, ℓ_p / ℓ_{p,q} norms |
//! | [`clustering`] | kernel k-means and softmax cluster memberships |
//! | [`solver`] | alternating fixed-point trainer and its regime variants |
//! | [`model`] | trained classifier: fit, project (score), decide |
//! | [`theory`] | Rademacher-complexity bound diagnostics per regularisation regime |
//! | [`metrics`] | AUC, EER/HTER, BPCER/APCER/ACER, grid search |
//! | [`synth`] | synthetic datasets for demos and tests |
//! | [`cli`] | the `nsmkl` command-line surface |
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p nsmkl --example quickstart          # synth data → fit → score → AUC
//! cargo run -p nsmkl --example local_weights       # per-cluster kernel weights
//! cargo run -p nsmkl --example clustering          # kernel k-means + memberships
//! cargo run -p nsmkl --example regime_comparison   # joint/disjoint, matrix/vector norms
//! cargo run -p nsmkl --example theory_bounds       # complexity bound report
//! cargo run -p nsmkl --example evaluation_metrics  # AUC / EER / HTER / ACER
//! cargo run -p nsmkl --example grid_tuning         # hyperparameter search
//! cargo run -p nsmkl --example model_persistence   # archive round-trip determinism
//! ```
//!
//! ## Quick start
//!
//! ```rust
//! use nsmkl::dataio::MklConfig;
//! use nsmkl::model::fit;
//! use nsmkl::synth::{locality_dataset, LocalitySpec};
//!
//! let spec = LocalitySpec::default().with_seed(7);
//! let (train, test) = locality_dataset(&spec).unwrap();
//! let mut cfg = MklConfig::new(2.0, 2.0, 0.1 * train.n() as f64);
//! cfg.clusters = 3;
//! let model = fit(&train, &cfg).unwrap();
//! let report = model.project(&test).unwrap();
//! assert_eq!(report.scores.len(), test.n());
//! ```

pub mod clustering;
pub mod dataio;
pub mod kernels;
mod linalg;
pub mod metrics;
pub mod model;
pub mod solver;
pub mod synth;
pub mod theory;

pub mod cli;

mod error;

pub use error::{Error, Result};
