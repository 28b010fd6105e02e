//! Complexity-bound diagnostics: per-regime Rademacher bounds, the weight-sum
//! caps behind them, the ‖λ‖₂ ≤ √n/δ check, and the assembled
//! generalisation bound.
//!
//! ```bash
//! cargo run -p nsmkl --example theory_bounds
//! ```

use nsmkl::dataio::{MklConfig, Regime};
use nsmkl::model::fit;
use nsmkl::synth::{locality_dataset, LocalitySpec};
use nsmkl::theory::{
    empirical_weight_sums, generalisation_bound, lambda_norm_check, regime_bounds, BoundInput,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = LocalitySpec::default().with_seed(5);
    let (train, _) = locality_dataset(&spec)?;
    let mut cfg = MklConfig::new(2.0, 4.0 / 3.0, 0.5 * train.n() as f64);
    cfg.clusters = 3;
    let model = fit(&train, &cfg)?;

    let input = BoundInput::from_model(&model)?;
    println!(
        "bound inputs: C={} G={} n={} p={} q={}  Λ̂={:.4}  r={:.4}  energy={:.2}",
        input.clusters,
        input.kernels,
        input.n,
        input.p,
        input.q,
        input.lambda_radius,
        input.kernel_bound,
        input.membership_energy
    );

    let report = regime_bounds(&input)?;
    println!("\nempirical Rademacher complexity bounds:");
    println!("  joint matrix-norm    {:.6}", report.joint_matrix);
    println!(
        "  joint vector-norm    {:.6}  (ratio {:.4})",
        report.joint_vector, report.ratio_joint_vector
    );
    println!(
        "  disjoint vector-norm {:.6}  (ratio {:.4})",
        report.disjoint_vector, report.ratio_disjoint_vector
    );
    println!(
        "  disjoint matrix-norm {:.6}  (ratio {:.4})",
        report.disjoint_matrix, report.ratio_disjoint_matrix
    );

    println!("\nweight-sum caps Σμ over each feasible set (uniform attains them):");
    for regime in [
        Regime::JointMatrix,
        Regime::JointVector,
        Regime::DisjointVector,
        Regime::DisjointMatrix,
    ] {
        let sums = empirical_weight_sums(regime, input.p, input.q, input.clusters, input.kernels, 2000, 1)?;
        println!(
            "  {:<18} cap {:.4}   max of {} samples {:.4}   uniform {:.4}",
            regime.to_string(),
            sums.cap,
            sums.trials,
            sums.max_observed,
            sums.uniform_sum
        );
    }

    let lambda = lambda_norm_check(&model)?;
    println!(
        "\n‖λ‖₂ = {:.5} ≤ √n/δ = {:.5}  →  {}",
        lambda.lambda_l2,
        lambda.bound,
        if lambda.pass { "pass" } else { "FAIL" }
    );

    let gen = generalisation_bound(0.05, &input, 1.0, 0.05)?;
    println!(
        "\ngeneralisation bound at empirical loss 0.05, B_l=1, Δ=0.05:\n  {:.4} (loss) + {:.4} (complexity) + {:.4} (confidence) = {:.4}",
        gen.empirical_loss, gen.complexity_term, gen.confidence_term, gen.total
    );
    Ok(())
}
