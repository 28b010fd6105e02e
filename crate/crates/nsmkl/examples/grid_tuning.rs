//! Hyperparameter search: exhaustively trains a (δ, p, q) grid, scores each
//! cell on a dev set, and picks the best by AUC with a deterministic
//! lexicographic tie-break.
//!
//! The full default grid is 6 δ-multipliers × 8 p values × 8 q values = 384
//! cells; this demo trims it to stay quick.
//!
//! ```bash
//! cargo run -p nsmkl --example grid_tuning
//! ```

use nsmkl::dataio::MklConfig;
use nsmkl::metrics::{auc, grid_search, EvalSet, GridSpec, Orientation};
use nsmkl::model::fit;
use nsmkl::synth::{locality_dataset, LocalitySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a harder draw: weaker signal, broader noise, fewer training points
    let spec = LocalitySpec {
        train_per_cluster: 10,
        signal_scale: 1.6,
        signal_noise: 0.5,
        noise_sigma: 1.2,
        ..LocalitySpec::default().with_seed(31)
    };
    let (train, dev) = locality_dataset(&spec)?;
    let dev_labels = dev.labels.clone().unwrap();

    let grid = GridSpec {
        delta_multipliers: vec![1e-2, 1e-1, 1.0, 10.0],
        p_values: vec![4.0 / 3.0, 2.0, 4.0],
        q_values: vec![4.0 / 3.0, 2.0],
    };
    let mut base = MklConfig::new(2.0, 2.0, 1.0);
    base.clusters = 3;
    base.max_iter = 400;

    let result = grid_search(&grid, &base, train.n(), |cfg| {
        let model = fit(&train, cfg)?;
        let report = model.project(&dev)?;
        let eval = EvalSet::new(report.scores, dev_labels.clone())?;
        auc(&eval, Orientation::HigherIsTarget)
    })?;

    println!("{:>10}{:>8}{:>8}{:>10}", "δ/n", "p", "q", "dev AUC");
    for cell in &result.cells {
        match cell.score {
            Some(score) => println!(
                "{:>10.3}{:>8.3}{:>8.3}{:>10.4}",
                cell.delta_multiplier, cell.p, cell.q, score
            ),
            None => println!(
                "{:>10.3}{:>8.3}{:>8.3}{:>10}",
                cell.delta_multiplier,
                cell.p,
                cell.q,
                cell.error.as_deref().unwrap_or("failed")
            ),
        }
    }
    println!(
        "\nbest cell: δ = {:.3} (δ/n = {:.3}), p = {:.3}, q = {:.3} with dev AUC {:.4}",
        result.best.delta,
        result.best.delta / train.n() as f64,
        result.best.p,
        result.best.q,
        result.best_score
    );
    Ok(())
}
