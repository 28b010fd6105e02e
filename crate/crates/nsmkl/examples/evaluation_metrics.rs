//! Metrics walkthrough on a scored synthetic test set: AUC, the dev-EER
//! threshold, HTER, and the BPCER/APCER/ACER family over attack instruments.
//!
//! ```bash
//! cargo run -p nsmkl --example evaluation_metrics
//! ```

use nsmkl::dataio::MklConfig;
use nsmkl::metrics::{acer, auc, eer_threshold, hter, EvalSet, Orientation};
use nsmkl::model::fit;
use nsmkl::synth::{locality_dataset, LocalitySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two draws from the same world: one for tuning the threshold (dev), one
    // for reporting (test)
    let (train, dev_set) = locality_dataset(&LocalitySpec::default().with_seed(21))?;
    let (_, test_set) = locality_dataset(&LocalitySpec::default().with_seed(22))?;

    let mut cfg = MklConfig::new(2.0, 2.0, 0.1 * train.n() as f64);
    cfg.clusters = 3;
    let model = fit(&train, &cfg)?;

    let dev = EvalSet::new(
        model.project(&dev_set)?.scores,
        dev_set.labels.clone().unwrap(),
    )?;
    let test = EvalSet::new(
        model.project(&test_set)?.scores,
        test_set.labels.clone().unwrap(),
    )?;
    let orientation = Orientation::HigherIsTarget;

    println!("dev  AUC: {:.4}", auc(&dev, orientation)?);
    println!("test AUC: {:.4}", auc(&test, orientation)?);

    let point = eer_threshold(&dev, orientation)?;
    println!(
        "\ndev equal-error rate {:.4} at threshold {:.4}",
        point.eer, point.threshold
    );

    let h = hter(&dev, &test, orientation)?;
    println!(
        "test at that threshold: FAR {:.4}, FRR {:.4} → HTER {:.4}",
        h.far, h.frr, h.hter
    );

    let a = acer(&test, point.threshold, orientation)?;
    println!("\nper-instrument attack acceptance (APCER):");
    for (instrument, rate) in &a.apcer_per_instrument {
        println!("  {instrument:<10} {rate:.4}");
    }
    println!(
        "BPCER {:.4}, worst APCER {:.4} → ACER {:.4}",
        a.bpcer, a.max_apcer, a.acer
    );
    Ok(())
}
