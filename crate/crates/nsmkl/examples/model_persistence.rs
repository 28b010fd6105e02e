//! Archive round trip: save a trained model under the `nsmkl-v1` format,
//! reload it, and confirm the reloaded model reproduces scores bit for bit.
//!
//! ```bash
//! cargo run -p nsmkl --example model_persistence
//! ```

use nsmkl::dataio::{load_model, save_model, MklConfig};
use nsmkl::model::fit;
use nsmkl::synth::{locality_dataset, LocalitySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, test) = locality_dataset(&LocalitySpec::default().with_seed(17))?;
    let mut cfg = MklConfig::new(2.0, 2.0, 0.2 * train.n() as f64);
    cfg.clusters = 3;
    let model = fit(&train, &cfg)?;
    let before = model.project(&test)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    save_model(&model, &path)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!("archive written: {} ({bytes} bytes, format nsmkl-v1)", path.display());

    let restored = load_model(&path)?;
    let after = restored.project(&test)?;

    let mut worst_bits = 0u64;
    let mut identical = true;
    for (a, b) in before.scores.iter().zip(after.scores.iter()) {
        if a.to_bits() != b.to_bits() {
            identical = false;
            worst_bits = worst_bits.max(a.to_bits().abs_diff(b.to_bits()));
        }
    }
    println!(
        "{} query scores compared: {}",
        after.scores.len(),
        if identical {
            "bit-identical after the round trip".to_string()
        } else {
            format!("MISMATCH (worst bit distance {worst_bits})")
        }
    );
    Ok(())
}
