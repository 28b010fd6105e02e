//! Kernel k-means in the RKHS: recovers Gaussian blobs through the Gram
//! matrix alone and shows how softmax memberships soften near boundaries.
//!
//! ```bash
//! cargo run -p nsmkl --example clustering
//! ```

use ndarray::Array2;
use nsmkl::clustering::{kernel_kmeans, memberships, train_memberships};
use nsmkl::kernels::{gram, rbf_width, KernelSpec};
use nsmkl::synth::gaussian_blobs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let centres = vec![vec![-6.0, 0.0], vec![6.0, 0.0], vec![0.0, 7.0]];
    let (points, truth) = gaussian_blobs(&centres, 15, 0.8, 42)?;
    let width = rbf_width(&points)?;
    let spec = KernelSpec::rbf(0, width);
    let g = gram(&points, &points, &spec)?;
    println!("45 points in 3 blobs, RBF width {width:.3} (half mean pairwise distance)");

    let model = kernel_kmeans(&g.values, 3, 0, 8)?;
    let agree = truth
        .iter()
        .zip(&model.labels)
        .filter(|(t, l)| {
            // map each found cluster to the majority truth label
            let majority = (0..3)
                .max_by_key(|&c| {
                    model
                        .labels
                        .iter()
                        .zip(&truth)
                        .filter(|(l2, t2)| **l2 == **l && **t2 == c)
                        .count()
                })
                .unwrap();
            **t == majority
        })
        .count();
    println!(
        "hard assignment matches generating blobs on {agree}/45 points; objective trace {:?}",
        model
            .objective_trace
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect::<Vec<_>>()
    );

    let mem = train_memberships(&model, &g.values, model.temperature)?;
    let row = mem.probs.row(0);
    println!(
        "\na deep-in-cluster training point: memberships {:?}",
        row.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
    );

    // a query wandering from blob 0 towards blob 1 softens its membership
    println!("\nquery sweeping between two blobs (temperature {:.3}):", model.temperature);
    for step in 0..=4 {
        let x = -6.0 + 3.0 * step as f64;
        let query = Array2::from_shape_vec((1, 2), vec![x, 0.0])?;
        let q = gram(&query, &points, &spec)?;
        let m = memberships(&model, &q.values, &[1.0], model.temperature)?;
        println!(
            "  x = {x:+5.1}: {:?}",
            m.probs
                .row(0)
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
