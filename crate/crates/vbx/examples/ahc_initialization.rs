//! Cosine-similarity agglomerative clustering: how the stopping threshold
//! trades cluster count against purity on a toy set of directions.
//!
//! ```sh
//! cargo run --example ahc_initialization
//! ```

use ndarray::array;
use vbx::ahc::{cluster, cosine_similarity_matrix, AhcConfig};

fn main() -> vbx::Result<()> {
    // Three tight bundles of directions plus one stray vector.
    let vectors = array![
        [1.0, 0.05, 0.0],
        [0.98, -0.02, 0.1],
        [1.02, 0.0, -0.05],
        [0.0, 1.0, 0.02],
        [0.05, 0.97, -0.03],
        [-0.02, 0.0, 1.0],
        [0.0, -0.04, 1.01],
        [0.6, 0.6, 0.5],
    ];
    let sim = cosine_similarity_matrix(vectors.view())?;
    println!("pairwise cosine similarities:");
    for i in 0..sim.nrows() {
        let row: Vec<String> = (0..sim.ncols())
            .map(|j| format!("{:+.2}", sim[(i, j)]))
            .collect();
        println!("  {}", row.join(" "));
    }

    for threshold in [0.99, 0.9, 0.6, 0.0, -1.0] {
        let labels = cluster(sim.view(), &AhcConfig::new(threshold))?;
        let count = labels.iter().max().unwrap() + 1;
        println!("threshold {threshold:>5.2} -> {count} clusters: {labels:?}");
    }
    Ok(())
}
