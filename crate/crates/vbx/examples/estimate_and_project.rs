//! Two-covariance PLDA estimation and the whitening transform: fit the
//! model on labeled vectors, derive the diarization space, and check the
//! defining identities plus the covariance structure of projected data.
//!
//! ```sh
//! cargo run --example estimate_and_project
//! ```

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use vbx::plda::{self, LabeledEmbeddings};

fn main() -> vbx::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let dim = 6;
    let n_speakers = 200;
    let per_speaker = 30;

    // Speakers live on a diagonal between-speaker covariance; observations
    // add unit noise mixed through a random rotation-ish matrix.
    let spread = [25.0_f64, 16.0, 9.0, 4.0, 2.0, 1.0];
    let mut vectors = Array2::<f64>::zeros((n_speakers * per_speaker, dim));
    let mut ids = Vec::new();
    let mut row = 0;
    for s in 0..n_speakers {
        let mean: Vec<f64> = (0..dim)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * spread[j].sqrt()
            })
            .collect();
        for _ in 0..per_speaker {
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                vectors[(row, j)] = mean[j] + z;
            }
            ids.push(format!("spk{s:03}"));
            row += 1;
        }
    }

    let data = LabeledEmbeddings::new(vectors, ids)?;
    let model = plda::estimate_plda(&data)?;
    println!(
        "estimated model: D={}, within trace {:.2}, between trace {:.2}",
        model.dim,
        model.within_cov.diag().sum(),
        model.between_cov.diag().sum()
    );

    let r = 3;
    let (space, clamped) = plda::derive_space(&model, r)?;
    println!("retained R={r} dimensions ({clamped} eigenvalues clamped)");
    println!("phi = {:.3}", space.phi);
    let (ortho, pair) = space.residuals(&model);
    println!("identity residuals: |E'SwE - I| = {ortho:.2e}, |SbE - SwE phi| = {pair:.2e}");

    let projected = plda::project(&space, data.vectors.view())?;
    let normalized = plda::length_normalize(projected.view())?;
    let first = normalized.row(0);
    println!(
        "projected {} vectors; first row norm {:.6} (target sqrt({r}) = {:.6})",
        normalized.nrows(),
        first.dot(&first).sqrt(),
        (r as f64).sqrt()
    );
    Ok(())
}
