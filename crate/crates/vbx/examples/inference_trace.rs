//! Watch the variational inference converge: the evidence lower bound
//! rises monotonically while redundant speakers collapse and get pruned.
//!
//! ```sh
//! cargo run --example inference_trace
//! ```

use ndarray::Array1;
use vbx::ahc::{cluster, cosine_similarity_matrix, AhcConfig};
use vbx::bhmm::{self, VbxConfig};
use vbx::synth::{self, SynthConfig};

fn main() -> vbx::Result<()> {
    let cfg = SynthConfig {
        loop_p: 0.9,
        ..SynthConfig::new(3, 400, vec![100.0; 8], 20260)
    };
    let conv = synth::sample_conversation(&cfg)?;

    // Deliberately under-clustered start: a high threshold splits the three
    // true speakers into many fragments for the inference to merge.
    let sim = cosine_similarity_matrix(conv.x.view())?;
    let labels = cluster(sim.view(), &AhcConfig::new(0.992))?;
    let n_init = labels.iter().max().unwrap() + 1;
    println!("initialized with {n_init} clusters for 3 true speakers");

    let state = bhmm::run(
        conv.x.view(),
        &labels,
        Array1::from_elem(8, 100.0).view(),
        &VbxConfig {
            loop_p: 0.9,
            ..Default::default()
        },
    )?;

    println!("ELBO trace ({} iterations):", state.elbo_trace.len());
    let mut prev: Option<f64> = None;
    for (i, value) in state.elbo_trace.iter().enumerate() {
        match prev {
            Some(p) => println!("  iter {:2}: {value:14.4} (delta {:+.6})", i + 1, value - p),
            None => println!("  iter {:2}: {value:14.4}", i + 1),
        }
        prev = Some(*value);
    }
    println!(
        "active speakers: {} of {n_init}, priors {:?}",
        state.n_speakers(),
        state
            .pi
            .iter()
            .map(|p| (p * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );

    let hard = state.hard_labels();
    let accuracy = best_permutation_accuracy(&hard, &conv.z, state.n_speakers());
    println!(
        "per-step accuracy up to speaker renaming: {:.2}%",
        100.0 * accuracy
    );
    Ok(())
}

fn best_permutation_accuracy(hyp: &[usize], truth: &[usize], n: usize) -> f64 {
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &perms {
            for v in 0..n {
                if !p.contains(&v) {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
        }
        perms = next;
    }
    let mut best = 0usize;
    for p in &perms {
        let matches = hyp.iter().zip(truth).filter(|(h, t)| p[**h] == **t).count();
        best = best.max(matches);
    }
    best as f64 / truth.len() as f64
}
