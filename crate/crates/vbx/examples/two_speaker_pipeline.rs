//! End-to-end pipeline on synthetic data: sample a two-speaker
//! conversation, diarize it, and score the result under all three setups.
//!
//! ```sh
//! cargo run --example two_speaker_pipeline
//! ```

use ndarray::{Array1, Array2};
use vbx::ahc::AhcConfig;
use vbx::bhmm::VbxConfig;
use vbx::io::EmbeddingSequence;
use vbx::pipeline::{diarize_recording, DiarizeOptions};
use vbx::plda::DiarSpace;
use vbx::scoring::{self, RecordingScore, ScoreSetup};
use vbx::synth::{self, SynthConfig};
use vbx::timeline::Ticks;

fn main() -> vbx::Result<()> {
    let steps = 400;
    let dim = 8;
    let cfg = SynthConfig {
        loop_p: 0.9,
        ..SynthConfig::new(2, steps, vec![300.0; dim], 42)
    };
    let conv = synth::sample_conversation(&cfg)?;
    println!(
        "sampled {} steps; speaker 0 holds {} of them",
        steps,
        conv.z.iter().filter(|&&z| z == 0).count()
    );

    // Embeddings arrive one per 0.25 s tile, already in the model space.
    let step = Ticks::from_seconds(0.25);
    let emb = EmbeddingSequence::new(
        "demo",
        (0..steps).map(|i| step * i as i64).collect(),
        (0..steps).map(|i| step * (i as i64 + 1)).collect(),
        conv.x.clone(),
    )?;
    let space = DiarSpace {
        source_dim: dim,
        dim,
        mean: Array1::zeros(dim),
        projection: Array2::eye(dim),
        phi: Array1::from_elem(dim, 300.0),
    };
    let opts = DiarizeOptions {
        ahc: AhcConfig::new(0.9),
        vbx: VbxConfig {
            loop_p: 0.9,
            ..Default::default()
        },
        raw: false,
    };
    let outcome = diarize_recording(&emb, &space, &opts)?;
    println!(
        "diarized into {} speakers in {} iterations (converged: {})",
        outcome.n_speakers, outcome.iterations, outcome.converged
    );

    let reference = synth::labels_to_timeline(&conv.z, 0.25, "demo")?;
    for name in ["forgiving", "fair", "full"] {
        let setup = ScoreSetup::named(name).unwrap();
        let score = RecordingScore {
            recording_id: "demo".into(),
            der: scoring::der(&reference, &outcome.timeline, &setup)?,
            jer_speakers: scoring::jer_per_speaker(&reference, &outcome.timeline)?,
        };
        print!("{}", scoring::format_report(&[score], name));
    }
    Ok(())
}
