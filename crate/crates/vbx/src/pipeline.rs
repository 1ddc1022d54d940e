//! Per-recording driver: sub-segmentation of VAD speech, the
//! preprocessing -> AHC -> inference -> timeline chain, and the settings
//! layer shared by the CLI (flag > config file > built-in default).

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::ahc::{self, AhcConfig};
use crate::bhmm::{self, VbxConfig};
use crate::io::{EmbeddingSequence, VadTimeline};
use crate::plda::{self, DiarSpace};
use crate::timeline::{Segment, Ticks, Timeline};
use crate::{Error, Result};

/// Sliding-window rule for cutting VAD speech segments into embedding
/// sub-segments.
#[derive(Debug, Clone, Copy)]
pub struct SubsegmentConfig {
    pub window: Ticks,
    pub shift: Ticks,
    pub min_len: Ticks,
}

impl Default for SubsegmentConfig {
    fn default() -> Self {
        SubsegmentConfig {
            window: Ticks::from_seconds(1.5),
            shift: Ticks::from_seconds(0.25),
            min_len: Ticks::from_seconds(0.1),
        }
    }
}

/// Cuts every speech segment into overlapping windows: segments shorter
/// than `min_len` are dropped; a segment no longer than `window` stays
/// whole; otherwise windows start every `shift` and generation stops with
/// the first window that reaches the segment end.
pub fn subsegment(vad: &VadTimeline, cfg: &SubsegmentConfig) -> Vec<(Ticks, Ticks)> {
    let mut out = Vec::new();
    for &(onset, offset) in &vad.intervals {
        let len = offset - onset;
        if len < cfg.min_len {
            continue;
        }
        if len <= cfg.window {
            out.push((onset, offset));
            continue;
        }
        let mut k = 0i64;
        loop {
            let start = onset + cfg.shift * k;
            let end = (start + cfg.window).min(offset);
            out.push((start, end));
            if start + cfg.window >= offset {
                break;
            }
            k += 1;
        }
    }
    out
}

/// Per-recording diarization options.
#[derive(Debug, Clone)]
pub struct DiarizeOptions {
    pub ahc: AhcConfig,
    pub vbx: VbxConfig,
    /// When set, embeddings are in the original space and get projected and
    /// length-normalized first; otherwise they are taken as already
    /// preprocessed to the space dimension.
    pub raw: bool,
}

impl Default for DiarizeOptions {
    fn default() -> Self {
        DiarizeOptions {
            ahc: AhcConfig::new(0.6),
            vbx: VbxConfig::default(),
            raw: false,
        }
    }
}

/// Result of diarizing one recording.
#[derive(Debug, Clone)]
pub struct DiarizeOutcome {
    pub timeline: Timeline,
    pub converged: bool,
    pub n_speakers: usize,
    pub iterations: usize,
    pub warning: Option<String>,
}

/// Runs the full chain for one recording: optional projection and length
/// normalization, AHC initialization, HMM inference, then tiling of hard
/// labels into merged segments named `spk00`, `spk01`, ... in order of
/// first appearance.
pub fn diarize_recording(
    emb: &EmbeddingSequence,
    space: &DiarSpace,
    opts: &DiarizeOptions,
) -> Result<DiarizeOutcome> {
    if emb.is_empty() {
        return Ok(DiarizeOutcome {
            timeline: Timeline::new(&emb.recording_id),
            converged: true,
            n_speakers: 0,
            iterations: 0,
            warning: Some(format!("recording {}: no embeddings", emb.recording_id)),
        });
    }

    let vectors: Array2<f64> = if opts.raw {
        if emb.dim != space.source_dim {
            return Err(Error::invalid(format!(
                "raw embeddings have dimension {}, space expects {}",
                emb.dim, space.source_dim
            )));
        }
        let projected = plda::project(space, emb.vectors.view())?;
        plda::length_normalize(projected.view())?
    } else {
        if emb.dim != space.dim {
            return Err(Error::invalid(format!(
                "preprocessed embeddings have dimension {}, space retains {}",
                emb.dim, space.dim
            )));
        }
        emb.vectors.clone()
    };

    let labels = if vectors.nrows() == 1 {
        vec![0]
    } else {
        let sim = ahc::cosine_similarity_matrix(vectors.view())?;
        ahc::cluster(sim.view(), &opts.ahc)?
    };
    let state = bhmm::run(vectors.view(), &labels, space.phi.view(), &opts.vbx)?;
    let hard = state.hard_labels();

    // Tile i covers [onset_i, onset_{i+1}) clipped to its own segment.
    let t = emb.len();
    let mut names: Vec<Option<String>> = vec![None; state.n_speakers()];
    let mut next_name = 0usize;
    let mut timeline = Timeline::new(&emb.recording_id);
    let mut run_start = 0usize;
    let tile_end = |i: usize| -> Ticks {
        if i + 1 < t {
            emb.offsets[i].min(emb.onsets[i + 1])
        } else {
            emb.offsets[i]
        }
    };
    for i in 0..t {
        let contiguous = i + 1 < t && hard[i + 1] == hard[i] && tile_end(i) == emb.onsets[i + 1];
        if !contiguous {
            let speaker = names[hard[i]]
                .get_or_insert_with(|| {
                    let name = format!("spk{next_name:02}");
                    next_name += 1;
                    name
                })
                .clone();
            let onset = emb.onsets[run_start];
            let end = tile_end(i);
            timeline.push(Segment::new(
                &emb.recording_id,
                onset,
                end - onset,
                &speaker,
            ))?;
            run_start = i + 1;
        }
    }

    Ok(DiarizeOutcome {
        converged: state.converged,
        n_speakers: state.n_speakers(),
        iterations: state.elbo_trace.len(),
        warning: if state.converged {
            None
        } else {
            Some(format!(
                "recording {}: inference did not converge in {} iterations",
                emb.recording_id,
                state.elbo_trace.len()
            ))
        },
        timeline,
    })
}

/// Diarizes independent recordings on a bounded worker pool, preserving
/// input order.
pub fn diarize_many(
    recordings: &[EmbeddingSequence],
    space: &DiarSpace,
    opts: &DiarizeOptions,
    jobs: usize,
) -> Result<Vec<DiarizeOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| {
        recordings
            .par_iter()
            .map(|emb| diarize_recording(emb, space, opts))
            .collect()
    })
}

/// All tunables reachable from the command line or a `key=value` config
/// file. Precedence: explicit CLI flag, then config file, then these
/// defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub fa: f64,
    pub fb: f64,
    pub loop_p: f64,
    pub ahc_threshold: f64,
    pub max_iters: usize,
    pub elbo_tol: f64,
    pub prune_pi: f64,
    pub window: f64,
    pub shift: f64,
    pub min_len: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            fa: 0.3,
            fb: 17.0,
            loop_p: 0.99,
            ahc_threshold: 0.6,
            max_iters: 40,
            elbo_tol: 1e-6,
            prune_pi: 1e-4,
            window: 1.5,
            shift: 0.25,
            min_len: 0.1,
        }
    }
}

impl Settings {
    /// Applies `key=value` pairs from a config file. Keys match the CLI
    /// flags with `-` or `_` interchangeable.
    pub fn apply(&mut self, entries: &HashMap<String, String>) -> Result<()> {
        for (key, value) in entries {
            let norm = key.replace('-', "_");
            let bad = |what: &str| Error::invalid(format!("config {key}={value}: invalid {what}"));
            match norm.as_str() {
                "fa" => self.fa = value.parse().map_err(|_| bad("number"))?,
                "fb" => self.fb = value.parse().map_err(|_| bad("number"))?,
                "loop_p" => self.loop_p = value.parse().map_err(|_| bad("number"))?,
                "ahc_threshold" => self.ahc_threshold = value.parse().map_err(|_| bad("number"))?,
                "max_iters" => self.max_iters = value.parse().map_err(|_| bad("integer"))?,
                "elbo_tol" => self.elbo_tol = value.parse().map_err(|_| bad("number"))?,
                "prune_pi" => self.prune_pi = value.parse().map_err(|_| bad("number"))?,
                "window" => self.window = value.parse().map_err(|_| bad("number"))?,
                "shift" => self.shift = value.parse().map_err(|_| bad("number"))?,
                "min_len" => self.min_len = value.parse().map_err(|_| bad("number"))?,
                other => {
                    return Err(Error::invalid(format!("unknown config key {other:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn vbx_config(&self) -> VbxConfig {
        VbxConfig {
            fa: self.fa,
            fb: self.fb,
            loop_p: self.loop_p,
            max_iters: self.max_iters,
            elbo_tol: self.elbo_tol,
            prune_pi: self.prune_pi,
        }
    }

    pub fn ahc_config(&self) -> AhcConfig {
        AhcConfig::new(self.ahc_threshold)
    }

    pub fn subsegment_config(&self) -> SubsegmentConfig {
        SubsegmentConfig {
            window: Ticks::from_seconds(self.window),
            shift: Ticks::from_seconds(self.shift),
            min_len: Ticks::from_seconds(self.min_len),
        }
    }
}

/// Parses a `key=value` config file; `#` starts a comment.
pub fn read_config(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                idx + 1,
                format!("expected key=value, got {line:?}"),
            ));
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use ndarray::Array1;

    fn vad(intervals: &[(f64, f64)]) -> VadTimeline {
        VadTimeline {
            recording_id: "rec".into(),
            intervals: intervals
                .iter()
                .map(|&(a, b)| (Ticks::from_seconds(a), Ticks::from_seconds(b)))
                .collect(),
        }
    }

    fn seconds(pairs: &[(Ticks, Ticks)]) -> Vec<(f64, f64)> {
        pairs
            .iter()
            .map(|&(a, b)| (a.as_seconds(), b.as_seconds()))
            .collect()
    }

    #[test]
    fn subsegment_window_walk() {
        let cfg = SubsegmentConfig::default();
        let out = subsegment(&vad(&[(0.0, 2.0)]), &cfg);
        assert_eq!(seconds(&out), vec![(0.0, 1.5), (0.25, 1.75), (0.5, 2.0)]);
    }

    #[test]
    fn subsegment_short_segment_kept_whole() {
        let cfg = SubsegmentConfig::default();
        let out = subsegment(&vad(&[(0.0, 1.0)]), &cfg);
        assert_eq!(seconds(&out), vec![(0.0, 1.0)]);
    }

    #[test]
    fn subsegment_drops_below_min_len() {
        let cfg = SubsegmentConfig::default();
        let out = subsegment(&vad(&[(0.0, 0.05), (1.0, 1.1)]), &cfg);
        // 0.05 s dropped; exactly 0.1 s kept.
        assert_eq!(seconds(&out), vec![(1.0, 1.1)]);
    }

    #[test]
    fn subsegment_truncated_final_window() {
        let cfg = SubsegmentConfig::default();
        let out = subsegment(&vad(&[(0.0, 1.6)]), &cfg);
        assert_eq!(seconds(&out), vec![(0.0, 1.5), (0.25, 1.6)]);
    }

    #[test]
    fn subsegment_onsets_on_exact_shift_grid() {
        let cfg = SubsegmentConfig::default();
        let out = subsegment(&vad(&[(0.3, 4.0)]), &cfg);
        for (k, &(on, off)) in out.iter().enumerate() {
            assert_eq!(
                on,
                Ticks::from_seconds(0.3) + Ticks::from_seconds(0.25) * k as i64
            );
            assert!(off <= Ticks::from_seconds(4.0));
        }
    }

    fn synthetic_sequence(seed: u64, steps: usize) -> (EmbeddingSequence, Vec<usize>) {
        let cfg = synth::SynthConfig {
            loop_p: 0.9,
            ..synth::SynthConfig::new(2, steps, vec![400.0, 400.0, 400.0], seed)
        };
        let conv = synth::sample_conversation(&cfg).unwrap();
        let step = Ticks::from_seconds(0.25);
        let onsets: Vec<Ticks> = (0..steps).map(|i| step * i as i64).collect();
        let offsets: Vec<Ticks> = (0..steps).map(|i| step * (i as i64 + 1)).collect();
        (
            EmbeddingSequence::new("rec", onsets, offsets, conv.x).unwrap(),
            conv.z,
        )
    }

    fn identity_space(r: usize, phi: f64) -> DiarSpace {
        DiarSpace {
            source_dim: r,
            dim: r,
            mean: Array1::zeros(r),
            projection: ndarray::Array2::eye(r),
            phi: Array1::from_elem(r, phi),
        }
    }

    #[test]
    fn diarize_recovers_synthetic_conversation() {
        let (emb, truth) = synthetic_sequence(5, 200);
        let space = identity_space(3, 400.0);
        let opts = DiarizeOptions {
            ahc: AhcConfig::new(0.5),
            vbx: VbxConfig {
                fa: 1.0,
                fb: 1.0,
                loop_p: 0.9,
                ..Default::default()
            },
            raw: false,
        };
        let outcome = diarize_recording(&emb, &space, &opts).unwrap();
        let reference = synth::labels_to_timeline(&truth, 0.25, "rec").unwrap();
        let result = crate::scoring::der(
            &reference,
            &outcome.timeline,
            &crate::scoring::ScoreSetup::full(),
        )
        .unwrap();
        assert!(
            result.der() < 0.02,
            "full-setup DER {} too high",
            result.der()
        );
    }

    #[test]
    fn diarize_raw_embeddings_through_derived_space() {
        // Raw vectors in a 10-dim space where only 4 directions separate
        // speakers; the derived space must isolate them and recovery must
        // survive the projection + length normalization path.
        use rand::Rng;
        use rand::SeedableRng;
        use rand_chacha::ChaCha12Rng;
        use rand_distr::{Distribution, StandardNormal};

        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let d = 24;
        let r = 12;
        let mut between = Array2::<f64>::zeros((d, d));
        for j in 0..r {
            between[(j, j)] = 50.0;
        }
        for j in r..d {
            between[(j, j)] = 0.01;
        }
        let model = crate::plda::PldaModel {
            dim: d,
            mean: Array1::from_elem(d, 5.0),
            within_cov: Array2::eye(d),
            between_cov: between,
        };
        let (space, _) = crate::plda::derive_space(&model, r).unwrap();

        // Two speakers drawn from the model, alternating in blocks.
        let speaker_means: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                (0..d)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        model.mean[j] + z * model.between_cov[(j, j)].sqrt()
                    })
                    .collect()
            })
            .collect();
        let steps = 160;
        let mut truth = Vec::with_capacity(steps);
        let mut z = 0usize;
        let mut raw = Array2::<f64>::zeros((steps, d));
        for i in 0..steps {
            if rng.gen_range(0.0..1.0) > 0.9 {
                z = rng.gen_range(0..2);
            }
            truth.push(z);
            for j in 0..d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                raw[(i, j)] = speaker_means[z][j] + noise;
            }
        }
        let step = Ticks::from_seconds(0.25);
        let emb = EmbeddingSequence::new(
            "rec",
            (0..steps).map(|i| step * i as i64).collect(),
            (0..steps).map(|i| step * (i as i64 + 1)).collect(),
            raw,
        )
        .unwrap();

        let opts = DiarizeOptions {
            ahc: AhcConfig::new(0.9),
            vbx: VbxConfig {
                fa: 1.0,
                fb: 1.0,
                loop_p: 0.9,
                ..Default::default()
            },
            raw: true,
        };
        let outcome = diarize_recording(&emb, &space, &opts).unwrap();
        let reference = synth::labels_to_timeline(&truth, 0.25, "rec").unwrap();
        let result = crate::scoring::der(
            &reference,
            &outcome.timeline,
            &crate::scoring::ScoreSetup::full(),
        )
        .unwrap();
        assert!(
            result.der() < 0.02,
            "raw-path full-setup DER {} too high",
            result.der()
        );

        // Dimension mismatches are input errors on both paths.
        let wrong = DiarizeOptions { raw: false, ..opts };
        assert!(matches!(
            diarize_recording(&emb, &space, &wrong),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn diarize_single_embedding() {
        let emb = EmbeddingSequence::new(
            "rec",
            vec![Ticks::from_seconds(0.0)],
            vec![Ticks::from_seconds(0.25)],
            ndarray::array![[1.0, 2.0]],
        )
        .unwrap();
        let space = identity_space(2, 10.0);
        let outcome = diarize_recording(&emb, &space, &DiarizeOptions::default()).unwrap();
        assert_eq!(outcome.timeline.len(), 1);
        let seg = &outcome.timeline.segments()[0];
        assert_eq!(seg.speaker, "spk00");
        assert_eq!(seg.duration, Ticks::from_seconds(0.25));
    }

    #[test]
    fn diarize_empty_sequence_warns() {
        let emb =
            EmbeddingSequence::new("rec", vec![], vec![], Array2::<f64>::zeros((0, 2))).unwrap();
        let space = identity_space(2, 10.0);
        let outcome = diarize_recording(&emb, &space, &DiarizeOptions::default()).unwrap();
        assert!(outcome.timeline.is_empty());
        assert!(outcome.warning.is_some());
    }

    #[test]
    fn diarize_deterministic_and_parallel_order_independent() {
        let (emb, _) = synthetic_sequence(9, 120);
        let space = identity_space(3, 400.0);
        let opts = DiarizeOptions {
            ahc: AhcConfig::new(0.5),
            vbx: VbxConfig {
                fa: 1.0,
                fb: 1.0,
                loop_p: 0.9,
                ..Default::default()
            },
            raw: false,
        };
        let a = diarize_recording(&emb, &space, &opts).unwrap();
        let b = diarize_recording(&emb, &space, &opts).unwrap();
        assert_eq!(a.timeline, b.timeline);

        let many = vec![emb.clone(), emb.clone(), emb];
        let out = diarize_many(&many, &space, &opts, 3).unwrap();
        for o in &out {
            assert_eq!(o.timeline.segments(), a.timeline.segments());
        }
    }

    #[test]
    fn tiles_clip_to_segment_gaps() {
        // Two embeddings with a silence gap: the first tile must end at its
        // own offset, not at the next onset.
        let emb = EmbeddingSequence::new(
            "rec",
            vec![Ticks::from_seconds(0.0), Ticks::from_seconds(5.0)],
            vec![Ticks::from_seconds(1.0), Ticks::from_seconds(6.0)],
            ndarray::array![[10.0, 0.0], [10.1, 0.0]],
        )
        .unwrap();
        let space = identity_space(2, 100.0);
        let opts = DiarizeOptions {
            ahc: AhcConfig::new(0.5),
            vbx: VbxConfig {
                fa: 1.0,
                fb: 1.0,
                loop_p: 0.9,
                ..Default::default()
            },
            raw: false,
        };
        let outcome = diarize_recording(&emb, &space, &opts).unwrap();
        let segs = outcome.timeline.segments();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].offset(), Ticks::from_seconds(1.0));
        assert_eq!(segs[1].onset, Ticks::from_seconds(5.0));
        // Same speaker on both sides of the gap keeps one name.
        assert_eq!(segs[0].speaker, segs[1].speaker);
    }

    #[test]
    fn settings_precedence_config_over_default() {
        let mut settings = Settings::default();
        let mut map = HashMap::new();
        map.insert("fa".to_string(), "0.5".to_string());
        map.insert("ahc-threshold".to_string(), "0.25".to_string());
        settings.apply(&map).unwrap();
        assert_eq!(settings.fa, 0.5);
        assert_eq!(settings.ahc_threshold, 0.25);
        assert_eq!(settings.fb, 17.0);

        let mut bad = HashMap::new();
        bad.insert("nope".to_string(), "1".to_string());
        assert!(settings.apply(&bad).is_err());
    }
}
