//! Generative simulator: samples conversations from the same model the
//! inference assumes, with exact ground-truth labels and timelines.
//!
//! Randomness comes from the ChaCha12 stream cipher (a counter-based
//! generator) with ziggurat normal sampling, so a given seed produces the
//! identical conversation on every platform. Draw order is fixed: all
//! speaker vectors first (row-major), then per step the state draw followed
//! by the observation noise.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::timeline::{Segment, Ticks, Timeline};
use crate::{Error, Result};

/// Shape of a sampled conversation.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub speakers: usize,
    pub duration_steps: usize,
    pub loop_p: f64,
    /// Speaker priors; `None` means uniform.
    pub pi: Option<Vec<f64>>,
    /// Between-speaker variances per dimension; the embedding dimension is
    /// `phi.len()`.
    pub phi: Vec<f64>,
    pub step_seconds: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(speakers: usize, duration_steps: usize, phi: Vec<f64>, seed: u64) -> Self {
        SynthConfig {
            speakers,
            duration_steps,
            loop_p: 0.99,
            pi: None,
            phi,
            step_seconds: 0.25,
            seed,
        }
    }

    fn priors(&self) -> Result<Vec<f64>> {
        match &self.pi {
            None => Ok(vec![1.0 / self.speakers as f64; self.speakers]),
            Some(pi) => {
                if pi.len() != self.speakers {
                    return Err(Error::invalid(format!(
                        "pi has {} entries for {} speakers",
                        pi.len(),
                        self.speakers
                    )));
                }
                if pi.iter().any(|&p| p < 0.0) {
                    return Err(Error::invalid("pi entries must be non-negative"));
                }
                let total: f64 = pi.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("pi sums to {total}, expected 1")));
                }
                Ok(pi.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.speakers == 0 {
            return Err(Error::invalid("at least one speaker required"));
        }
        if self.duration_steps == 0 {
            return Err(Error::invalid("at least one step required"));
        }
        if self.phi.is_empty() {
            return Err(Error::invalid("phi must be non-empty"));
        }
        if self.phi.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid("phi entries must be non-negative"));
        }
        if !crate::bhmm::finite_positive(self.loop_p) || self.loop_p >= 1.0 {
            return Err(Error::invalid("loop_p must be in (0, 1)"));
        }
        if !crate::bhmm::finite_positive(self.step_seconds) {
            return Err(Error::invalid("step_seconds must be positive"));
        }
        self.priors()?;
        Ok(())
    }
}

/// One sampled conversation: observations, true state sequence, and the
/// latent speaker vectors.
#[derive(Debug, Clone)]
pub struct Conversation {
    pub x: Array2<f64>,
    pub z: Vec<usize>,
    pub y: Array2<f64>,
}

/// Samples speaker vectors from the standard normal prior, walks the state
/// chain (`stay with loop_p, otherwise re-draw from pi`), and emits
/// `x_t = sqrt(phi) .* y_{z_t} + noise`.
pub fn sample_conversation(cfg: &SynthConfig) -> Result<Conversation> {
    cfg.validate()?;
    let s = cfg.speakers;
    let t = cfg.duration_steps;
    let r = cfg.phi.len();
    let pi = cfg.priors()?;
    let sqrt_phi: Vec<f64> = cfg.phi.iter().map(|p| p.sqrt()).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut y = Array2::<f64>::zeros((s, r));
    for v in y.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }

    let draw_state = |rng: &mut ChaCha12Rng| -> usize {
        let u: f64 = rng.gen_range(0.0..1.0);
        let mut acc = 0.0;
        for (i, &p) in pi.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        s - 1
    };

    let mut x = Array2::<f64>::zeros((t, r));
    let mut z = Vec::with_capacity(t);
    let mut current = 0usize;
    for ti in 0..t {
        current = if ti == 0 {
            draw_state(&mut rng)
        } else {
            let u: f64 = rng.gen_range(0.0..1.0);
            if u < cfg.loop_p {
                current
            } else {
                draw_state(&mut rng)
            }
        };
        z.push(current);
        for j in 0..r {
            let noise: f64 = StandardNormal.sample(&mut rng);
            x[(ti, j)] = sqrt_phi[j] * y[(current, j)] + noise;
        }
    }
    Ok(Conversation { x, z, y })
}

/// Tiles each step over `[k*step, (k+1)*step)` and merges adjacent tiles of
/// the same speaker. Speaker names follow the label index (`spk00`, ...).
pub fn labels_to_timeline(z: &[usize], step_seconds: f64, recording_id: &str) -> Result<Timeline> {
    if z.is_empty() {
        return Err(Error::EmptyInput("no labels to tile".into()));
    }
    if !crate::bhmm::finite_positive(step_seconds) {
        return Err(Error::invalid("step_seconds must be positive"));
    }
    let step = Ticks::from_seconds(step_seconds);
    let mut timeline = Timeline::new(recording_id);
    let mut run_start = 0usize;
    for i in 1..=z.len() {
        if i == z.len() || z[i] != z[run_start] {
            let onset = step * run_start as i64;
            let offset = step * i as i64;
            timeline.push(Segment::new(
                recording_id,
                onset,
                offset - onset,
                &format!("spk{:02}", z[run_start]),
            ))?;
            run_start = i;
        }
    }
    Ok(timeline)
}
