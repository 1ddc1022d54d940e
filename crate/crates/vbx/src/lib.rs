//! Diarization of speaker-embedding sequences with a Bayesian HMM.
//!
//! The pipeline mirrors the usual x-vector clustering recipe: embeddings are
//! projected into a space where the within-speaker covariance is identity
//! and the between-speaker covariance is diagonal ([`plda`]), pre-clustered
//! with agglomerative hierarchical clustering tuned to under-cluster
//! ([`ahc`]), and refined by variational inference in an HMM whose states
//! are speakers ([`bhmm`]). A generative simulator ([`synth`]), exact
//! brute-force references ([`oracle`]) and DER/JER scoring ([`scoring`])
//! close the loop, and [`io`]/[`pipeline`] provide the file formats and the
//! per-recording driver used by the `vbx` binary.
//!
//! See the crate `examples/` directory for one runnable program per major
//! capability.

pub mod ahc;
pub mod bhmm;
pub mod error;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod plda;
pub mod scoring;
pub mod synth;
pub mod timeline;

pub use error::{Error, Result};
pub use timeline::{Segment, Ticks, Timeline};
