//! Tools for building multi-way parallel corpora from timestamped transcripts,
//! producing token-budgeted and instruction-tuning datasets from them, and
//! measuring cross-lingual alignment of sentence embeddings.
//!
//! The pipeline runs in stages, each living in its own module:
//!
//! * [`ingest`] parses JSON-lines transcripts into a [`TalkSet`].
//! * [`align`] groups same-talk segments into [`AlignedTuple`]s by timestamp overlap.
//! * [`stats`] computes parallelism and domain statistics over the aligned corpus.
//! * [`quality`] extracts bitext, joins external quality scores and filters.
//! * [`sampler`] draws token-budgeted pretraining datasets.
//! * [`instruct`] generates MT / CLTS / MTC / CLP instruction examples.
//! * [`metrics`] scores representation alignment between embedding matrices.

pub mod align;
pub mod error;
pub mod ingest;
pub mod instruct;
pub mod metrics;
pub mod quality;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use align::{AlignPolicy, AlignedTuple, TimeInterval};
pub use error::{Error, Result};
pub use ingest::{Segment, Talk, TalkSet};
pub use metrics::EmbeddingMatrix;
