//! Building blocks for measuring how well joint text/audio embedding models track
//! human timbre judgements.
//!
//! - [`audio`]: WAV IO and sample buffers.
//! - [`dsp`]: parametric EQ, reverberator and the level-scaled renderer.
//! - [`embedding`]: embeddings, cosine similarity, adapter protocol, persistence.
//! - [`stats`]: Pearson correlation and trend classification.
//! - [`instruments`]: instrument ratings vs. similarity profiles.
//! - [`effects`]: descriptor settings, rendering, similarity deltas and trend tables.

pub mod audio;
pub mod dsp;
pub mod effects;
pub mod embedding;
pub mod fsutil;
pub mod instruments;
pub mod stats;
