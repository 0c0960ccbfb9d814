//! Corpus curation and contamination-audit toolkit.
//!
//! The pipeline stages are [`filtering`] (statistical enrichment, quality
//! buckets, top-fraction selection), [`dedup`] (MinHash/LSH), [`mixing`]
//! (phase-scheduled multinomial sampling, rehydration, poison injection)
//! and [`packing`] (tokenization, shuffle-buffered shards, fixed-length
//! packing). Audits live in [`ngram_index`] (suffix-array exact match),
//! [`audit`] (leak rates, splits, score gaps, needle-in-haystack ranking)
//! and [`game`] (contamination game equilibria).

pub mod audit;
pub mod corpus_io;
pub mod dedup;
pub mod error;
pub mod filtering;
pub mod game;
pub mod hashing;
pub mod mixing;
pub mod ngram_index;
pub mod packing;
pub mod synth;

pub use corpus_io::{Document, MetaValue, ShardManifest};
pub use error::{Error, ErrorKind, Result};
