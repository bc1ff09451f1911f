//! Batch protein-sequence similarity search built on locality-sensitive hashing.
//!
//! A sequence is tokenized into overlapping k-shingles; each shingle expands into
//! its BLOSUM62 neighboring words (every k-letter word scoring at least `T`
//! against the shingle), and the words become SimHash features weighted by their
//! substitution score. The resulting 32-bit signatures turn similarity search
//! into Hamming-distance key matching: references publish their signature plus
//! every bit pattern within distance `d`, queries publish only their own
//! signature, and a shuffle join emits candidate pairs.
//!
//! Both stages run on an embedded, single-process map-shuffle-reduce engine with
//! spill-to-disk grouping, so outputs are byte-reproducible for any worker
//! count. An evaluation harness (brute-force oracle, Smith-Waterman percent
//! identity, quartile statistics) closes the loop on result quality.

pub mod engine;
pub mod eval;
pub mod fasta;
pub mod lsh;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub mod cli;

use std::path::PathBuf;

/// Crate-wide error type. CLI exit codes are decided at the command layer
/// (input/validation problems exit 2, execution failures exit 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("i/o error on {path}: {source}")]
    IoPath {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed FASTA input: {0}")]
    Fasta(String),

    #[error("duplicate sequence id {0:?}")]
    DuplicateId(String),

    #[error("invalid residue {ch:?} in record {id:?} (not canonical and not strippable)")]
    InvalidResidue { id: String, ch: char },

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("invalid substitution matrix: {0}")]
    Matrix(String),

    #[error("signature file {path}: {message}")]
    SignatureFile { path: PathBuf, message: String },

    #[error("incompatible signature parameters: {left} vs {right}")]
    ParamsMismatch { left: String, right: String },

    #[error("pairs file {path}: {message}")]
    PairsFile { path: PathBuf, message: String },

    #[error("map task failed on shard {shard}, record {record}: {message}")]
    MapFailed {
        shard: usize,
        record: u64,
        message: String,
    },

    #[error("reduce task failed on partition {partition}: {message}")]
    ReduceFailed { partition: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
