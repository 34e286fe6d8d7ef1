//! Measurement core for multilingual text-to-image concept benchmarks.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (only `alloc`). File formats, the embedding provider
//! client and the command line live in the companion `cccl` crate.
//!
//! The pipeline, bottom to top:
//!
//! * [`inventory`]: the concept × language translation matrix, correction
//!   records, validation, revision and diffing.
//! * [`embedding`]: keyed text and image embedding vectors.
//! * [`similarity`]: cosine similarity, cross-consistency of image
//!   populations, and the per-correction deltas.
//! * [`pseudo`]: seeded synthetic corrections built from in-language donors.
//! * [`stats`]: Pearson correlation, its p-value, least squares and the
//!   mean-response confidence band.
//! * [`plot`]: histogram binning and band sampling used by report writers.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod embedding;
pub mod inventory;
pub mod plot;
pub mod pseudo;
pub mod similarity;
mod special;
pub mod stats;
mod sum;

pub use embedding::{EmbeddingKey, EmbeddingStore, EmbeddingVector, Modality, StoreError};
pub use inventory::{
    ConceptId, ConceptInventory, CorrectionRecord, ErrorType, ErrorTypes, InventoryError, Issue,
    LanguageCode, Translation, Variant,
};
pub use plot::{Histogram, PlotError, ScatterSpec};
pub use pseudo::{PseudoCorrectionSample, PseudoError};
pub use similarity::{ConceptResult, ImagePopulation, MissingKey, ModelScores, SimilarityError};
pub use stats::{ConfidenceBand, FitStats, LinearFit, PairedSeries, StatsError};
