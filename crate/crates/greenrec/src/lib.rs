//! Toolkit for measuring how training-data downsampling affects top-N
//! recommendation quality, runtime, and modeled carbon emissions.
//!
//! The pipeline is: load interaction data ([`ingest`]), apply duplicate
//! removal and k-core pruning ([`preprocess`]), split and downsample
//! ([`sampling`]), train recommenders ([`algorithms`]), score them with
//! nDCG@10 ([`evaluation`]), and convert runtime reductions into CO2e
//! savings ([`sustainability`]). The [`runner`] module drives the full
//! grid of datasets x methods x portions x algorithms x seeds.

pub mod algorithms;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub(crate) mod par;
pub mod preprocess;
pub mod runner;
pub mod sampling;
pub mod sustainability;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
