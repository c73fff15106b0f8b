//! Emphasis prediction for slide text.
//!
//! The crate covers the whole pipeline: parsing and aggregating 8-annotator
//! BIO corpora ([`corpus`]), per-token shape/POS features ([`features`]), a
//! small reverse-mode differentiation engine with LSTM/highway/attention
//! layers and the Adam optimizer ([`nncore`]), the two neural labelers
//! ([`models`]), top-m overlap evaluation and analyses ([`eval`]), score
//! ensembling ([`ensemble`]) and static HTML heatmaps ([`heatmap`]).

pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod heatmap;
pub mod models;
pub mod nncore;

pub use error::{Error, Result};
