//! Energy accounting and prediction for ConvNet inference.
//!
//! The crate covers the full pipeline: parse dimensioned layer
//! specifications, derive algorithmic cost features (MAC counts, pooling op
//! counts, data volumes), integrate measured power traces into per-layer
//! energies, fit and select regression models over the features, and predict
//! whole-network inference energy from per-layer-type models.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod model;
pub mod predictor;
pub mod regression;
pub mod trace;
pub mod util;

pub use error::{Error, Result};
