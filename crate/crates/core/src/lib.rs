//! Geospatial functional modeling of spatially indexed hyperspectral radiance.
//!
//! The pipeline fits a footprint-specific linear mean, estimates measurement
//! error by second differences along the track, extracts principal components
//! of the remaining signal, and kriges component scores to impute spectra at
//! unobserved locations. Imputed land and water spectra drive a least-squares
//! unmixing estimate of land fraction.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod fpca;
pub mod geostat;
pub mod imputation;
pub mod mean_model;
pub mod simulation;
pub mod unmixing;
pub mod validation;

pub use error::{Error, ErrorKind, Result};
