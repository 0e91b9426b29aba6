//! Linear SVM pixel classification on compressive hyperspectral measurements.
//!
//! Pixels are sensed either through one fixed measurement matrix
//! (fixed coded aperture, FCA) or through a pool of `k` matrices drawn per
//! pixel (DMD-style). Classifiers are trained on the measurements alone, with
//! one bias per pool entry, and compared against the full-spectrum classifier.
//!
//! Module map:
//! - [`specdata`]: labeled pixel datasets, file formats, splits, synthetic data.
//! - [`sensing`]: measurement matrices, pools, assignment and compression.
//! - [`sketchsvm`]: exponential-loss objectives, training and prediction.
//! - [`solver`]: L-BFGS minimizer used by the trainers.
//! - [`eval`]: metrics, randomized trials and aggregated reports.
//! - [`experiment`]: configuration, the run pipeline and its output files.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod seed;
pub mod sensing;
pub mod sketchsvm;
pub mod solver;
pub mod specdata;

pub use error::{Error, Result};
