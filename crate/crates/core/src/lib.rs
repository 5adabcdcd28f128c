//! Affective-computing descriptors and evaluation machinery.
//!
//! The crate is `no_std` with `alloc`; every operation is a pure function of
//! its inputs (and an explicit seed where randomness is involved). File
//! formats, configuration, and the command line live in the `affectkit`
//! companion crate.
//!
//! Modules, roughly in pipeline order:
//!
//! * [`dataio`]: dataset model and deterministic synthetic data generators.
//! * [`preprocess`]: channel normalization, median filtering, temporal
//!   motion magnification, landmark alignment, peak-frame selection.
//! * [`quaternion`]: quaternion algebra, the quaternion/complex isomorphism,
//!   and quaternion PCA over four-channel EEG.
//! * [`origami`]: shadow tree, Lang polygon, polygon shrinking, and the
//!   complex node/edge encoding of the resulting crease pattern.
//! * [`features`]: DTNnp displacements, pyramid HOG, feature assembly.
//! * [`dimred`]: PCA and exact t-SNE.
//! * [`classify`]: kNN, one-vs-all SVM (SMO), GentleBoost, AdaBoost.M2,
//!   random forest.
//! * [`eval`]: confusion matrices, metrics, leave-persons-out folds.
//! * [`pipeline`]: declarative preprocessing/feature/reducer/classifier
//!   recipes fitted per fold.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classify;
pub mod dataio;
pub mod dimred;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod origami;
pub mod pipeline;
pub mod preprocess;
pub mod quaternion;
pub mod rng;

pub use error::{Error, Result};
