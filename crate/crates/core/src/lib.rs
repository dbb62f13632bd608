//! Unsupervised domain adaptation for binary phenotype classification on
//! 3D volumes.
//!
//! The crate covers the whole pipeline: MOAKS grade to phenotype label
//! conversion and dataset balancing ([`phenotype`]), volume preprocessing
//! ([`preprocess`]), a densely connected 3D encoder with classification
//! head and domain discriminator ([`nn`]), source training, adversarial
//! target-encoder adaptation and the target-only baseline ([`training`]),
//! metrics and cross-validation ([`evaluation`]), and manifests plus a
//! synthetic domain-shifted data generator ([`dataio`]).

pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod experiment;
pub mod nn;
pub mod phenotype;
pub mod preprocess;
pub mod ratio;
pub mod rng;
pub mod training;
pub mod volume;

pub use error::{Error, Result};
