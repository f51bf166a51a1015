//! Beam-fingerprint localization for mmWave base stations.
//!
//! A 2D ray tracer turns a city-block scene into multipath components, a
//! switched-beam receiver model turns those into per-beam power-delay
//! profiles ("fingerprints"), and a small convolutional regressor learns to
//! map a fingerprint back to the receiver position.

pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod learner;
pub mod pipeline;
pub mod propagation;
pub mod radio;
pub mod scene;
pub mod seeding;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/tracing.md")]
    mod tracing {}
    #[doc = include_str!("../../../book/src/fingerprints.md")]
    mod fingerprints {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/learner.md")]
    mod learner {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
