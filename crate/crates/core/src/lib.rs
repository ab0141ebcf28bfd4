//! Reproducible learning algorithms and a Monte-Carlo harness that
//! empirically certifies their reproducibility, accuracy, and sample-
//! complexity scaling.
//!
//! An algorithm is ρ-reproducible when two runs on independent samples from
//! the same distribution, sharing the same internal randomness, return the
//! exact same output with probability at least `1 - ρ`. Everything here
//! consumes randomness through [`stream::RandomStream`], so paired-run
//! experiments can hold the internal randomness fixed bit-for-bit.

pub mod boost;
pub mod dist;
pub mod error;
pub mod halfspace;
pub mod heavy;
pub mod median;
pub mod meta;
pub mod report;
pub mod rounding;
pub mod sq;
pub mod stats;
pub mod stream;
pub mod vecmath;

pub use error::{Error, Result};
pub use stream::RandomStream;
