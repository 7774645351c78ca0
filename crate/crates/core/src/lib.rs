//! Discover a classifier's unknown biases with a discoverer network trained to
//! maximize its Equal-Opportunity violation, and mitigate them by alternately
//! training the classifier on a reweighted cross-entropy.
//!
//! The crate also builds the Multi-Color MNIST benchmark (two independent
//! background-color biases) and its single-bias Colored MNIST variants, the
//! baselines (vanilla, focal, GCE), and the evaluation protocols.

pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod par;
pub mod runner;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};

/// Number of target classes (digits).
pub const NUM_CLASSES: usize = 10;
