//! Simulator-guided ECG heartbeat synthesis and classification.
//!
//! * [`dynamics`]: three-variable ODE heartbeat model and its Euler solution.
//! * [`estimate`]: fitting wave-event parameters to beats, per-class
//!   parameter distributions and simulator-only beat generation.
//! * [`euler_loss`]: discrete ODE residual of a candidate beat and its gradient.
//! * [`autodiff`]: small reverse-mode tensor engine with the layers the
//!   networks need, Adam and a binary checkpoint format.
//! * [`gan`]: class-specific generator/discriminator pairs and their training.
//! * [`beats`]: heartbeat records, segmentation, standardization, CSV I/O and
//!   synthetic corpora.
//! * [`classifier`]: residual 1-D convolutional beat classifier.
//! * [`metrics`] and [`report`]: one-vs-rest precision-recall evaluation.

pub mod autodiff;
pub mod beats;
pub mod classifier;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod euler_loss;
pub mod gan;
pub mod metrics;
pub mod optim;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
