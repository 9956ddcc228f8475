//! Membership inference auditing for graph neural networks and i.i.d.
//! classifiers.
//!
//! The crate trains small target and shadow models on synthetic data, scores
//! membership with Bayes-approximate attacks (BASE for i.i.d. signals, G-BASE
//! for graphs) and reference attacks (RMIA, LiRA, MCA), and evaluates them
//! with ROC/AUC and low-FPR metrics.

pub mod attacks;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod sampling;
pub mod shadow;
pub mod signals;
pub mod synth;

pub use error::{Error, Result};
