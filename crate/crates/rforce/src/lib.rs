//! Reservoir computing with FORCE target-learning.
//!
//! The crate covers the full experiment pipeline for training random
//! recurrent rate networks to autonomously generate prescribed time series:
//!
//! - [`spectral_init`]: reservoir construction, either sparse normal or
//!   assembled from a planned eigenvalue cloud on circular arcs.
//! - [`dynamics`]: forward-Euler evolution of rank-1 (readout-only trained)
//!   and rank-N (reservoir-trained) architectures.
//! - [`training`]: recursive-least-squares weight updates against a target
//!   series, with warmup/train/test scheduling.
//! - [`diagnostics`]: state Jacobians, their spectra, and stability counts
//!   against the forward-Euler circle.
//! - [`targets`]: periodic/discontinuous/noisy generators plus motion-capture
//!   CSV ingestion.
//! - [`experiments`]: gain sweeps, error aggregation, JSONL records, and
//!   checkpointing.

pub mod checkpoint;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod spectral_init;
pub mod targets;
pub mod training;

pub use error::{Error, Result};
