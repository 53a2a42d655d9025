//! TShape: a patch-attention anomaly detector for univariate time series.
//!
//! The crate bundles everything needed to run the detector at desk scale:
//!
//! - [`tensor`]: dense f64 tensors with reverse-mode autodiff and Adam
//! - [`model`]: the network — patching, multi-scale convolution, patch
//!   positional encoding, dual attention with a learned gate, and a
//!   per-patch reconstruction head
//! - [`data`]: CSV ingestion, train-region z-scoring, windowing, and a
//!   synthetic double-peak generator with controlled anomaly injection
//! - [`metrics`]: reconstruction scoring plus point-F1 / event-F1
//!   evaluation with best-threshold sweeps
//! - [`baselines`]: autoregressive forecasting and subsequence
//!   nearest-neighbor reference detectors
//! - [`training`]: batching, early stopping, and text checkpoints


pub mod baselines;
pub mod data;

pub mod metrics;
pub mod model;
pub mod tensor;
pub mod training;

