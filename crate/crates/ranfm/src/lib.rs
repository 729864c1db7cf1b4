//! Multi-task time-series modeling for RAN telemetry.
//!
//! The crate is organized around six areas:
//!
//! - [`tensor`] / [`ops`] / [`graph`]: a dense-tensor substrate with forward
//!   primitives and reverse-mode gradients, verified against finite
//!   differences ([`fdcheck`]).
//! - [`model`]: the patched-transformer architecture — reversible instance
//!   normalization, patch projection, mask token, sinusoidal positional
//!   encoding, the encoder stack, and task heads.
//! - [`training`]: masked self-supervised pretraining plus full-finetune,
//!   linear-probe, and zero-shot adaptation regimes.
//! - [`tasks`]: task adapters and metrics (point-adjusted best F1,
//!   precision/recall/F1, MSE/MAE, imputation baselines, PCA projection).
//! - [`datapile`]: the CSV curation pipeline (channel filtering, temporal
//!   alignment, pruning, sparse-trace interpolation, anomaly augmentation,
//!   splits).
//! - [`runtime`]: checkpointing, sliding-window streaming inference, the
//!   synthetic telemetry simulator, and a latency/memory bench.
//!
//! Heavy kernels are data-parallel via rayon when the default `parallel`
//! feature is enabled; building with `--no-default-features` selects the
//! sequential fallback. Results are bit-identical either way.

pub mod error;
pub mod parallel;
pub mod tensor;
pub mod ops;
pub mod graph;
pub mod fdcheck;
pub mod model;
pub mod training;
pub mod tasks;
pub mod datapile;
pub mod runtime;

pub use error::{Error, Result};
pub use tensor::{DType, Tensor};
