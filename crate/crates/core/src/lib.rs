//! Unpaired radargram layer highlighting at desk scale.
//!
//! The pipeline: synthetic wedge-model radargrams define a clean image
//! domain, stripe-injected surrogates (or real radio-echo-sounding grids)
//! define a noisy one, a CycleGAN learns the unpaired translation between
//! them, and full-cycle MSE/PSNR quantifies how much a translation
//! distorts the input.

pub mod error;
pub mod eval;
pub mod gan;
pub mod ingest;
pub mod tensor;
pub mod train;
pub mod wedge;

pub use error::{Error, Result};
