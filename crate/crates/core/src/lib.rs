//! Stochastic bit-flipping encryption against an eavesdropping sequential
//! detector.
//!
//! [`analytic`] holds the closed-form performance of the legitimate SPRT and
//! the eavesdropper's mismatched SPRT, [`optimize`] designs the flip
//! probabilities and [`simulate`] runs seeded Monte Carlo checks of both
//! detectors. The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod analytic;
pub mod error;
mod math;
pub mod model;
pub mod optimize;
pub mod simulate;

pub use error::{Error, Result};
pub use math::{central_difference, normal_cdf};
pub use model::{
    effective_probs, gaussian_shift_preset, validate_admissible, BitChannelModel, EffectiveModel,
    EncryptionParams, Priors, ToleranceSpec,
};
