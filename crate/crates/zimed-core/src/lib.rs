//! Causal mediation analysis for zero-inflated mediators whose recorded
//! zeros may be masked positives.
//!
//! The model has three pieces: a two-part mediator law ([`families`]), a
//! detection mechanism that can record small positives as zero
//! ([`detection`]), and a Gaussian outcome regression with indicator and
//! level terms for the mediator ([`outcome`]). Estimation treats the latent
//! true-zero/false-zero split as missing data and maximizes the observed
//! likelihood by EM ([`estimator`]); mediation effects and their delta-method
//! standard errors come from [`effects`]; [`selection`] picks the mediator
//! family by AIC; [`simulate`] replicates whole studies for calibration.
//!
//! The crate is `no_std` (with `alloc`), so the numerical core can be reused
//! outside hosted environments; file formats and the CLI live in the
//! companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod detection;
pub mod effects;
pub mod error;
pub mod estimator;
pub mod families;
pub mod likelihood;
pub mod linalg;
pub mod math;
pub mod optim;
pub mod outcome;
pub mod quad;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod theta;

pub use data::{Dataset, Record};
pub use detection::Detection;
pub use error::{Error, Result};
pub use families::{LinkParams, MediatorFamily, MediatorLaw};
pub use outcome::OutcomeParams;
pub use theta::{ConfounderCoefs, Theta};
