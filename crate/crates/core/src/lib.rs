//! Charge-parity switching in offset-charge-sensitive transmons: spectra,
//! restless-measurement simulation, telegraph power spectra with Lorentzian
//! rate extraction, quasiparticle generation under black-body radiation, and
//! campaign statistics across filter configurations and cooldown time.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod campaign;
pub mod cli;
pub mod error;
pub mod fit;
pub mod plot;
pub mod qp;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod transmon;

pub use error::{Error, Result};
