//! Least-squares kernel and the model fits built on it.

pub mod lorentzian;
pub mod nls;
pub mod power_law;
pub mod ramsey;
pub mod regression;

pub use lorentzian::{fit_lorentzian_sum, LorentzianComponent, LorentzianFit, LorentzianOptions};
pub use nls::{nls_fit, Bounds, Convergence, FitData, FnModel, Model, NlsOptions, NlsResult};
pub use power_law::{
    fit_power_law, fit_power_law_weighted, fit_time_decay, fit_time_decay_weighted, PowerLawFit,
};
pub use ramsey::{fit_two_tone_ramsey, RamseyFit};
pub use regression::{linear_regression, LinearFit};
