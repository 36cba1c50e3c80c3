//! The rate-extraction chain: assigned states → toggle indicator →
//! per-trace periodogram → averaged spectrum → Lorentzian mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::{fit_lorentzian_sum, LorentzianFit, LorentzianOptions};
use crate::sim::{simulate_traces, ParityTrace, SimConfig};
use crate::spectral::{aggregate_spectra, parity_indicator, periodogram, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExtraction {
    pub spectrum: Spectrum,
    pub fit: LorentzianFit,
    /// Hz.
    pub rate: f64,
    pub rate_err: f64,
}

/// Averaged spectrum of the parity indicator over all traces.
pub fn averaged_spectrum(traces: &[ParityTrace]) -> Result<Spectrum> {
    let spectra = traces
        .par_iter()
        .map(|t| periodogram(&parity_indicator(t)?))
        .collect::<Result<Vec<_>>>()?;
    aggregate_spectra(&spectra)
}

pub fn extract_rate(traces: &[ParityTrace], options: LorentzianOptions) -> Result<RateExtraction> {
    let spectrum = averaged_spectrum(traces)?;
    let fit = fit_lorentzian_sum(&spectrum, options)?;
    Ok(RateExtraction {
        rate: fit.rate(),
        rate_err: fit.rate_err(),
        spectrum,
        fit,
    })
}

/// Simulates `n_traces` traces from `template` and extracts the rate.
pub fn simulate_and_extract(
    template: &SimConfig,
    n_traces: usize,
    options: LorentzianOptions,
) -> Result<RateExtraction> {
    let traces = simulate_traces(template, n_traces)?;
    extract_rate(&traces, options)
}
