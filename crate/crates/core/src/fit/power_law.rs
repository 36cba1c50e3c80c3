//! Power laws with offset (rate vs. radiator power) and pure power-law decay
//! (rate vs. time since cooldown).

use serde::{Deserialize, Serialize};

use super::nls::{nls_fit, Bounds, FitData, FnModel, Model, NlsOptions, NlsResult};
use super::regression::linear_regression;
use crate::error::{Error, Result};

/// `Γ(x) = base + amplitude · x^exponent`, with 1σ uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub base: f64,
    pub amplitude: f64,
    pub exponent: f64,
    pub base_err: f64,
    pub amplitude_err: f64,
    pub exponent_err: f64,
    pub residual_norm: f64,
}

impl PowerLawFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.base + self.amplitude * x.powf(self.exponent)
    }

    /// Decay exponent `p` of `Γ₁·t^{−p}`.
    pub fn decay_exponent(&self) -> f64 {
        -self.exponent
    }
}

struct LogOffsetPowerLaw;

impl Model for LogOffsetPowerLaw {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        (p[0] + p[1].exp() * pow0(x, p[2])).ln()
    }

    fn gradient(&self, x: f64, p: &[f64], g: &mut [f64]) {
        let term = p[1].exp() * pow0(x, p[2]);
        let s = p[0] + term;
        g[0] = 1.0 / s;
        g[1] = term / s;
        g[2] = if x > 0.0 { term * x.ln() / s } else { 0.0 };
    }
}

fn pow0(x: f64, n: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(n)
    }
}

/// Fits `Γ(P) = Γ_base + A·P^n` in log-rate space (multiplicative noise),
/// with `Γ_base ≥ 0`. Uncertainties come from the residual scatter.
pub fn fit_power_law(powers: &[f64], rates: &[f64]) -> Result<PowerLawFit> {
    power_law_impl(powers, rates, None)
}

/// As [`fit_power_law`], with known 1σ rate uncertainties. The covariance is
/// scaled by `max(1, χ²/dof)`, so it never claims more precision than the
/// stated errors.
pub fn fit_power_law_weighted(powers: &[f64], rates: &[f64], rate_errs: &[f64]) -> Result<PowerLawFit> {
    let w = log_weights(rates, rate_errs)?;
    power_law_impl(powers, rates, Some(&w))
}

/// `1/σ_ln` for each rate.
fn log_weights(rates: &[f64], rate_errs: &[f64]) -> Result<Vec<f64>> {
    if rate_errs.len() != rates.len() {
        return Err(Error::invalid("rate_errs", "length must match rates"));
    }
    if rate_errs.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("rate_errs", "must be finite and > 0"));
    }
    Ok(rates.iter().zip(rate_errs).map(|(r, e)| r / e).collect())
}

/// Converts the residual-scaled covariance into the known-σ form.
fn known_sigma_scale(r: &NlsResult, m: usize) -> f64 {
    let dof = m.saturating_sub(r.params.len()).max(1) as f64;
    let s2 = r.residual_norm.powi(2) / dof;
    if s2 > 0.0 {
        s2.max(1.0) / s2
    } else {
        1.0
    }
}

fn power_law_impl(powers: &[f64], rates: &[f64], weights: Option<&[f64]>) -> Result<PowerLawFit> {
    if powers.len() != rates.len() {
        return Err(Error::invalid("rates", "length must match powers"));
    }
    if powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid("powers", "must be ≥ 0"));
    }
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("rates", "must be > 0"));
    }
    let mut distinct = powers.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate("all powers are equal".into()));
    }
    if distinct.len() < 4 {
        return Err(Error::TooShort {
            needed: 4,
            got: distinct.len(),
        });
    }

    let log_rates: Vec<f64> = rates.iter().map(|r| r.ln()).collect();
    let data = FitData {
        weights,
        ..FitData::new(powers, &log_rates)
    };
    let bounds = Bounds {
        lower: vec![0.0, -700.0, -20.0],
        upper: vec![f64::INFINITY, 700.0, 20.0],
    };

    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let mut best: Option<NlsResult> = None;
    for frac in [0.0, 0.5, 0.9] {
        let base = frac * min_rate;
        let init = initial_power_law(powers, rates, base);
        if let Ok(r) = nls_fit(
            &LogOffsetPowerLaw,
            &data,
            &init,
            Some(&bounds),
            NlsOptions::default(),
        ) {
            if best.as_ref().is_none_or(|b| r.residual_norm < b.residual_norm) {
                best = Some(r);
            }
        }
    }
    let r = best.ok_or(Error::NotConverged { iterations: 200 })?;
    let scale = if weights.is_some() {
        known_sigma_scale(&r, powers.len())
    } else {
        1.0
    };
    let se: Vec<f64> = r.std_errors().iter().map(|e| e * scale.sqrt()).collect();
    let amplitude = r.params[1].exp();
    Ok(PowerLawFit {
        base: r.params[0],
        amplitude,
        exponent: r.params[2],
        base_err: se[0],
        amplitude_err: amplitude * se[1],
        exponent_err: se[2],
        residual_norm: r.residual_norm,
    })
}

fn initial_power_law(powers: &[f64], rates: &[f64], base: f64) -> [f64; 3] {
    let (lx, ly): (Vec<f64>, Vec<f64>) = powers
        .iter()
        .zip(rates)
        .filter(|(p, r)| **p > 0.0 && **r > base * 1.05)
        .map(|(p, r)| (p.ln(), (r - base).ln()))
        .unzip();
    match linear_regression(&lx, &ly) {
        Ok(l) if l.slope.is_finite() => [base, l.intercept.clamp(-700.0, 700.0), l.slope.clamp(-20.0, 20.0)],
        _ => {
            let max = rates.iter().copied().fold(0.0, f64::max);
            let pmax = powers.iter().copied().fold(0.0, f64::max);
            [base, (max / pmax).ln().clamp(-700.0, 700.0), 1.0]
        }
    }
}

/// Fits `Γ(t) = Γ₁·t^{−p}`; `Γ₁` is the rate at `t = 1` in the units of `days`.
///
/// Least squares in log–log space, i.e. an ordinary regression of `ln Γ` on
/// `ln t`. The result has `base = 0`, `amplitude = Γ₁`, `exponent = −p`.
pub fn fit_time_decay(days: &[f64], rates: &[f64]) -> Result<PowerLawFit> {
    if days.len() != rates.len() {
        return Err(Error::invalid("rates", "length must match days"));
    }
    if days.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: days.len(),
        });
    }
    if days.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("days", "times must be > 0"));
    }
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("rates", "must be > 0"));
    }
    let lx: Vec<f64> = days.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = rates.iter().map(|r| r.ln()).collect();
    let l = linear_regression(&lx, &ly)?;
    let amplitude = l.intercept.exp();
    Ok(PowerLawFit {
        base: 0.0,
        amplitude,
        exponent: l.slope,
        base_err: 0.0,
        amplitude_err: amplitude * l.intercept_err,
        exponent_err: l.slope_err,
        residual_norm: l.residual_norm,
    })
}

/// As [`fit_time_decay`], with known 1σ rate uncertainties (see
/// [`fit_power_law_weighted`] for the covariance convention).
pub fn fit_time_decay_weighted(days: &[f64], rates: &[f64], rate_errs: &[f64]) -> Result<PowerLawFit> {
    let start = fit_time_decay(days, rates)?;
    let w = log_weights(rates, rate_errs)?;
    let lx: Vec<f64> = days.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = rates.iter().map(|r| r.ln()).collect();
    let model = FnModel {
        n_params: 2,
        f: |x: f64, p: &[f64]| p[0] + p[1] * x,
    };
    let data = FitData {
        weights: Some(&w),
        ..FitData::new(&lx, &ly)
    };
    let init = [start.amplitude.ln(), start.exponent];
    let r = nls_fit(&model, &data, &init, None, NlsOptions::default())?;
    let scale = known_sigma_scale(&r, days.len()).sqrt();
    let se = r.std_errors();
    let amplitude = r.params[0].exp();
    Ok(PowerLawFit {
        base: 0.0,
        amplitude,
        exponent: r.params[1],
        base_err: 0.0,
        amplitude_err: amplitude * se[0] * scale,
        exponent_err: se[1] * scale,
        residual_norm: r.residual_norm,
    })
}
