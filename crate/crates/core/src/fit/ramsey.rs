//! Two-tone decaying-cosine fit of averaged Ramsey fringes.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::nls::{nls_fit, Bounds, FitData, Model, NlsOptions};
use crate::error::{Error, Result};

/// Frequencies in MHz, times in µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyFit {
    pub f_e: f64,
    pub f_o: f64,
    pub t2_star: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub phase: f64,
    pub f_e_err: f64,
    pub f_o_err: f64,
    pub t2_star_err: f64,
    pub residual_norm: f64,
}

impl RamseyFit {
    pub fn delta_f(&self) -> f64 {
        (self.f_e - self.f_o).abs()
    }
}

struct TwoTone;

impl Model for TwoTone {
    fn n_params(&self) -> usize {
        6
    }

    fn eval(&self, t: f64, p: &[f64]) -> f64 {
        let [fe, fo, t2, a, c, phi] = [p[0], p[1], p[2], p[3], p[4], p[5]];
        a * (-t / t2).exp() * 0.5 * ((2.0 * PI * fe * t + phi).cos() + (2.0 * PI * fo * t + phi).cos()) + c
    }

    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let [fe, fo, t2, a, _, phi] = [p[0], p[1], p[2], p[3], p[4], p[5]];
        let env = (-t / t2).exp();
        let (pe, po) = (2.0 * PI * fe * t + phi, 2.0 * PI * fo * t + phi);
        let osc = 0.5 * (pe.cos() + po.cos());
        g[0] = -a * env * 0.5 * pe.sin() * 2.0 * PI * t;
        g[1] = -a * env * 0.5 * po.sin() * 2.0 * PI * t;
        g[2] = a * env * osc * t / (t2 * t2);
        g[3] = env * osc;
        g[4] = 1.0;
        g[5] = -a * env * 0.5 * (pe.sin() + po.sin());
    }
}

/// Fits `A e^{−t/T2*} ½[cos(2πf_e t + φ) + cos(2πf_o t + φ)] + c`.
///
/// Starting frequencies are the two strongest peaks of the zero-padded FFT;
/// the lower-frequency peak seeds `f_e`. Peaks closer than two FFT bins
/// (`2/span`) are reported as degenerate.
pub fn fit_two_tone_ramsey(times: &[f64], signal: &[f64]) -> Result<RamseyFit> {
    let n = times.len();
    if n < 50 || signal.len() != n {
        return Err(Error::TooShort {
            needed: 50,
            got: n.min(signal.len()),
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times", "must be strictly ascending"));
    }
    let span = times[n - 1] - times[0];
    let step = span / (n - 1) as f64;
    let resolution = 1.0 / span;

    let (f1, f2) = two_peaks(signal, step)?;
    if (f2 - f1).abs() < 2.0 * resolution {
        return Err(Error::DegenerateTones {
            separation_hz: (f2 - f1).abs() * 1e6,
            min_hz: 2.0 * resolution * 1e6,
        });
    }
    let (fe0, fo0) = (f1.min(f2), f1.max(f2));

    let mean = signal.iter().sum::<f64>() / n as f64;
    let amp0 = signal
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    let nyquist = 0.5 / step;

    let mut bounds = Bounds::unbounded(6);
    bounds.lower[0] = 0.0;
    bounds.upper[0] = nyquist;
    bounds.lower[1] = 0.0;
    bounds.upper[1] = nyquist;
    bounds.lower[2] = step;
    bounds.upper[2] = 1e3 * span;
    bounds.lower[3] = 0.0;

    let data = FitData::new(times, signal);
    let mut best: Option<super::nls::NlsResult> = None;
    for k in 0..4 {
        let init = [fe0, fo0, span / 3.0, amp0, mean, k as f64 * PI / 2.0];
        if let Ok(r) = nls_fit(&TwoTone, &data, &init, Some(&bounds), NlsOptions::default()) {
            if best.as_ref().is_none_or(|b| r.residual_norm < b.residual_norm) {
                best = Some(r);
            }
        }
    }
    let r = best.ok_or(Error::NotConverged { iterations: 200 })?;
    let se = r.std_errors();
    let p = &r.params;
    Ok(RamseyFit {
        f_e: p[0],
        f_o: p[1],
        t2_star: p[2],
        amplitude: p[3],
        offset: p[4],
        phase: p[5].rem_euclid(2.0 * PI),
        f_e_err: se[0],
        f_o_err: se[1],
        t2_star_err: se[2],
        residual_norm: r.residual_norm,
    })
}

/// Two strongest local maxima of the zero-padded amplitude spectrum, refined
/// by parabolic interpolation. A secondary peak weaker than 20 % of the main
/// one is treated as absent, which yields coincident frequencies.
fn two_peaks(signal: &[f64], step: f64) -> Result<(f64, f64)> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let padded = (8 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    for (b, v) in buf.iter_mut().zip(signal) {
        *b = Complex64::new(v - mean, 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm()).collect();
    let df = 1.0 / (padded as f64 * step);

    let mut peaks: Vec<(usize, f64)> = (1..mag.len() - 1)
        .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        .map(|i| (i, mag[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let refine = |i: usize| {
        let (a, b, c) = (mag[i - 1], mag[i], mag[i + 1]);
        let den = a - 2.0 * b + c;
        let shift = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
        (i as f64 + shift) * df
    };
    let first = peaks
        .first()
        .ok_or_else(|| Error::Degenerate("no spectral peak in Ramsey signal".into()))?;
    let f1 = refine(first.0);
    let f2 = peaks
        .iter()
        .skip(1)
        .find(|p| p.1 >= 0.2 * first.1)
        .map_or(f1, |p| refine(p.0));
    Ok((f1, f2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{synthesize_ramsey_signal, RamseyParams};

    fn grid() -> Vec<f64> {
        (0..400).map(|i| i as f64 * 0.05).collect()
    }

    #[test]
    fn noiseless_recovery() {
        let mut p = RamseyParams::new(2.5, 4.5, 10.0);
        p.offset = 0.5;
        p.phase = 0.3;
        let s = synthesize_ramsey_signal(&p, &grid()).unwrap();
        let fit = fit_two_tone_ramsey(&s.times, &s.signal).unwrap();
        assert!((fit.f_e - 2.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.f_o - 4.5).abs() < 1e-6);
        assert!((fit.t2_star - 10.0).abs() < 1e-4);
    }

    #[test]
    fn equal_tones_are_degenerate() {
        let s = synthesize_ramsey_signal(&RamseyParams::new(3.0, 3.0, 10.0), &grid()).unwrap();
        assert!(matches!(
            fit_two_tone_ramsey(&s.times, &s.signal),
            Err(Error::DegenerateTones { .. })
        ));
    }

    #[test]
    fn short_input_rejected() {
        assert!(fit_two_tone_ramsey(&[0.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
