//! Toggle indicators, one-sided periodograms and spectrum averaging.
//!
//! PSD convention: for a real sequence `x_j` sampled at `dt` over `T = N·dt`,
//! `PSD_k = (dt² / T)·|X_k|²` on `f_k = k / T`, doubled for interior bins
//! `0 < k < N/2`. No window and no mean removal is applied, so
//! `Σ_k PSD_k·Δf = (1/T)·Σ_j x_j²·dt`.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{MeasurementMode, ParityTrace};

pub const MIN_PERIODOGRAM_LEN: usize = 64;

/// `d_i = |m_{i+1} − m_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToggleTrace {
    pub d: Vec<u8>,
    pub dt: f64,
}

impl ToggleTrace {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.d.iter().map(|&v| v as f64).collect()
    }
}

pub fn toggle_transform(trace: &ParityTrace) -> Result<ToggleTrace> {
    if trace.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: trace.len(),
        });
    }
    let d = trace.m.windows(2).map(|w| w[0] ^ w[1]).collect();
    Ok(ToggleTrace { d, dt: trace.dt })
}

/// Parity indicator of a trace: the toggle transform for restless traces; for
/// heralded traces the outcome already encodes parity, so `m[1..]` is used.
pub fn parity_indicator(trace: &ParityTrace) -> Result<ToggleTrace> {
    match trace.mode {
        MeasurementMode::Restless => toggle_transform(trace),
        MeasurementMode::Heralded => {
            if trace.len() < 2 {
                return Err(Error::TooShort {
                    needed: 2,
                    got: trace.len(),
                });
            }
            Ok(ToggleTrace {
                d: trace.m[1..].to_vec(),
                dt: trace.dt,
            })
        }
    }
}

/// One-sided power spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz, ascending from 0.
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub psd: Vec<f64>,
    /// Measurement time represented, s.
    pub duration: f64,
    pub n_averaged: usize,
    /// Sampling interval of the underlying sequence, when known.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl Spectrum {
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    pub fn max_freq(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Total power `Σ PSD_k·Δf`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df()
    }

    /// Geometric means of the PSD in logarithmic frequency bins (DC excluded).
    /// Returns `(center_freq, psd, bin_count)` per non-empty bin.
    pub fn log_binned(&self, bins_per_decade: usize) -> Vec<(f64, f64, usize)> {
        let df = self.df();
        if self.len() < 2 || df <= 0.0 || bins_per_decade == 0 {
            return Vec::new();
        }
        let lo = df.log10();
        let step = 1.0 / bins_per_decade as f64;
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        let mut acc = (0.0, 0.0, 0usize, usize::MAX);
        for (&f, &p) in self.freqs.iter().zip(&self.psd).skip(1) {
            if p <= 0.0 {
                continue;
            }
            let bin = ((f.log10() - lo) / step + 1e-9).floor() as usize;
            if bin != acc.3 && acc.2 > 0 {
                out.push(((acc.0 / acc.2 as f64).exp(), (acc.1 / acc.2 as f64).exp(), acc.2));
                acc = (0.0, 0.0, 0, bin);
            }
            acc.3 = bin;
            acc.0 += f.ln();
            acc.1 += p.ln();
            acc.2 += 1;
        }
        if acc.2 > 0 {
            out.push(((acc.0 / acc.2 as f64).exp(), (acc.1 / acc.2 as f64).exp(), acc.2));
        }
        out
    }

    /// `freq_hz,psd` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["freq_hz", "psd"])?;
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            w.write_record(&[f.to_string(), p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn plan_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// One-sided periodogram of the toggle sequence.
pub fn periodogram(d: &ToggleTrace) -> Result<Spectrum> {
    periodogram_of(&d.as_f64(), d.dt)
}

/// One-sided periodogram of an arbitrary real sequence sampled at `dt`.
pub fn periodogram_of(x: &[f64], dt: f64) -> Result<Spectrum> {
    let n = x.len();
    if n < MIN_PERIODOGRAM_LEN {
        return Err(Error::TooShort {
            needed: MIN_PERIODOGRAM_LEN,
            got: n,
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan_fft(n).process(&mut buf);

    let duration = n as f64 * dt;
    let scale = dt * dt / duration;
    let half = n / 2;
    let (freqs, psd) = (0..=half)
        .map(|k| {
            let interior = k > 0 && (2 * k < n);
            let factor = if interior { 2.0 } else { 1.0 };
            (k as f64 / duration, factor * scale * buf[k].norm_sqr())
        })
        .unzip();
    Ok(Spectrum {
        freqs,
        psd,
        duration,
        n_averaged: 1,
        dt: Some(dt),
    })
}

/// Averages spectra on the finest common grid.
///
/// Each input is linearly interpolated onto `k·Δf_min` up to the smallest
/// common maximum frequency; the result is the pointwise mean. `duration` and
/// `n_averaged` accumulate over the inputs.
pub fn aggregate_spectra(spectra: &[Spectrum]) -> Result<Spectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::invalid("spectra", "need at least one spectrum"))?;
    for s in spectra {
        if s.len() < 2 || s.freqs.len() != s.psd.len() {
            return Err(Error::invalid("spectra", "malformed spectrum"));
        }
    }
    let duration = spectra.iter().map(|s| s.duration).sum();
    let n_averaged = spectra.iter().map(|s| s.n_averaged).sum();
    let count = spectra.len() as f64;

    if spectra.iter().all(|s| s.freqs == first.freqs) {
        let mut psd = vec![0.0; first.len()];
        for s in spectra {
            for (acc, p) in psd.iter_mut().zip(&s.psd) {
                *acc += p;
            }
        }
        psd.iter_mut().for_each(|p| *p /= count);
        return Ok(Spectrum {
            freqs: first.freqs.clone(),
            psd,
            duration,
            n_averaged,
            dt: common_dt(spectra),
        });
    }

    let df = spectra.iter().map(Spectrum::df).fold(f64::INFINITY, f64::min);
    let fmax = spectra
        .iter()
        .map(Spectrum::max_freq)
        .fold(f64::INFINITY, f64::min);
    let n = (fmax / df + 1e-9).floor() as usize + 1;
    let freqs: Vec<f64> = (0..n).map(|k| k as f64 * df).collect();
    let mut psd = vec![0.0; n];
    for s in spectra {
        for (acc, &f) in psd.iter_mut().zip(&freqs) {
            *acc += interpolate_uniform(s, f);
        }
    }
    psd.iter_mut().for_each(|p| *p /= count);
    Ok(Spectrum {
        freqs,
        psd,
        duration,
        n_averaged,
        dt: common_dt(spectra),
    })
}

/// The shared sampling interval, if every input has the same one.
fn common_dt(spectra: &[Spectrum]) -> Option<f64> {
    let dt = spectra.first()?.dt?;
    spectra
        .iter()
        .all(|s| s.dt.is_some_and(|d| (d / dt - 1.0).abs() < 1e-12))
        .then_some(dt)
}

fn interpolate_uniform(s: &Spectrum, f: f64) -> f64 {
    let df = s.df();
    let x = (f - s.freqs[0]) / df;
    let last = s.len() - 1;
    if x <= 0.0 {
        return s.psd[0];
    }
    let i = x.floor() as usize;
    if i >= last {
        return s.psd[last];
    }
    let w = x - i as f64;
    s.psd[i] * (1.0 - w) + s.psd[i + 1] * w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    Gaussian { sigma: f64 },
    MovingAverage { width: usize },
}

/// Smoothed toggle trace for plotting. Kernels are renormalized at the edges,
/// so constant input stays constant.
pub fn smooth_for_display(d: &ToggleTrace, mode: Smoothing) -> Result<Vec<f64>> {
    let x = d.as_f64();
    let kernel: Vec<f64> = match mode {
        Smoothing::Gaussian { sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("sigma", "must be > 0"));
            }
            let half = (4.0 * sigma).ceil() as isize;
            (-half..=half)
                .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
                .collect()
        }
        Smoothing::MovingAverage { width } => {
            if width == 0 {
                return Err(Error::invalid("width", "must be ≥ 1"));
            }
            vec![1.0; width]
        }
    };
    Ok(convolve_normalized(&x, &kernel))
}

fn convolve_normalized(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let left = ((kernel.len() - 1) / 2) as isize;
    (0..n)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as isize - left;
                if (0..n).contains(&j) {
                    acc += w * x[j as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toggles(m: &[u8]) -> Vec<u8> {
        toggle_transform(&ParityTrace::from_states(m.to_vec(), 1.0).unwrap())
            .unwrap()
            .d
    }

    #[test]
    fn toggle_examples() {
        assert_eq!(toggles(&[0, 1, 0, 1]), vec![1, 1, 1]);
        assert_eq!(toggles(&[0, 0, 0]), vec![0, 0]);
        assert_eq!(toggles(&[1, 0, 0, 1]), vec![1, 0, 1]);
        let short = ParityTrace::from_states(vec![1], 1.0).unwrap();
        assert!(toggle_transform(&short).is_err());
    }

    #[test]
    fn constant_sequence_has_only_dc() {
        let s = periodogram_of(&vec![1.0; 128], 1e-3).unwrap();
        let dc = s.psd[0];
        assert!(dc > 0.0);
        assert!(s.psd[1..].iter().all(|&p| p <= 1e-12 * dc));
    }

    #[test]
    fn alternating_sequence_peaks_at_nyquist() {
        let x: Vec<f64> = (0..256).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = periodogram_of(&x, 1e-6).unwrap();
        let peak = s.psd[s.len() - 1];
        assert!((s.max_freq() - 0.5e6).abs() < 1e-6);
        assert!(s.psd[..s.len() - 1].iter().all(|&p| p <= 1e-12 * peak));
    }

    #[test]
    fn too_short_for_periodogram() {
        assert!(periodogram_of(&[1.0; 10], 1.0).is_err());
    }

    #[test]
    fn odd_length_doubles_all_nonzero_bins() {
        let x: Vec<f64> = (0..101).map(|i| ((i * 7) % 5) as f64).collect();
        let s = periodogram_of(&x, 0.01).unwrap();
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((s.total_power() / ms - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_identity_and_pair() {
        let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.3).sin()).collect();
        let s = periodogram_of(&x, 1e-3).unwrap();
        assert_eq!(aggregate_spectra(std::slice::from_ref(&s)).unwrap(), s);
        let two = aggregate_spectra(&[s.clone(), s.clone()]).unwrap();
        assert_eq!(two.psd, s.psd);
        assert_eq!(two.n_averaged, 2);
        assert!(aggregate_spectra(&[]).is_err());
    }

    #[test]
    fn aggregate_mixed_grids_uses_finest_spacing() {
        let a = Spectrum {
            freqs: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            psd: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            duration: 1.0,
            n_averaged: 1,
            dt: None,
        };
        let b = Spectrum {
            freqs: vec![0.0, 2.0, 4.0, 6.0],
            psd: vec![1.0, 1.0, 1.0, 1.0],
            duration: 0.5,
            n_averaged: 1,
            dt: None,
        };
        let out = aggregate_spectra(&[a, b]).unwrap();
        assert_eq!(out.freqs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(out.psd, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(out.n_averaged, 2);
    }

    #[test]
    fn smoothing_constant_and_identity() {
        let d = ToggleTrace {
            d: vec![1; 50],
            dt: 1.0,
        };
        for v in smooth_for_display(&d, Smoothing::Gaussian { sigma: 10.0 }).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let d = ToggleTrace {
            d: vec![0, 1, 1, 0, 1],
            dt: 1.0,
        };
        let id = smooth_for_display(&d, Smoothing::MovingAverage { width: 1 }).unwrap();
        assert_eq!(id, vec![0.0, 1.0, 1.0, 0.0, 1.0]);
        assert!(smooth_for_display(&d, Smoothing::MovingAverage { width: 0 }).is_err());
        assert!(smooth_for_display(&d, Smoothing::Gaussian { sigma: 0.0 }).is_err());
    }

    #[test]
    fn log_binning_covers_all_positive_bins() {
        let x: Vec<f64> = (0..1024).map(|i| ((i * 13) % 7) as f64).collect();
        let s = periodogram_of(&x, 1e-3).unwrap();
        let bins = s.log_binned(10);
        let counted: usize = bins.iter().map(|b| b.2).sum();
        let positive = s.psd[1..].iter().filter(|&&p| p > 0.0).count();
        assert_eq!(counted, positive);
        assert!(bins.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
