//! Lorentzian-mixture fits of telegraph power spectra.
//!
//! Model: `S(f) = Σ_k A_k·Γ_k / (Γ_k² + (πf)²) + floor`. With this
//! parameterization a symmetric telegraph signal flipping at Poisson rate λ
//! has `Γ = λ`. The fit minimizes squared residuals of `ln S` against the
//! log-PSD with the DC bin excluded; parameters are carried as logarithms so
//! amplitudes, corners and the floor stay positive.
//!
//! A spectrum that records its sampling interval `dt` is fitted with the
//! sampled-process form of each term (see [`sampled_lorentzian`]); it agrees
//! with the expression above for `Γ, f ≪ 1/dt` and stays exact up to Nyquist,
//! where the continuous form would bias the corners of a long periodogram.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::nls::{nls_fit, Bounds, Convergence, FitData, Model, NlsOptions};
use crate::error::{Error, Result};
use crate::spectral::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianComponent {
    /// PSD units × Hz.
    pub amplitude: f64,
    /// Hz.
    pub corner: f64,
    pub amplitude_err: f64,
    pub corner_err: f64,
}

impl LorentzianComponent {
    pub fn evaluate(&self, f: f64) -> f64 {
        lorentzian(self.amplitude, self.corner, f)
    }
}

#[inline]
pub fn lorentzian(amplitude: f64, corner: f64, f: f64) -> f64 {
    amplitude * corner / (corner * corner + (PI * f).powi(2))
}

/// Spectrum of an exponentially correlated sequence sampled every `dt`:
/// `A·dt·sinh(2Γdt) / (cosh(2Γdt) − cos(2πf·dt))`.
#[inline]
pub fn sampled_lorentzian(amplitude: f64, corner: f64, f: f64, dt: f64) -> f64 {
    let a = 2.0 * corner * dt;
    amplitude * dt * a.sinh() / sampled_den(a, PI * f * dt)
}

/// `cosh a − cos 2h` without cancellation.
#[inline]
fn sampled_den(a: f64, h: f64) -> f64 {
    2.0 * ((0.5 * a).sinh().powi(2) + h.sin().powi(2))
}

/// One term of the mixture; `dt = None` selects the continuous form.
#[inline]
fn kernel(amplitude: f64, corner: f64, f: f64, dt: Option<f64>) -> f64 {
    match dt {
        Some(dt) => sampled_lorentzian(amplitude, corner, f, dt),
        None => lorentzian(amplitude, corner, f),
    }
}

/// `Γ·∂L/∂Γ` for unit amplitude.
#[inline]
fn kernel_log_corner_derivative(corner: f64, f: f64, dt: Option<f64>) -> f64 {
    match dt {
        Some(dt) => {
            let a = 2.0 * corner * dt;
            let h = PI * f * dt;
            let den = sampled_den(a, h);
            // cosh a·den − sinh²a = 1 − cosh a·cos 2h
            let num = 2.0 * h.sin().powi(2) * a.cosh() - 2.0 * (0.5 * a).sinh().powi(2);
            a * dt * num / (den * den)
        }
        None => {
            let w2 = (PI * f).powi(2);
            let den = corner * corner + w2;
            corner * (w2 - corner * corner) / (den * den)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    /// Sorted by ascending corner.
    pub components: Vec<LorentzianComponent>,
    pub noise_floor: f64,
    /// Covariance of `[ln A_1, ln Γ_1, …, ln floor]`.
    pub covariance: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub convergence: Convergence,
    pub n_bins: usize,
    /// Set when near-coincident or unresolved corners forced a refit with
    /// fewer components.
    pub reduced_from: Option<usize>,
    /// Sampling interval used by the model; `None` for the continuous form.
    pub dt: Option<f64>,
}

impl LorentzianFit {
    /// Tunneling rate estimate: the lowest corner frequency.
    pub fn rate(&self) -> f64 {
        self.components[0].corner
    }

    pub fn rate_err(&self) -> f64 {
        self.components[0].corner_err
    }

    pub fn evaluate(&self, f: f64) -> f64 {
        self.components
            .iter()
            .map(|c| kernel(c.amplitude, c.corner, f, self.dt))
            .sum::<f64>()
            + self.noise_floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LorentzianOptions {
    pub components: usize,
    /// Lower edge of the corner search grid; defaults to five frequency bins.
    pub min_corner: Option<f64>,
    pub grid_per_decade: usize,
    /// Relative corner separation below which components are merged.
    pub degenerate_tolerance: f64,
    /// Components whose relative 1σ corner uncertainty exceeds this are
    /// treated as unresolved and the fit is repeated with one fewer.
    pub max_corner_uncertainty: f64,
    /// Use the sampled-process form when the spectrum records its `dt`.
    pub sampled: bool,
}

impl Default for LorentzianOptions {
    fn default() -> Self {
        Self {
            components: 3,
            min_corner: None,
            grid_per_decade: 4,
            degenerate_tolerance: 0.05,
            max_corner_uncertainty: 0.5,
            sampled: true,
        }
    }
}

/// Log of the mixture. In sampled mode the abscissa is `u = sin²(πf·dt)`
/// and the corner-dependent factors are cached per parameter vector.
/// Log-amplitude assigned to components the initial solve switched off.
const INACTIVE_LN_AMPLITUDE: f64 = -690.0;

struct LogMixture {
    k: usize,
    dt: Option<f64>,
    cache: RefCell<(Vec<f64>, Vec<Term>)>,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    amplitude: f64,
    corner: f64,
    a: f64,
    sinh_a: f64,
    cosh_a: f64,
    /// `sinh²(a/2)`
    q: f64,
}

impl Term {
    fn new(amplitude: f64, corner: f64, dt: Option<f64>) -> Self {
        let a = 2.0 * corner * dt.unwrap_or(0.0);
        Self {
            amplitude,
            corner,
            a,
            sinh_a: a.sinh(),
            cosh_a: a.cosh(),
            q: (0.5 * a).sinh().powi(2),
        }
    }

    fn value(&self, x: f64, dt: Option<f64>) -> f64 {
        match dt {
            Some(dt) => self.amplitude * dt * self.sinh_a / (2.0 * (self.q + x)),
            None => lorentzian(self.amplitude, self.corner, x),
        }
    }

    /// `Γ·∂S/∂Γ`
    fn log_corner_derivative(&self, x: f64, dt: Option<f64>) -> f64 {
        match dt {
            Some(dt) => {
                let den = self.q + x;
                self.amplitude * self.a * dt * (x * self.cosh_a - self.q) / (2.0 * den * den)
            }
            None => self.amplitude * kernel_log_corner_derivative(self.corner, x, None),
        }
    }
}

impl LogMixture {
    fn new(k: usize, dt: Option<f64>) -> Self {
        Self {
            k,
            dt,
            cache: RefCell::new((Vec::new(), Vec::new())),
        }
    }

    /// Maps frequencies onto the model abscissa.
    fn abscissa(&self, f: f64) -> f64 {
        match self.dt {
            Some(dt) => (PI * f * dt).sin().powi(2),
            None => f,
        }
    }

    fn with_terms<R>(&self, p: &[f64], body: impl FnOnce(&[Term]) -> R) -> R {
        let mut cache = self.cache.borrow_mut();
        if cache.0.as_slice() != p {
            cache.1 = (0..self.k)
                .map(|c| Term::new(p[2 * c].exp(), p[2 * c + 1].exp(), self.dt))
                .collect();
            cache.0 = p.to_vec();
        }
        body(&cache.1)
    }

    fn linear(&self, x: f64, p: &[f64]) -> f64 {
        let floor = p[2 * self.k].exp();
        self.with_terms(p, |terms| {
            floor + terms.iter().map(|t| t.value(x, self.dt)).sum::<f64>()
        })
    }
}

impl Model for LogMixture {
    fn n_params(&self) -> usize {
        2 * self.k + 1
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        self.linear(x, p).ln()
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) {
        let floor = p[2 * self.k].exp();
        self.with_terms(p, |terms| {
            let s = floor + terms.iter().map(|t| t.value(x, self.dt)).sum::<f64>();
            for (c, t) in terms.iter().enumerate() {
                grad[2 * c] = t.value(x, self.dt) / s;
                grad[2 * c + 1] = t.log_corner_derivative(x, self.dt) / s;
            }
            grad[2 * self.k] = floor / s;
        });
    }
}

/// Fits `options.components` Lorentzians plus a white floor to `spectrum`.
pub fn fit_lorentzian_sum(spectrum: &Spectrum, options: LorentzianOptions) -> Result<LorentzianFit> {
    let k = options.components;
    if !(1..=4).contains(&k) {
        return Err(Error::invalid("components", "must be between 1 and 4"));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = spectrum
        .freqs
        .iter()
        .zip(&spectrum.psd)
        .skip(1)
        .filter(|(f, p)| **f > 0.0 && **p > 0.0 && p.is_finite())
        .map(|(f, p)| (*f, p.ln()))
        .unzip();
    if x.len() < 10 * k {
        return Err(Error::TooShort {
            needed: 10 * k,
            got: x.len(),
        });
    }
    let df = spectrum.df();
    let nyquist = spectrum.max_freq();
    let lo = options.min_corner.unwrap_or(5.0 * df).max(df);
    if !(lo < nyquist) {
        return Err(Error::invalid(
            "min_corner",
            "must lie below the maximum frequency",
        ));
    }

    let dt = spectrum
        .dt
        .filter(|d| options.sampled && *d > 0.0 && d.is_finite());
    let binned = spectrum.log_binned(20);
    let ln_floor_min = binned
        .iter()
        .map(|b| b.1.ln())
        .fold(f64::INFINITY, f64::min)
        .min(y.iter().copied().fold(f64::INFINITY, f64::max))
        + (1e-6f64).ln();
    let mut k = k;
    let mut reduced_from = None;
    loop {
        let init = initial_guess(&binned, k, lo, nyquist, options.grid_per_decade, dt);
        // The best grid point gave some components no weight at all.
        let active = (0..k).filter(|c| init[2 * c] > INACTIVE_LN_AMPLITUDE).count();
        if active < k && k > 1 {
            reduced_from.get_or_insert(options.components);
            k = active.max(1);
            continue;
        }
        let fit = match refine(&x, &y, k, &init, df, nyquist, dt, ln_floor_min) {
            Ok(fit) => fit,
            // A redundant component leaves the Jacobian rank deficient.
            Err(Error::SingularJacobian | Error::NotConverged { .. }) if k > 1 => {
                reduced_from.get_or_insert(options.components);
                k -= 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let degenerate = fit
            .components
            .windows(2)
            .any(|w| w[1].corner <= w[0].corner * (1.0 + options.degenerate_tolerance));
        let unresolved = fit
            .components
            .iter()
            .any(|c| !(c.corner_err <= options.max_corner_uncertainty * c.corner));
        if (degenerate || unresolved) && k > 1 {
            reduced_from.get_or_insert(options.components);
            k -= 1;
            continue;
        }
        return Ok(LorentzianFit { reduced_from, ..fit });
    }
}

#[allow(clippy::too_many_arguments)]
fn refine(
    x: &[f64],
    y: &[f64],
    k: usize,
    init: &[f64],
    df: f64,
    nyquist: f64,
    dt: Option<f64>,
    ln_floor_min: f64,
) -> Result<LorentzianFit> {
    let model = LogMixture::new(k, dt);
    let n = model.n_params();
    let mut bounds = Bounds::unbounded(n);
    for c in 0..k {
        bounds.lower[2 * c + 1] = (0.1 * df).ln();
        bounds.upper[2 * c + 1] = (100.0 * nyquist).ln();
    }
    // A vanishing floor would leave its Jacobian column empty.
    bounds.lower[2 * k] = ln_floor_min;
    let mut start = init.to_vec();
    for (i, v) in start.iter_mut().enumerate() {
        *v = v.clamp(bounds.lower[i], bounds.upper[i]);
    }
    let options = NlsOptions {
        max_iterations: 400,
        ..NlsOptions::default()
    };
    let u: Vec<f64> = x.iter().map(|&f| model.abscissa(f)).collect();
    let r = nls_fit(&model, &FitData::new(&u, y), &start, Some(&bounds), options)?;
    let se = r.std_errors();

    let mut components: Vec<LorentzianComponent> = (0..k)
        .map(|c| {
            let amplitude = r.params[2 * c].exp();
            let corner = r.params[2 * c + 1].exp();
            LorentzianComponent {
                amplitude,
                corner,
                amplitude_err: amplitude * se[2 * c],
                corner_err: corner * se[2 * c + 1],
            }
        })
        .collect();
    // Permute the covariance alongside the components.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| components[a].corner.total_cmp(&components[b].corner));
    components = order.iter().map(|&i| components[i]).collect();
    let index: Vec<usize> = order
        .iter()
        .flat_map(|&c| [2 * c, 2 * c + 1])
        .chain([2 * k])
        .collect();
    let covariance = index
        .iter()
        .map(|&i| index.iter().map(|&j| r.covariance[(i, j)]).collect())
        .collect();

    Ok(LorentzianFit {
        components,
        noise_floor: r.params[2 * k].exp(),
        covariance,
        residual_norm: r.residual_norm,
        iterations: r.iterations,
        convergence: r.convergence,
        n_bins: x.len(),
        reduced_from: None,
        dt,
    })
}

/// Grid search over sorted corner tuples; amplitudes and floor come from a
/// non-negative relative least-squares solve on log-binned data.
fn initial_guess(
    binned: &[(f64, f64, usize)],
    k: usize,
    lo: f64,
    hi: f64,
    per_decade: usize,
    dt: Option<f64>,
) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = ((decades * per_decade as f64).ceil() as usize).max(k);
    let grid: Vec<f64> = (0..=steps)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let corners: Vec<f64> = combo.iter().map(|&i| grid[i]).collect();
        if let Some((cost, coeffs)) = solve_amplitudes(binned, &corners, dt) {
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                let mut p = Vec::with_capacity(2 * k + 1);
                for (c, g) in corners.iter().enumerate() {
                    p.push(coeffs[c].max(1e-300).ln().max(INACTIVE_LN_AMPLITUDE));
                    p.push(g.ln());
                }
                p.push(coeffs[k].max(1e-300).ln());
                best = Some((cost, p));
            }
        }
        if !next_combination(&mut combo, grid.len()) {
            break;
        }
    }
    best.map(|(_, p)| p).unwrap_or_else(|| {
        let mut p = Vec::new();
        for c in 0..k {
            p.push(0.0);
            p.push(grid[(c * steps) / k.max(1)].ln());
        }
        p.push(0.0);
        p
    })
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Returns the log-space cost and non-negative `[A_1…A_k, floor]`.
fn solve_amplitudes(
    binned: &[(f64, f64, usize)],
    corners: &[f64],
    dt: Option<f64>,
) -> Option<(f64, Vec<f64>)> {
    let k = corners.len();
    let basis = |f: f64, j: usize| {
        if j < k {
            kernel(1.0, corners[j], f, dt)
        } else {
            1.0
        }
    };
    let mut active: Vec<usize> = (0..=k).collect();
    let mut coeffs = vec![0.0; k + 1];
    // Active-set loop: drop negative coefficients and resolve.
    while !active.is_empty() {
        let n = active.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for &(f, p, _) in binned {
            let w = 1.0 / p;
            for (ia, &ja) in active.iter().enumerate() {
                let ba = basis(f, ja) * w;
                b[ia] += ba;
                for (ib, &jb) in active.iter().enumerate() {
                    a[(ia, ib)] += ba * basis(f, jb) * w;
                }
            }
        }
        let sol = a.lu().solve(&b)?;
        if let Some(neg) = (0..n)
            .filter(|&i| sol[i] <= 0.0)
            .min_by(|&i, &j| sol[i].total_cmp(&sol[j]))
        {
            active.remove(neg);
            continue;
        }
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for (i, &j) in active.iter().enumerate() {
            coeffs[j] = sol[i];
        }
        break;
    }
    if active.is_empty() {
        return None;
    }
    let cost = binned
        .iter()
        .map(|&(f, p, n)| {
            let s: f64 = (0..=k).map(|j| coeffs[j] * basis(f, j)).sum();
            if s <= 0.0 {
                f64::INFINITY
            } else {
                n as f64 * (p.ln() - s.ln()).powi(2)
            }
        })
        .sum::<f64>();
    cost.is_finite().then_some((cost, coeffs))
}
