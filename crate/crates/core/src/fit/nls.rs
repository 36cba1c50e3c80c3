//! Bounded Levenberg–Marquardt least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar model `y = f(x; p)`.
pub trait Model {
    fn n_params(&self) -> usize;

    fn eval(&self, x: f64, p: &[f64]) -> f64;

    /// Writes `∂f/∂p` into `grad`. Defaults to central differences.
    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) {
        let mut q = p.to_vec();
        for j in 0..p.len() {
            let h = 1e-6 * p[j].abs().max(1e-3);
            q[j] = p[j] + h;
            let up = self.eval(x, &q);
            q[j] = p[j] - h;
            let down = self.eval(x, &q);
            q[j] = p[j];
            grad[j] = (up - down) / (2.0 * h);
        }
    }
}

/// Closure adapter with finite-difference gradients.
pub struct FnModel<F> {
    pub n_params: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64]) -> f64> Model for FnModel<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        (self.f)(x, p)
    }
}

/// Observations; `weights` multiply residuals (use `1/σ`).
#[derive(Debug, Clone, Copy)]
pub struct FitData<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub weights: Option<&'a [f64]>,
}

impl<'a> FitData<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        Self { x, y, weights: None }
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    fn clamp(&self, p: &mut [f64]) {
        for (v, (lo, hi)) in p.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub cost_tolerance: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Step,
    Cost,
    ExactFit,
    /// No downhill step exists at working precision.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlsResult {
    pub params: Vec<f64>,
    /// `s²·(JᵀJ)⁻¹` with `s² = RSS / max(m − p, 1)`.
    pub covariance: DMatrix<f64>,
    /// `sqrt(Σ wᵢ² rᵢ²)`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub convergence: Convergence,
}

impl NlsResult {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }

    pub fn covariance_rows(&self) -> Vec<Vec<f64>> {
        self.covariance
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

struct Normal {
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
    cost: f64,
}

fn cost_of<M: Model + ?Sized>(model: &M, data: &FitData, p: &[f64]) -> f64 {
    (0..data.x.len())
        .map(|i| {
            let r = data.weight(i) * (data.y[i] - model.eval(data.x[i], p));
            r * r
        })
        .sum()
}

fn normal_equations<M: Model + ?Sized>(model: &M, data: &FitData, p: &[f64]) -> Normal {
    let n = p.len();
    let mut jtj = DMatrix::zeros(n, n);
    let mut jtr = DVector::zeros(n);
    let mut grad = vec![0.0; n];
    let mut cost = 0.0;
    for i in 0..data.x.len() {
        let w = data.weight(i);
        let r = w * (data.y[i] - model.eval(data.x[i], p));
        model.gradient(data.x[i], p, &mut grad);
        for a in 0..n {
            let ga = w * grad[a];
            jtr[a] += ga * r;
            for b in a..n {
                jtj[(a, b)] += ga * w * grad[b];
            }
        }
        cost += r * r;
    }
    for a in 0..n {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    Normal { jtj, jtr, cost }
}

/// Minimizes `Σ wᵢ² (yᵢ − f(xᵢ; p))²` from `init` within optional box bounds.
pub fn nls_fit<M: Model + ?Sized>(
    model: &M,
    data: &FitData,
    init: &[f64],
    bounds: Option<&Bounds>,
    options: NlsOptions,
) -> Result<NlsResult> {
    let n = model.n_params();
    let m = data.x.len();
    if init.len() != n {
        return Err(Error::invalid(
            "init",
            format!("expected {n} parameters, got {}", init.len()),
        ));
    }
    if data.y.len() != m || data.weights.is_some_and(|w| w.len() != m) {
        return Err(Error::invalid("data", "x, y and weights must have equal length"));
    }
    if m < n {
        return Err(Error::TooShort { needed: n, got: m });
    }
    if let Some(b) = bounds {
        if b.lower.len() != n || b.upper.len() != n {
            return Err(Error::invalid("bounds", "dimension mismatch"));
        }
        if !b.contains(init) {
            return Err(Error::invalid("init", "outside bounds"));
        }
    }

    let mut p = init.to_vec();
    let mut ne = normal_equations(model, data, &p);
    if !ne.cost.is_finite() {
        return Err(Error::invalid("init", "model is not finite at the initial point"));
    }
    let scale0 = data.y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lambda = 1e-3;
    let mut convergence = None;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if ne.cost <= 1e-30 * scale0 {
            convergence = Some(Convergence::ExactFit);
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = ne.jtj.clone();
            for d in 0..n {
                a[(d, d)] += lambda * ne.jtj[(d, d)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&ne.jtr);
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            if let Some(b) = bounds {
                b.clamp(&mut trial);
            }
            let trial_cost = cost_of(model, data, &trial);
            if trial_cost.is_finite() && trial_cost <= ne.cost {
                let step = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel_cost = (ne.cost - trial_cost) / ne.cost.max(f64::MIN_POSITIVE);
                p = trial;
                ne = normal_equations(model, data, &p);
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if step <= options.step_tolerance * (norm + options.step_tolerance) {
                    convergence = Some(Convergence::Step);
                } else if rel_cost <= options.cost_tolerance {
                    convergence = Some(Convergence::Cost);
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            convergence = Some(Convergence::Stalled);
        }
        if convergence.is_some() {
            break;
        }
    }

    let convergence = convergence.ok_or(Error::NotConverged { iterations })?;
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = ne.cost / dof;
    let inv = ne.jtj.clone().try_inverse().ok_or(Error::SingularJacobian)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    Ok(NlsResult {
        params: p,
        covariance: inv * s2,
        residual_norm: ne.cost.sqrt(),
        iterations,
        convergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let model = FnModel {
            n_params: 1,
            f: |x: f64, p: &[f64]| p[0] * x,
        };
        let r = nls_fit(&model, &FitData::new(&x, &y), &[0.5], None, NlsOptions::default()).unwrap();
        assert!((r.params[0] - 2.0).abs() < 1e-12);
        assert!(r.residual_norm < 1e-10);
        assert!(r.std_errors()[0] < 1e-10);
    }

    #[test]
    fn quadratic_through_three_points() {
        let x = [-1.0, 0.5, 2.0];
        let y: Vec<f64> = x.iter().map(|x| 1.5 - 2.0 * x + 0.75 * x * x).collect();
        let model = FnModel {
            n_params: 3,
            f: |x: f64, p: &[f64]| p[0] + p[1] * x + p[2] * x * x,
        };
        let r = nls_fit(
            &model,
            &FitData::new(&x, &y),
            &[0.0, 0.0, 0.0],
            None,
            NlsOptions::default(),
        )
        .unwrap();
        for (got, want) in r.params.iter().zip([1.5, -2.0, 0.75]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(r.residual_norm < 1e-9);
    }

    #[test]
    fn noiseless_lorentzian_recovered() {
        let model = FnModel {
            n_params: 2,
            f: |f: f64, p: &[f64]| p[0] * p[1] / (p[1] * p[1] + (std::f64::consts::PI * f).powi(2)),
        };
        let x: Vec<f64> = (1..400).map(|i| i as f64 * 5.0).collect();
        let y: Vec<f64> = x.iter().map(|&f| model.eval(f, &[1.0, 500.0])).collect();
        let r = nls_fit(
            &model,
            &FitData::new(&x, &y),
            &[2.0, 300.0],
            None,
            NlsOptions::default(),
        )
        .unwrap();
        assert!((r.params[0] - 1.0).abs() < 1e-6);
        assert!((r.params[1] / 500.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bounds_are_respected() {
        let x = [1.0, 2.0, 3.0];
        let y = [-1.0, -2.0, -3.0];
        let model = FnModel {
            n_params: 1,
            f: |x: f64, p: &[f64]| p[0] * x,
        };
        let b = Bounds {
            lower: vec![0.0],
            upper: vec![10.0],
        };
        let r = nls_fit(
            &model,
            &FitData::new(&x, &y),
            &[1.0],
            Some(&b),
            NlsOptions::default(),
        )
        .unwrap();
        assert_eq!(r.params[0], 0.0);
        assert!(nls_fit(
            &model,
            &FitData::new(&x, &y),
            &[-1.0],
            Some(&b),
            NlsOptions::default()
        )
        .is_err());
    }

    #[test]
    fn underdetermined_rejected() {
        let model = FnModel {
            n_params: 3,
            f: |x: f64, p: &[f64]| p[0] + p[1] * x + p[2],
        };
        let err = nls_fit(
            &model,
            &FitData::new(&[1.0], &[1.0]),
            &[0.0; 3],
            None,
            NlsOptions::default(),
        );
        assert!(matches!(err, Err(Error::TooShort { .. })));
    }

    #[test]
    fn redundant_parameters_are_singular() {
        let model = FnModel {
            n_params: 2,
            f: |x: f64, p: &[f64]| (p[0] + p[1]) * x,
        };
        let x = [1.0, 2.0, 3.0];
        let y = [1.1, 2.0, 3.2];
        let err = nls_fit(
            &model,
            &FitData::new(&x, &y),
            &[0.3, 0.3],
            None,
            NlsOptions::default(),
        );
        assert!(matches!(err, Err(Error::SingularJacobian)));
    }
}
