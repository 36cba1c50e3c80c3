//! Steady-state quasiparticle density driven by a black-body radiator.
//!
//! Electrical power `P` heats the radiator to `T = sqrt(P / G̃)` (conduction
//! `G = G̃·T` to a cold bath), which emits `σ·A·T⁴`. A fraction `ε` of that
//! breaks Cooper pairs, so `g = ε·σ·A·(P/G̃)²`. The density balances
//! `g − s·x − r·x² = 0`; the tunneling rate is `k_tunnel·x` plus a base rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpModelParams {
    /// Single-particle trapping rate, 1/s.
    pub s: f64,
    /// Recombination coefficient, 1/s per unit density.
    pub r: f64,
    /// Cooper-pair-breaking efficiency.
    pub eps: f64,
    /// Radiator surface, m².
    pub area: f64,
    /// Thermal conductance coefficient, W/K².
    pub gtilde: f64,
    #[serde(default = "default_sigma")]
    pub sigma_sb: f64,
    /// Bath temperature, K. Only used by [`RadiatorModel::ExactBalance`].
    #[serde(default)]
    pub t_bath: f64,
    #[serde(default)]
    pub radiator_model: RadiatorModel,
}

fn default_sigma() -> f64 {
    STEFAN_BOLTZMANN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiatorModel {
    /// `T = sqrt(P/G̃)`, valid for `T_b ≪ T`.
    #[default]
    ColdBath,
    /// Solves `P = G̃·T·(T − T_b)` exactly.
    ExactBalance,
}

impl QpModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0 && self.r >= 0.0) {
            return Err(Error::invalid("s/r", "must be ≥ 0"));
        }
        if self.s == 0.0 && self.r == 0.0 {
            return Err(Error::invalid(
                "s/r",
                "trapping and recombination cannot both vanish",
            ));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::invalid("eps", "must lie in [0, 1]"));
        }
        if !(self.area > 0.0) {
            return Err(Error::invalid("area", "must be > 0"));
        }
        if !(self.gtilde > 0.0) {
            return Err(Error::invalid("gtilde", "must be > 0"));
        }
        if !(self.t_bath >= 0.0) {
            return Err(Error::invalid("t_bath", "must be ≥ 0"));
        }
        Ok(())
    }

    fn temperature(&self, power_w: f64) -> Result<f64> {
        match self.radiator_model {
            RadiatorModel::ColdBath => radiator_temperature(power_w, self.gtilde),
            RadiatorModel::ExactBalance => radiator_temperature_exact(power_w, self.gtilde, self.t_bath),
        }
    }
}

/// Manganin-wire geometry and resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiatorParams {
    pub length: f64,
    pub diameter: f64,
    pub resistance: f64,
}

impl RadiatorParams {
    /// 2 cm long, 0.2 mm diameter, 2 Ω.
    pub fn manganin_wire() -> Self {
        Self {
            length: 0.02,
            diameter: 0.2e-3,
            resistance: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.diameter > 0.0 && self.resistance > 0.0) {
            return Err(Error::invalid(
                "radiator",
                "length, diameter and resistance must be > 0",
            ));
        }
        Ok(())
    }

    /// Lateral surface `π·d·l`, m².
    pub fn surface_area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.length
    }

    /// Joule power `I²R` for a current in A.
    pub fn power_from_current(&self, current_a: f64) -> f64 {
        current_a * current_a * self.resistance
    }
}

/// `T = sqrt(P / G̃)` in K.
pub fn radiator_temperature(power_w: f64, gtilde: f64) -> Result<f64> {
    if !(power_w >= 0.0) {
        return Err(Error::invalid("power_w", "must be ≥ 0"));
    }
    if !(gtilde > 0.0) {
        return Err(Error::invalid("gtilde", "must be > 0"));
    }
    Ok((power_w / gtilde).sqrt())
}

/// Positive root of `P = G̃·T·(T − T_b)`; reduces to `sqrt(P/G̃)` as `T_b → 0`.
pub fn radiator_temperature_exact(power_w: f64, gtilde: f64, t_bath: f64) -> Result<f64> {
    if !(power_w >= 0.0) {
        return Err(Error::invalid("power_w", "must be ≥ 0"));
    }
    if !(gtilde > 0.0) {
        return Err(Error::invalid("gtilde", "must be > 0"));
    }
    Ok(0.5 * (t_bath + (t_bath * t_bath + 4.0 * power_w / gtilde).sqrt()))
}

/// `G̃` that brings the radiator to `temperature` at `power_w`.
pub fn gtilde_for(power_w: f64, temperature: f64) -> f64 {
    power_w / (temperature * temperature)
}

/// Stefan–Boltzmann emission `σ·A·T⁴` in W.
pub fn radiated_power(area: f64, temperature: f64) -> Result<f64> {
    if !(area >= 0.0 && temperature >= 0.0) {
        return Err(Error::invalid("area/temperature", "must be ≥ 0"));
    }
    Ok(STEFAN_BOLTZMANN * area * temperature.powi(4))
}

/// Pair-breaking generation rate `ε·σ·A·T(P)⁴`.
pub fn generation_rate(power_w: f64, params: &QpModelParams) -> Result<f64> {
    let t = params.temperature(power_w)?;
    Ok(params.eps * params.sigma_sb * params.area * t.powi(4))
}

/// Non-negative root of `g − s·x − r·x² = 0`.
pub fn steady_state_density(g: f64, s: f64, r: f64) -> Result<f64> {
    if !(g >= 0.0) {
        return Err(Error::invalid("g", "must be ≥ 0"));
    }
    if !(s >= 0.0 && r >= 0.0) {
        return Err(Error::invalid("s/r", "must be ≥ 0"));
    }
    if g == 0.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        if s == 0.0 {
            return Err(Error::NoSteadyState { g });
        }
        return Ok(g / s);
    }
    // Cancellation-free form of (−s + sqrt(s² + 4rg)) / 2r.
    Ok(2.0 * g / (s + (s * s + 4.0 * r * g).sqrt()))
}

/// Tunneling rate `k_tunnel·x_qp(P) + base_rate` for each power.
pub fn predicted_rate_curve(
    powers: &[f64],
    params: &QpModelParams,
    k_tunnel: f64,
    base_rate: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    powers
        .iter()
        .map(|&p| {
            let g = generation_rate(p, params)?;
            Ok(k_tunnel * steady_state_density(g, params.s, params.r)? + base_rate)
        })
        .collect()
}
