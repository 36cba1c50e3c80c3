//! Offset-charge-sensitive transmon spectra in the charge basis.
//!
//! The Cooper-pair-box Hamiltonian
//!
//! ```text
//! H = Σ_n 4 E_C (n − ñ_g)² |n⟩⟨n| − (E_J / 2) Σ_n (|n+1⟩⟨n| + h.c.)
//! ```
//!
//! is diagonalized on a truncated charge basis `n ∈ [−N, N]`. Energies are in
//! GHz (frequency units, `E / h`), offset charge `n_g` in units of `2e`. Odd
//! charge parity is realized by shifting the offset charge by half a Cooper
//! pair, `ñ_g = n_g + 1/2`.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default charge-basis dimension (`2N + 1`).
pub const DEFAULT_DIM: usize = 31;
/// Default number of offset-charge grid points.
pub const DEFAULT_NG_POINTS: usize = 256;

const CONVERGENCE_GHZ: f64 = 1e-6;
const MAX_DIM: usize = 511;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Josephson energy, GHz.
    pub ej: f64,
    /// Charging energy, GHz.
    pub ec: f64,
    /// Charge-basis truncation, odd.
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl TransmonParams {
    pub fn new(ej: f64, ec: f64) -> Self {
        Self {
            ej,
            ec,
            dim: DEFAULT_DIM,
        }
    }

    /// Parameters from a ratio `E_J / E_C` and a charging energy.
    pub fn from_ratio(ratio: f64, ec: f64) -> Self {
        Self::new(ratio * ec, ec)
    }

    pub fn validate(&self) -> Result<()> {
        // E_J = 0 (pure charging) is allowed as a limiting case.
        if !(self.ej >= 0.0 && self.ej.is_finite()) {
            return Err(Error::invalid("ej", format!("must be ≥ 0, got {}", self.ej)));
        }
        if !(self.ec > 0.0 && self.ec.is_finite()) {
            return Err(Error::invalid("ec", format!("must be > 0, got {}", self.ec)));
        }
        if self.dim < 5 || self.dim.is_multiple_of(2) {
            return Err(Error::invalid(
                "dim",
                format!("must be odd and ≥ 5, got {}", self.dim),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flipped(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    fn charge_shift(self) -> f64 {
        match self {
            Parity::Even => 0.0,
            Parity::Odd => 0.5,
        }
    }
}

/// Hamiltonian eigenvalues for a fixed truncation, ascending.
fn eigenvalues_at_dim(ej: f64, ec: f64, dim: usize, ng_eff: f64) -> Vec<f64> {
    let n_max = (dim / 2) as f64;
    let h = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let n = i as f64 - n_max;
            4.0 * ec * (n - ng_eff).powi(2)
        } else if i.abs_diff(j) == 1 {
            -0.5 * ej
        } else {
            0.0
        }
    });
    let mut evals: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    evals.sort_by(f64::total_cmp);
    evals
}

/// Sorted eigenenergies (GHz) of the Cooper-pair box at offset charge `ng`.
///
/// The truncation starts at `params.dim` and is doubled until the three
/// lowest levels move by less than 1 kHz when the basis grows by four states.
pub fn diagonalize_cpb(params: &TransmonParams, ng: f64, parity: Parity) -> Result<Vec<f64>> {
    params.validate()?;
    if !ng.is_finite() {
        return Err(Error::invalid("ng", "must be finite"));
    }
    // Reduce into [-1/2, 1/2): the spectrum is 1-periodic and the basis is
    // centred on n = 0.
    let shifted = ng + parity.charge_shift();
    let ng_eff = shifted - shifted.round();

    let mut dim = params.dim;
    loop {
        let lo = eigenvalues_at_dim(params.ej, params.ec, dim, ng_eff);
        let hi = eigenvalues_at_dim(params.ej, params.ec, dim + 4, ng_eff);
        let change = lo
            .iter()
            .zip(&hi)
            .take(3)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < CONVERGENCE_GHZ {
            return Ok(lo);
        }
        if dim >= MAX_DIM {
            return Err(Error::TruncationNotConverged {
                dim,
                change_khz: change * 1e6,
            });
        }
        dim = (2 * dim + 1).min(MAX_DIM);
    }
}

/// Qubit transition frequency `f_01` in GHz.
pub fn qubit_frequency(params: &TransmonParams, ng: f64, parity: Parity) -> Result<f64> {
    let e = diagonalize_cpb(params, ng, parity)?;
    Ok(e[1] - e[0])
}

/// Anharmonicity `f_12 − f_01` in GHz.
pub fn anharmonicity(params: &TransmonParams, ng: f64, parity: Parity) -> Result<f64> {
    let e = diagonalize_cpb(params, ng, parity)?;
    Ok((e[2] - e[1]) - (e[1] - e[0]))
}

/// Parity-split qubit frequencies over one period of offset charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParitySpectrum {
    /// Offset charge in units of 2e, uniform on [0, 1).
    pub ng_grid: Vec<f64>,
    /// Even-parity `f_01`, GHz.
    pub f_even: Vec<f64>,
    /// Odd-parity `f_01`, GHz.
    pub f_odd: Vec<f64>,
    /// Peak-to-peak `f_01` over both branches, MHz.
    pub dispersion: f64,
}

impl ParitySpectrum {
    /// Builds a spectrum from precomputed branches on a uniform periodic grid.
    pub fn from_branches(ng_grid: Vec<f64>, f_even: Vec<f64>, f_odd: Vec<f64>) -> Result<Self> {
        if ng_grid.len() != f_even.len() || ng_grid.len() != f_odd.len() {
            return Err(Error::invalid("f_even/f_odd", "length mismatch with ng_grid"));
        }
        if ng_grid.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: ng_grid.len(),
            });
        }
        let (lo, hi) = f_even
            .iter()
            .chain(&f_odd)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| {
                (lo.min(f), hi.max(f))
            });
        Ok(Self {
            ng_grid,
            f_even,
            f_odd,
            dispersion: (hi - lo) * 1e3,
        })
    }

    /// `Δf(n_g) = |f_e − f_o|` in MHz.
    pub fn delta_f_mhz(&self) -> Vec<f64> {
        self.f_even
            .iter()
            .zip(&self.f_odd)
            .map(|(e, o)| (e - o).abs() * 1e3)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ng_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ng_grid.is_empty()
    }

    /// Writes `ng,f_even_ghz,f_odd_ghz,delta_f_mhz` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ng", "f_even_ghz", "f_odd_ghz", "delta_f_mhz"])?;
        for (i, df) in self.delta_f_mhz().into_iter().enumerate() {
            w.write_record(&[
                self.ng_grid[i].to_string(),
                self.f_even[i].to_string(),
                self.f_odd[i].to_string(),
                df.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Evaluates both parity branches on a uniform grid of `n_grid_points`.
pub fn parity_frequencies(params: &TransmonParams, n_grid_points: usize) -> Result<ParitySpectrum> {
    if n_grid_points < 32 {
        return Err(Error::invalid(
            "n_grid_points",
            format!("need at least 32, got {n_grid_points}"),
        ));
    }
    let ng_grid: Vec<f64> = (0..n_grid_points)
        .map(|i| i as f64 / n_grid_points as f64)
        .collect();
    let f_even = ng_grid
        .iter()
        .map(|&ng| qubit_frequency(params, ng, Parity::Even))
        .collect::<Result<Vec<_>>>()?;
    let f_odd = ng_grid
        .iter()
        .map(|&ng| qubit_frequency(params, ng, Parity::Odd))
        .collect::<Result<Vec<_>>>()?;
    ParitySpectrum::from_branches(ng_grid, f_even, f_odd)
}

/// Fraction of uniformly distributed offset charges with `Δf ≤ threshold_mhz`.
///
/// `Δf` is linearly interpolated between grid points (including the periodic
/// wrap-around segment) and the sub-threshold length is accumulated exactly on
/// each segment.
pub fn fraction_delta_f_below(spectrum: &ParitySpectrum, threshold_mhz: f64) -> Result<f64> {
    if !(threshold_mhz >= 0.0) {
        return Err(Error::invalid("threshold", "must be ≥ 0"));
    }
    let df = spectrum.delta_f_mhz();
    let n = df.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let mut covered = 0.0;
    for i in 0..n {
        let a = df[i];
        let b = df[(i + 1) % n];
        covered += segment_fraction_below(a, b, threshold_mhz);
    }
    Ok((covered / n as f64).clamp(0.0, 1.0))
}

/// Fraction of the unit segment on which the line from `a` to `b` is ≤ `t`.
fn segment_fraction_below(a: f64, b: f64, t: f64) -> f64 {
    match (a <= t, b <= t) {
        (true, true) => {
            if t == 0.0 && (a > 0.0 || b > 0.0) {
                0.0
            } else {
                1.0
            }
        }
        (false, false) => 0.0,
        (true, false) => (t - a) / (b - a),
        (false, true) => (t - b) / (a - b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_charging_levels() {
        let p = TransmonParams::new(0.0, 0.465);
        let e = diagonalize_cpb(&p, 0.0, Parity::Even).unwrap();
        let expected = [0.0, 1.86, 1.86, 7.44, 7.44];
        for (got, want) in e.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_even_dim() {
        let mut p = TransmonParams::new(10.0, 0.5);
        p.dim = 30;
        assert!(diagonalize_cpb(&p, 0.0, Parity::Even).is_err());
        p.dim = 3;
        assert!(diagonalize_cpb(&p, 0.0, Parity::Even).is_err());
    }

    #[test]
    fn transmon_limit_matches_asymptotic_frequency() {
        let ec = 0.3;
        let p = TransmonParams::from_ratio(100.0, ec);
        let f01 = qubit_frequency(&p, 0.25, Parity::Even).unwrap();
        let asymptotic = (8.0 * p.ej * ec).sqrt() - ec;
        assert!((f01 / asymptotic - 1.0).abs() < 0.02, "{f01} vs {asymptotic}");
    }

    #[test]
    fn device_like_frequency_and_anharmonicity() {
        let p = TransmonParams::from_ratio(20.0, 0.465);
        let f01 = qubit_frequency(&p, 0.25, Parity::Even).unwrap();
        assert!((3.5..6.5).contains(&f01), "f01 = {f01}");
        let alpha = anharmonicity(&p, 0.25, Parity::Even).unwrap();
        // Same order as -E_C; at this ratio the transmon limit is not yet reached.
        assert!(alpha < -0.465 && alpha > -1.5 * 0.465, "alpha = {alpha}");
    }

    #[test]
    fn truncation_converges_between_31_and_41() {
        for ratio in [5.0, 20.0, 50.0, 100.0] {
            let mut a = TransmonParams::from_ratio(ratio, 0.4);
            a.dim = 31;
            let mut b = a;
            b.dim = 41;
            let ea = eigenvalues_at_dim(a.ej, a.ec, a.dim, 0.3);
            let eb = eigenvalues_at_dim(b.ej, b.ec, b.dim, 0.3);
            for k in 0..3 {
                assert!((ea[k] - eb[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn segment_fraction_cases() {
        assert_eq!(segment_fraction_below(0.0, 1.0, 0.5), 0.5);
        assert_eq!(segment_fraction_below(1.0, 0.0, 0.25), 0.25);
        assert_eq!(segment_fraction_below(2.0, 3.0, 1.0), 0.0);
        assert_eq!(segment_fraction_below(0.0, 0.0, 0.0), 1.0);
        assert_eq!(segment_fraction_below(0.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn fraction_bounds() {
        let p = TransmonParams::from_ratio(20.0, 0.465);
        let s = parity_frequencies(&p, 64).unwrap();
        assert_eq!(fraction_delta_f_below(&s, 0.0).unwrap(), 0.0);
        let max_df = s.delta_f_mhz().into_iter().fold(0.0, f64::max);
        assert_eq!(fraction_delta_f_below(&s, max_df).unwrap(), 1.0);
        assert!(fraction_delta_f_below(&s, -1.0).is_err());
    }

    #[test]
    fn too_coarse_grid_rejected() {
        let p = TransmonParams::from_ratio(20.0, 0.465);
        assert!(parity_frequencies(&p, 16).is_err());
    }
}
