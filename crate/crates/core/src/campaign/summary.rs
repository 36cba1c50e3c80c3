//! Per-configuration statistics, reduction factors, time correction and
//! T1 correlation over measurement records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::{Material, MeasurementRecord};
use crate::error::{Error, Result};
use crate::fit::{linear_regression, LinearFit};

/// Combined label for foam absorbers used together with any in-line filter.
pub const FOAM_PLUS_FILTER: &str = "Foam + filter";
pub const NO_FILTER: &str = "No filter";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Unweighted,
    /// 1/σ² weights from `gamma0_err`.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// "Foam + <filter position>" rows pooled into [`FOAM_PLUS_FILTER`].
    #[default]
    Combined,
    /// Configuration labels used verbatim.
    Verbatim,
}

pub fn group_label(configuration: &str, grouping: Grouping) -> String {
    let c = configuration.trim();
    match grouping {
        Grouping::Verbatim => c.to_string(),
        Grouping::Combined => match c.strip_prefix("Foam +") {
            Some(_) => FOAM_PLUS_FILTER.to_string(),
            None => c.to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub material: Material,
    pub configuration: String,
    /// Hz.
    pub mean_rate: f64,
    /// Scatter between records combined in quadrature with the mean
    /// per-record uncertainty: `sqrt(var + mean(σ²))`. For inverse-variance
    /// averaging this is the standard error of the weighted mean.
    pub spread: f64,
    /// Population standard deviation of the record rates; 0 for one record.
    pub std_dev: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summaries {
    pub summaries: Vec<ConfigSummary>,
    pub notices: Vec<String>,
}

/// Groups by (material, configuration) in first-seen order.
pub fn summarize_configurations(
    records: &[MeasurementRecord],
    grouping: Grouping,
    averaging: Averaging,
) -> Summaries {
    let mut order: Vec<(Material, String)> = Vec::new();
    let mut groups: BTreeMap<(Material, String), Vec<&MeasurementRecord>> = BTreeMap::new();
    let mut notices = Vec::new();
    for r in records {
        let label = group_label(&r.configuration, grouping);
        if label.is_empty() {
            notices.push(format!(
                "{} record on device {} has no configuration label; skipped",
                r.material, r.device
            ));
            continue;
        }
        let key = (r.material, label);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }

    let mut summaries = Vec::with_capacity(order.len());
    for key in order {
        let rows = &groups[&key];
        let n = rows.len();
        let rates: Vec<f64> = rows.iter().map(|r| r.gamma0).collect();
        let plain_mean = rates.iter().sum::<f64>() / n as f64;
        let var = rates.iter().map(|x| (x - plain_mean).powi(2)).sum::<f64>() / n as f64;
        let (mean_rate, spread) = match averaging {
            Averaging::Unweighted => {
                let mean_err2 = rows.iter().map(|r| r.gamma0_err.powi(2)).sum::<f64>() / n as f64;
                (plain_mean, (var + mean_err2).sqrt())
            }
            Averaging::InverseVariance => {
                if rows.iter().any(|r| r.gamma0_err <= 0.0) {
                    notices.push(format!(
                        "{} {}: zero uncertainty present, falling back to unweighted mean",
                        key.0, key.1
                    ));
                    (plain_mean, var.sqrt())
                } else {
                    let w: Vec<f64> = rows.iter().map(|r| r.gamma0_err.powi(-2)).collect();
                    let sw: f64 = w.iter().sum();
                    let m = rates.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
                    (m, sw.recip().sqrt())
                }
            }
        };
        summaries.push(ConfigSummary {
            material: key.0,
            configuration: key.1,
            mean_rate,
            spread,
            std_dev: var.sqrt(),
            n,
        });
    }
    Summaries { summaries, notices }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub material: Material,
    pub configuration: String,
    /// mean(baseline) / mean(configuration).
    pub factor: f64,
    /// mean(baseline) − mean(configuration), Hz.
    pub absolute_hz: f64,
}

impl Reduction {
    /// Factor at three significant figures.
    pub fn factor_rounded(&self) -> f64 {
        round_sig(self.factor, 3)
    }

    /// Absolute reduction in kHz at three significant figures.
    pub fn absolute_khz_rounded(&self) -> f64 {
        round_sig(self.absolute_hz * 1e-3, 3)
    }
}

pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Reduction of every non-baseline configuration relative to `baseline`,
/// per material.
pub fn compare_configurations(summaries: &[ConfigSummary], baseline: &str) -> Result<Vec<Reduction>> {
    let mut out = Vec::new();
    let mut materials: Vec<Material> = summaries.iter().map(|s| s.material).collect();
    materials.sort();
    materials.dedup();
    for m in materials {
        let base = summaries
            .iter()
            .find(|s| s.material == m && s.configuration == baseline)
            .ok_or_else(|| Error::MissingBaseline {
                material: m.to_string(),
                configuration: baseline.to_string(),
            })?;
        for s in summaries
            .iter()
            .filter(|s| s.material == m && s.configuration != baseline)
        {
            out.push(Reduction {
                material: m,
                configuration: s.configuration.clone(),
                factor: base.mean_rate / s.mean_rate,
                absolute_hz: base.mean_rate - s.mean_rate,
            });
        }
    }
    Ok(out)
}

pub fn find_reduction<'a>(
    reductions: &'a [Reduction],
    material: Material,
    configuration: &str,
) -> Option<&'a Reduction> {
    reductions
        .iter()
        .find(|r| r.material == material && r.configuration == configuration)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedRecord {
    pub record: MeasurementRecord,
    pub t_ref: f64,
    pub gamma0_corrected: f64,
    pub gamma0_err_corrected: f64,
}

/// Scales a rate measured at `t` to the reference time under `Γ ∝ t^{−p}`.
pub fn rescale_rate(gamma: f64, t: f64, t_ref: f64, p: f64) -> f64 {
    gamma * (t / t_ref).powf(p)
}

/// Extrapolates each record to `t_ref` days using its material's decay
/// exponent `p` (`Γ ∝ t^{−p}`).
pub fn time_correct_records(
    records: &[MeasurementRecord],
    exponents: &BTreeMap<Material, f64>,
    t_ref: f64,
) -> Result<Vec<CorrectedRecord>> {
    if !(t_ref > 0.0) {
        return Err(Error::invalid("t_ref", "must be > 0"));
    }
    records
        .iter()
        .map(|r| {
            if !(r.t_days > 0.0) {
                return Err(Error::invalid("t_days", format!("must be > 0, got {}", r.t_days)));
            }
            let p = *exponents.get(&r.material).ok_or_else(|| {
                Error::invalid("exponents", format!("no decay exponent for {}", r.material))
            })?;
            let k = (r.t_days / t_ref).powf(p);
            Ok(CorrectedRecord {
                record: r.clone(),
                t_ref,
                gamma0_corrected: r.gamma0 * k,
                gamma0_err_corrected: r.gamma0_err * k,
            })
        })
        .collect()
}

/// `a / b` with uncorrelated first-order error propagation, e.g. the
/// one-day rates of two cooldowns.
pub fn rate_ratio(a: f64, a_err: f64, b: f64, b_err: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid("rates", "ratio needs positive rates"));
    }
    let r = a / b;
    Ok((r, r * ((a_err / a).powi(2) + (b_err / b).powi(2)).sqrt()))
}

/// One tunneling-rate / relaxation-rate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Pair {
    pub material: Material,
    /// Hz.
    pub gamma0: f64,
    /// 1/T1 in 1/s.
    pub relaxation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Correlation {
    pub material: Material,
    pub fit: LinearFit,
    pub n: usize,
}

/// Relaxation rate against tunneling rate, regressed per material.
pub fn correlate_t1(pairs: &[T1Pair]) -> Result<Vec<T1Correlation>> {
    let mut by_material: BTreeMap<Material, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in pairs {
        let e = by_material.entry(p.material).or_default();
        e.0.push(p.gamma0);
        e.1.push(p.relaxation_rate);
    }
    if by_material.is_empty() {
        return Err(Error::TooShort { needed: 3, got: 0 });
    }
    by_material
        .into_iter()
        .map(|(material, (x, y))| {
            Ok(T1Correlation {
                material,
                n: x.len(),
                fit: linear_regression(&x, &y)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::records::filter_survey;

    fn get<'a>(s: &'a [ConfigSummary], m: Material, c: &str) -> &'a ConfigSummary {
        s.iter()
            .find(|x| x.material == m && x.configuration == c)
            .unwrap()
    }

    #[test]
    fn table_means_and_spreads() {
        let s =
            summarize_configurations(&filter_survey(), Grouping::Combined, Averaging::Unweighted).summaries;
        assert_eq!(s.len(), 12);
        // (material, configuration, mantissa, spread mantissa, exponent)
        let table = [
            (Material::Nb, "No filter", 6.60, 2.29, 2),
            (Material::Ta, "No filter", 1.60, 1.05, 4),
            (Material::Nb, "After TWPA", 3.79, 1.13, 2),
            (Material::Ta, "After TWPA", 1.59, 0.13, 3),
            (Material::Nb, "Before TWPA", 5.14, 1.93, 2),
            (Material::Ta, "Before TWPA", 2.05, 0.56, 3),
            (Material::Nb, "Inside shield", 2.27, 0.67, 2),
            (Material::Ta, "Inside shield", 6.91, 2.05, 2),
            (Material::Nb, "Foam", 0.98, 0.45, 2),
            (Material::Ta, "Foam", 1.35, 0.46, 3),
            (Material::Nb, FOAM_PLUS_FILTER, 1.38, 0.65, 2),
            (Material::Ta, FOAM_PLUS_FILTER, 2.88, 1.36, 2),
        ];
        for (m, c, mean, spread, e) in table {
            let g = get(&s, m, c);
            let scale = 10f64.powi(e);
            assert!(
                (g.mean_rate / scale - mean).abs() <= 0.0051,
                "{m} {c}: {}",
                g.mean_rate
            );
            assert!(
                (g.spread / scale - spread).abs() <= 0.0051,
                "{m} {c}: {}",
                g.spread
            );
        }
    }

    #[test]
    fn single_record_has_zero_std_dev() {
        let r = &filter_survey()[27];
        let s = summarize_configurations(std::slice::from_ref(r), Grouping::Combined, Averaging::Unweighted);
        assert_eq!(s.summaries[0].mean_rate, r.gamma0);
        assert_eq!(s.summaries[0].std_dev, 0.0);
    }

    #[test]
    fn weighted_mean_leans_to_precise_record() {
        let s = summarize_configurations(&filter_survey(), Grouping::Combined, Averaging::InverseVariance)
            .summaries;
        let g = get(&s, Material::Ta, "No filter");
        assert!(g.mean_rate < 12_000.0);
    }

    #[test]
    fn headline_factors() {
        let s =
            summarize_configurations(&filter_survey(), Grouping::Combined, Averaging::Unweighted).summaries;
        let red = compare_configurations(&s, NO_FILTER).unwrap();
        let f = |m, c| find_reduction(&red, m, c).unwrap().factor;
        assert!((f(Material::Ta, "After TWPA") - 10.0).abs() < 0.1);
        assert!((f(Material::Ta, "Inside shield") - 23.2).abs() < 0.1);
        assert!((f(Material::Nb, "After TWPA") - 1.7).abs() < 0.1);
        assert!((f(Material::Ta, FOAM_PLUS_FILTER) - 56.0).abs() < 1.0);
    }

    #[test]
    fn missing_baseline() {
        let s =
            summarize_configurations(&filter_survey(), Grouping::Combined, Averaging::Unweighted).summaries;
        assert!(matches!(
            compare_configurations(&s, "Nowhere"),
            Err(Error::MissingBaseline { .. })
        ));
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(23.163, 3), 23.2);
        assert_eq!(round_sig(0.28175, 2), 0.28);
        assert_eq!(round_sig(55.46, 2), 55.0);
    }

    #[test]
    fn time_correction_identity_and_generator() {
        let recs = filter_survey();
        let mut p = BTreeMap::new();
        p.insert(Material::Nb, 0.0);
        p.insert(Material::Ta, 0.0);
        for c in time_correct_records(&recs, &p, 1.0).unwrap() {
            assert_eq!(c.gamma0_corrected, c.record.gamma0);
        }

        p.insert(Material::Nb, 0.7);
        let synth: Vec<MeasurementRecord> = [0.5, 1.0, 3.0, 20.0]
            .iter()
            .map(|&t| MeasurementRecord {
                gamma0: 93.0 * f64::powf(t, -0.7),
                t_days: t,
                ..recs[0].clone()
            })
            .collect();
        for c in time_correct_records(&synth, &p, 1.0).unwrap() {
            assert!((c.gamma0_corrected / 93.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn t1_grouping() {
        let mut pairs = Vec::new();
        for i in 0..6 {
            let x = 100.0 * (i + 1) as f64;
            let wobble = if i % 2 == 0 { 1.0 } else { -1.0 };
            pairs.push(T1Pair {
                material: Material::Nb,
                gamma0: x,
                relaxation_rate: 2e4 + 50.0 * wobble,
            });
            pairs.push(T1Pair {
                material: Material::Ta,
                gamma0: x,
                relaxation_rate: 1e4 + 20.0 * x + wobble,
            });
        }
        let c = correlate_t1(&pairs).unwrap();
        assert_eq!(c.len(), 2);
        assert!(!c[0].fit.quasiparticle_limited);
        assert!(c[1].fit.quasiparticle_limited);
        assert!(correlate_t1(&pairs[..4]).is_err());
    }
}
