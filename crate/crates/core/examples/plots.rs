//! Writes the four figure types as SVG.
//!
//! `cargo run --release --example plots [out_dir]`

use std::path::PathBuf;

use parityscope::analysis::extract_rate;
use parityscope::fit::{fit_power_law, fit_time_decay, LorentzianOptions};
use parityscope::plot::{decay_svg, power_sweep_svg, spectrum_svg, trace_svg, write_svg, Series};
use parityscope::sim::{simulate_traces, SimConfig};
use parityscope::spectral::Smoothing;

fn main() -> parityscope::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "plots".into()));

    let traces = simulate_traces(&SimConfig::typical(460.0, 200_000, 5), 4)?;
    let short = SimConfig::typical(460.0, 20_000, 5);
    let shown = simulate_traces(&short, 1)?;
    write_svg(
        &dir.join("trace.svg"),
        &trace_svg(&shown[0], Smoothing::Gaussian { sigma: 20.0 }, 4000)?,
    )?;

    let ex = extract_rate(&traces, LorentzianOptions::default())?;
    write_svg(&dir.join("psd.svg"), &spectrum_svg(&ex.spectrum, Some(&ex.fit))?)?;

    let powers = [0.0, 1e-9, 2e-9, 3e-9, 4e-9, 5e-9];
    let series = |label: &str, base: f64, a: f64, n: f64| -> parityscope::Result<Series> {
        let rates: Vec<f64> = powers.iter().map(|p: &f64| base + a * p.powf(n)).collect();
        let fit = fit_power_law(&powers, &rates)?;
        Ok(Series {
            label: label.into(),
            x: powers.to_vec(),
            rates,
            errors: None,
            fit: Some(fit),
        })
    };
    let sweep = [series("Nb", 90.0, 3e14, 1.4)?, series("Ta", 460.0, 2e25, 2.6)?];
    write_svg(&dir.join("rate_vs_power.svg"), &power_sweep_svg(&sweep)?)?;

    let days: Vec<f64> = (1..=20).map(f64::from).collect();
    let decay = |label: &str, g1: f64, p: f64| -> parityscope::Result<Series> {
        let rates: Vec<f64> = days.iter().map(|t| g1 * t.powf(-p)).collect();
        let fit = fit_time_decay(&days, &rates)?;
        Ok(Series {
            label: label.into(),
            x: days.clone(),
            rates,
            errors: None,
            fit: Some(fit),
        })
    };
    write_svg(
        &dir.join("rate_vs_time.svg"),
        &decay_svg(&[decay("Nb", 93.0, 0.2)?, decay("Ta", 1970.0, 0.5)?])?,
    )?;

    println!("rate {:.1} Hz; figures in {}", ex.rate, dir.display());
    Ok(())
}
