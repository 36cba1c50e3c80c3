//! Averaged periodogram of an ideal telegraph indicator against the
//! Lorentzian `A·Γ/(Γ² + (πf)²)` with `A = 1/2` for a balanced 0/1 signal.
//!
//! `cargo run --release --example telegraph_psd [gamma0_hz] [n_traces] [seed]`

use parityscope::fit::lorentzian::{lorentzian, sampled_lorentzian};
use parityscope::sim::{simulate_traces, ParityTrace, SimConfig};
use parityscope::spectral::{aggregate_spectra, parity_indicator, periodogram};

fn main() -> parityscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let gamma: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1_000.0);
    let n_traces: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);

    let cfg = SimConfig::ideal(gamma, 200_000, seed);
    let spectra = simulate_traces(&cfg, n_traces)?
        .iter()
        .map(|t: &ParityTrace| {
            let d = parity_indicator(t)?;
            let s = periodogram(&d)?;
            // Parseval: Σ PSD·df equals the mean square per unit time.
            let energy: f64 = d.as_f64().iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
            let rel = (s.total_power() / energy - 1.0).abs();
            assert!(rel < 1e-9, "Parseval mismatch {rel:e}");
            Ok(s)
        })
        .collect::<parityscope::Result<Vec<_>>>()?;
    let avg = aggregate_spectra(&spectra)?;

    println!("{n_traces} traces of {} s, df = {:.3} Hz", avg.duration, avg.df());
    println!(
        "{:>10} {:>12} {:>12} {:>12} {:>7}",
        "f (Hz)", "PSD", "Lorentzian", "sampled", "ratio"
    );
    for (f, p, n) in avg.log_binned(5) {
        if !(gamma / 10.0..=gamma * 10.0).contains(&f) {
            continue;
        }
        let model = lorentzian(0.5, gamma, f);
        let exact = sampled_lorentzian(0.5, gamma, f, cfg.dt);
        println!(
            "{f:>10.1} {p:>12.4e} {model:>12.4e} {exact:>12.4e} {:>7.3}  ({n} bins)",
            p / model
        );
    }
    Ok(())
}
