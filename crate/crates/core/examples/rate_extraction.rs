//! Calibrates the rate-extraction chain against simulated restless traces.
//!
//! `cargo run --release --example rate_extraction [gamma0_hz] [n_traces] [n_shots] [seed] [ideal]`

use std::time::Instant;

use parityscope::analysis::simulate_and_extract;
use parityscope::fit::LorentzianOptions;
use parityscope::sim::SimConfig;

fn main() -> parityscope::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let gamma0 = arg(0, 460.0);
    let n_traces = arg(1, 10.0) as usize;
    let n_shots = arg(2, 5e5) as usize;
    let seed = arg(3, 7.0) as u64;

    let template = if args.get(4).is_some_and(|a| a == "ideal") {
        SimConfig::ideal(gamma0, n_shots, seed)
    } else {
        SimConfig::typical(gamma0, n_shots, seed)
    };
    let start = Instant::now();
    let result = simulate_and_extract(&template, n_traces, LorentzianOptions::default())?;

    println!("simulated Γ0 = {gamma0} Hz, {n_traces} × {n_shots} shots");
    for c in &result.fit.components {
        println!(
            "  component: corner {:>10.2} ± {:>8.2} Hz, amplitude {:.3e}",
            c.corner, c.corner_err, c.amplitude
        );
    }
    println!(
        "  noise floor {:.3e}, {} LM iterations, {:?}, reduced from {:?}",
        result.fit.noise_floor, result.fit.iterations, result.fit.convergence, result.fit.reduced_from
    );
    println!(
        "extracted Γ0 = {:.1} ± {:.1} Hz ({:+.2} %), {:.2} s",
        result.rate,
        result.rate_err,
        100.0 * (result.rate / gamma0 - 1.0),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
