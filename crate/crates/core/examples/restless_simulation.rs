//! Restless and heralded parity readout of the same hidden parity process.
//!
//! `cargo run --release --example restless_simulation [gamma0_hz] [seed]`

use parityscope::sim::{simulate_parity_trace, MeasurementMode, ParityTrace, SimConfig};
use parityscope::spectral::{parity_indicator, toggle_transform};

/// Fraction of cycles where the indicator agrees with the hidden parity.
fn agreement(trace: &ParityTrace, indicator: &[u8]) -> f64 {
    let truth = trace
        .true_parity
        .as_ref()
        .expect("simulated traces keep the parity");
    // In both modes the indicator is 1 for even parity.
    let offset = trace.len() - indicator.len();
    let hits = indicator
        .iter()
        .zip(&truth[offset..])
        .filter(|(d, p)| **d == 1 - **p)
        .count();
    hits as f64 / indicator.len() as f64
}

fn main() -> parityscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let gamma0: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(460.0);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    for mode in [MeasurementMode::Restless, MeasurementMode::Heralded] {
        for (label, base) in [
            ("ideal", SimConfig::ideal(gamma0, 200_000, seed)),
            ("typical", SimConfig::typical(gamma0, 200_000, seed)),
        ] {
            let cfg = SimConfig { mode, ..base };
            let trace = simulate_parity_trace(&cfg)?;
            let d = parity_indicator(&trace)?;
            let mean = d.as_f64().iter().sum::<f64>() / d.len() as f64;
            println!(
                "{mode:?} {label:<8} events {:>5}  parity switches {:>5}  mean d {mean:.3}  agreement {:.4}  heralds discarded {}",
                trace.tunneling_events,
                trace.parity_switches().unwrap_or(0),
                agreement(&trace, &d.d),
                trace.discarded_heralds,
            );
        }
    }

    // Without tunneling every restless cycle toggles.
    let quiet = simulate_parity_trace(&SimConfig::ideal(0.0, 1_000, seed))?;
    let t = toggle_transform(&quiet)?;
    println!("gamma0 = 0: all toggles = {}", t.d.iter().all(|&v| v == 1));

    let mut bytes = Vec::new();
    quiet.write_binary(&mut bytes)?;
    let back = ParityTrace::read_binary(bytes.as_slice())?;
    println!(
        "binary trace: {} bytes for {} shots, round trip ok = {}",
        bytes.len(),
        quiet.len(),
        back == quiet
    );
    Ok(())
}
