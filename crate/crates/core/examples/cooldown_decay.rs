//! Power-law decay of the background rate after cooldown, and the ratio of
//! one-day rates between two cooldowns.
//!
//! `cargo run --example cooldown_decay [exponent] [noise] [seed]`

use parityscope::campaign::rate_ratio;
use parityscope::fit::{fit_time_decay, fit_time_decay_weighted};
use parityscope::rng::stream_rng;
use rand_distr::{Distribution, Normal};

fn main() -> parityscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.4);
    let noise: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.05);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);

    let mut rng = stream_rng(seed, 0);
    let gauss = Normal::new(0.0, noise).expect("valid sd");
    let mut fits = Vec::new();
    for (label, gamma1) in [("first cooldown", 93.0), ("with foam", 48.0)] {
        let days: Vec<f64> = (2..=22).map(f64::from).collect();
        let rates: Vec<f64> = days
            .iter()
            .map(|t: &f64| gamma1 * t.powf(-p) * (1.0 + gauss.sample(&mut rng)))
            .collect();
        let errs: Vec<f64> = rates.iter().map(|r| r * noise).collect();
        let plain = fit_time_decay(&days, &rates)?;
        let fit = fit_time_decay_weighted(&days, &rates, &errs)?;
        println!(
            "{label:<15} Γ(1 d) = {:.1} ± {:.1} Hz, p = {:.3} ± {:.3} (unweighted p = {:.3})",
            fit.amplitude,
            fit.amplitude_err,
            fit.decay_exponent(),
            fit.exponent_err,
            plain.decay_exponent()
        );
        fits.push(fit);
    }
    let (r, dr) = rate_ratio(
        fits[0].amplitude,
        fits[0].amplitude_err,
        fits[1].amplitude,
        fits[1].amplitude_err,
    )?;
    println!("one-day rate ratio {r:.2} ± {dr:.2}");
    Ok(())
}
