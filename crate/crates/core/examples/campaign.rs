//! Synthetic campaigns with known ground truth: a cooldown time series and a
//! set of filter configurations, each run through simulation and extraction.
//!
//! `cargo run --release --example campaign [seed]`

use parityscope::campaign::{
    run_synthetic_campaign, CampaignPlan, CampaignSpec, ConfigurationPoint, Material, PlanFit,
};
use parityscope::fit::LorentzianOptions;
use parityscope::sim::SimConfig;

fn main() -> parityscope::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let sim = SimConfig::typical(0.0, 300_000, 0);

    let decay = CampaignSpec {
        plan: CampaignPlan::TimeSeries {
            days: vec![2.0, 4.0, 7.0, 11.0, 16.0, 22.0],
            gamma1: 1970.0,
            exponent: 0.5,
        },
        physics: None,
        sim: sim.clone(),
        n_traces: 6,
        seed,
        material: Material::Ta,
        lorentzian: LorentzianOptions::default(),
    };
    let result = run_synthetic_campaign(&decay)?;
    for p in &result.points {
        println!(
            "{:<10} truth {:>7.1} Hz  extracted {:>7.1} Hz",
            p.label,
            p.truth_hz,
            p.rate_hz.unwrap_or(f64::NAN)
        );
    }
    if let Some(PlanFit::TimeDecay(f)) = &result.fit {
        println!(
            "decay fit: Γ(1 d) = {:.0} Hz, p = {:.3} ± {:.3}",
            f.amplitude,
            f.decay_exponent(),
            f.exponent_err
        );
    }
    for c in &result.closure {
        println!("  closure {}: pull {:+.2}", c.parameter, c.pull());
    }
    println!("config hash {}", result.manifest.config_hash);

    let configs = CampaignSpec {
        plan: CampaignPlan::Configurations {
            configurations: vec![
                ConfigurationPoint {
                    label: "No filter".into(),
                    gamma0_hz: 16_000.0,
                },
                ConfigurationPoint {
                    label: "Foam + filter".into(),
                    gamma0_hz: 290.0,
                },
            ],
            repeats: 2,
        },
        n_traces: 4,
        ..decay
    };
    let result = run_synthetic_campaign(&configs)?;
    if let Some(PlanFit::Configurations { summaries }) = &result.fit {
        for s in summaries {
            println!(
                "{:<14} {:>8.1} ± {:>6.1} Hz (n = {})",
                s.configuration, s.mean_rate, s.spread, s.n
            );
        }
    }
    Ok(())
}
