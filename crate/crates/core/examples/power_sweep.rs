//! Synthetic radiator power sweep: rates from the quasiparticle model, traces
//! from the restless simulator, a power law fitted to the extracted rates.
//!
//! `cargo run --release --example power_sweep [trapping|recombination] [seed]`

use parityscope::campaign::{
    run_synthetic_campaign, CampaignPhysics, CampaignPlan, CampaignSpec, Material, PlanFit,
};
use parityscope::fit::LorentzianOptions;
use parityscope::qp::{gtilde_for, QpModelParams, RadiatorModel, RadiatorParams, STEFAN_BOLTZMANN};
use parityscope::sim::SimConfig;

fn main() -> parityscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let regime = args.next().unwrap_or_else(|| "trapping".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let wire = RadiatorParams::manganin_wire();
    let p_max = 5e-9;
    // Radiator reaches about 5 K at the top of the sweep.
    let gtilde = gtilde_for(p_max, 5.0);
    let (s, r) = match regime.as_str() {
        "recombination" => (0.0, 1.0),
        _ => (1.0, 0.0),
    };
    let qp = QpModelParams {
        s,
        r,
        eps: 1.0,
        area: wire.surface_area(),
        gtilde,
        sigma_sb: STEFAN_BOLTZMANN,
        t_bath: 0.0,
        radiator_model: RadiatorModel::ColdBath,
    };
    // Scale k_tunnel so the top power adds 10 kHz over the 461 Hz base.
    let x_max = parityscope::qp::steady_state_density(parityscope::qp::generation_rate(p_max, &qp)?, s, r)?;
    let physics = CampaignPhysics {
        qp,
        k_tunnel: 1e4 / x_max,
        base_rate: 461.0,
    };

    let spec = CampaignSpec {
        plan: CampaignPlan::PowerSweep {
            powers_w: (0..8).map(|i| p_max * i as f64 / 7.0).collect(),
        },
        physics: Some(physics),
        sim: SimConfig::typical(0.0, 666_667, 0),
        n_traces: 10,
        seed,
        material: Material::Ta,
        lorentzian: LorentzianOptions::default(),
    };
    let result = run_synthetic_campaign(&spec)?;

    println!("{:>12} {:>12} {:>12}", "P (W)", "truth (Hz)", "fit (Hz)");
    for p in &result.points {
        match p.rate_hz {
            Some(r) => println!("{:>12.3e} {:>12.1} {:>12.1}", p.x, p.truth_hz, r),
            None => println!(
                "{:>12.3e} {:>12.1} failed: {}",
                p.x,
                p.truth_hz,
                p.error.as_deref().unwrap_or("")
            ),
        }
    }
    if let Some(PlanFit::PowerLaw(f)) = &result.fit {
        println!(
            "Γ = ({:.0} ± {:.0}) Hz + A·P^n, n = {:.3} ± {:.3}",
            f.base, f.base_err, f.exponent, f.exponent_err
        );
    }
    for c in &result.closure {
        println!(
            "closure {:>10}: truth {:.4e}, fit {:.4e}, pull {:+.2}",
            c.parameter,
            c.truth,
            c.recovered,
            c.pull()
        );
    }
    println!("config hash {}", result.manifest.config_hash);
    Ok(())
}
