//! Radiator current → temperature → pair-breaking generation → steady-state
//! quasiparticle density, in the trapping- and recombination-limited regimes.
//!
//! `cargo run --example radiator_model`

use parityscope::fit::linear_regression;
use parityscope::qp::{
    gtilde_for, predicted_rate_curve, radiator_temperature, QpModelParams, RadiatorModel, RadiatorParams,
    STEFAN_BOLTZMANN,
};

fn main() -> parityscope::Result<()> {
    let wire = RadiatorParams::manganin_wire();
    let gtilde = gtilde_for(5e-9, 5.0);
    let currents: Vec<f64> = (1..=10).map(|i| i as f64 * 5e-6).collect();
    let powers: Vec<f64> = currents.iter().map(|&i| wire.power_from_current(i)).collect();

    println!("{:>9} {:>10} {:>7}", "I (µA)", "P (nW)", "T (K)");
    for (i, p) in currents.iter().zip(&powers) {
        println!(
            "{:>9.1} {:>10.4} {:>7.3}",
            i * 1e6,
            p * 1e9,
            radiator_temperature(*p, gtilde)?
        );
    }

    let qp = |s: f64, r: f64| QpModelParams {
        s,
        r,
        eps: 1.0,
        area: wire.surface_area(),
        gtilde,
        sigma_sb: STEFAN_BOLTZMANN,
        t_bath: 0.0,
        radiator_model: RadiatorModel::ColdBath,
    };
    // Channels balance (r·x = s) mid-sweep.
    let x_mid = predicted_rate_curve(&powers[4..5], &qp(1.0, 0.0), 1.0, 0.0)?[0];
    for (label, s, r) in [
        ("trapping", 1.0, 0.0),
        ("recombination", 0.0, 1.0),
        ("mixed", 1.0, 1.0 / x_mid),
    ] {
        let qp = qp(s, r);
        let rates = predicted_rate_curve(&powers, &qp, 1.0, 0.0)?;
        let lx: Vec<f64> = powers.iter().map(|p| p.ln()).collect();
        let ly: Vec<f64> = rates.iter().map(|x| x.ln()).collect();
        let slope = linear_regression(&lx, &ly)?.slope;
        println!("{label:<14} x_qp ∝ P^{slope:.3}");
    }

    // With a warm bath the exact balance departs from the cold-bath law.
    let exact = QpModelParams {
        t_bath: 0.5,
        radiator_model: RadiatorModel::ExactBalance,
        ..qp(1.0, 0.0)
    };
    let rates = predicted_rate_curve(&powers[..1], &exact, 1.0, 0.0)?;
    println!(
        "exact balance at {:.2} nW with a 0.5 K bath: x_qp = {:.3e}",
        powers[0] * 1e9,
        rates[0]
    );
    Ok(())
}
