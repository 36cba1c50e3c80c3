//! Parity-split spectrum of an offset-charge-sensitive transmon.
//!
//! Run with `cargo run --example transmon_spectrum [ej_over_ec] [ec_ghz]`.

use parityscope::transmon::{
    anharmonicity, fraction_delta_f_below, parity_frequencies, qubit_frequency, Parity, TransmonParams,
    DEFAULT_NG_POINTS,
};

fn main() -> parityscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let ratio: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(20.0);
    let ec: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.465);
    let params = TransmonParams::from_ratio(ratio, ec);

    let spectrum = parity_frequencies(&params, DEFAULT_NG_POINTS)?;
    let f01 = qubit_frequency(&params, 0.25, Parity::Even)?;
    let alpha = anharmonicity(&params, 0.25, Parity::Even)?;
    let max_df = spectrum.delta_f_mhz().into_iter().fold(0.0, f64::max);

    println!("E_J/E_C = {ratio}, E_C = {ec} GHz");
    println!("f01(n_g = 1/4)      = {f01:.4} GHz");
    println!("anharmonicity       = {:.1} MHz", alpha * 1e3);
    println!("charge dispersion   = {:.3} MHz", spectrum.dispersion);
    println!("max |f_e - f_o|     = {max_df:.3} MHz");
    for threshold in [0.1, 0.5, 1.0] {
        println!(
            "P(Δf ≤ {threshold} MHz)     = {:.3}",
            fraction_delta_f_below(&spectrum, threshold)?
        );
    }
    Ok(())
}
