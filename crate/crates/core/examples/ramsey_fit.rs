//! Two-tone Ramsey fit: recovers the even and odd frequencies and the
//! parity-mapping wait time.
//!
//! `cargo run --example ramsey_fit [f_e_mhz] [f_o_mhz] [snr] [seed]`

use parityscope::fit::fit_two_tone_ramsey;
use parityscope::sim::{parity_wait_time, synthesize_ramsey_signal, RamseyParams};

fn main() -> parityscope::Result<()> {
    let mut args = std::env::args().skip(1);
    let f_e: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let f_o: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3.2);
    let snr: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10.0);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);

    let params = RamseyParams {
        noise_sd: 1.0 / snr,
        seed,
        ..RamseyParams::new(f_e, f_o, 5.0)
    };
    let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.03).collect();
    let signal = synthesize_ramsey_signal(&params, &times)?;
    let fit = fit_two_tone_ramsey(&signal.times, &signal.signal)?;

    println!("f_e = {:.4} ± {:.4} MHz (true {f_e})", fit.f_e, fit.f_e_err);
    println!("f_o = {:.4} ± {:.4} MHz (true {f_o})", fit.f_o, fit.f_o_err);
    println!("T2* = {:.2} ± {:.2} µs", fit.t2_star, fit.t2_star_err);
    match parity_wait_time(fit.delta_f()) {
        Ok(t) => println!("parity wait 1/(2Δf) = {:.1} ns", t * 1e9),
        Err(e) => println!("offset charge unusable: {e}"),
    }
    Ok(())
}
