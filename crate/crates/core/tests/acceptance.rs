//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::Instant;

use parityscope::analysis::simulate_and_extract;
use parityscope::campaign::{
    compare_configurations, find_reduction, ingest_records, rate_ratio, summarize_configurations, Averaging,
    Grouping, Material, FILTER_SURVEY_CSV, FOAM_PLUS_FILTER, NO_FILTER,
};
use parityscope::fit::lorentzian::sampled_lorentzian;
use parityscope::fit::{
    fit_power_law, fit_time_decay, fit_two_tone_ramsey, linear_regression, LorentzianOptions,
};
use parityscope::qp::{
    gtilde_for, predicted_rate_curve, steady_state_density, QpModelParams, RadiatorModel, RadiatorParams,
    STEFAN_BOLTZMANN,
};
use parityscope::rng::stream_rng;
use parityscope::sim::{simulate_traces, synthesize_ramsey_signal, RamseyParams, SimConfig};
use parityscope::spectral::{aggregate_spectra, parity_indicator, periodogram, periodogram_of};
use parityscope::transmon::{
    diagonalize_cpb, fraction_delta_f_below, parity_frequencies, qubit_frequency, Parity, ParitySpectrum,
    TransmonParams,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Collects failures as readable lines.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn calibration(c: &mut Check) {
    let start = Instant::now();
    let template = SimConfig::typical(460.0, 500_000, 1);
    let r = simulate_and_extract(&template, 10, LorentzianOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.require(
        rel(r.rate, 460.0) <= 0.03,
        format!("Γ = {:.1} Hz against 460 Hz", r.rate),
    );
    c.require(secs < 60.0, format!("{secs:.1} s"));
}

fn rate_range(c: &mut Check) {
    for (gamma0, tol) in [
        (100.0, 0.05),
        (1_000.0, 0.05),
        (10_000.0, 0.05),
        (150_000.0, 0.25),
    ] {
        let template = SimConfig::typical(gamma0, 666_667, 2);
        let r = simulate_and_extract(&template, 10, LorentzianOptions::default()).unwrap();
        c.require(
            rel(r.rate, gamma0) <= tol,
            format!(
                "{gamma0} Hz → {:.1} Hz ({:+.1} %)",
                r.rate,
                100.0 * (r.rate / gamma0 - 1.0)
            ),
        );
    }
}

/// Within one unit of the last printed digit.
fn within_digit(value: f64, printed: f64, decimals: i32) -> bool {
    (value - printed).abs() <= 10f64.powi(-decimals) + 1e-12
}

fn table_closure(c: &mut Check) {
    let records = ingest_records(FILTER_SURVEY_CSV.as_bytes()).unwrap().records;
    let s = summarize_configurations(&records, Grouping::Combined, Averaging::Unweighted).summaries;
    // Means in units of 10^e, two decimals.
    let table = [
        (Material::Nb, NO_FILTER, 6.60, 2),
        (Material::Ta, NO_FILTER, 1.60, 4),
        (Material::Nb, "After TWPA", 3.79, 2),
        (Material::Ta, "After TWPA", 1.59, 3),
        (Material::Nb, "Before TWPA", 5.14, 2),
        (Material::Ta, "Before TWPA", 2.05, 3),
        (Material::Nb, "Inside shield", 2.27, 2),
        (Material::Ta, "Inside shield", 6.91, 2),
        (Material::Nb, "Foam", 0.98, 2),
        (Material::Ta, "Foam", 1.35, 3),
        (Material::Nb, FOAM_PLUS_FILTER, 1.38, 2),
        (Material::Ta, FOAM_PLUS_FILTER, 2.88, 2),
    ];
    for (m, conf, mean, e) in table {
        let got = s
            .iter()
            .find(|x| x.material == m && x.configuration == conf)
            .map_or(f64::NAN, |x| x.mean_rate / 10f64.powi(e));
        c.require(
            within_digit(got, mean, 2),
            format!("{m} {conf} mean {got:.3}e{e}"),
        );
    }

    let red = compare_configurations(&s, NO_FILTER).unwrap();
    let get = |m, conf| find_reduction(&red, m, conf).unwrap();
    // (material, configuration, factor, decimals, absolute kHz, decimals)
    let headline = [
        (Material::Ta, "After TWPA", 10.0, 1, Some((14.4, 1))),
        (Material::Ta, "Before TWPA", 7.8, 1, None),
        (Material::Ta, "Inside shield", 23.2, 1, None),
        (Material::Nb, "After TWPA", 1.7, 1, Some((0.28, 2))),
        (Material::Nb, "Before TWPA", 1.3, 1, None),
        (Material::Nb, "Inside shield", 2.9, 1, None),
        (Material::Ta, "Foam", 11.9, 1, Some((14.6, 1))),
        (Material::Nb, "Foam", 6.8, 1, Some((0.56, 2))),
        (Material::Ta, FOAM_PLUS_FILTER, 56.0, 0, Some((15.7, 1))),
        (Material::Nb, FOAM_PLUS_FILTER, f64::NAN, 0, Some((0.52, 2))),
    ];
    for (m, conf, factor, fd, absolute) in headline {
        let r = get(m, conf);
        if factor.is_finite() {
            c.require(
                within_digit(r.factor, factor, fd),
                format!("{m} {conf} factor {:.3}", r.factor),
            );
        }
        if let Some((khz, ad)) = absolute {
            let got = r.absolute_hz * 1e-3;
            c.require(within_digit(got, khz, ad), format!("{m} {conf} Δ {got:.3} kHz"));
        }
    }
}

fn log_slope(powers: &[f64], values: &[f64]) -> f64 {
    let lx: Vec<f64> = powers.iter().map(|p| p.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    linear_regression(&lx, &ly).unwrap().slope
}

fn scaling(c: &mut Check) {
    let wire = RadiatorParams::manganin_wire();
    let qp = |s: f64, r: f64| QpModelParams {
        s,
        r,
        eps: 1.0,
        area: wire.surface_area(),
        gtilde: gtilde_for(5e-9, 5.0),
        sigma_sb: STEFAN_BOLTZMANN,
        t_bath: 0.0,
        radiator_model: RadiatorModel::ColdBath,
    };
    let powers: Vec<f64> = (0..=20).map(|i| 1e-9 * 10f64.powf(i as f64 / 20.0)).collect();
    for (label, s, r, want) in [("trapping", 1e3, 0.0, 2.0), ("recombination", 0.0, 1e3, 1.0)] {
        let x = predicted_rate_curve(&powers, &qp(s, r), 1.0, 0.0).unwrap();
        let slope = log_slope(&powers, &x);
        c.require((slope - want).abs() <= 0.01, format!("{label} slope {slope:.4}"));
    }

    let mut rng = stream_rng(4, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let g = 10f64.powf(rng.random_range(-12.0..12.0));
        let s = if rng.random_bool(0.1) {
            0.0
        } else {
            10f64.powf(rng.random_range(-6.0..6.0))
        };
        let r = if s > 0.0 && rng.random_bool(0.1) {
            0.0
        } else {
            10f64.powf(rng.random_range(-6.0..6.0))
        };
        let x = steady_state_density(g, s, r).unwrap();
        worst = worst.max((s * x + r * x * x - g).abs() / g);
    }
    c.require(worst < 1e-12, format!("worst root residual {worst:.1e}"));
}

fn transmon(c: &mut Check) {
    let mut periodic: f64 = 0.0;
    let mut shifted: f64 = 0.0;
    for ratio in [1.0, 5.0, 20.0, 50.0] {
        let p = TransmonParams::from_ratio(ratio, 0.465);
        for i in 0..20 {
            let ng = -1.0 + 0.1 * i as f64;
            let e = diagonalize_cpb(&p, ng, Parity::Even).unwrap();
            let e1 = diagonalize_cpb(&p, ng + 1.0, Parity::Even).unwrap();
            periodic = periodic.max((0..4).map(|k| (e[k] - e1[k]).abs()).fold(0.0, f64::max));
            let odd = qubit_frequency(&p, ng, Parity::Odd).unwrap();
            let even = qubit_frequency(&p, ng + 0.5, Parity::Even).unwrap();
            shifted = shifted.max((odd - even).abs());
        }
    }
    c.require(periodic < 1e-9, format!("periodicity {periodic:.1e} GHz"));
    c.require(shifted < 1e-9, format!("half shift {shifted:.1e} GHz"));

    let dispersion = |ratio| {
        parity_frequencies(&TransmonParams::from_ratio(ratio, 0.465), 256)
            .unwrap()
            .dispersion
    };
    let d20 = dispersion(20.0);
    c.require(
        (5.0 / 3.0..=15.0).contains(&d20),
        format!("dispersion {d20:.2} MHz at E_J/E_C = 20"),
    );
    let sweep: Vec<f64> = (10..=60).step_by(2).map(|r| dispersion(r as f64)).collect();
    c.require(
        sweep.windows(2).all(|w| w[1] < w[0]),
        "dispersion decreasing over E_J/E_C 10..60",
    );

    // Cosine branches with peak-to-peak splitting ε: Δf = ε|cos 2πn_g|.
    let eps_ghz = 1.7e-3;
    let n = 100_000;
    let ng: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let half: Vec<f64> = ng.iter().map(|x| 0.5 * eps_ghz * (2.0 * PI * x).cos()).collect();
    let spectrum = ParitySpectrum::from_branches(
        ng.clone(),
        half.iter().map(|h| 5.0 + h).collect(),
        half.iter().map(|h| 5.0 - h).collect(),
    )
    .unwrap();
    let frac = fraction_delta_f_below(&spectrum, 0.5).unwrap();
    let analytic = 2.0 / PI * (0.5f64 / 1.7).asin();
    c.require(
        (frac - 0.190).abs() <= 0.01,
        format!("P(Δf < 0.5 MHz) = {frac:.4} (arcsine {analytic:.4})"),
    );
}

fn fitters(c: &mut Check) {
    for seed in 0..5 {
        let params = RamseyParams {
            noise_sd: 0.1,
            seed,
            ..RamseyParams::new(2.0, 3.2, 5.0)
        };
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.03).collect();
        let s = synthesize_ramsey_signal(&params, &times).unwrap();
        let f = fit_two_tone_ramsey(&s.times, &s.signal).unwrap();
        c.require(
            rel(f.f_e, 2.0) <= 0.01 && rel(f.f_o, 3.2) <= 0.01,
            format!("Ramsey seed {seed}: f_e {:.4}, f_o {:.4} MHz", f.f_e, f.f_o),
        );
    }

    let powers: Vec<f64> = (0..20).map(|i| i as f64 * 0.25e-9).collect();
    for n in [1.4, 2.6] {
        // 10 kHz above the 500 Hz base at 5 nW.
        let amp = 1e4 / 5e-9f64.powf(n);
        for noise in [0.05, 0.10] {
            let dist = Normal::new(0.0f64, noise).unwrap();
            let mut worst: f64 = 0.0;
            for seed in 0..10 {
                let mut rng = stream_rng(seed, 1);
                let rates: Vec<f64> = powers
                    .iter()
                    .map(|p| (500.0 + amp * p.powf(n)) * (1.0 + dist.sample(&mut rng)))
                    .collect();
                let fit = fit_power_law(&powers, &rates).unwrap();
                worst = worst.max((fit.exponent - n).abs());
            }
            c.require(
                worst <= 0.2,
                format!("n = {n} at {:.0} % noise: worst |Δn| {worst:.3}", noise * 100.0),
            );
        }
    }

    let days: [f64; 8] = [0.5, 1.0, 2.0, 4.0, 7.0, 12.0, 20.0, 30.0];
    let dist = Normal::new(0.0f64, 0.05).unwrap();
    for seed in 0..5 {
        let mut rng = stream_rng(seed, 2);
        let rates: Vec<f64> = days
            .iter()
            .map(|t| 2000.0 * t.powf(-0.5) * dist.sample(&mut rng).exp())
            .collect();
        let p = -fit_time_decay(&days, &rates).unwrap().exponent;
        c.require(rel(p, 0.5) <= 0.1, format!("decay seed {seed}: p = {p:.3}"));
    }

    let (nb, nb_err) = rate_ratio(93.0, 4.0, 48.0, 3.0).unwrap();
    let (ta, _) = rate_ratio(1970.0, 0.0, 960.0, 0.0).unwrap();
    c.require(
        nb.round() == 2.0,
        format!("Nb 93 → 48 Hz: factor {nb:.2} ± {nb_err:.2}"),
    );
    c.require(ta.round() == 2.0, format!("Ta 1.97 → 0.96 kHz: factor {ta:.2}"));
}

fn spectral(c: &mut Check) {
    let mut rng = stream_rng(5, 0);
    let mut worst: f64 = 0.0;
    let mut negative = 0;
    for n in [64, 1000, 4096, 65_537] {
        let x: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() < 0.4) as u8 as f64).collect();
        let s = periodogram_of(&x, 1.5e-6).unwrap();
        let mean_square = x.iter().sum::<f64>() / n as f64;
        worst = worst.max(rel(s.total_power(), mean_square));
        negative += s.psd.iter().filter(|p| **p < 0.0).count();
    }
    c.require(worst < 1e-9, format!("Parseval {worst:.1e}"));
    c.require(negative == 0, "PSD ≥ 0");

    let gamma = 2_000.0;
    let cfg = SimConfig::ideal(gamma, 666_667, 6);
    let spectra: Vec<_> = simulate_traces(&cfg, 20)
        .unwrap()
        .iter()
        .map(|t| periodogram(&parity_indicator(t).unwrap()).unwrap())
        .collect();
    let avg = aggregate_spectra(&spectra).unwrap();
    let lo = gamma / 10f64.sqrt();
    let hi = gamma * 10f64.sqrt();
    let mut worst: f64 = 0.0;
    for (f, p, _) in avg.log_binned(5) {
        if (lo..=hi).contains(&f) {
            worst = worst.max(rel(p, sampled_lorentzian(0.5, gamma, f, cfg.dt)));
        }
    }
    c.require(
        worst <= 0.05,
        format!(
            "telegraph PSD worst deviation {:.1} % over a decade",
            worst * 100.0
        ),
    );
}

type Criterion = (&'static str, fn(&mut Check));

fn main() {
    let criteria: [Criterion; 7] = [
        ("restless calibration at 460 Hz", calibration),
        ("rate-range accuracy", rate_range),
        ("configuration table closure", table_closure),
        ("generation/loss scaling", scaling),
        ("transmon properties", transmon),
        ("fitter oracles", fitters),
        ("spectral properties", spectral),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut c = Check::default();
        run(&mut c);
        let ok = c.failures.is_empty();
        failed += !ok as usize;
        println!(
            "criterion {}: {} {name} ({:.1} s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for f in &c.failures {
            println!("    failed: {f}");
        }
        for n in &c.notes {
            println!("    ok: {n}");
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
