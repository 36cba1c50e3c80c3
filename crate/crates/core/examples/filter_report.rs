//! Filter-configuration statistics from the shipped record table: means,
//! reduction factors against the unfiltered setup, and the same after
//! extrapolating every record to one day after cooldown.
//!
//! `cargo run --example filter_report [records.csv]`

use std::collections::BTreeMap;

use parityscope::campaign::{
    compare_configurations, filter_survey, ingest_records, summarize_configurations, time_correct_records,
    Averaging, Grouping, Material, MeasurementRecord, NO_FILTER,
};

fn table(records: &[MeasurementRecord]) -> parityscope::Result<()> {
    let sums = summarize_configurations(records, Grouping::Combined, Averaging::Unweighted);
    let reductions = compare_configurations(&sums.summaries, NO_FILTER)?;
    for s in &sums.summaries {
        let r = reductions
            .iter()
            .find(|r| r.material == s.material && r.configuration == s.configuration);
        let factor = r.map_or(String::from("-"), |r| format!("{}", r.factor_rounded()));
        println!(
            "{:<3} {:<15} {:>9.1} ± {:>8.1} Hz  n = {:<2} factor {factor}",
            s.material.to_string(),
            s.configuration,
            s.mean_rate,
            s.spread,
            s.n
        );
    }
    Ok(())
}

fn main() -> parityscope::Result<()> {
    let records = match std::env::args().nth(1) {
        Some(path) => {
            let file = std::fs::File::open(&path).map_err(|e| parityscope::Error::Io {
                path: path.into(),
                source: e,
            })?;
            ingest_records(file)?.records
        }
        None => filter_survey(),
    };
    println!("as measured");
    table(&records)?;

    // Illustrative decay exponents.
    let exponents = BTreeMap::from([(Material::Nb, 0.3), (Material::Ta, 0.6)]);
    let corrected: Vec<MeasurementRecord> = time_correct_records(&records, &exponents, 1.0)?
        .into_iter()
        .map(|c| MeasurementRecord {
            gamma0: c.gamma0_corrected,
            gamma0_err: c.gamma0_err_corrected,
            t_days: 1.0,
            ..c.record
        })
        .collect();
    println!("\nextrapolated to t = 1 day");
    table(&corrected)
}
