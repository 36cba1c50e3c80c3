//! Config-driven front end.
//!
//! A run is described by one JSON document:
//!
//! ```json
//! { "command": "simulate", "seed": 7, "output_dir": "out", "format": "json",
//!   "parameters": { "sim": { "gamma0": 460.0, "n_shots": 100000 }, "n_traces": 2 } }
//! ```
//!
//! Command-line flags override the document. Every file written is listed
//! with its sha256 in `manifest.json`; `results_hash` covers the non-plot
//! files only, so it is stable for a fixed config and seed.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analysis::extract_rate;
use crate::campaign::{
    compare_configurations, ingest_records, run_synthetic_campaign, summarize_configurations,
    time_correct_records, write_records, Averaging, CampaignPhysics, CampaignPlan, CampaignSpec, Grouping,
    Material, MeasurementRecord, PlanFit, FILTER_SURVEY_CSV, NO_FILTER,
};
use crate::error::{Error, Result};
use crate::fit::{
    fit_power_law, fit_power_law_weighted, fit_time_decay, fit_time_decay_weighted, fit_two_tone_ramsey,
    LorentzianOptions, PowerLawFit,
};
use crate::plot::{decay_svg, power_sweep_svg, spectrum_svg, trace_svg, write_svg, Series};
use crate::qp::{
    generation_rate, radiator_temperature, radiator_temperature_exact, steady_state_density, QpModelParams,
    RadiatorModel, RadiatorParams,
};
use crate::sim::{
    simulate_traces, synthesize_ramsey_signal, GateErrorModulation, MeasurementMode, ParityTrace,
    RamseyParams, SimConfig, DEFAULT_DT,
};
use crate::spectral::{parity_indicator, Smoothing};
use crate::transmon::{
    anharmonicity, fraction_delta_f_below, parity_frequencies, qubit_frequency, Parity, TransmonParams,
    DEFAULT_NG_POINTS,
};

pub const THREADS_ENV: &str = "PARITYSCOPE_THREADS";
pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_OUTPUT_DIR: &str = "parityscope-out";
/// Shots drawn in the trace figure.
const TRACE_PLOT_SHOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Simulate,
    Analyze,
    Fit,
    Physics,
    Campaign,
    Ingest,
    Report,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Spectrum,
        Command::Simulate,
        Command::Analyze,
        Command::Fit,
        Command::Physics,
        Command::Campaign,
        Command::Ingest,
        Command::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Fit => "fit",
            Command::Physics => "physics",
            Command::Campaign => "campaign",
            Command::Ingest => "ingest",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCommand(s.to_string()))
    }
}

/// Encoding of tabular outputs. Scalar summaries and the manifest are
/// always JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(config_error(
                "format",
                format!("expected `json` or `csv`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    /// Command-specific document.
    pub parameters: Value,
    pub output_dir: PathBuf,
    /// Required by commands that draw random numbers.
    pub seed: Option<u64>,
    pub format: Format,
    /// Write SVG figures next to the results.
    pub plots: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[allow(dead_code)]
    command: String,
    #[serde(default)]
    parameters: Value,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    format: Format,
    #[serde(default = "yes")]
    plots: bool,
}

fn yes() -> bool {
    true
}

/// Values given on the command line; each replaces the document's field.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub plots: Option<bool>,
}

fn config_error(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

fn path_error(prefix: &str, e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let inner = e.path().to_string();
    let path = match (prefix.is_empty(), inner.as_str()) {
        (true, ".") => ".".to_string(),
        (true, _) => inner,
        (false, ".") => prefix.to_string(),
        (false, _) => format!("{prefix}.{inner}"),
    };
    config_error(path, e.into_inner().to_string())
}

fn from_value<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| path_error(prefix, e))
}

impl RunConfig {
    /// Parses a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| config_error(".", e.to_string()))?;
        Self::from_value(value, &Overrides::default())
    }

    /// Reads `path` (if any), applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| config_error(".", e.to_string()))?
            }
            None => json!({}),
        };
        Self::from_value(value, overrides)
    }

    pub fn from_value(mut value: Value, overrides: &Overrides) -> Result<Self> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| config_error(".", "config must be a JSON object"))?;
        if let Some(c) = &overrides.command {
            obj.insert("command".into(), json!(c));
        }
        if let Some(d) = &overrides.output_dir {
            obj.insert("output_dir".into(), json!(d));
        }
        if let Some(s) = overrides.seed {
            obj.insert("seed".into(), json!(s));
        }
        if let Some(f) = &overrides.format {
            obj.insert("format".into(), json!(Format::from_str(f)?));
        }
        if let Some(p) = overrides.plots {
            obj.insert("plots".into(), json!(p));
        }
        let command = match obj.get("command") {
            Some(Value::String(s)) => Command::from_str(s)?,
            Some(_) => return Err(config_error("command", "must be a string")),
            None => {
                return Err(config_error(
                    "command",
                    "missing; pass a subcommand or set `command`",
                ))
            }
        };
        let raw: RawConfig = from_value(value, "")?;
        Ok(Self {
            command,
            parameters: raw.parameters,
            output_dir: raw
                .output_dir
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            seed: raw.seed,
            format: raw.format,
            plots: raw.plots,
        })
    }

    /// sha256 of the canonical document without the output directory.
    pub fn config_hash(&self) -> String {
        let doc = json!({
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "format": self.format,
            "plots": self.plots,
        });
        sha256_hex(doc.to_string().as_bytes())
    }

    fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let v = match &self.parameters {
            Value::Null => json!({}),
            v => v.clone(),
        };
        from_value(v, "parameters")
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| config_error("seed", format!("required by `{}`", self.command)))
    }
}

/// 2 for configuration problems, 1 for failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownCommand(_) | Error::Config { .. } | Error::InvalidParameter { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    /// Hash over the names and hashes of all non-plot files.
    pub results_hash: String,
    pub files: Vec<ManifestEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
    /// Human-readable digest for the terminal.
    pub summary: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    dir: PathBuf,
    format: Format,
    plots: bool,
    files: Vec<ManifestEntry>,
    warnings: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8], plot: bool) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            plot,
        });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes, false)
    }

    fn csv_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Degenerate(e.to_string()))?;
        self.write(name, &bytes, false)
    }

    /// A table in the selected format; `stem` gets the extension.
    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Json => self.json(&format!("{stem}.json"), rows),
            Format::Csv => self.csv_rows(&format!("{stem}.csv"), rows),
        }
    }

    fn with_buffer(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf, false)
    }

    /// Figures are best effort: nothing to draw is a warning, not a failure.
    fn plot(&mut self, name: &str, svg: Result<String>) -> Result<()> {
        if !self.plots {
            return Ok(());
        }
        match svg {
            Ok(svg) => {
                write_svg(&self.dir.join(name), &svg)?;
                self.files.push(ManifestEntry {
                    path: name.to_string(),
                    sha256: sha256_hex(svg.as_bytes()),
                    bytes: svg.len() as u64,
                    plot: true,
                });
                Ok(())
            }
            Err(Error::EmptyResults(why)) => {
                self.warnings.push(format!("{name} not written: {why}"));
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// Executes one run. Honors `PARITYSCOPE_THREADS` as a cap on worker threads.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    match threads_from_env()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Degenerate(format!("thread pool: {e}")))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config_error(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
        Err(_) => Ok(None),
    }
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome> {
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Outputs {
        dir: dir.clone(),
        format: config.format,
        plots: config.plots,
        files: Vec::new(),
        warnings: Vec::new(),
    };
    let summary = match config.command {
        Command::Spectrum => cmd_spectrum(config, &mut out)?,
        Command::Simulate => cmd_simulate(config, &mut out)?,
        Command::Analyze => cmd_analyze(config, &mut out)?,
        Command::Fit => cmd_fit(config, &mut out)?,
        Command::Physics => cmd_physics(config, &mut out)?,
        Command::Campaign => cmd_campaign(config, &mut out)?,
        Command::Ingest => cmd_ingest(config, &mut out)?,
        Command::Report => cmd_report(config, &mut out)?,
    };

    let mut results: Vec<&ManifestEntry> = out.files.iter().filter(|f| !f.plot).collect();
    results.sort_by(|a, b| a.path.cmp(&b.path));
    let mut h = Sha256::new();
    for f in results {
        h.update(f.path.as_bytes());
        h.update([0]);
        h.update(f.sha256.as_bytes());
        h.update(b"\n");
    }
    let manifest = RunManifest {
        command: config.command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config_hash: config.config_hash(),
        results_hash: hex::encode(h.finalize()),
        files: out.files,
        warnings: out.warnings,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(RunOutcome {
        manifest,
        output_dir: dir,
        summary,
    })
}

// ---- spectrum ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumParams {
    #[serde(default)]
    ej: Option<f64>,
    #[serde(default)]
    ratio: Option<f64>,
    #[serde(default = "device_ec")]
    ec: f64,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default = "default_ng_points")]
    n_grid_points: usize,
    #[serde(default = "default_threshold")]
    threshold_mhz: f64,
}

fn device_ec() -> f64 {
    0.465
}

fn default_ng_points() -> usize {
    DEFAULT_NG_POINTS
}

fn default_threshold() -> f64 {
    0.5
}

fn cmd_spectrum(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let p: SpectrumParams = config.params()?;
    let mut params = match (p.ej, p.ratio) {
        (Some(_), Some(_)) => {
            return Err(config_error(
                "parameters.ej",
                "give either `ej` or `ratio`, not both",
            ))
        }
        (Some(ej), None) => TransmonParams::new(ej, p.ec),
        (None, r) => TransmonParams::from_ratio(r.unwrap_or(20.0), p.ec),
    };
    if let Some(dim) = p.dim {
        params.dim = dim;
    }
    let spectrum = parity_frequencies(&params, p.n_grid_points)?;
    let f01 = qubit_frequency(&params, 0.0, Parity::Even)?;
    let alpha = anharmonicity(&params, 0.0, Parity::Even)?;
    let below = fraction_delta_f_below(&spectrum, p.threshold_mhz)?;
    let summary = json!({
        "ej_ghz": params.ej,
        "ec_ghz": params.ec,
        "ratio": params.ej / params.ec,
        "f01_ghz": f01,
        "anharmonicity_mhz": alpha * 1e3,
        "dispersion_mhz": spectrum.dispersion,
        "threshold_mhz": p.threshold_mhz,
        "fraction_below_threshold": below,
    });
    out.json("spectrum_summary.json", &summary)?;
    match out.format {
        Format::Json => out.json("parity_spectrum.json", &spectrum)?,
        Format::Csv => out.with_buffer("parity_spectrum.csv", |b| spectrum.write_csv(b))?,
    }
    Ok(format!(
        "E_J/E_C = {:.2}: f01 = {f01:.4} GHz, anharmonicity = {:.1} MHz, dispersion = {:.4} MHz, \
         {:.1}% of offset charges below {} MHz",
        params.ej / params.ec,
        alpha * 1e3,
        spectrum.dispersion,
        100.0 * below,
        p.threshold_mhz
    ))
}

// ---- simulate / analyze ----

/// Simulation parameters; the seed comes from the run config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimParams {
    gamma0: f64,
    /// `null` or absent disables relaxation.
    #[serde(default)]
    t1: Option<f64>,
    #[serde(default)]
    t2: Option<f64>,
    #[serde(default)]
    readout_error: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    n_shots: usize,
    #[serde(default)]
    gate_error: Option<f64>,
    #[serde(default)]
    gate_error_modulation: Option<GateErrorModulation>,
    #[serde(default)]
    mode: MeasurementMode,
    #[serde(default = "even")]
    initial_parity: Parity,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn even() -> Parity {
    Parity::Even
}

impl SimParams {
    fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            gamma0: self.gamma0,
            t1: self.t1.unwrap_or(f64::INFINITY),
            t2: self.t2.unwrap_or(f64::INFINITY),
            readout_error: self.readout_error,
            dt: self.dt,
            n_shots: self.n_shots,
            seed,
            gate_error: self.gate_error,
            gate_error_modulation: self.gate_error_modulation,
            mode: self.mode,
            initial_parity: self.initial_parity,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    sim: SimParams,
    #[serde(default = "one")]
    n_traces: usize,
    /// Gaussian width of the plotted indicator, in shots.
    #[serde(default = "default_sigma")]
    smoothing_sigma: f64,
}

fn one() -> usize {
    1
}

fn default_sigma() -> f64 {
    20.0
}

#[derive(Serialize)]
struct TraceRow {
    index: usize,
    file: String,
    n_shots: usize,
    duration_s: f64,
    tunneling_events: u64,
    parity_switches: Option<usize>,
    indicator_mean: f64,
    discarded_heralds: u64,
}

fn trace_plot(trace: &ParityTrace, sigma: f64) -> Result<String> {
    let n = trace.len().min(TRACE_PLOT_SHOTS);
    let head = ParityTrace {
        m: trace.m[..n].to_vec(),
        true_parity: trace.true_parity.as_ref().map(|p| p[..n].to_vec()),
        ..trace.clone()
    };
    trace_svg(&head, Smoothing::Gaussian { sigma }, 4000)
}

fn cmd_simulate(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let p: SimulateParams = config.params()?;
    let seed = config.require_seed()?;
    if p.n_traces == 0 {
        return Err(config_error("parameters.n_traces", "must be > 0"));
    }
    let traces = simulate_traces(&p.sim.config(seed), p.n_traces)?;
    let mut rows = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        let file = match out.format {
            Format::Json => {
                let name = format!("trace_{i:03}.ptrc");
                out.with_buffer(&name, |b| t.write_binary(b))?;
                name
            }
            Format::Csv => {
                let name = format!("trace_{i:03}.csv");
                out.with_buffer(&name, |b| t.write_csv(b))?;
                name
            }
        };
        let d = parity_indicator(t)?;
        rows.push(TraceRow {
            index: i,
            file,
            n_shots: t.len(),
            duration_s: t.duration(),
            tunneling_events: t.tunneling_events,
            parity_switches: t.parity_switches(),
            indicator_mean: d.as_f64().iter().sum::<f64>() / d.len().max(1) as f64,
            discarded_heralds: t.discarded_heralds,
        });
    }
    out.table("traces", &rows)?;
    out.plot("trace_000.svg", trace_plot(&traces[0], p.smoothing_sigma))?;
    let events: u64 = rows.iter().map(|r| r.tunneling_events).sum();
    Ok(format!(
        "{} trace(s) of {} shots, {events} tunneling events in total",
        rows.len(),
        p.sim.n_shots
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeParams {
    #[serde(default)]
    sim: Option<SimParams>,
    #[serde(default = "ten")]
    n_traces: usize,
    /// Trace files: `.csv` (`shot_index,m`) or the binary trace format.
    #[serde(default)]
    traces: Vec<PathBuf>,
    /// Cycle period for CSV traces.
    #[serde(default = "default_dt")]
    trace_dt: f64,
    #[serde(default)]
    lorentzian: LorentzianOptions,
}

fn ten() -> usize {
    10
}

fn read_trace(path: &Path, dt: f64) -> Result<ParityTrace> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let r = BufReader::new(f);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        ParityTrace::read_csv(r, dt)
    } else {
        ParityTrace::read_binary(r)
    }
}

fn cmd_analyze(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let p: AnalyzeParams = config.params()?;
    let traces = match (&p.sim, p.traces.is_empty()) {
        (Some(_), false) => {
            return Err(config_error(
                "parameters.traces",
                "give either `sim` or `traces`, not both",
            ))
        }
        (None, true) => return Err(config_error("parameters", "need `sim` or `traces`")),
        (Some(sim), true) => {
            if p.n_traces == 0 {
                return Err(config_error("parameters.n_traces", "must be > 0"));
            }
            simulate_traces(&sim.config(config.require_seed()?), p.n_traces)?
        }
        (None, false) => p
            .traces
            .iter()
            .map(|t| read_trace(t, p.trace_dt))
            .collect::<Result<Vec<_>>>()?,
    };
    let ex = extract_rate(&traces, p.lorentzian)?;
    match out.format {
        Format::Json => out.json("spectrum.json", &ex.spectrum)?,
        Format::Csv => out.with_buffer("spectrum.csv", |b| ex.spectrum.write_csv(b))?,
    }
    out.json(
        "fit.json",
        &json!({ "rate_hz": ex.rate, "rate_err_hz": ex.rate_err, "n_traces": traces.len(), "fit": ex.fit }),
    )?;
    out.plot("psd.svg", spectrum_svg(&ex.spectrum, Some(&ex.fit)))?;
    let mut s = format!(
        "tunneling rate {:.2} ± {:.2} Hz from {} trace(s)",
        ex.rate,
        ex.rate_err,
        traces.len()
    );
    for c in &ex.fit.components[1..] {
        s.push_str(&format!(
            "\n  extra component at {:.1} ± {:.1} Hz",
            c.corner, c.corner_err
        ));
    }
    Ok(s)
}

// ---- fit ----

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FitParams {
    Ramsey {
        #[serde(default)]
        times: Option<Vec<f64>>,
        #[serde(default)]
        signal: Option<Vec<f64>>,
        #[serde(default)]
        synthetic: Option<RamseySynthetic>,
    },
    PowerLaw(SeriesInput),
    TimeDecay(SeriesInput),
}

/// Frequencies in MHz, times in µs.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RamseySynthetic {
    f_e: f64,
    f_o: f64,
    t2_star: f64,
    #[serde(default = "unit")]
    amplitude: f64,
    #[serde(default)]
    phase: f64,
    #[serde(default)]
    noise_sd: f64,
    #[serde(default = "default_ramsey_points")]
    n_points: usize,
    /// Defaults to three decay times.
    #[serde(default)]
    t_max: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

fn default_ramsey_points() -> usize {
    400
}

/// Either inline arrays or a CSV with columns `x,rate[,rate_err]`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesInput {
    #[serde(default)]
    x: Vec<f64>,
    #[serde(default)]
    rates: Vec<f64>,
    #[serde(default)]
    errors: Option<Vec<f64>>,
    #[serde(default)]
    input: Option<PathBuf>,
    #[serde(default = "data_label")]
    label: String,
}

fn data_label() -> String {
    "data".into()
}

#[derive(Deserialize)]
struct SeriesRow {
    x: f64,
    rate: f64,
    #[serde(default)]
    rate_err: Option<f64>,
}

impl SeriesInput {
    fn load(self) -> Result<Series> {
        let (x, rates, errors) = match self.input {
            Some(path) => {
                if !self.x.is_empty() || !self.rates.is_empty() {
                    return Err(config_error(
                        "parameters.input",
                        "give either `input` or inline arrays",
                    ));
                }
                let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
                let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
                let rows = rdr
                    .deserialize::<SeriesRow>()
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let errs: Option<Vec<f64>> = rows.iter().map(|r| r.rate_err).collect();
                (
                    rows.iter().map(|r| r.x).collect(),
                    rows.iter().map(|r| r.rate).collect(),
                    errs,
                )
            }
            None => (self.x, self.rates, self.errors),
        };
        if x.len() != rates.len() {
            return Err(config_error("parameters.rates", "length differs from `x`"));
        }
        if errors.as_ref().is_some_and(|e| e.len() != x.len()) {
            return Err(config_error("parameters.errors", "length differs from `x`"));
        }
        Ok(Series {
            label: self.label,
            x,
            rates,
            errors,
            fit: None,
        })
    }
}

fn cmd_fit(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    match config.params::<FitParams>()? {
        FitParams::Ramsey {
            times,
            signal,
            synthetic,
        } => {
            let (times, signal, truth) = match (times, signal, synthetic) {
                (Some(t), Some(s), None) => (t, s, None),
                (None, None, Some(syn)) => {
                    let t_max = syn.t_max.unwrap_or(3.0 * syn.t2_star);
                    let n = syn.n_points.max(2);
                    let times: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
                    let params = RamseyParams {
                        amplitude: syn.amplitude,
                        phase: syn.phase,
                        noise_sd: syn.noise_sd,
                        seed: config.require_seed()?,
                        ..RamseyParams::new(syn.f_e, syn.f_o, syn.t2_star)
                    };
                    let sig = synthesize_ramsey_signal(&params, &times)?;
                    (sig.times, sig.signal, Some(params))
                }
                _ => {
                    return Err(config_error(
                        "parameters",
                        "ramsey needs either `times` and `signal`, or `synthetic`",
                    ))
                }
            };
            let fit = fit_two_tone_ramsey(&times, &signal)?;
            out.json(
                "fit.json",
                &json!({ "kind": "ramsey", "fit": fit, "truth": truth }),
            )?;
            if truth.is_some() {
                let rows: Vec<_> = times
                    .iter()
                    .zip(&signal)
                    .map(|(t, s)| json!({ "t_us": t, "signal": s }))
                    .collect();
                out.table("ramsey_signal", &rows)?;
            }
            Ok(format!(
                "f_e = {:.5} ± {:.5} MHz, f_o = {:.5} ± {:.5} MHz, T2* = {:.3} µs",
                fit.f_e, fit.f_e_err, fit.f_o, fit.f_o_err, fit.t2_star
            ))
        }
        FitParams::PowerLaw(input) => {
            let mut s = input.load()?;
            let fit = match &s.errors {
                Some(e) => fit_power_law_weighted(&s.x, &s.rates, e)?,
                None => fit_power_law(&s.x, &s.rates)?,
            };
            out.json("fit.json", &json!({ "kind": "power_law", "fit": fit }))?;
            s.fit = Some(fit);
            out.plot("rate_vs_power.svg", power_sweep_svg(std::slice::from_ref(&s)))?;
            Ok(format!(
                "Γ = {:.2} + {:.4e}·P^{:.3} (exponent ± {:.3})",
                fit.base, fit.amplitude, fit.exponent, fit.exponent_err
            ))
        }
        FitParams::TimeDecay(input) => {
            let mut s = input.load()?;
            let fit = match &s.errors {
                Some(e) => fit_time_decay_weighted(&s.x, &s.rates, e)?,
                None => fit_time_decay(&s.x, &s.rates)?,
            };
            out.json(
                "fit.json",
                &json!({ "kind": "time_decay", "fit": fit, "decay_exponent": fit.decay_exponent() }),
            )?;
            s.fit = Some(fit);
            out.plot("rate_vs_time.svg", decay_svg(std::slice::from_ref(&s)))?;
            Ok(format!(
                "Γ(t) = {:.2}·t^-{:.3} (± {:.3}), Γ(1 d) = {:.2} Hz",
                fit.amplitude,
                fit.decay_exponent(),
                fit.exponent_err,
                fit.evaluate(1.0)
            ))
        }
    }
}

// ---- physics ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhysicsParams {
    qp: QpModelParams,
    k_tunnel: f64,
    #[serde(default)]
    base_rate: f64,
    #[serde(default)]
    powers_w: Option<Vec<f64>>,
    #[serde(default)]
    currents_a: Option<Vec<f64>>,
    #[serde(default = "RadiatorParams::manganin_wire")]
    radiator: RadiatorParams,
}

#[derive(Serialize)]
struct PhysicsRow {
    current_a: Option<f64>,
    power_w: f64,
    radiator_temperature_k: f64,
    generation_rate: f64,
    x_qp: f64,
    rate_hz: f64,
}

fn cmd_physics(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let p: PhysicsParams = config.params()?;
    p.qp.validate()?;
    let points: Vec<(Option<f64>, f64)> = match (&p.powers_w, &p.currents_a) {
        (Some(pw), None) => pw.iter().map(|&w| (None, w)).collect(),
        (None, Some(ia)) => {
            p.radiator.validate()?;
            ia.iter()
                .map(|&i| (Some(i), p.radiator.power_from_current(i)))
                .collect()
        }
        _ => {
            return Err(config_error(
                "parameters",
                "give exactly one of `powers_w` or `currents_a`",
            ))
        }
    };
    let q = &p.qp;
    let rows = points
        .iter()
        .map(|&(current_a, power_w)| {
            let t = match q.radiator_model {
                RadiatorModel::ColdBath => radiator_temperature(power_w, q.gtilde)?,
                RadiatorModel::ExactBalance => radiator_temperature_exact(power_w, q.gtilde, q.t_bath)?,
            };
            let g = generation_rate(power_w, q)?;
            let x = steady_state_density(g, q.s, q.r)?;
            Ok(PhysicsRow {
                current_a,
                power_w,
                radiator_temperature_k: t,
                generation_rate: g,
                x_qp: x,
                rate_hz: p.k_tunnel * x + p.base_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.table("rate_curve", &rows)?;
    let physics = CampaignPhysics {
        qp: p.qp,
        k_tunnel: p.k_tunnel,
        base_rate: p.base_rate,
    };
    let truth = physics
        .power_law_truth()
        .map(|(base, amplitude, exponent)| PowerLawFit {
            base,
            amplitude,
            exponent,
            base_err: 0.0,
            amplitude_err: 0.0,
            exponent_err: 0.0,
            residual_norm: 0.0,
        });
    out.json(
        "physics_summary.json",
        &json!({ "points": rows.len(), "power_law": truth }),
    )?;
    let series = Series {
        label: "model".into(),
        x: rows.iter().map(|r| r.power_w).collect(),
        rates: rows.iter().map(|r| r.rate_hz).collect(),
        errors: None,
        fit: truth,
    };
    out.plot("rate_vs_power.svg", power_sweep_svg(&[series]))?;
    let last = rows
        .last()
        .ok_or_else(|| config_error("parameters", "no powers given"))?;
    let mut s = format!(
        "{} point(s); at P = {:.3e} W: T = {:.3} K, x_qp = {:.4e}, Γ = {:.2} Hz",
        rows.len(),
        last.power_w,
        last.radiator_temperature_k,
        last.x_qp,
        last.rate_hz
    );
    if let Some(t) = truth {
        s.push_str(&format!("\nexact power law: exponent {}", t.exponent));
    }
    Ok(s)
}

// ---- campaign ----

fn cmd_campaign(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let seed = config.require_seed()?;
    let mut params = match &config.parameters {
        Value::Object(o) => o.clone(),
        Value::Null => Default::default(),
        _ => return Err(config_error("parameters", "must be an object")),
    };
    if params.contains_key("seed") {
        return Err(config_error("parameters.seed", "set the seed at the top level"));
    }
    params.insert("seed".into(), json!(seed));
    let spec: CampaignSpec = from_value(Value::Object(params), "parameters")?;
    let result = run_synthetic_campaign(&spec)?;
    out.json("campaign.json", &result)?;
    match out.format {
        Format::Json => out.json("records.json", &result.records)?,
        Format::Csv => out.with_buffer("records.csv", |b| write_records(&result.records, b))?,
    }

    let ok: Vec<_> = result.points.iter().filter(|p| p.rate_hz.is_some()).collect();
    let mut series = Series {
        label: spec.material.to_string(),
        x: ok.iter().map(|p| p.x).collect(),
        rates: ok.iter().map(|p| p.rate_hz.unwrap_or(0.0)).collect(),
        errors: Some(ok.iter().map(|p| p.rate_err_hz.unwrap_or(0.0)).collect()),
        fit: None,
    };
    match (&spec.plan, &result.fit) {
        (CampaignPlan::PowerSweep { .. } | CampaignPlan::CurrentSweep { .. }, fit) => {
            if let Some(PlanFit::PowerLaw(f)) = fit {
                series.fit = Some(*f);
            }
            out.plot("rate_vs_power.svg", power_sweep_svg(&[series]))?;
        }
        (CampaignPlan::TimeSeries { .. }, fit) => {
            if let Some(PlanFit::TimeDecay(f)) = fit {
                series.fit = Some(*f);
            }
            out.plot("rate_vs_time.svg", decay_svg(&[series]))?;
        }
        (CampaignPlan::Configurations { .. }, _) => {}
    }

    let mut s = format!(
        "{}/{} point(s) extracted, config {}",
        ok.len(),
        result.points.len(),
        &result.manifest.config_hash[..12]
    );
    for p in result.points.iter().filter(|p| p.error.is_some()) {
        s.push_str(&format!(
            "\n  point {} failed: {}",
            p.index,
            p.error.as_deref().unwrap_or("")
        ));
    }
    if let Some(e) = &result.fit_error {
        s.push_str(&format!("\n  fit failed: {e}"));
    }
    for c in &result.closure {
        s.push_str(&format!(
            "\n  {}: truth {:.4e}, recovered {:.4e} ± {:.2e} (pull {:+.2})",
            c.parameter,
            c.truth,
            c.recovered,
            c.sigma,
            c.pull()
        ));
    }
    Ok(s)
}

// ---- ingest / report ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestParams {
    /// Record CSV; the shipped filter-configuration table when absent.
    #[serde(default)]
    input: Option<PathBuf>,
}

fn load_records(input: Option<&Path>) -> Result<(Vec<MeasurementRecord>, Vec<String>, String)> {
    match input {
        Some(path) => {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            let ing = ingest_records(BufReader::new(f))?;
            Ok((ing.records, ing.warnings, path.display().to_string()))
        }
        None => {
            let ing = ingest_records(FILTER_SURVEY_CSV.as_bytes())?;
            Ok((ing.records, ing.warnings, "builtin:filter-configurations".into()))
        }
    }
}

fn cmd_ingest(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let p: IngestParams = config.params()?;
    let (records, warnings, source) = load_records(p.input.as_deref())?;
    match out.format {
        Format::Json => out.json("records.json", &records)?,
        Format::Csv => out.with_buffer("records.csv", |b| write_records(&records, b))?,
    }
    out.json(
        "ingest.json",
        &json!({ "source": source, "n_records": records.len(), "warnings": warnings }),
    )?;
    out.warnings.extend(warnings);
    let mut per: BTreeMap<Material, usize> = BTreeMap::new();
    for r in &records {
        *per.entry(r.material).or_default() += 1;
    }
    let counts: Vec<String> = per.iter().map(|(m, n)| format!("{m}: {n}")).collect();
    Ok(format!(
        "{} record(s) from {source} ({})",
        records.len(),
        counts.join(", ")
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportParams {
    #[serde(default)]
    input: Option<PathBuf>,
    #[serde(default)]
    grouping: Grouping,
    #[serde(default)]
    averaging: Averaging,
    #[serde(default = "no_filter")]
    baseline: String,
    #[serde(default)]
    time_correction: Option<TimeCorrection>,
}

fn no_filter() -> String {
    NO_FILTER.into()
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TimeCorrection {
    /// Decay exponent `p` per material in `Γ ∝ t^{−p}`.
    exponents: BTreeMap<Material, f64>,
    #[serde(default = "unit")]
    t_ref: f64,
}

fn cmd_report(config: &RunConfig, out: &mut Outputs) -> Result<String> {
    let p: ReportParams = config.params()?;
    let (mut records, warnings, source) = load_records(p.input.as_deref())?;
    out.warnings.extend(warnings);
    if let Some(tc) = &p.time_correction {
        records = time_correct_records(&records, &tc.exponents, tc.t_ref)?
            .into_iter()
            .map(|c| MeasurementRecord {
                gamma0: c.gamma0_corrected,
                gamma0_err: c.gamma0_err_corrected,
                t_days: c.t_ref,
                ..c.record
            })
            .collect();
    }
    let sums = summarize_configurations(&records, p.grouping, p.averaging);
    let reductions = compare_configurations(&sums.summaries, &p.baseline)?;
    out.warnings.extend(sums.notices.iter().cloned());
    match out.format {
        Format::Json => out.json(
            "report.json",
            &json!({
                "source": source,
                "baseline": p.baseline,
                "time_correction": p.time_correction,
                "summaries": sums.summaries,
                "reductions": reductions,
                "notices": sums.notices,
            }),
        )?,
        Format::Csv => {
            out.csv_rows("summaries.csv", &sums.summaries)?;
            out.csv_rows("reductions.csv", &reductions)?;
        }
    }

    let mut s = format!(
        "{:<4} {:<24} {:>12} {:>12} {:>3}\n",
        "mat", "configuration", "mean (kHz)", "spread (kHz)", "n"
    );
    for c in &sums.summaries {
        s.push_str(&format!(
            "{:<4} {:<24} {:>12.3} {:>12.3} {:>3}\n",
            c.material.to_string(),
            c.configuration,
            c.mean_rate / 1e3,
            c.spread / 1e3,
            c.n
        ));
    }
    s.push_str(&format!("\nreduction relative to `{}`:\n", p.baseline));
    for r in &reductions {
        s.push_str(&format!(
            "{:<4} {:<24} factor {:>6} absolute {:>7} kHz\n",
            r.material.to_string(),
            r.configuration,
            r.factor_rounded(),
            r.absolute_khz_rounded()
        ));
    }
    Ok(s.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(doc: Value, dir: &Path) -> RunConfig {
        let mut c = RunConfig::from_value(doc, &Overrides::default()).unwrap();
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn unknown_command_exits_2() {
        let e = RunConfig::from_json(r#"{"command": "transmogrify"}"#).unwrap_err();
        assert!(matches!(e, Error::UnknownCommand(_)));
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn invalid_field_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            json!({"command": "simulate", "seed": 1, "parameters": {"sim": {"gamma0": "fast", "n_shots": 10}}}),
            dir.path(),
        );
        let e = run(&c).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        match e {
            Error::Config { path, .. } => assert_eq!(path, "parameters.sim.gamma0"),
            other => panic!("{other}"),
        }
        let e = RunConfig::from_json(r#"{"command": "report", "sede": 3}"#).unwrap_err();
        assert!(matches!(e, Error::Config { .. }), "{e}");
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            json!({"command": "simulate", "parameters": {"sim": {"gamma0": 1.0, "n_shots": 10}}}),
            dir.path(),
        );
        match run(&c).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "seed"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn overrides_replace_document_fields() {
        let o = Overrides {
            command: Some("ingest".into()),
            seed: Some(9),
            format: Some("csv".into()),
            ..Default::default()
        };
        let c = RunConfig::from_value(json!({"command": "report", "seed": 1}), &o).unwrap();
        assert_eq!(c.command, Command::Ingest);
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.format, Format::Csv);
        let bad = Overrides {
            format: Some("xml".into()),
            ..Default::default()
        };
        assert_eq!(
            exit_code(&RunConfig::from_value(json!({"command": "report"}), &bad).unwrap_err()),
            2
        );
    }

    #[test]
    fn runtime_failure_exits_1() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            json!({"command": "ingest", "parameters": {"input": "/nonexistent/records.csv"}}),
            dir.path(),
        );
        assert_eq!(exit_code(&run(&c).unwrap_err()), 1);
    }

    #[test]
    fn manifest_lists_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(json!({"command": "spectrum", "format": "csv"}), dir.path());
        let outcome = run(&c).unwrap();
        let names: Vec<_> = outcome.manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, ["spectrum_summary.json", "parity_spectrum.csv"]);
        for f in &outcome.manifest.files {
            let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
        }
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }
}
