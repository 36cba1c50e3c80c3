//! Restless charge-parity measurement simulated as a Markov error process.
//!
//! Each cycle applies, in order: quasiparticle tunneling (Poisson event count,
//! parity flips on odd counts), energy relaxation of an excited incoming state,
//! the ideal parity→state mapping (even toggles, odd preserves), an optional
//! gate error, dephasing (outcome randomized) and readout misclassification
//! (assigned label only; the projected state is unaffected).

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::transmon::Parity;

/// Default cycle period (≈ 0.67 MHz repetition rate).
pub const DEFAULT_DT: f64 = 1.5e-6;
/// Smallest usable `|f_e − f_o|` in MHz.
pub const DEFAULT_DELTA_F_FLOOR_MHZ: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMode {
    /// No reset between cycles; parity is encoded in toggling.
    #[default]
    Restless,
    /// Each cycle waits for a `|0⟩` herald; parity is encoded in the outcome.
    Heralded,
}

/// Slow variation of the gate error probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateErrorModulation {
    /// `p(t) = p₀ (1 + depth · sin 2π f t)`.
    Sinusoidal { depth: f64, rate_hz: f64 },
    /// `p(t) = p₀ (1 ± depth)`, switching sign as a Poisson process.
    Telegraph { depth: f64, rate_hz: f64 },
}

impl GateErrorModulation {
    fn depth(&self) -> f64 {
        match *self {
            GateErrorModulation::Sinusoidal { depth, .. } | GateErrorModulation::Telegraph { depth, .. } => {
                depth
            }
        }
    }

    fn rate(&self) -> f64 {
        match *self {
            GateErrorModulation::Sinusoidal { rate_hz, .. }
            | GateErrorModulation::Telegraph { rate_hz, .. } => rate_hz,
        }
    }
}

/// Parameters of one simulated parity trace. Times in seconds, rates in Hz.
///
/// `t1`/`t2` may be infinite to switch the channel off; infinities are
/// serialized as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub gamma0: f64,
    #[serde(with = "inf_as_null")]
    pub t1: f64,
    #[serde(with = "inf_as_null")]
    pub t2: f64,
    pub readout_error: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub n_shots: usize,
    pub seed: u64,
    #[serde(default)]
    pub gate_error: Option<f64>,
    #[serde(default)]
    pub gate_error_modulation: Option<GateErrorModulation>,
    #[serde(default)]
    pub mode: MeasurementMode,
    #[serde(default = "default_parity")]
    pub initial_parity: Parity,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_parity() -> Parity {
    Parity::Even
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl SimConfig {
    /// Error-free toggling: no relaxation, dephasing or misclassification.
    pub fn ideal(gamma0: f64, n_shots: usize, seed: u64) -> Self {
        Self {
            gamma0,
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            readout_error: 0.0,
            dt: DEFAULT_DT,
            n_shots,
            seed,
            gate_error: None,
            gate_error_modulation: None,
            mode: MeasurementMode::Restless,
            initial_parity: Parity::Even,
        }
    }

    /// Typical device parameters: T1 = 20 µs, T2 = 10 µs, 2 % misclassification.
    pub fn typical(gamma0: f64, n_shots: usize, seed: u64) -> Self {
        Self {
            t1: 20e-6,
            t2: 10e-6,
            readout_error: 0.02,
            ..Self::ideal(gamma0, n_shots, seed)
        }
    }

    pub fn duration(&self) -> f64 {
        self.n_shots as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite()) {
            return Err(Error::invalid("gamma0", "must be finite and ≥ 0"));
        }
        if !(self.t1 > 0.0) {
            return Err(Error::invalid("t1", "must be > 0"));
        }
        if !(self.t2 > 0.0) {
            return Err(Error::invalid("t2", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.readout_error) {
            return Err(Error::invalid("readout_error", "must lie in [0, 1)"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if self.n_shots == 0 {
            return Err(Error::invalid("n_shots", "must be > 0"));
        }
        if !self.duration().is_finite() || self.n_shots as u64 >= (1u64 << 53) {
            return Err(Error::invalid("n_shots", "trace duration is not representable"));
        }
        if let Some(p) = self.gate_error {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid("gate_error", "must lie in [0, 1)"));
            }
        }
        if let Some(m) = self.gate_error_modulation {
            if !(0.0..=1.0).contains(&m.depth()) {
                return Err(Error::invalid(
                    "gate_error_modulation.depth",
                    "must lie in [0, 1]",
                ));
            }
            if !(m.rate() > 0.0 && m.rate().is_finite()) {
                return Err(Error::invalid("gate_error_modulation.rate_hz", "must be > 0"));
            }
        }
        if self.gamma0 * self.dt > 0.1 {
            log::warn!(
                "gamma0·dt = {:.3}: parity flips are not well resolved per cycle",
                self.gamma0 * self.dt
            );
        }
        Ok(())
    }
}

/// Assigned qubit states of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityTrace {
    /// Assigned states, 0 or 1.
    pub m: Vec<u8>,
    pub dt: f64,
    /// Hidden parity per cycle (0 even, 1 odd).
    pub true_parity: Option<Vec<u8>>,
    pub mode: MeasurementMode,
    /// Total number of tunneling events, including ones that cancelled within a cycle.
    pub tunneling_events: u64,
    /// Herald attempts discarded in heralded mode.
    pub discarded_heralds: u64,
    pub meta: Option<SimConfig>,
}

impl ParityTrace {
    /// Wraps measured assigned states.
    pub fn from_states(m: Vec<u8>, dt: f64) -> Result<Self> {
        if m.iter().any(|&v| v > 1) {
            return Err(Error::invalid("m", "assigned states must be 0 or 1"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        Ok(Self {
            m,
            dt,
            true_parity: None,
            mode: MeasurementMode::Restless,
            tunneling_events: 0,
            discarded_heralds: 0,
            meta: None,
        })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.m.len() as f64 * self.dt
    }

    /// Number of parity changes in the hidden parity sequence.
    pub fn parity_switches(&self) -> Option<usize> {
        self.true_parity
            .as_ref()
            .map(|p| p.windows(2).filter(|w| w[0] != w[1]).count())
    }
}

struct Channels {
    tunneling: Option<Poisson<f64>>,
    p_decay: f64,
    p_dephase: f64,
    p_readout: f64,
}

impl Channels {
    fn new(c: &SimConfig) -> Self {
        let prob = |rate: f64| -(-rate * c.dt).exp_m1();
        Self {
            tunneling: (c.gamma0 > 0.0)
                .then(|| Poisson::new(c.gamma0 * c.dt).expect("positive Poisson mean")),
            p_decay: prob(1.0 / c.t1),
            p_dephase: prob(1.0 / c.t2),
            p_readout: c.readout_error,
        }
    }

    /// Number of tunneling events in one cycle.
    fn tunnel(&self, rng: &mut ChaCha8Rng) -> u64 {
        self.tunneling.as_ref().map_or(0, |d| d.sample(rng) as u64)
    }
}

struct GateError {
    base: f64,
    modulation: Option<GateErrorModulation>,
    telegraph_sign: f64,
    p_switch: f64,
}

impl GateError {
    fn new(c: &SimConfig) -> Option<Self> {
        let base = c.gate_error?;
        let p_switch = match c.gate_error_modulation {
            Some(GateErrorModulation::Telegraph { rate_hz, .. }) => -(-rate_hz * c.dt).exp_m1(),
            _ => 0.0,
        };
        Some(Self {
            base,
            modulation: c.gate_error_modulation,
            telegraph_sign: 1.0,
            p_switch,
        })
    }

    fn probability(&mut self, t: f64, rng: &mut ChaCha8Rng) -> f64 {
        let p = match self.modulation {
            None => self.base,
            Some(GateErrorModulation::Sinusoidal { depth, rate_hz }) => {
                self.base * (1.0 + depth * (2.0 * PI * rate_hz * t).sin())
            }
            Some(GateErrorModulation::Telegraph { depth, .. }) => {
                if rng.random::<f64>() < self.p_switch {
                    self.telegraph_sign = -self.telegraph_sign;
                }
                self.base * (1.0 + depth * self.telegraph_sign)
            }
        };
        p.clamp(0.0, 1.0)
    }
}

/// Simulates one trace on stream 0 of `config.seed`.
pub fn simulate_parity_trace(config: &SimConfig) -> Result<ParityTrace> {
    simulate_on_stream(config, 0)
}

/// Simulates `count` independent traces; trace `i` uses stream `i` of the
/// template seed, so the result is independent of the thread count.
pub fn simulate_traces(template: &SimConfig, count: usize) -> Result<Vec<ParityTrace>> {
    template.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_on_stream(template, i))
        .collect()
}

fn simulate_on_stream(config: &SimConfig, stream: u64) -> Result<ParityTrace> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, stream);
    let ch = Channels::new(config);
    let mut gate = GateError::new(config);

    let n = config.n_shots;
    let mut m = Vec::with_capacity(n);
    let mut parity_bits = Vec::with_capacity(n);
    let mut parity = config.initial_parity;
    let mut qubit: u8 = 0;
    let mut events = 0u64;
    let mut discarded = 0u64;
    let mut cycle = 0u64;

    let advance = |parity: &mut Parity, qubit: &mut u8, rng: &mut ChaCha8Rng, events: &mut u64| {
        let k = ch.tunnel(rng);
        *events += k;
        if k % 2 == 1 {
            *parity = parity.flipped();
        }
        if *qubit == 1 && rng.random::<f64>() < ch.p_decay {
            *qubit = 0;
        }
    };

    for _ in 0..n {
        if config.mode == MeasurementMode::Heralded {
            loop {
                advance(&mut parity, &mut qubit, &mut rng, &mut events);
                cycle += 1;
                let herald = misclassify(qubit, ch.p_readout, &mut rng);
                if herald == 0 {
                    break;
                }
                // Conditional π pulse after a |1⟩ herald, then herald again.
                qubit ^= 1;
                discarded += 1;
            }
        } else {
            advance(&mut parity, &mut qubit, &mut rng, &mut events);
            cycle += 1;
        }

        let mut outcome = match parity {
            Parity::Even => 1 - qubit,
            Parity::Odd => qubit,
        };
        if let Some(g) = gate.as_mut() {
            let t = cycle as f64 * config.dt;
            if rng.random::<f64>() < g.probability(t, &mut rng) {
                outcome ^= 1;
            }
        }
        if rng.random::<f64>() < ch.p_dephase {
            outcome = rng.random_bool(0.5) as u8;
        }
        qubit = outcome;
        m.push(misclassify(outcome, ch.p_readout, &mut rng));
        parity_bits.push(matches!(parity, Parity::Odd) as u8);
    }

    Ok(ParityTrace {
        m,
        dt: config.dt,
        true_parity: Some(parity_bits),
        mode: config.mode,
        tunneling_events: events,
        discarded_heralds: discarded,
        meta: Some(config.clone()),
    })
}

fn misclassify(state: u8, p: f64, rng: &mut ChaCha8Rng) -> u8 {
    if p > 0.0 && rng.random::<f64>() < p {
        state ^ 1
    } else {
        state
    }
}

/// Wait between the two Ramsey pulses that separates the parity states by π.
///
/// Returns seconds. Fails when `delta_f_mhz` is below the default 0.5 MHz floor.
pub fn parity_wait_time(delta_f_mhz: f64) -> Result<f64> {
    parity_wait_time_with_floor(delta_f_mhz, DEFAULT_DELTA_F_FLOOR_MHZ)
}

pub fn parity_wait_time_with_floor(delta_f_mhz: f64, floor_mhz: f64) -> Result<f64> {
    if !(delta_f_mhz > 0.0) || !delta_f_mhz.is_finite() {
        return Err(Error::invalid("delta_f", "must be finite and > 0"));
    }
    if delta_f_mhz < floor_mhz {
        return Err(Error::UnusableOffsetCharge {
            delta_f_mhz,
            floor_mhz,
        });
    }
    Ok(1.0 / (2.0 * delta_f_mhz * 1e6))
}

/// Parameters of a synthetic averaged two-tone Ramsey signal.
/// Frequencies in MHz, times in µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    pub f_e: f64,
    pub f_o: f64,
    pub t2_star: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub phase: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl RamseyParams {
    pub fn new(f_e: f64, f_o: f64, t2_star: f64) -> Self {
        Self {
            f_e,
            f_o,
            t2_star,
            amplitude: 1.0,
            offset: 0.0,
            phase: 0.0,
            noise_sd: 0.0,
            seed: 0,
        }
    }

    /// Noise-free model value at `t` µs.
    pub fn evaluate(&self, t: f64) -> f64 {
        let w = 2.0 * PI;
        self.amplitude
            * (-t / self.t2_star).exp()
            * 0.5
            * ((w * self.f_e * t + self.phase).cos() + (w * self.f_o * t + self.phase).cos())
            + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseySignal {
    pub times: Vec<f64>,
    pub signal: Vec<f64>,
    pub params: RamseyParams,
}

/// Samples the decaying two-tone cosine plus Gaussian noise on `times` (µs).
pub fn synthesize_ramsey_signal(params: &RamseyParams, times: &[f64]) -> Result<RamseySignal> {
    if !(params.t2_star > 0.0) {
        return Err(Error::invalid("t2_star", "must be > 0"));
    }
    if !(params.noise_sd >= 0.0) {
        return Err(Error::invalid("noise_sd", "must be ≥ 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times", "must be strictly ascending"));
    }
    let mut rng = stream_rng(params.seed, 0);
    let noise = Normal::new(0.0, params.noise_sd.max(f64::MIN_POSITIVE)).expect("valid sd");
    let signal = times
        .iter()
        .map(|&t| {
            let n = if params.noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            params.evaluate(t) + n
        })
        .collect();
    Ok(RamseySignal {
        times: times.to_vec(),
        signal,
        params: *params,
    })
}

const TRACE_MAGIC: &[u8; 4] = b"PTRC";
const TRACE_VERSION: u8 = 1;

impl ParityTrace {
    /// Compact binary form.
    ///
    /// Layout (little endian): magic `PTRC`, version `u8`, flags `u8`
    /// (bit 0: parity bits present), `dt: f64`, metadata length `u32` followed by
    /// UTF-8 JSON metadata, `n: u64`, then `ceil(n/8)` bytes of packed `m`
    /// (LSB first) and, if flagged, the same for the hidden parity.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<trace>", e);
        let meta = serde_json::to_vec(&TraceMeta {
            mode: self.mode,
            tunneling_events: self.tunneling_events,
            discarded_heralds: self.discarded_heralds,
            config: self.meta.clone(),
        })?;
        w.write_all(TRACE_MAGIC).map_err(io)?;
        let flags = self.true_parity.is_some() as u8;
        w.write_all(&[TRACE_VERSION, flags]).map_err(io)?;
        w.write_all(&self.dt.to_le_bytes()).map_err(io)?;
        w.write_all(&(meta.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&meta).map_err(io)?;
        w.write_all(&(self.m.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&pack_bits(&self.m)).map_err(io)?;
        if let Some(p) = &self.true_parity {
            w.write_all(&pack_bits(p)).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::io("<trace>", e))?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(4)? != TRACE_MAGIC {
            return Err(Error::TraceFormat("bad magic".into()));
        }
        let head = cur.take(2)?;
        if head[0] != TRACE_VERSION {
            return Err(Error::TraceFormat(format!("unsupported version {}", head[0])));
        }
        let has_parity = head[1] & 1 == 1;
        let dt = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let meta_len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let meta: TraceMeta = serde_json::from_slice(cur.take(meta_len)?)?;
        let n = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
        let nbytes = n.div_ceil(8);
        let m = unpack_bits(cur.take(nbytes)?, n);
        let true_parity = if has_parity {
            Some(unpack_bits(cur.take(nbytes)?, n))
        } else {
            None
        };
        if cur.pos != buf.len() {
            return Err(Error::TraceFormat("trailing bytes".into()));
        }
        Ok(Self {
            m,
            dt,
            true_parity,
            mode: meta.mode,
            tunneling_events: meta.tunneling_events,
            discarded_heralds: meta.discarded_heralds,
            meta: meta.config,
        })
    }

    /// `shot_index,m` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["shot_index", "m"])?;
        for (i, v) in self.m.iter().enumerate() {
            w.write_record(&[i.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, dt: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = headers
            .iter()
            .position(|h| h == "m")
            .ok_or_else(|| Error::MissingColumn("m".into()))?;
        let mut m = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let v: u8 = row[col].trim().parse().map_err(|_| Error::MalformedRecord {
                line: i + 2,
                reason: format!("`{}` is not 0 or 1", &row[col]),
            })?;
            if v > 1 {
                return Err(Error::MalformedRecord {
                    line: i + 2,
                    reason: format!("`{v}` is not 0 or 1"),
                });
            }
            m.push(v);
        }
        Self::from_states(m, dt)
    }
}

#[derive(Serialize, Deserialize)]
struct TraceMeta {
    mode: MeasurementMode,
    tunneling_events: u64,
    discarded_heralds: u64,
    config: Option<SimConfig>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::TraceFormat("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << i))
        })
        .collect()
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_restless_toggles_every_shot() {
        let t = simulate_parity_trace(&SimConfig::ideal(0.0, 1000, 1)).unwrap();
        assert!(t.m.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(t.tunneling_events, 0);
    }

    #[test]
    fn ideal_odd_start_is_constant() {
        let mut c = SimConfig::ideal(0.0, 100, 1);
        c.initial_parity = Parity::Odd;
        let t = simulate_parity_trace(&c).unwrap();
        assert!(t.m.iter().all(|&v| v == 0));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn ideal_mapping_follows_hidden_parity() {
        let t = simulate_parity_trace(&SimConfig::ideal(2000.0, 50_000, 3)).unwrap();
        let p = t.true_parity.as_ref().unwrap();
        for i in 1..t.len() {
            let toggled = t.m[i] != t.m[i - 1];
            assert_eq!(toggled, p[i] == 0, "shot {i}");
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let c = SimConfig::typical(460.0, 20_000, 99);
        assert_eq!(
            simulate_parity_trace(&c).unwrap(),
            simulate_parity_trace(&c).unwrap()
        );
        let mut d = c.clone();
        d.seed = 100;
        assert_ne!(
            simulate_parity_trace(&c).unwrap().m,
            simulate_parity_trace(&d).unwrap().m
        );
    }

    #[test]
    fn batch_trace_zero_matches_single() {
        let c = SimConfig::typical(460.0, 5_000, 5);
        let batch = simulate_traces(&c, 3).unwrap();
        assert_eq!(batch[0], simulate_parity_trace(&c).unwrap());
        assert_ne!(batch[1].m, batch[2].m);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = SimConfig::typical(460.0, 10, 0);
        c.readout_error = 1.0;
        assert!(simulate_parity_trace(&c).is_err());
        let mut c = SimConfig::typical(460.0, 10, 0);
        c.dt = 0.0;
        assert!(simulate_parity_trace(&c).is_err());
        let mut c = SimConfig::typical(460.0, 10, 0);
        c.dt = f64::MAX;
        assert!(simulate_parity_trace(&c).is_err());
    }

    #[test]
    fn heralded_ideal_reports_parity_directly() {
        let mut c = SimConfig::ideal(1000.0, 20_000, 4);
        c.mode = MeasurementMode::Heralded;
        let t = simulate_parity_trace(&c).unwrap();
        let p = t.true_parity.as_ref().unwrap();
        for (m, p) in t.m.iter().zip(p) {
            assert_eq!(*m, 1 - *p);
        }
    }

    #[test]
    fn wait_time_arithmetic_and_floor() {
        assert!((parity_wait_time(0.5).unwrap() - 1.0e-6).abs() < 1e-18);
        assert!((parity_wait_time(5.0).unwrap() - 100e-9).abs() < 1e-18);
        assert!(matches!(
            parity_wait_time(0.4),
            Err(Error::UnusableOffsetCharge { .. })
        ));
        assert!(parity_wait_time_with_floor(0.4, 0.1).is_ok());
    }

    #[test]
    fn degenerate_ramsey_is_single_cosine() {
        let p = RamseyParams::new(3.0, 3.0, 10.0);
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let s = synthesize_ramsey_signal(&p, &times).unwrap();
        for (t, v) in times.iter().zip(&s.signal) {
            let want = (-t / 10.0).exp() * (2.0 * PI * 3.0 * t).cos();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn ramsey_beat_node() {
        // Δf = 2 MHz → the envelope cos(π Δf t) vanishes at t = 0.25 µs.
        let p = RamseyParams::new(2.5, 4.5, 10.0);
        let s = synthesize_ramsey_signal(&p, &[0.0, 0.25]).unwrap();
        assert!((s.signal[0] - 1.0).abs() < 1e-12);
        assert!(s.signal[1].abs() < 1e-12);
    }

    #[test]
    fn binary_roundtrip_with_odd_length() {
        let t = simulate_parity_trace(&SimConfig::typical(800.0, 1013, 8)).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(ParityTrace::read_binary(&buf[..]).unwrap(), t);
        assert!(ParityTrace::read_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(ParityTrace::read_binary(&bad[..]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let t = ParityTrace::from_states(vec![0, 1, 1, 0, 1], 1e-6).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ParityTrace::read_csv(&buf[..], 1e-6).unwrap();
        assert_eq!(back.m, t.m);
        assert!(ParityTrace::read_csv("shot_index,m\n0,2\n".as_bytes(), 1e-6).is_err());
    }

    #[test]
    fn config_json_keeps_infinite_times() {
        let c = SimConfig::ideal(10.0, 10, 0);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"t1\":null"));
        let back: SimConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
