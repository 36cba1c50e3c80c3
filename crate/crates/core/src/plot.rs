//! Static SVG figures: assigned-state traces, spectra with fits, rate versus
//! power and rate versus time.
//!
//! Plotting only reads its inputs; display smoothing goes through
//! [`smooth_for_display`] and never feeds back into analysis.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::{LorentzianFit, PowerLawFit};
use crate::sim::ParityTrace;
use crate::spectral::{parity_indicator, smooth_for_display, Smoothing, Spectrum};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, scale: Scale) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (scale == Scale::Linear || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        match scale {
            Scale::Log => {
                if hi <= lo {
                    lo /= 2.0;
                    hi *= 2.0;
                }
                Some(Self {
                    lo: 10f64.powf(lo.log10().floor()),
                    hi: 10f64.powf(hi.log10().ceil()),
                    scale,
                })
            }
            Scale::Linear => {
                let pad = if hi > lo {
                    0.05 * (hi - lo)
                } else {
                    lo.abs().max(1.0) * 0.5
                };
                Some(Self {
                    lo: lo - pad,
                    hi: hi + pad,
                    scale,
                })
            }
        }
    }

    /// Position in [0, 1].
    fn unit(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log => (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10()),
        }
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => {
                let a = self.lo.log10().round() as i32;
                let b = self.hi.log10().round() as i32;
                let stride = ((b - a) / 8).max(1);
                (a..=b).step_by(stride as usize).map(|e| 10f64.powi(e)).collect()
            }
            Scale::Linear => {
                let raw = (self.hi - self.lo) / 6.0;
                let mag = 10f64.powf(raw.log10().floor());
                let step = [1.0, 2.0, 5.0, 10.0]
                    .iter()
                    .map(|m| m * mag)
                    .find(|s| *s >= raw)
                    .unwrap_or(10.0 * mag);
                let first = (self.lo / step).ceil() as i64;
                let last = (self.hi / step).floor() as i64;
                (first..=last).map(|i| i as f64 * step).collect()
            }
        }
    }
}

fn tick_label(v: f64, scale: Scale) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let e = v.abs().log10();
    if scale == Scale::Log || !(-2.0..5.0).contains(&e) {
        format!("{v:.0e}")
    } else if v.fract().abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

/// One SVG panel under construction.
struct Canvas {
    x: Axis,
    y: Axis,
    body: String,
    legend: Vec<(String, String, bool)>,
}

impl Canvas {
    fn new(x: Axis, y: Axis) -> Self {
        Self {
            x,
            y,
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN_LEFT + self.x.unit(v) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - self.y.unit(v) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn visible(&self, x: f64, y: f64) -> bool {
        let ok = |a: &Axis, v: f64| v.is_finite() && (a.scale == Scale::Linear || v > 0.0);
        ok(&self.x, x) && ok(&self.y, y)
    }

    fn polyline(&mut self, xs: &[f64], ys: &[f64], color: &str, dashed: bool, width: f64) {
        let mut pts = String::new();
        for (&x, &y) in xs.iter().zip(ys) {
            if self.visible(x, y) {
                let _ = write!(pts, "{:.2},{:.2} ", self.px(x), self.py(y).clamp(0.0, HEIGHT));
            }
        }
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash} points="{}"/>"#,
            pts.trim_end()
        );
    }

    fn markers(&mut self, xs: &[f64], ys: &[f64], errs: Option<&[f64]>, color: &str) {
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            if !self.visible(x, y) {
                continue;
            }
            let (cx, cy) = (self.px(x), self.py(y));
            if let Some(e) = errs.and_then(|e| e.get(i)).filter(|e| **e > 0.0) {
                let lo = if self.y.scale == Scale::Log {
                    (y - e).max(y * 1e-3)
                } else {
                    y - e
                };
                let _ = writeln!(
                    self.body,
                    r#"<line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    self.py(lo),
                    self.py(y + e)
                );
            }
            let _ = writeln!(
                self.body,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3.5" fill="{color}"/>"#
            );
        }
    }

    fn band(&mut self, x0: f64, x1: f64, color: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let _ = writeln!(
            self.body,
            r#"<rect x="{a:.2}" y="{MARGIN_TOP}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.15"/>"#,
            (b - a).max(0.5),
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );
    }

    fn finish(self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<defs><clipPath id="plot"><rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{}" height="{}"/></clipPath></defs>"#,
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );
        let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
        let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
        for t in self.x.ticks() {
            let x = self.px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" x2="{x:.2}" y1="{top}" y2="{bottom}" stroke="#e5e5e5"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                bottom + 16.0,
                tick_label(t, self.x.scale)
            );
        }
        for t in self.y.ticks() {
            let y = self.py(t);
            let _ = writeln!(
                s,
                r##"<line x1="{left}" x2="{right}" y1="{y:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 6.0,
                y + 4.0,
                tick_label(t, self.y.scale)
            );
        }
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        s.push_str(&self.body);
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (left + right) / 2.0,
            HEIGHT - 16.0,
            escape(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (top + bottom) / 2.0,
            escape(ylabel)
        );
        if !self.legend.is_empty() {
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="176" height="{:.2}" fill="white" fill-opacity="0.85" stroke="#cccccc"/>"##,
                right - 178.0,
                top + 4.0,
                16.0 * self.legend.len() as f64 + 8.0
            );
        }
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = top + 16.0 + 16.0 * i as f64;
            let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" x2="{:.2}" y1="{y:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
                right - 170.0,
                right - 146.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                right - 140.0,
                y + 4.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Four significant digits without exponent noise for moderate values.
fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    if x.abs() >= 1e7 {
        format!("{x:.3e}")
    } else {
        format!("{x:.digits$}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Smoothed parity indicator against time, with odd-parity stretches shaded
/// when the hidden parity is known.
pub fn trace_svg(trace: &ParityTrace, smoothing: Smoothing, max_points: usize) -> Result<String> {
    if trace.len() < 2 {
        return Err(Error::EmptyResults("trace has fewer than two shots".into()));
    }
    let d = parity_indicator(trace)?;
    let smooth = smooth_for_display(&d, smoothing)?;
    let stride = (smooth.len() / max_points.max(2)).max(1);
    let t_ms: Vec<f64> = (0..smooth.len())
        .step_by(stride)
        .map(|i| (i + 1) as f64 * trace.dt * 1e3)
        .collect();
    let ys: Vec<f64> = (0..smooth.len()).step_by(stride).map(|i| smooth[i]).collect();

    let x = Axis {
        lo: 0.0,
        hi: trace.len() as f64 * trace.dt * 1e3,
        scale: Scale::Linear,
    };
    let y = Axis {
        lo: -0.05,
        hi: 1.05,
        scale: Scale::Linear,
    };
    let mut c = Canvas::new(x, y);
    if let Some(parity) = &trace.true_parity {
        let mut start = None;
        for (i, &p) in parity.iter().enumerate() {
            match (p, start) {
                (1, None) => start = Some(i),
                (0, Some(s)) => {
                    c.band(s as f64 * trace.dt * 1e3, i as f64 * trace.dt * 1e3, "#d62728");
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            c.band(
                s as f64 * trace.dt * 1e3,
                parity.len() as f64 * trace.dt * 1e3,
                "#d62728",
            );
        }
        c.legend.push(("odd parity".into(), "#d62728".into(), false));
    }
    c.polyline(&t_ms, &ys, PALETTE[0], false, 1.0);
    c.legend.push(("smoothed d".into(), PALETTE[0].into(), false));
    Ok(c.finish("Parity indicator", "time (ms)", "toggle indicator d"))
}

/// Log–log spectrum (log-binned for display) with the fitted model and its
/// components.
pub fn spectrum_svg(spectrum: &Spectrum, fit: Option<&LorentzianFit>) -> Result<String> {
    let binned = spectrum.log_binned(40);
    if binned.is_empty() {
        return Err(Error::EmptyResults("spectrum has no positive bins".into()));
    }
    let fs: Vec<f64> = binned.iter().map(|b| b.0).collect();
    let ps: Vec<f64> = binned.iter().map(|b| b.1).collect();
    let mut yvals = ps.clone();
    if let Some(fit) = fit {
        yvals.extend(fs.iter().map(|&f| fit.evaluate(f)));
    }
    let x = Axis::fit(fs.iter().copied(), Scale::Log)
        .ok_or_else(|| Error::EmptyResults("no frequencies".into()))?;
    let mut y = Axis::fit(yvals.into_iter(), Scale::Log)
        .ok_or_else(|| Error::EmptyResults("no PSD values".into()))?;
    y.lo = y.lo.max(y.hi * 1e-9);
    let mut c = Canvas::new(x, y);
    c.polyline(&fs, &ps, "#7f7f7f", false, 1.0);
    c.legend.push((
        format!("PSD ({} averaged)", spectrum.n_averaged),
        "#7f7f7f".into(),
        false,
    ));
    if let Some(fit) = fit {
        let grid: Vec<f64> = (0..=400)
            .map(|i| x.lo * (x.hi / x.lo).powf(i as f64 / 400.0))
            .filter(|f| *f <= spectrum.max_freq())
            .collect();
        let total: Vec<f64> = grid.iter().map(|&f| fit.evaluate(f)).collect();
        for (i, comp) in fit.components.iter().enumerate() {
            let single = LorentzianFit {
                components: vec![*comp],
                noise_floor: 0.0,
                ..fit.clone()
            };
            let ys: Vec<f64> = grid.iter().map(|&f| single.evaluate(f)).collect();
            let color = PALETTE[(i + 1) % PALETTE.len()];
            c.polyline(&grid, &ys, color, true, 1.2);
            c.legend
                .push((format!("Γ{} = {} Hz", i, sig4(comp.corner)), color.into(), true));
        }
        c.polyline(&grid, &total, PALETTE[0], false, 2.0);
        c.legend.push(("Lorentzian fit".into(), PALETTE[0].into(), false));
    }
    Ok(c.finish("Parity-switching spectrum", "frequency (Hz)", "PSD (1/Hz)"))
}

/// One material's rates with an optional fitted curve.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub rates: Vec<f64>,
    pub errors: Option<Vec<f64>>,
    pub fit: Option<PowerLawFit>,
}

fn series_panel(
    series: &[Series],
    xscale: Scale,
    title: &str,
    xlabel: &str,
    xfactor: f64,
    fit_label: fn(&PowerLawFit) -> String,
) -> Result<String> {
    if series.iter().all(|s| s.x.is_empty()) {
        return Err(Error::EmptyResults("no data points".into()));
    }
    let xs = series.iter().flat_map(|s| s.x.iter().map(|v| v * xfactor));
    let x = Axis::fit(xs, xscale).ok_or_else(|| Error::EmptyResults("no plottable x values".into()))?;
    let ys = series.iter().flat_map(|s| s.rates.iter().copied());
    let y = Axis::fit(ys, Scale::Log).ok_or_else(|| Error::EmptyResults("no positive rates".into()))?;
    let mut c = Canvas::new(x, y);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let xs: Vec<f64> = s.x.iter().map(|v| v * xfactor).collect();
        c.markers(&xs, &s.rates, s.errors.as_deref(), color);
        c.legend.push((s.label.clone(), color.into(), false));
        if let Some(f) = &s.fit {
            let lo = if xscale == Scale::Log { x.lo } else { x.lo.max(0.0) };
            let grid: Vec<f64> = (0..=200)
                .map(|k| match xscale {
                    Scale::Log => lo * (x.hi / lo).powf(k as f64 / 200.0),
                    Scale::Linear => lo + (x.hi - lo) * k as f64 / 200.0,
                })
                .collect();
            let fitted: Vec<f64> = grid.iter().map(|&g| f.evaluate(g / xfactor)).collect();
            c.polyline(&grid, &fitted, color, true, 1.5);
            c.legend.push((fit_label(f), color.into(), true));
        }
    }
    Ok(c.finish(title, xlabel, "tunneling rate Γ0 (Hz)"))
}

/// Tunneling rate against radiator power (W, plotted in nW).
pub fn power_sweep_svg(series: &[Series]) -> Result<String> {
    series_panel(
        series,
        Scale::Linear,
        "Rate versus radiator power",
        "radiator power (nW)",
        1e9,
        |f| format!("fit, n = {:.2}", f.exponent),
    )
}

/// Tunneling rate against days since cooldown, log–log.
pub fn decay_svg(series: &[Series]) -> Result<String> {
    series_panel(
        series,
        Scale::Log,
        "Rate versus time since cooldown",
        "time since cooldown (days)",
        1.0,
        |f| format!("fit, p = {:.2}", f.decay_exponent()),
    )
}

/// Writes `svg` to `path`, creating parent directories.
pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
