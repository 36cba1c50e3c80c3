use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("charge-basis truncation did not converge (dim {dim}, change {change_khz:.3} kHz)")]
    TruncationNotConverged { dim: usize, change_khz: f64 },

    #[error("frequency difference {delta_f_mhz} MHz is below the usable floor of {floor_mhz} MHz")]
    UnusableOffsetCharge { delta_f_mhz: f64, floor_mhz: f64 },

    #[error("input too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("singular Jacobian at the optimum")]
    SingularJacobian,

    #[error("tones are not resolvable: separation {separation_hz:.3e} Hz < {min_hz:.3e} Hz")]
    DegenerateTones { separation_hz: f64, min_hz: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no steady state: trapping and recombination both vanish with g = {g}")]
    NoSteadyState { g: f64 },

    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("missing baseline configuration `{configuration}` for {material}")]
    MissingBaseline { material: String, configuration: String },

    #[error("unknown command `{0}`")]
    UnknownCommand(String),

    #[error("invalid config at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("malformed trace file: {0}")]
    TraceFormat(String),

    #[error("nothing to plot: {0}")]
    EmptyResults(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
