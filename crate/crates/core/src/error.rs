use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rates: {0}")]
    InvalidRates(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no unique steady state: every bath coupling is zero")]
    NoUniqueSteadyState,

    #[error("qubit cannot decay: gamma_q + sum(gamma_qt) = 0")]
    QubitCannotDecay,

    /// A propagated population left [0, 1] by more than the clamping tolerance.
    #[error("internal consistency: population {value} outside [0, 1]")]
    PopulationOutOfRange { value: f64 },

    #[error("unsupported scenario {0}: only (0) and (1,0) have closed-form initial conditions, use the simulator")]
    UnsupportedScenario(String),

    #[error("pathological rates: more than {cap} events between two strobes")]
    EventCapExceeded { cap: u64 },

    #[error("pattern {pattern} never matched ({matches} matches)")]
    NoMatches { pattern: String, matches: u64 },

    #[error("no decay events in trace")]
    NoDecayEvents,

    #[error("need at least {needed} down jumps, found {found}")]
    TooFewJumps { needed: usize, found: usize },

    #[error("insufficient readout separation: center distance {distance} < pooled sigma {sigma}")]
    InsufficientSeparation { distance: f64, sigma: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("duplicate sweep cell at f_q = {f_q} Hz, field = {field} V/m")]
    DuplicateCell { f_q: f64, field: f64 },

    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRates(_) => "invalid_rates",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NoUniqueSteadyState => "no_unique_steady_state",
            Error::QubitCannotDecay => "qubit_cannot_decay",
            Error::PopulationOutOfRange { .. } => "population_out_of_range",
            Error::UnsupportedScenario(_) => "unsupported_scenario",
            Error::EventCapExceeded { .. } => "event_cap_exceeded",
            Error::NoMatches { .. } => "no_matches",
            Error::NoDecayEvents => "no_decay_events",
            Error::TooFewJumps { .. } => "too_few_jumps",
            Error::InsufficientSeparation { .. } => "insufficient_separation",
            Error::DegenerateData(_) => "degenerate_data",
            Error::DuplicateCell { .. } => "duplicate_cell",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}
