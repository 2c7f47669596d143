use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("model order too high: {poles} poles need at least {needed} Hankel rows, window gives {rows}")]
    OrderTooHigh { poles: usize, needed: usize, rows: usize },

    #[error("pole at the origin has no defined frequency")]
    ZeroPole,

    #[error("Vandermonde factor is rank deficient (repeated or coincident poles)")]
    RankDeficient,

    #[error("empty singular value list")]
    EmptySpectrum,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("network error: {0}")]
    Network(String),

    #[error("singular nodal admittance matrix (floating subnetwork?)")]
    SingularMatrix,

    #[error("buffer lookahead: requested t = {requested:e} s but newest sample is at {newest:e} s")]
    Lookahead { requested: f64, newest: f64 },

    #[error("insufficient history: need data back to t = {needed:e} s, oldest retained sample is {oldest:e} s")]
    InsufficientHistory { needed: f64, oldest: f64 },

    #[error("schedule violation: {0}")]
    Schedule(String),

    #[error("{0}")]
    Parse(#[from] ParseError),

    #[error("signal {0:?} not found")]
    MissingSignal(String),

    #[error("no overlap between reference and test series")]
    EmptyOverlap,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Scenario-file diagnostic. `line` is 1-based; 0 means the problem is not
/// tied to a single line (e.g. a missing section).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {field}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub field: String,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("missing or unsupported format header")]
    BadHeader,
    #[error("unknown section")]
    UnknownSection,
    #[error("unknown key")]
    UnknownKey,
    #[error("duplicate definition")]
    Duplicate,
    #[error("malformed line")]
    Malformed,
    #[error("invalid value {0:?}")]
    InvalidValue(String),
    #[error("parameter must be positive, got {0}")]
    NonPositive(f64),
    #[error("missing required key")]
    MissingKey,
    #[error("node {node} does not exist (area has {node_count} nodes)")]
    DanglingNode { node: usize, node_count: usize },
    #[error("unknown reference {0:?}")]
    DanglingReference(String),
    #[error("dt_macro {macro_dt:e} is not an integer multiple of dt_micro {micro_dt:e}")]
    NonIntegerRatio { micro_dt: f64, macro_dt: f64 },
    #[error("link travel time {tau:e} s is shorter than the exchange interval {dt_macro:e} s")]
    TauTooShort { tau: f64, dt_macro: f64 },
}

impl ParseError {
    pub fn new(line: usize, field: impl Into<String>, kind: ParseErrorKind) -> Self {
        Self { line, field: field.into(), kind }
    }
}
