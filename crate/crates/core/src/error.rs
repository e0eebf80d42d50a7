use thiserror::Error;

/// Errors raised while building games, running the engines, or parsing scenarios.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dangling-endpoint: edge `{edge}` references unknown vertex `{vertex}`")]
    DanglingEndpoint { edge: String, vertex: String },

    #[error("duplicate-id: {kind} `{id}` declared more than once")]
    DuplicateId { kind: &'static str, id: String },

    #[error("unknown-vertex: player {player} references unknown vertex `{vertex}`")]
    UnknownVertex { player: usize, vertex: String },

    #[error("no-feasible-path: no simple path from `{source_vertex}` to `{destination}`")]
    NoFeasiblePath { source_vertex: String, destination: String },

    #[error("loss-out-of-range: edge `{edge}` has loss {value} at load {load}, outside [0, 1]")]
    LossOutOfRange { edge: String, load: usize, value: f64 },

    #[error("loss-table-length: edge `{edge}` has {got} table entries, expected {expected}")]
    LossTableLength { edge: String, got: usize, expected: usize },

    #[error("empty-game: {0}")]
    EmptyGame(&'static str),

    #[error("missing-l-bound: graph has a cycle, declare `L_bound` in the scenario")]
    MissingLBound,

    #[error("l-bound-too-small: declared L_bound {declared} but a route of {found} edges exists")]
    LBoundTooSmall { declared: usize, found: usize },

    #[error("route-explosion: more than {cap} simple paths")]
    RouteExplosion { cap: usize },

    #[error("invalid-route: {0}")]
    InvalidRoute(String),

    #[error("invalid-parameter: {name} = {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("stream-exhausted: counter budget of {budget} entries used up")]
    StreamExhausted { budget: u64 },

    #[error("invalid-symbol: stream symbols must be -1, 0 or +1, got {0}")]
    InvalidSymbol(i8),

    #[error(
        "infeasible-alpha: alpha = {alpha} must exceed 4 * Delta_T(beta) = {threshold} (Delta_T(beta) = {delta_t})"
    )]
    InfeasibleAlpha { alpha: f64, delta_t: f64, threshold: f64 },

    #[error("parse error at line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid-player: index {index} out of range for {n} players")]
    InvalidPlayer { index: usize, n: usize },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
