use std::fmt;

/// Errors surfaced by parsing, ingestion, statistics lookup, and solving.
#[derive(Debug)]
pub enum Error {
    /// Query or predicate text failed to parse; `pos` is a byte offset.
    Parse { pos: usize, msg: String },
    /// Malformed input: CSV shape, config contents, catalog schema.
    Input(String),
    /// A statistic required by a bound is not in the catalog.
    MissingStat(String),
    /// The available statistics cannot bound the query.
    Unbounded(String),
    /// LP solver failed to converge within its iteration budget.
    Numeric(String),
    /// Operation not applicable to this query shape.
    Unsupported(String),
    /// Join evaluation exceeded the intermediate-size cap.
    CapExceeded { cap: usize },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { pos, msg } => write!(f, "parse error at byte {pos}: {msg}"),
            Error::Input(msg) => write!(f, "invalid input: {msg}"),
            Error::MissingStat(msg) => write!(f, "missing statistic: {msg}"),
            Error::Unbounded(msg) => write!(f, "statistics do not bound the query: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::CapExceeded { cap } => {
                write!(f, "intermediate join size exceeded the cap of {cap} tuples")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Input(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(format!("json: {e}"))
    }
}
