use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("ingestion error: {0}")]
    Ingest(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("overlap violation: cell {cell} is covered by fragments '{first}' and '{second}'")]
    Overlap {
        cell: String,
        first: String,
        second: String,
    },
    #[error("coverage violation: satisfiable cell {cell} is not covered by any fragment")]
    Coverage { cell: String },
    #[error("tuple of {bytes} bytes does not fit a page of {usable} usable bytes")]
    OversizedTuple { bytes: f64, usable: u32 },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("stale: {0}")]
    Stale(String),
    #[error("{context}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
