use std::path::PathBuf;

/// Errors surfaced by every stage of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("invalid column spec: {0}")]
    InvalidSpec(String),
    #[error("base loop does not close: residual {residual:.3e} m")]
    Closure { residual: f64 },
    #[error("scene geometry: {0}")]
    Geometry(String),
    #[error("empty result: {0}")]
    EmptyResult(String),
    #[error("footprint {found_a:.4}x{found_b:.4} does not match brick {expected_a:.4}x{expected_b:.4} (half extents)")]
    ShapeMismatch {
        found_a: f64,
        found_b: f64,
        expected_a: f64,
        expected_b: f64,
    },
    #[error("unreachable target: {0}")]
    UnreachableTarget(String),
    #[error("assembly log is empty")]
    EmptyLog,
    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("brick {brick}: {source}")]
    Brick {
        brick: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag, used by the command line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::Domain(_) => "DomainError",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Closure { .. } => "ClosureError",
            Error::Geometry(_) => "GeometryError",
            Error::EmptyResult(_) => "EmptyResult",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::UnreachableTarget(_) => "UnreachableTarget",
            Error::EmptyLog => "EmptyLog",
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::Brick { source, .. } => source.kind(),
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
