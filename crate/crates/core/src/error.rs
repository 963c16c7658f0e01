use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("node index {index} out of range for a graph with {n_nodes} nodes")]
    NodeOutOfRange { index: usize, n_nodes: usize },

    #[error("node {0} is isolated (degree 0)")]
    IsolatedNode(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("|rho| = {rho} violates stationarity bound |rho| <= {bound}")]
    NonStationary { rho: f64, bound: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("iteration failed to converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("density is zero at query point: {0}")]
    ZeroDensity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error at {location}: {message}")]
    Data { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::SelfLoop(_)
            | Error::NodeOutOfRange { .. }
            | Error::IsolatedNode(_)
            | Error::Dimension(_)
            | Error::Data { .. }
            | Error::Io { .. } => 2,
            Error::NonStationary { .. }
            | Error::Singular(_)
            | Error::NonConvergence { .. }
            | Error::ZeroDensity(_) => 3,
        }
    }
}
