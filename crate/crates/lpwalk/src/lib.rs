//! Monte Carlo experiments, report formats and the `lpwalk` command line on
//! top of [`lpwalk_core`].

pub mod cli;
pub mod experiments;
pub mod formats;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lpwalk_core::Error),
    #[error("plan point n={n} d={d}: {source}")]
    AtPoint {
        n: usize,
        d: usize,
        #[source]
        source: lpwalk_core::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// 3 for resource refusals, 2 for anything wrong with the inputs, 1 for
    /// IO failures.
    pub fn exit_code(&self) -> i32 {
        use lpwalk_core::Error as E;
        match self {
            Error::Core(E::ResourceLimit { .. } | E::TooLarge { .. })
            | Error::AtPoint { source: E::ResourceLimit { .. } | E::TooLarge { .. }, .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
