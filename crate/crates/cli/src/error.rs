use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: row {row}: {msg}")]
    Parse { path: String, row: u64, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric regime error: {0}")]
    Regime(String),
    #[error("no threshold source: give a calibration file, or both a crosstalk and a photon number")]
    MissingThresholdSource,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 config or validation, 3 data parsing,
    /// 4 numeric regime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingThresholdSource | CliError::Io { .. } => 2,
            CliError::Parse { .. } | CliError::Data(_) => 3,
            CliError::Regime(_) => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<spade_core::Error> for CliError {
    fn from(e: spade_core::Error) -> Self {
        use spade_core::Error as E;
        match e {
            E::Domain(_) | E::IndexOutOfRange { .. } => CliError::Config(e.to_string()),
            E::EmptyBatch => CliError::Data(e.to_string()),
            E::OutOfRegime(_) | E::OutOfExpansionRange { .. } | E::InfiniteDivergence { .. } | E::NoRoot(_) => {
                CliError::Regime(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
