use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use episir::{DataError, EstimationError, MetricError, OdeError};

/// Failure of a command, carrying its exit code and the category token
/// printed on stderr.
#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: io::Error },
    Usage(String),
    Config(String),
    Data(DataError),
    Estimation(EstimationError),
    Ode(OdeError),
    Metric(MetricError),
    /// Outputs were written but at least one fit did not meet its tolerance.
    NoConvergence(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(DataError::Io(_)) => 1,
            CliError::Data(_) => 2,
            CliError::Estimation(EstimationError::InsufficientData { .. }) => 2,
            CliError::NoConvergence(_) => 3,
            CliError::Ode(OdeError::NonFiniteState { .. })
            | CliError::Estimation(EstimationError::Integration(OdeError::NonFiniteState { .. })) => 4,
            CliError::Metric(MetricError::MismatchedData(_))
            | CliError::Estimation(EstimationError::Metric(MetricError::MismatchedData(_))) => 5,
            _ => 1,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => "FileNotFound",
            CliError::Io { .. } => "IoError",
            CliError::Usage(_) => "UsageError",
            CliError::Config(_) => "ConfigError",
            CliError::Data(e) => e.category(),
            CliError::Estimation(e) => e.category(),
            CliError::Ode(OdeError::NonFiniteState { .. }) => "NonFiniteState",
            CliError::Ode(_) => "IntegrationError",
            CliError::Metric(MetricError::MismatchedData(_)) => "MismatchedData",
            CliError::Metric(_) => "MetricError",
            CliError::NoConvergence(_) => "NoConvergence",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(m) | CliError::Config(m) | CliError::NoConvergence(m) => f.write_str(m),
            CliError::Data(e) => e.fmt(f),
            CliError::Estimation(e) => e.fmt(f),
            CliError::Ode(e) => e.fmt(f),
            CliError::Metric(e) => e.fmt(f),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e)
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        CliError::Estimation(e)
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        CliError::Ode(e)
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Metric(e)
    }
}
