use std::fmt;

use crate::config::ExperimentName;

#[derive(Debug)]
pub enum LabError {
    /// Invalid configuration; one message per offending field.
    Config(Vec<String>),
    /// A core routine failed inside an experiment.
    Module { experiment: Option<ExperimentName>, source: wavepacket_core::Error },
    Io(std::io::Error),
}

impl LabError {
    pub fn field(path: &str, msg: impl fmt::Display) -> Self {
        LabError::Config(vec![format!("{path}: {msg}")])
    }

    pub(crate) fn in_experiment(self, name: ExperimentName) -> Self {
        match self {
            LabError::Module { experiment: None, source } => LabError::Module { experiment: Some(name), source },
            other => other,
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Module { source, .. } => {
                if source.is_numerical() || matches!(source, wavepacket_core::Error::Range { .. }) {
                    3
                } else {
                    2
                }
            }
            LabError::Io(_) => 3,
        }
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Config(fields) => {
                writeln!(f, "invalid configuration:")?;
                for m in fields {
                    writeln!(f, "  {m}")?;
                }
                Ok(())
            }
            LabError::Module { experiment: Some(e), source } => write!(f, "experiment {e}: {source}"),
            LabError::Module { experiment: None, source } => write!(f, "{source}"),
            LabError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for LabError {}

impl From<wavepacket_core::Error> for LabError {
    fn from(source: wavepacket_core::Error) -> Self {
        LabError::Module { experiment: None, source }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e)
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.into())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.into())
    }
}
