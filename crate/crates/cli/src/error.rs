use flapmech::mech::TopologyErrors;
use flapmech::FailureTag;

/// Process exit codes. Stable across releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Ok = 0,
    /// I/O, parse or configuration error.
    Input = 1,
    Topology = 2,
    Singular = 3,
    Defect = 4,
    Assembly = 5,
    Aero = 6,
    EmptyArchive = 7,
    MissingEntry = 8,
}

impl From<FailureTag> for ExitCode {
    fn from(t: FailureTag) -> Self {
        match t {
            FailureTag::Singular => ExitCode::Singular,
            FailureTag::Defect => ExitCode::Defect,
            FailureTag::Assembly => ExitCode::Assembly,
            FailureTag::Aero => ExitCode::Aero,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Config(String),
    #[error("invalid topology: {0}")]
    Topology(TopologyErrors),
    #[error("stage failure: {0}")]
    Stage(FailureTag),
    #[error("archive is empty{0}")]
    EmptyArchive(String),
    #[error("archive has no entry {0}")]
    MissingEntry(u64),
}

impl CliError {
    pub fn code(&self) -> ExitCode {
        match self {
            CliError::Io(_) | CliError::Parse(_) | CliError::Config(_) => ExitCode::Input,
            CliError::Topology(_) => ExitCode::Topology,
            CliError::Stage(t) => (*t).into(),
            CliError::EmptyArchive(_) => ExitCode::EmptyArchive,
            CliError::MissingEntry(_) => ExitCode::MissingEntry,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
