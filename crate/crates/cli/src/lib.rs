//! Driver library behind the `zdps` binary.

pub mod scenario;
pub mod session;

pub use scenario::Scenario;
pub use session::{RunOutput, Session, Settings};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    /// Bad scenario, program or flag. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// The engine or the recovery protocol gave up. Exit code 3.
    #[error("{0}")]
    Engine(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Engine(_) => 3,
        }
    }
}

impl From<zdps_dsl::DslError> for CliError {
    fn from(e: zdps_dsl::DslError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<zdps_core::EngineError> for CliError {
    fn from(e: zdps_core::EngineError) -> Self {
        CliError::Engine(e.to_string())
    }
}

impl From<zdps_core::recovery::RecoveryError> for CliError {
    fn from(e: zdps_core::recovery::RecoveryError) -> Self {
        CliError::Engine(e.to_string())
    }
}
