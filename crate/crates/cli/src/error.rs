use std::fmt;

use neurodyn_core::arm::ArmError;
use neurodyn_core::edm::EdmError;
use neurodyn_core::emg::EmgError;
use neurodyn_core::pca::PcaError;
use neurodyn_core::reward::RewardError;
use neurodyn_core::trial_data::TrialDataError;

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: a file could not be read or written.
    Io(String),
    /// Exit 2: bad input data, flags or config.
    Invalid(String),
}

impl CliError {
    pub fn io(msg: impl Into<String>) -> Self {
        Self::Io(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Invalid(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(m) | Self::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<TrialDataError> for CliError {
    fn from(e: TrialDataError) -> Self {
        if e.is_io() {
            Self::Io(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Invalid(e.to_string())
            }
        })*
    };
}

invalid_from!(EmgError, EdmError, PcaError, RewardError, ArmError);
