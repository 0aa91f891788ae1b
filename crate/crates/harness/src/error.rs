//! Harness-wide error type, mapped onto process exit codes:
//! 0 success, 2 configuration, 3 data, 4 numeric fault, 5 I/O.

use thiserror::Error;

use e2e_tcn::checkpoint::CheckpointError;
use e2e_tcn::dataset::DataError;
use e2e_tcn::hybrid::HybridError;
use e2e_tcn::physics::{PhysicsError, SysIdError};
use e2e_tcn::tcn::TcnError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric fault: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Numeric(_) => 4,
            HarnessError::Io(_) => 5,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<DataError> for HarnessError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(io) => HarnessError::Io(io.to_string()),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<TcnError> for HarnessError {
    fn from(e: TcnError) -> Self {
        match e {
            TcnError::NonFinite { .. } => HarnessError::Numeric(e.to_string()),
            TcnError::Config(_) => HarnessError::Config(e.to_string()),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<PhysicsError> for HarnessError {
    fn from(e: PhysicsError) -> Self {
        match e {
            PhysicsError::InvalidParams(_) => HarnessError::Config(e.to_string()),
            PhysicsError::GimbalLock { .. } => HarnessError::Numeric(e.to_string()),
        }
    }
}

impl From<HybridError> for HarnessError {
    fn from(e: HybridError) -> Self {
        match e {
            HybridError::Physics(p) => p.into(),
            HybridError::Tcn(t) => t.into(),
            HybridError::Invalid(msg) => HarnessError::Config(msg),
        }
    }
}

impl From<SysIdError> for HarnessError {
    fn from(e: SysIdError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<CheckpointError> for HarnessError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(io) => HarnessError::Io(io.to_string()),
            other => HarnessError::Data(other.to_string()),
        }
    }
}
