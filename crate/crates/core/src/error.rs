use thiserror::Error;

use crate::hex::HexCoord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown node {0}")]
    UnknownNode(HexCoord),
    #[error("no walkable path from {from} to {to}")]
    Unreachable { from: HexCoord, to: HexCoord },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("export failed: {0}")]
    Export(String),
    #[error("startup failed: {0}")]
    Startup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used on the wire and across the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownNode(_) => "unknown_node",
            Error::Unreachable { .. } => "unreachable",
            Error::Capacity(_) => "capacity",
            Error::InvalidCommand(_) => "invalid_command",
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidScript(_) => "invalid_script",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Export(_) => "export",
            Error::Startup(_) => "startup",
            Error::Io(_) => "io",
            Error::Json(_) => "parse",
        }
    }
}
