use std::fmt;
use std::io;

use serde::Serialize;
use transport_core::error::ErrorClass;
use transport_core::Error as CoreError;

/// Error reported by the command line front end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AppError {
    pub code: String,
    pub module: String,
    pub message: String,
    #[serde(skip)]
    pub class: ErrorClass,
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn new(code: &str, module: &str, class: ErrorClass, message: impl Into<String>) -> Self {
        AppError { code: code.into(), module: module.into(), message: message.into(), class }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("CONFIG", "cli", ErrorClass::Config, message)
    }

    pub fn io(path: &std::path::Path, err: io::Error) -> Self {
        Self::new("IO", "cli", ErrorClass::Data, format!("{}: {err}", path.display()))
    }

    /// Process exit code: 2 configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }

    pub fn context(mut self, prefix: impl fmt::Display) -> Self {
        self.message = format!("{prefix}: {}", self.message);
        self
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        AppError { code: e.code().into(), module: e.module().into(), message: e.to_string(), class: e.class() }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.module, self.message)
    }
}

impl std::error::Error for AppError {}
