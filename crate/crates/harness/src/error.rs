use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The configuration file could not be read or failed schema validation.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed while running the named check.
    #[error("numeric error in {check}: {source}")]
    Numeric {
        check: String,
        #[source]
        source: markcfg_core::Error,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numeric { .. } | HarnessError::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Attaches the failing check's name to core errors; invalid inputs stay configuration errors.
pub(crate) trait Context<T> {
    fn check(self, name: &str) -> Result<T>;
}

impl<T> Context<T> for markcfg_core::Result<T> {
    fn check(self, name: &str) -> Result<T> {
        self.map_err(|e| match e {
            markcfg_core::Error::Config(msg) | markcfg_core::Error::Usage(msg) => HarnessError::Config(format!("{name}: {msg}")),
            source => HarnessError::Numeric { check: name.to_string(), source },
        })
    }
}
