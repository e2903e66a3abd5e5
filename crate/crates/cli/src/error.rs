use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Core(#[from] lqg_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        }
    }

    /// Machine-readable error record. `config_key` is the fully qualified
    /// config key behind a parameter error, when one can be identified.
    pub fn record(&self, config_key: Option<&str>) -> Value {
        let key = match self {
            CliError::Config { key, .. } => Some(key.as_str()),
            CliError::Core(e) => e.parameter(),
            _ => None,
        };
        json!({
            "error": {
                "kind": self.kind(),
                "key": key,
                "config_key": config_key.or(key),
                "message": self.to_string(),
            }
        })
    }
}
