use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use facmon_core::auth::password::PasswordConfig;

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 5 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("data directory {path} is not writable: {source}")]
    DataDirUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Domain(#[from] facmon_core::Error),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::Config(_) => "CONFIG_ERROR",
            ServeError::Bind { .. } => "BIND_FAILURE",
            ServeError::DataDirUnwritable { .. } => "DATA_DIR_UNWRITABLE",
            ServeError::Domain(e) => e.code(),
            ServeError::Io(_) => "SERVER_ERROR",
        }
    }
}

/// Service configuration: file first, then environment, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind_addr: String,
    pub data_dir: PathBuf,
    pub session_ttl_hours: u32,
    pub max_upload_bytes: usize,
    /// Storage backend name: `file` or `memory`.
    pub backend: String,
    pub passwords: PasswordConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind_addr: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            session_ttl_hours: 8,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            backend: "file".into(),
            passwords: PasswordConfig::default(),
        }
    }
}

pub const ENV_VARS: [&str; 4] = ["BIND_ADDR", "DATA_DIR", "SESSION_TTL_HOURS", "MAX_UPLOAD_BYTES"];

impl Config {
    pub fn from_file(path: &Path) -> Result<Config, ServeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServeError::Config(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ServeError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `BIND_ADDR`, `DATA_DIR`, `SESSION_TTL_HOURS` and `MAX_UPLOAD_BYTES`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ServeError> {
        if let Some(v) = lookup("BIND_ADDR") {
            self.bind_addr = v;
        }
        if let Some(v) = lookup("DATA_DIR") {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup("SESSION_TTL_HOURS") {
            self.session_ttl_hours = parse_number("SESSION_TTL_HOURS", &v)?;
        }
        if let Some(v) = lookup("MAX_UPLOAD_BYTES") {
            self.max_upload_bytes = parse_number("MAX_UPLOAD_BYTES", &v)?;
        }
        Ok(())
    }

    /// Loads `path` (if any) and applies process environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Config, ServeError> {
        let mut config = match path {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<SocketAddr, ServeError> {
        if self.session_ttl_hours == 0 {
            return Err(ServeError::Config("session_ttl_hours must be at least 1".into()));
        }
        if self.max_upload_bytes == 0 {
            return Err(ServeError::Config("max_upload_bytes must be positive".into()));
        }
        self.bind_addr
            .parse()
            .map_err(|_| ServeError::Config(format!("bind_addr {:?} is not host:port", self.bind_addr)))
    }
}

fn parse_number<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ServeError> {
    value
        .trim()
        .parse()
        .map_err(|_| ServeError::Config(format!("{name}={value:?} is not a number")))
}
