//! Service configuration, read from a TOML file.
//!
//! ```toml
//! listen_addr = "127.0.0.1:8080"
//! data_dir = "/var/lib/sonotab"
//! spool_dir = "/var/spool/sonotab"
//! workers = 2
//! create_dirs = true
//! hedge_lexicon = "/etc/sonotab/hedges.txt"
//!
//! [backend]
//! kind = "llm_http"
//! base_url = "http://127.0.0.1:11434"
//! model = "local-model"
//! timeout_s = 120
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use sonotab_core::extraction::{HttpChatBackend, HttpChatConfig};
use sonotab_core::{ExtractorBackend, HedgeLexicon, RuleBasedBackend};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid configuration: {0}")]
pub struct ConfigInvalid(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    RuleBased,
    LlmHttp,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub model: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::RuleBased,
            base_url: None,
            model: None,
            timeout_s: default_timeout(),
        }
    }
}

fn default_timeout() -> u64 {
    120
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_workers() -> usize {
    2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_listen")]
    pub listen_addr: String,
    pub data_dir: PathBuf,
    pub spool_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "yes")]
    pub create_dirs: bool,
    #[serde(default)]
    pub backend: BackendConfig,
    pub hedge_lexicon: Option<PathBuf>,
    /// Additional schema files registered next to the built-in default.
    #[serde(default)]
    pub schemas: Vec<PathBuf>,
}

impl Config {
    /// Defaults for everything except the two directories.
    pub fn new(data_dir: impl Into<PathBuf>, spool_dir: impl Into<PathBuf>) -> Self {
        Config {
            listen_addr: default_listen(),
            data_dir: data_dir.into(),
            spool_dir: spool_dir.into(),
            workers: default_workers(),
            create_dirs: true,
            backend: BackendConfig::default(),
            hedge_lexicon: None,
            schemas: Vec::new(),
        }
    }

    pub fn from_toml(source: &str) -> Result<Self, ConfigInvalid> {
        toml::from_str(source).map_err(|e| ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigInvalid> {
        let source =
            std::fs::read_to_string(path).map_err(|e| ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&source)
    }

    /// Checks everything that can be checked without binding the socket, and
    /// creates the directories when allowed.
    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        if self.workers == 0 {
            return Err(ConfigInvalid("workers must be at least 1".into()));
        }
        if self.listen_addr.parse::<std::net::SocketAddr>().is_err() {
            return Err(ConfigInvalid(format!("listen_addr `{}` is not a socket address", self.listen_addr)));
        }
        for (key, dir) in [("data_dir", &self.data_dir), ("spool_dir", &self.spool_dir)] {
            if dir.is_dir() {
                continue;
            }
            if !self.create_dirs {
                return Err(ConfigInvalid(format!("{key} {} does not exist", dir.display())));
            }
            std::fs::create_dir_all(dir)
                .map_err(|e| ConfigInvalid(format!("cannot create {key} {}: {e}", dir.display())))?;
        }
        if self.backend.kind == BackendKind::LlmHttp {
            if self.backend.base_url.as_deref().is_none_or(str::is_empty) {
                return Err(ConfigInvalid("backend.base_url is required for llm_http".into()));
            }
            if self.backend.model.as_deref().is_none_or(str::is_empty) {
                return Err(ConfigInvalid("backend.model is required for llm_http".into()));
            }
        }
        if self.backend.timeout_s == 0 {
            return Err(ConfigInvalid("backend.timeout_s must be positive".into()));
        }
        Ok(())
    }

    pub fn build_backend(&self) -> Result<Arc<dyn ExtractorBackend>, ConfigInvalid> {
        Ok(match self.backend.kind {
            BackendKind::RuleBased => Arc::new(RuleBasedBackend),
            BackendKind::LlmHttp => {
                let mut http = HttpChatConfig::new(
                    self.backend.base_url.clone().unwrap_or_default(),
                    self.backend.model.clone().unwrap_or_default(),
                );
                http.timeout = Duration::from_secs(self.backend.timeout_s);
                Arc::new(HttpChatBackend::new(http).map_err(|e| ConfigInvalid(format!("backend: {e}")))?)
            }
        })
    }

    pub fn load_hedges(&self) -> Result<HedgeLexicon, ConfigInvalid> {
        match &self.hedge_lexicon {
            None => Ok(HedgeLexicon::default()),
            Some(p) => HedgeLexicon::load(p)
                .map_err(|e| ConfigInvalid(format!("cannot read hedge_lexicon {}: {e}", p.display()))),
        }
    }
}
