//! TOML configuration. Every key is optional; command-line flags win.
//!
//! ```toml
//! store = "./propmatch-store"
//! embeddings = "vectors/glove.300d.txt"
//!
//! [parser]
//! mode = "command"            # none | command | http
//! target = "my-parser --conllu"
//!
//! [defaults]
//! k = 250
//! n = 25
//! filter = "averaging"
//! rerank = "none"
//!
//! [server]
//! bind = "127.0.0.1:8080"
//! strict = false
//! ```

use std::path::{Path, PathBuf};

use propmatch_core::filter::FilterKind;
use propmatch_core::pipeline::RerankerKind;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::parser::ParserHook;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store: Option<PathBuf>,
    /// Word-vector file used when no vectors are registered in the store.
    pub embeddings: Option<PathBuf>,
    pub parser: ParserHook,
    pub defaults: Defaults,
    pub server: ServerConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub k: usize,
    pub n: usize,
    pub filter: FilterKind,
    pub rerank: RerankerKind,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            k: 250,
            n: 25,
            filter: FilterKind::Averaging,
            rerank: RerankerKind::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Refuse reranked matches when the query or a candidate has no parse.
    pub strict: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
            strict: false,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ServiceError::BadRequest(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.store, &mut cfg.embeddings].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
