//! Settings resolved from flags, environment, a TOML file and defaults, in
//! that order of precedence. Flag and environment values arrive together
//! from the argument parser.

use std::path::Path;

use eac_reasoning::{HttpConfig, HttpReasoner, MockReasoner, Reasoner, DEFAULT_RETRY_LIMIT};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VAR: &str = "EAC_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReasonerKind {
    #[default]
    Mock,
    Http,
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub reasoner: FileReasoner,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileReasoner {
    pub kind: Option<ReasonerKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub token_var: Option<String>,
    pub timeout_secs: Option<f64>,
    pub retries: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retry_limit: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(&path.display().to_string(), e))?;
        FileConfig::parse(&text).map_err(|e| CliError::input(&path.display().to_string(), e))
    }
}

/// Command-line and environment values; `None` defers to the file.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct ReasonerArgs {
    /// Reasoner backend.
    #[arg(long, env = "EAC_REASONER", value_enum)]
    pub reasoner: Option<ReasonerKind>,
    /// Base URL of the chat-completion endpoint.
    #[arg(long, env = eac_reasoning::http::URL_VAR)]
    pub endpoint: Option<String>,
    #[arg(long, env = "EAC_REASONER_MODEL")]
    pub model: Option<String>,
    /// Request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Retries of a sub-task whose condition is not met.
    #[arg(long)]
    pub retry_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerSettings {
    pub kind: ReasonerKind,
    /// Only meaningful for the HTTP backend.
    pub http: HttpConfig,
    pub retry_limit: usize,
}

impl ReasonerSettings {
    pub fn resolve(args: &ReasonerArgs, file: &FileConfig) -> ReasonerSettings {
        let f = &file.reasoner;
        let d = HttpConfig::default();
        ReasonerSettings {
            kind: args.reasoner.or(f.kind).unwrap_or_default(),
            http: HttpConfig {
                endpoint: args.endpoint.clone().or(f.endpoint.clone()).unwrap_or(d.endpoint),
                model: args.model.clone().or(f.model.clone()).unwrap_or(d.model),
                token_var: f.token_var.clone().unwrap_or(d.token_var),
                timeout_secs: args.timeout.or(f.timeout_secs).unwrap_or(d.timeout_secs),
                retries: f.retries.unwrap_or(d.retries),
                backoff_ms: d.backoff_ms,
                max_in_flight: f.max_in_flight.unwrap_or(d.max_in_flight),
            },
            retry_limit: args.retry_limit.or(f.retry_limit).unwrap_or(DEFAULT_RETRY_LIMIT),
        }
    }

    pub fn build(&self) -> Box<dyn Reasoner> {
        match self.kind {
            ReasonerKind::Mock => Box::new(MockReasoner),
            ReasonerKind::Http => Box::new(HttpReasoner::new(self.http.clone())),
        }
    }
}

/// Loads the file named by `path` if any; no file means all defaults.
pub fn load_file(path: Option<&Path>) -> Result<FileConfig, CliError> {
    path.map(FileConfig::load).transpose().map(Option::unwrap_or_default)
}
