use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates::TemplateId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub template: TemplateId,
    pub context: BTreeMap<String, String>,
    /// Image references passed through to the reasoner untouched.
    #[serde(default)]
    pub images: Vec<String>,
}

impl Query {
    pub fn new<const N: usize>(template: TemplateId, pairs: [(&str, String); N]) -> Query {
        Query { template, context: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(), images: Vec::new() }
    }

    pub fn prompt(&self) -> Result<String, ReasonerError> {
        self.template.render(&self.context).map_err(ReasonerError::Template)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReasonerError {
    #[error("request to {endpoint} failed: {message}")]
    Transport { endpoint: String, message: String },
    #[error("cannot parse `{template}` reply: {message}")]
    Parse { template: String, message: String, reply: String },
    #[error("{0}")]
    Template(String),
    #[error("reasoner declined: {0}")]
    Declined(String),
    #[error("empty instruction")]
    EmptyInstruction,
    #[error("no candidates to choose from")]
    NoCandidates,
    #[error("`{got}` is not one of: {}", offered.join(", "))]
    NotOffered { offered: Vec<String>, got: String },
    #[error("plan mentions names missing from the scene: {}", .0.join(", "))]
    UnknownNames(Vec<String>),
    #[error("no predicate for condition `{0}`")]
    UnmappedCondition(String),
}

impl ReasonerError {
    pub fn parse(template: TemplateId, message: impl Into<String>, reply: &str) -> ReasonerError {
        ReasonerError::Parse { template: template.name().into(), message: message.into(), reply: reply.into() }
    }
}

/// Answers rendered prompts with text. Implementations must be safe to
/// call from several threads.
pub trait Reasoner: Sync {
    fn ask(&self, query: &Query) -> Result<String, ReasonerError>;
}
