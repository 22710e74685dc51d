//! Scene parsing, task decomposition and concept/strategy selection on top of
//! a pluggable reasoner, plus the execute-and-verify loop that drives the
//! simulator.

pub mod agent;
pub mod graph;
pub mod http;
pub mod mock;
pub mod ops;
pub mod plan;
pub mod reasoner;
pub mod reply;
pub mod templates;

pub use agent::{run_loop, run_task, Agent, ReasonedPipeline, SimAgent, TaskRecord, DEFAULT_RETRY_LIMIT};
pub use graph::{Edge, Node, Observation, ObservedObject, ObservedPart, Relation, SceneGraph};
pub use http::{HttpConfig, HttpReasoner};
pub use mock::MockReasoner;
pub use plan::{Plan, Status, SubTask};
pub use reasoner::{Query, Reasoner, ReasonerError};
pub use templates::TemplateId;
