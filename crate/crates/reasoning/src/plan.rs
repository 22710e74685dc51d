use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTask {
    pub instruction: String,
    pub condition: String,
    /// Scene graph node names the step mentions.
    #[serde(default)]
    pub refs: Vec<String>,
    pub status: Status,
    /// Executions so far, at most one more than the retry limit.
    pub attempts: usize,
    /// Last execution error, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SubTask {
    pub fn new(instruction: impl Into<String>, condition: impl Into<String>) -> SubTask {
        SubTask { instruction: instruction.into(), condition: condition.into(), refs: Vec::new(), status: Status::Pending, attempts: 0, error: None }
    }

    /// First word of the instruction, lowercased.
    pub fn verb(&self) -> String {
        self.instruction.split_whitespace().next().unwrap_or_default().to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub subtasks: Vec<SubTask>,
}

impl Plan {
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        self.subtasks.iter().map(|s| (s.instruction.as_str(), s.condition.as_str())).collect()
    }

    pub fn statuses(&self) -> Vec<Status> {
        self.subtasks.iter().map(|s| s.status).collect()
    }

    pub fn succeeded(&self) -> bool {
        self.subtasks.iter().all(|s| s.status == Status::Done)
    }
}
