//! Prompt templates shipped with the crate. Placeholders are written
//! `<name>` and filled from the query context.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Objects,
    States,
    Decompose,
    SelectConcept,
    SelectStrategy,
    Verify,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::Objects,
        TemplateId::States,
        TemplateId::Decompose,
        TemplateId::SelectConcept,
        TemplateId::SelectStrategy,
        TemplateId::Verify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TemplateId::Objects => "objects",
            TemplateId::States => "states",
            TemplateId::Decompose => "decompose",
            TemplateId::SelectConcept => "select_concept",
            TemplateId::SelectStrategy => "select_strategy",
            TemplateId::Verify => "verify",
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            TemplateId::Objects => include_str!("../templates/objects.txt"),
            TemplateId::States => include_str!("../templates/states.txt"),
            TemplateId::Decompose => include_str!("../templates/decompose.txt"),
            TemplateId::SelectConcept => include_str!("../templates/select_concept.txt"),
            TemplateId::SelectStrategy => include_str!("../templates/select_strategy.txt"),
            TemplateId::Verify => include_str!("../templates/verify.txt"),
        }
    }

    /// Context keys the template needs.
    pub fn placeholders(&self) -> &'static [&'static str] {
        match self {
            TemplateId::Objects => &["instruction", "scene"],
            TemplateId::States => &["instruction", "scene", "objects"],
            TemplateId::Decompose => &["instruction", "graph"],
            TemplateId::SelectConcept => &["target object", "sub-task", "concept", "candidates", "evidence"],
            TemplateId::SelectStrategy => &["target object", "sub-task", "strategies"],
            TemplateId::Verify => &["scene", "condition"],
        }
    }

    /// Fills the placeholders; fails on the first missing key.
    pub fn render(&self, context: &BTreeMap<String, String>) -> Result<String, String> {
        let mut out = self.text().to_string();
        for key in self.placeholders() {
            let value = context.get(*key).ok_or_else(|| format!("template `{}` needs `{key}`", self.name()))?;
            out = out.replace(&format!("<{key}>"), value);
        }
        Ok(out)
    }
}
