use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Fixed relation vocabulary for scene graph edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
    Inside,
    OnTopOf,
    PartOf,
}

impl Relation {
    pub const ALL: [Relation; 7] =
        [Relation::LeftOf, Relation::RightOf, Relation::Above, Relation::Below, Relation::Inside, Relation::OnTopOf, Relation::PartOf];

    pub fn name(&self) -> &'static str {
        match self {
            Relation::LeftOf => "left-of",
            Relation::RightOf => "right-of",
            Relation::Above => "above",
            Relation::Below => "below",
            Relation::Inside => "inside",
            Relation::OnTopOf => "on-top-of",
            Relation::PartOf => "part-of",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL.into_iter().find(|r| r.name() == s.trim()).ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub name: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub relation: Relation,
    pub to: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl SceneGraph {
    /// Checks id uniqueness and edge endpoints.
    pub fn validate(&self) -> Result<(), String> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if n.id.is_empty() || n.name.is_empty() {
                return Err("node with empty id or name".into());
            }
            if !ids.insert(n.id.as_str()) {
                return Err(format!("duplicate node id `{}`", n.id));
            }
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return Err(format!("edge endpoint `{end}` is not a node"));
                }
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn has_name(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| n.name == name)
    }

    /// Names of the nodes related to the first node called `name` by
    /// `(child, part-of, it)` edges.
    pub fn parts_of(&self, name: &str) -> Vec<&str> {
        let Some(parent) = self.nodes.iter().find(|n| n.name == name) else { return Vec::new() };
        self.edges
            .iter()
            .filter(|e| e.relation == Relation::PartOf && e.to == parent.id)
            .filter_map(|e| self.node(&e.from).map(|n| n.name.as_str()))
            .collect()
    }

    /// One line per node and edge, for prompts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!("node {} {} ({})\n", n.id, n.name, n.state));
        }
        for e in &self.edges {
            out.push_str(&format!("edge {} {} {}\n", e.from, e.relation, e.to));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedPart {
    pub name: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedObject {
    pub name: String,
    pub state: String,
    #[serde(default)]
    pub parts: Vec<ObservedPart>,
}

/// What the reasoner is shown about a scene: object descriptors and
/// optional image references passed through to remote reasoners.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub objects: Vec<ObservedObject>,
    #[serde(default)]
    pub images: Vec<String>,
}

impl Observation {
    pub fn to_text(&self) -> String {
        serde_json::to_string(&self.objects).expect("observation serializes")
    }

    pub fn from_text(text: &str) -> Result<Vec<ObservedObject>, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn names(&self) -> BTreeMap<&str, &ObservedObject> {
        self.objects.iter().map(|o| (o.name.as_str(), o)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_parse() {
        for r in Relation::ALL {
            assert_eq!(r.name().parse::<Relation>().unwrap(), r);
        }
        assert!("near".parse::<Relation>().is_err());
    }

    #[test]
    fn validation() {
        let node = |id: &str| Node { id: id.into(), name: id.into(), state: "static".into() };
        let mut g = SceneGraph { nodes: vec![node("a"), node("b")], edges: vec![Edge { from: "b".into(), relation: Relation::PartOf, to: "a".into() }] };
        assert!(g.validate().is_ok());
        assert_eq!(g.parts_of("a"), ["b"]);
        g.edges.push(Edge { from: "c".into(), relation: Relation::Above, to: "a".into() });
        assert!(g.validate().is_err());
        g.edges.pop();
        g.nodes.push(node("a"));
        assert!(g.validate().is_err());
    }
}
