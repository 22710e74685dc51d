//! Deterministic stand-in for a language model. Every reply is a pure
//! function of the template and the context, written in the same fenced
//! record format a remote model is asked to use.

use crate::graph::Observation;
use crate::reasoner::{Query, Reasoner, ReasonerError};
use crate::reply::{format_records, record, Record};
use crate::templates::TemplateId;

/// Parts a gripper is sent to when a step needs a grasp.
const GRASPABLE: [&str; 3] = ["handle", "knob", "lever"];

/// Steps per leading verb. `{t}` is the named target, `{p}` the part to
/// hold.
const STEPS: &[(&str, &[(&str, &str)])] = &[
    ("open", &[("grasp the {t} {p}", "is the {p} grasped?"), ("pull open the {t}", "is the {t} opened?")]),
    ("close", &[("grasp the {t} {p}", "is the {p} grasped?"), ("push closed the {t}", "is the {t} closed?")]),
    ("pull", &[("pull the {t}", "is the {t} opened?")]),
    ("push", &[("push the {t}", "is the {t} closed?")]),
];

/// Action verbs and the motion they call for.
const VERBS: [(&str, &str); 4] = [("pull", "pull"), ("open", "pull"), ("push", "push"), ("close", "push")];

#[derive(Debug, Clone, Copy, Default)]
pub struct MockReasoner;

impl Reasoner for MockReasoner {
    fn ask(&self, query: &Query) -> Result<String, ReasonerError> {
        query.prompt()?;
        let ctx = |k: &str| query.context.get(k).map(String::as_str).unwrap_or_default();
        let records = match query.template {
            TemplateId::Objects => objects(ctx("instruction"), ctx("scene"))?,
            TemplateId::States => states(ctx("scene"), ctx("objects"))?,
            TemplateId::Decompose => decompose(ctx("instruction"), ctx("graph")),
            TemplateId::SelectConcept => vec![select_concept(ctx("candidates"), ctx("evidence"))],
            TemplateId::SelectStrategy => vec![select_strategy(ctx("sub-task"), ctx("strategies"))],
            TemplateId::Verify => vec![verify(ctx("scene"), ctx("condition"))?],
        };
        Ok(format_records(&records))
    }
}

fn declined(why: &str) -> Record {
    record([("error", why)])
}

fn scene(text: &str) -> Result<Vec<crate::graph::ObservedObject>, ReasonerError> {
    Observation::from_text(text).map_err(ReasonerError::Template)
}

fn words(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric() && c != '_' && c != '-').filter(|w| !w.is_empty()).map(String::from).collect()
}

/// Objects named in the instruction, or every object when none is.
fn objects(instruction: &str, scene_text: &str) -> Result<Vec<Record>, ReasonerError> {
    let objects = scene(scene_text)?;
    let said = words(instruction);
    let named: Vec<_> = objects.iter().filter(|o| said.contains(&o.name)).collect();
    let chosen = if named.is_empty() { objects.iter().collect() } else { named };
    Ok(chosen.iter().map(|o| record([("name", o.name.as_str())])).collect())
}

fn states(scene_text: &str, picked: &str) -> Result<Vec<Record>, ReasonerError> {
    let picked: Vec<&str> = picked.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut next = 0;
    for o in scene(scene_text)?.iter().filter(|o| picked.contains(&o.name.as_str())) {
        next += 1;
        let id = format!("n{next}");
        nodes.push(record([("kind", "node"), ("id", &id), ("name", &o.name), ("state", &o.state)]));
        for p in &o.parts {
            next += 1;
            let pid = format!("n{next}");
            nodes.push(record([("kind", "node"), ("id", &pid), ("name", &p.name), ("state", &p.state)]));
            edges.push(record([("kind", "edge"), ("from", &pid), ("relation", "part-of"), ("to", &id)]));
        }
    }
    nodes.extend(edges);
    Ok(nodes)
}

/// Node names and part-of children read back from a described graph.
struct GraphView {
    names: Vec<(String, String)>,
    part_of: Vec<(String, String)>,
}

impl GraphView {
    fn parse(text: &str) -> GraphView {
        let mut names = Vec::new();
        let mut part_of = Vec::new();
        for line in text.lines() {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.as_slice() {
                ["node", id, name, ..] => names.push((id.to_string(), name.to_string())),
                ["edge", from, "part-of", to] => part_of.push((from.to_string(), to.to_string())),
                _ => {}
            }
        }
        GraphView { names, part_of }
    }

    fn parts_of(&self, name: &str) -> Vec<&str> {
        let Some((id, _)) = self.names.iter().find(|(_, n)| n == name) else { return Vec::new() };
        self.part_of
            .iter()
            .filter(|(_, to)| to == id)
            .filter_map(|(from, _)| self.names.iter().find(|(i, _)| i == from).map(|(_, n)| n.as_str()))
            .collect()
    }
}

fn fill(pattern: &str, target: &str, part: &str) -> String {
    let text = pattern.replace("{t}", target).replace("{p}", part);
    // "the lever lever" reads as "the lever".
    let mut out: Vec<&str> = Vec::new();
    for w in text.split(' ') {
        if out.last() != Some(&w) {
            out.push(w);
        }
    }
    out.join(" ")
}

fn decompose(instruction: &str, graph: &str) -> Vec<Record> {
    let w = words(instruction);
    let Some((_, steps)) = w.first().and_then(|v| STEPS.iter().find(|(s, _)| s == v)) else {
        return vec![declined("no rule for this instruction")];
    };
    let rest: Vec<&str> = w[1..].iter().map(String::as_str).skip_while(|x| *x == "the").collect();
    let (Some(object), Some(target)) = (rest.first(), rest.last()) else {
        return vec![declined("instruction names no object")];
    };
    let graph = GraphView::parse(graph);
    let part = graph
        .parts_of(object)
        .into_iter()
        .find(|p| GRASPABLE.contains(p))
        .or(GRASPABLE.iter().copied().find(|g| g == target))
        .unwrap_or("handle");
    steps
        .iter()
        .map(|(step, cond)| {
            let step = fill(step, target, part);
            let mut refs: Vec<&str> = vec![object];
            for r in [*target, part] {
                if step.contains(r) && !refs.contains(&r) {
                    refs.push(r);
                }
            }
            record([("instruction", step.as_str()), ("condition", &fill(cond, target, part)), ("refs", &refs.join(", "))])
        })
        .collect()
}

/// Lowest residual wins; without evidence the first candidate does.
fn select_concept(candidates: &str, evidence: &str) -> Record {
    let offered: Vec<&str> = candidates.lines().filter_map(|l| l.split(':').next()).map(str::trim).filter(|s| !s.is_empty()).collect();
    let mut best: Option<(f64, &str)> = None;
    for line in evidence.lines() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if let [id, "residual", value, ..] = t.as_slice() {
            if let Ok(v) = value.parse::<f64>() {
                if offered.contains(id) && best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, id));
                }
            }
        }
    }
    match best.map(|(_, id)| id).or(offered.first().copied()) {
        Some(id) => record([("choice", id)]),
        None => declined("nothing offered"),
    }
}

/// Strategy lines look like `family <id> contact=<kind>: synopsis` and
/// `rule <id> motion=<kind>: synopsis`.
fn select_strategy(subtask: &str, strategies: &str) -> Record {
    let said = words(subtask);
    let Some(motion) = said.iter().find_map(|w| VERBS.iter().find(|(v, _)| v == w).map(|(_, m)| *m)) else {
        return declined("no motion verb in the step");
    };
    let mut families: Vec<(&str, &str)> = Vec::new();
    let mut rules: Vec<(&str, &str)> = Vec::new();
    for line in strategies.lines() {
        let head = line.split(':').next().unwrap_or_default();
        let t: Vec<&str> = head.split_whitespace().collect();
        match t.as_slice() {
            ["family", id, kind] => families.push((id, kind.trim_start_matches("contact="))),
            ["rule", id, kind] => rules.push((id, kind.trim_start_matches("motion="))),
            _ => {}
        }
    }
    // Pulling needs a pinch; pushing prefers a fingertip contact.
    let family = match motion {
        "push" => families.iter().find(|(_, c)| *c == "push").or(families.iter().find(|(_, c)| *c == "grasp")),
        _ => families.iter().find(|(_, c)| *c == "grasp"),
    };
    let rule = rules.iter().find(|(_, m)| *m == motion);
    match (family, rule) {
        (Some((f, _)), Some((r, _))) => record([("family", f), ("rule", r)]),
        _ => declined("no applicable strategy"),
    }
}

/// Reads part and object states from the scene description.
fn verify(scene_text: &str, condition: &str) -> Result<Record, ReasonerError> {
    let objects = scene(scene_text)?;
    let w = words(condition);
    let (Some(name), Some(pred)) = (w.iter().rev().nth(1), w.last()) else {
        return Ok(declined("cannot read the question"));
    };
    let wanted = match pred.as_str() {
        "grasped" => "grasped",
        "opened" | "open" => "open",
        "closed" => "closed",
        _ => return Ok(declined("cannot answer this question")),
    };
    let state = objects
        .iter()
        .flat_map(|o| std::iter::once((&o.name, &o.state)).chain(o.parts.iter().map(|p| (&p.name, &p.state))))
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s.as_str());
    Ok(match state {
        Some(s) => record([("answer", if s == wanted { "yes" } else { "no" })]),
        None => declined("no such object"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_table() {
        let graph = "node n1 microwave (closed)\nnode n2 door (closed)\nnode n3 handle (static)\nedge n2 part-of n1\nedge n3 part-of n1\n";
        let recs = decompose("open the microwave door", graph);
        assert_eq!(recs[0]["instruction"], "grasp the door handle");
        assert_eq!(recs[0]["refs"], "microwave, door, handle");
        assert_eq!(recs[1]["condition"], "is the door opened?");
        let lever = decompose("pull the lever", "node n1 lever (closed)\nnode n2 lever (static)\nedge n2 part-of n1\n");
        assert_eq!(lever.len(), 1);
        assert_eq!(lever[0]["instruction"], "pull the lever");
        let open = decompose("open the lever", "node n1 lever (closed)\nnode n2 lever (static)\nedge n2 part-of n1\n");
        assert_eq!(open[0]["instruction"], "grasp the lever");
        assert!(decompose("dance", graph)[0].contains_key("error"));
    }

    #[test]
    fn strategy_by_verb() {
        let lines = "family bar_pull_grasp contact=grasp: pull\nfamily drawer_front_push contact=push: push\nrule slide_pull motion=pull: x\nrule slide_push motion=push: y\n";
        assert_eq!(select_strategy("pull open the drawer", lines)["family"], "bar_pull_grasp");
        let push = select_strategy("push the drawer", lines);
        assert_eq!((push["family"].as_str(), push["rule"].as_str()), ("drawer_front_push", "slide_push"));
        assert!(select_strategy("look at the drawer", lines).contains_key("error"));
    }
}
