use std::collections::BTreeMap;

use eac_core::concepts::ConceptAsset;
use eac_core::manipulation::{find_family, find_rule, Strategy, StrategyKind};

use crate::graph::{Edge, Node, Observation, SceneGraph};
use crate::plan::{Plan, SubTask};
use crate::reasoner::{Query, Reasoner, ReasonerError};
use crate::reply::{field, parse_records, Record};
use crate::templates::TemplateId;

/// Asks `query` and parses the reply; a record carrying `error` is a refusal.
fn ask_records(reasoner: &dyn Reasoner, query: &Query) -> Result<Vec<Record>, ReasonerError> {
    let reply = reasoner.ask(query)?;
    let records = parse_records(&reply).map_err(|m| ReasonerError::parse(query.template, m, &reply))?;
    if let Some(why) = records.iter().find_map(|r| r.get("error")) {
        return Err(ReasonerError::Declined(why.clone()));
    }
    Ok(records)
}

fn parse_field<'a>(template: TemplateId, rec: &'a Record, key: &str, reply: &[Record]) -> Result<&'a str, ReasonerError> {
    field(rec, key).map_err(|m| ReasonerError::parse(template, m, &crate::reply::format_records(reply)))
}

/// Builds the scene graph in two queries: objects first, then their states
/// and relations. Nothing is returned unless both replies parse.
pub fn parse_objects(reasoner: &dyn Reasoner, observation: &Observation, instruction: &str) -> Result<SceneGraph, ReasonerError> {
    let scene = observation.to_text();
    let mut q = Query::new(TemplateId::Objects, [("instruction", instruction.to_string()), ("scene", scene.clone())]);
    q.images = observation.images.clone();
    let recs = ask_records(reasoner, &q)?;
    let mut names = Vec::new();
    for r in &recs {
        names.push(parse_field(q.template, r, "name", &recs)?.to_string());
    }
    if names.is_empty() {
        return Ok(SceneGraph::default());
    }

    let mut q = Query::new(TemplateId::States, [("instruction", instruction.to_string()), ("scene", scene), ("objects", names.join(", "))]);
    q.images = observation.images.clone();
    let recs = ask_records(reasoner, &q)?;
    let mut graph = SceneGraph::default();
    for r in &recs {
        let f = |k: &str| parse_field(TemplateId::States, r, k, &recs).map(str::to_string);
        match f("kind")?.as_str() {
            "node" => graph.nodes.push(Node { id: f("id")?, name: f("name")?, state: f("state")? }),
            "edge" => {
                let relation = f("relation")?.parse().map_err(|m: String| ReasonerError::parse(TemplateId::States, m, ""))?;
                graph.edges.push(Edge { from: f("from")?, relation, to: f("to")? });
            }
            other => return Err(ReasonerError::parse(TemplateId::States, format!("unknown record kind `{other}`"), "")),
        }
    }
    graph.validate().map_err(|m| ReasonerError::parse(TemplateId::States, m, &crate::reply::format_records(&recs)))?;
    Ok(graph)
}

/// Splits an instruction into verified steps whose named objects all exist
/// in `graph`.
pub fn decompose(reasoner: &dyn Reasoner, instruction: &str, graph: &SceneGraph) -> Result<Plan, ReasonerError> {
    if instruction.trim().is_empty() {
        return Err(ReasonerError::EmptyInstruction);
    }
    let q = Query::new(TemplateId::Decompose, [("instruction", instruction.trim().to_string()), ("graph", graph.describe())]);
    let recs = ask_records(reasoner, &q)?;
    if recs.is_empty() {
        return Err(ReasonerError::parse(q.template, "no steps", ""));
    }
    let mut subtasks = Vec::new();
    let mut unknown: Vec<String> = Vec::new();
    for r in &recs {
        let mut s = SubTask::new(parse_field(q.template, r, "instruction", &recs)?, parse_field(q.template, r, "condition", &recs)?);
        s.refs = r.get("refs").map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()).unwrap_or_default();
        for name in &s.refs {
            if !graph.has_name(name) && !unknown.contains(name) {
                unknown.push(name.clone());
            }
        }
        subtasks.push(s);
    }
    if !unknown.is_empty() {
        return Err(ReasonerError::UnknownNames(unknown));
    }
    Ok(Plan { subtasks })
}

/// Asks until the reply names an offered id, at most twice.
fn choose(reasoner: &dyn Reasoner, mut query: Query, keys: &[(&str, &[&str])]) -> Result<Vec<String>, ReasonerError> {
    let mut last = None;
    for _ in 0..2 {
        let recs = ask_records(reasoner, &query)?;
        let rec = recs.first().ok_or_else(|| ReasonerError::parse(query.template, "empty reply", ""))?;
        let mut picked = Vec::new();
        for (key, offered) in keys {
            let got = parse_field(query.template, rec, key, &recs)?;
            if offered.contains(&got) {
                picked.push(got.to_string());
            } else {
                last = Some(ReasonerError::NotOffered { offered: offered.iter().map(|s| s.to_string()).collect(), got: got.to_string() });
                query.context.insert("rejected".into(), got.to_string());
                break;
            }
        }
        if picked.len() == keys.len() {
            return Ok(picked);
        }
    }
    Err(last.expect("a rejection happened"))
}

/// Picks one of `candidates` for the part of `target` named by its
/// category `concept`. `evidence` maps asset ids to fit residuals.
pub fn select_concept(
    reasoner: &dyn Reasoner,
    candidates: &[ConceptAsset],
    target: &str,
    subtask: &str,
    concept: &str,
    evidence: &BTreeMap<String, f64>,
) -> Result<String, ReasonerError> {
    match candidates {
        [] => return Err(ReasonerError::NoCandidates),
        [only] => return Ok(only.asset_id.clone()),
        _ => {}
    }
    let listing: Vec<String> = candidates.iter().map(|a| format!("{}: {}", a.asset_id, a.synopsis)).collect();
    let facts: Vec<String> = evidence.iter().map(|(id, r)| format!("{id} residual {r:.6} m")).collect();
    let q = Query::new(
        TemplateId::SelectConcept,
        [
            ("target object", target.to_string()),
            ("sub-task", subtask.to_string()),
            ("concept", concept.to_string()),
            ("candidates", listing.join("\n")),
            ("evidence", if facts.is_empty() { "none".to_string() } else { facts.join("\n") }),
        ],
    );
    let ids: Vec<&str> = candidates.iter().map(|a| a.asset_id.as_str()).collect();
    Ok(choose(reasoner, q, &[("choice", &ids)])?.remove(0))
}

/// One strategy per line: `family <id> contact=<grasp|push>: synopsis` or
/// `rule <id> motion=<pull|push|rotate|slide>: synopsis`.
pub fn strategy_lines(strategies: &[Strategy]) -> Vec<String> {
    strategies
        .iter()
        .map(|s| match s.kind {
            StrategyKind::Family => {
                let contact = find_family(&s.id).map(|f| format!("{:?}", f.contact).to_lowercase()).unwrap_or_default();
                format!("family {} contact={contact}: {}", s.id, s.synopsis)
            }
            StrategyKind::Rule => {
                let motion = find_rule(&s.id).map(|r| format!("{:?}", r.manipulation_type).to_lowercase()).unwrap_or_default();
                format!("rule {} motion={motion}: {}", s.id, s.synopsis)
            }
        })
        .collect()
}

/// Picks a grasp family and a force rule for `subtask`.
pub fn select_strategy(reasoner: &dyn Reasoner, strategies: &[Strategy], target: &str, subtask: &str) -> Result<(String, String), ReasonerError> {
    let ids = |k: StrategyKind| strategies.iter().filter(|s| s.kind == k).map(|s| s.id.as_str()).collect::<Vec<_>>();
    let (families, rules) = (ids(StrategyKind::Family), ids(StrategyKind::Rule));
    if families.is_empty() || rules.is_empty() {
        return Err(ReasonerError::NoCandidates);
    }
    let q = Query::new(
        TemplateId::SelectStrategy,
        [("target object", target.to_string()), ("sub-task", subtask.to_string()), ("strategies", strategy_lines(strategies).join("\n"))],
    );
    let mut picked = choose(reasoner, q, &[("family", &families), ("rule", &rules)])?;
    let rule = picked.pop().expect("two picks");
    Ok((picked.pop().expect("two picks"), rule))
}

/// Answers a condition from the scene description through the reasoner.
pub fn verify(reasoner: &dyn Reasoner, condition: &str, observation: &Observation) -> Result<bool, ReasonerError> {
    let mut q = Query::new(TemplateId::Verify, [("scene", observation.to_text()), ("condition", condition.to_string())]);
    q.images = observation.images.clone();
    let recs = ask_records(reasoner, &q)?;
    let rec = recs.first().ok_or_else(|| ReasonerError::parse(q.template, "empty reply", ""))?;
    match parse_field(q.template, rec, "answer", &recs)?.to_lowercase().as_str() {
        "yes" | "true" => Ok(true),
        "no" | "false" => Ok(false),
        other => Err(ReasonerError::parse(q.template, format!("answer `{other}` is not yes or no"), "")),
    }
}
