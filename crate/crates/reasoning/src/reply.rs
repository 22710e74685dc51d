//! Replies are free text carrying fenced `record` blocks of `key: value`
//! lines. Anything outside the fences is ignored.

use std::collections::BTreeMap;

pub type Record = BTreeMap<String, String>;

const FENCE: &str = "```";

/// Parses every fenced block of `reply`. Blocks with no lines are skipped.
pub fn parse_records(reply: &str) -> Result<Vec<Record>, String> {
    let mut out = Vec::new();
    let mut current: Option<Record> = None;
    let mut fences = 0;
    for (n, line) in reply.lines().enumerate() {
        let t = line.trim();
        if let Some(tag) = t.strip_prefix(FENCE) {
            fences += 1;
            match current.take() {
                Some(rec) => {
                    if !rec.is_empty() {
                        out.push(rec);
                    }
                }
                None => {
                    let tag = tag.trim();
                    if !tag.is_empty() && tag != "record" {
                        return Err(format!("line {}: unexpected block tag `{tag}`", n + 1));
                    }
                    current = Some(Record::new());
                }
            }
            continue;
        }
        if let Some(rec) = current.as_mut() {
            if t.is_empty() {
                continue;
            }
            let (k, v) = t.split_once(':').ok_or_else(|| format!("line {}: expected `key: value`, got `{t}`", n + 1))?;
            let k = k.trim().to_lowercase();
            if k.is_empty() {
                return Err(format!("line {}: empty key", n + 1));
            }
            if rec.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(format!("line {}: key `{k}` repeated", n + 1));
            }
        }
    }
    if current.is_some() {
        return Err("unterminated block".into());
    }
    if fences == 0 {
        return Err("no fenced record block".into());
    }
    Ok(out)
}

/// Renders records back into reply text.
pub fn format_records(records: &[Record]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str("```record\n");
        for (k, v) in rec {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        }
        out.push_str("```\n");
    }
    if records.is_empty() {
        out.push_str("```record\n```\n");
    }
    out
}

pub fn record<const N: usize>(pairs: [(&str, &str); N]) -> Record {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

pub fn field<'a>(rec: &'a Record, key: &str) -> Result<&'a str, String> {
    rec.get(key).map(String::as_str).ok_or_else(|| format!("record lacks `{key}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let recs = vec![record([("name", "microwave")]), record([("id", "n1"), ("state", "closed")])];
        let text = format!("Sure.\n{}\nDone.", format_records(&recs));
        assert_eq!(parse_records(&text).unwrap(), recs);
        assert!(parse_records(&format_records(&[])).unwrap().is_empty());
    }

    #[test]
    fn malformed() {
        assert!(parse_records("just words").is_err());
        assert!(parse_records("```record\nno colon here\n```").is_err());
        assert!(parse_records("```record\na: 1\n").is_err());
        assert!(parse_records("```record\na: 1\na: 2\n```").is_err());
        assert!(parse_records("```json\n{}\n```").is_err());
    }
}
