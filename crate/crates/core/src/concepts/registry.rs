//! Text registry of concept assets (TOML), one `[[asset]]` table per asset.
//!
//! Geometry is fixed per asset kind; the registry carries the editable
//! parts: tags, synopsis, parameter ranges and descriptions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AffordanceAnnotation, AssetKind, ConceptAsset, ParamSpec};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("registry serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unknown asset id `{0}`")]
    UnknownAsset(String),
    #[error("asset `{asset}`: {reason}")]
    Invalid { asset: String, reason: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryFile {
    asset: Vec<AssetRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AssetRecord {
    id: String,
    tags: Vec<String>,
    synopsis: String,
    params: Vec<ParamSpec>,
    affordances: Vec<AffordanceAnnotation>,
}

pub fn export_registry(library: &[ConceptAsset]) -> Result<String, RegistryError> {
    let file = RegistryFile {
        asset: library
            .iter()
            .map(|a| AssetRecord {
                id: a.asset_id.clone(),
                tags: a.category_tags.clone(),
                synopsis: a.synopsis.clone(),
                params: a.params.clone(),
                affordances: a.affordance_annotations.clone(),
            })
            .collect(),
    };
    Ok(toml::to_string(&file)?)
}

pub fn import_registry(text: &str) -> Result<Vec<ConceptAsset>, RegistryError> {
    let file: RegistryFile = toml::from_str(text)?;
    let mut out = Vec::with_capacity(file.asset.len());
    for rec in file.asset {
        let kind = AssetKind::from_id(&rec.id).ok_or_else(|| RegistryError::UnknownAsset(rec.id.clone()))?;
        let invalid = |reason: String| RegistryError::Invalid { asset: rec.id.clone(), reason };
        let builtin = ConceptAsset::builtin(kind);
        let names: BTreeSet<&str> = rec.params.iter().map(|p| p.name.as_str()).collect();
        let expected: BTreeSet<&str> = builtin.params.iter().map(|p| p.name.as_str()).collect();
        if names.len() != rec.params.len() {
            return Err(invalid("duplicate parameter names".into()));
        }
        if names != expected {
            return Err(invalid(format!("parameters must be exactly {:?}", expected)));
        }
        for p in &rec.params {
            if !(p.lower < p.upper) {
                return Err(invalid(format!("parameter `{}` has lower >= upper", p.name)));
            }
        }
        if rec.synopsis.trim().is_empty() {
            return Err(invalid("empty synopsis".into()));
        }
        if rec.affordances.is_empty() {
            return Err(invalid("no affordance annotations".into()));
        }
        out.push(ConceptAsset {
            asset_id: rec.id,
            kind,
            category_tags: rec.tags,
            synopsis: rec.synopsis,
            params: rec.params,
            affordance_annotations: rec.affordances,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::builtin_library;

    #[test]
    fn round_trip() {
        let lib = builtin_library();
        let text = export_registry(&lib).unwrap();
        assert!(text.contains("curve_handle"));
        assert_eq!(import_registry(&text).unwrap(), lib);
    }

    #[test]
    fn rejects_bad_records() {
        let lib = builtin_library();
        let text = export_registry(&lib[..1]).unwrap();
        assert!(matches!(
            import_registry(&text.replace("curve_handle", "teapot")),
            Err(RegistryError::UnknownAsset(_))
        ));
        assert!(matches!(import_registry(&text.replace("upper = 0.12", "upper = 0.0")), Err(RegistryError::Invalid { .. })));
        assert!(import_registry("asset = 3").is_err());
    }
}
