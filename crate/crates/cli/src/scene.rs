//! Versioned scene files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eac_core::blueprint::{builtin_blueprint, instantiate, StructuralBlueprint, StructuralInstance, BUILTIN_IDS};
use eac_core::{PointCloud, Transform3, Vec3};
use eac_reasoning::SceneGraph;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCENE_FORMAT: &str = "eac-scene";
pub const SCENE_VERSION: u32 = 1;
/// Prefix naming a generated scene instead of a file, e.g. `builtin:drawer`.
pub const BUILTIN_PREFIX: &str = "builtin:";

/// A builtin blueprint id or a full blueprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlueprintRef {
    Builtin(String),
    Inline(Box<StructuralBlueprint>),
}

impl BlueprintRef {
    pub fn resolve(&self) -> Result<StructuralBlueprint, String> {
        match self {
            BlueprintRef::Builtin(id) => {
                builtin_blueprint(id).ok_or_else(|| format!("unknown blueprint `{id}`; builtin ids: {}", BUILTIN_IDS.join(", ")))
            }
            BlueprintRef::Inline(bp) => {
                bp.validate().map_err(|e| e.to_string())?;
                Ok((**bp).clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub name: String,
    pub blueprint: BlueprintRef,
    /// Free parameters; missing ones take their nominal values.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub pose: Transform3,
    /// Joint values; missing joints start closed.
    #[serde(default)]
    pub joint_state: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSource {
    /// Path to a PLY file, relative to the scene file.
    Ply(PathBuf),
    Points(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudRef {
    pub object: String,
    #[serde(flatten)]
    pub source: CloudSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub format: String,
    pub version: u32,
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clouds: Vec<CloudRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<SceneGraph>,
}

impl SceneFile {
    /// One builtin object with nominal parameters, closed, at the origin.
    pub fn builtin(id: &str) -> Result<SceneFile, CliError> {
        let bp = BlueprintRef::Builtin(id.to_string());
        let resolved = bp.resolve().map_err(CliError::Input)?;
        let params = resolved.nominal_params();
        let closed = instantiate(&resolved, &params, Transform3::identity(), &BTreeMap::new())
            .map_err(|e| CliError::Runtime(format!("builtin `{id}`: {e}")))?;
        Ok(SceneFile {
            format: SCENE_FORMAT.into(),
            version: SCENE_VERSION,
            objects: vec![SceneObject {
                name: id.to_string(),
                blueprint: bp,
                params,
                pose: Transform3::identity(),
                joint_state: closed.joint_state,
            }],
            clouds: Vec::new(),
            graph: None,
        })
    }

    pub fn parse(text: &str) -> Result<SceneFile, String> {
        let scene: SceneFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        scene.check()?;
        Ok(scene)
    }

    /// Reads `spec`, which is either a file path or `builtin:<id>`.
    pub fn load(spec: &str) -> Result<(SceneFile, Option<PathBuf>), CliError> {
        if let Some(id) = spec.strip_prefix(BUILTIN_PREFIX) {
            return Ok((SceneFile::builtin(id)?, None));
        }
        let path = PathBuf::from(spec);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::input(spec, e))?;
        let scene = SceneFile::parse(&text).map_err(|e| CliError::input(spec, e))?;
        Ok((scene, Some(path)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    fn check(&self) -> Result<(), String> {
        if self.format != SCENE_FORMAT {
            return Err(format!("format `{}` is not `{SCENE_FORMAT}`", self.format));
        }
        if self.version != SCENE_VERSION {
            return Err(format!("unsupported scene version {} (this build reads {SCENE_VERSION})", self.version));
        }
        if self.objects.is_empty() {
            return Err("scene has no objects".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|p| p.name == o.name) {
                return Err(format!("object name `{}` is used twice", o.name));
            }
            o.blueprint.resolve().map_err(|e| format!("object `{}`: {e}", o.name))?;
        }
        for c in &self.clouds {
            if !self.objects.iter().any(|o| o.name == c.object) {
                return Err(format!("cloud refers to unknown object `{}`", c.object));
            }
        }
        if let Some(g) = &self.graph {
            g.validate().map_err(|e| format!("scene graph: {e}"))?;
        }
        Ok(())
    }

    /// The object an instruction is about: the first whose name or category
    /// it mentions, else the first object.
    pub fn target(&self, instruction: &str) -> &SceneObject {
        let words: Vec<String> = instruction.to_lowercase().split(|c: char| !c.is_alphanumeric() && c != '_').map(String::from).collect();
        self.objects
            .iter()
            .find(|o| {
                let category = o.blueprint.resolve().map(|bp| bp.category).unwrap_or_default();
                words.iter().any(|w| *w == o.name.to_lowercase() || *w == category)
            })
            .unwrap_or(&self.objects[0])
    }

    /// Attached clouds of `object`, with PLY paths taken relative to `base`.
    pub fn clouds_of(&self, object: &str, base: Option<&Path>) -> Result<Vec<PointCloud>, CliError> {
        self.clouds
            .iter()
            .filter(|c| c.object == object)
            .map(|c| match &c.source {
                CloudSource::Points(p) => Ok(PointCloud::new(p.iter().map(|v| Vec3::new(v[0], v[1], v[2])).collect())),
                CloudSource::Ply(path) => {
                    let full = base.and_then(Path::parent).map(|d| d.join(path)).unwrap_or_else(|| path.clone());
                    crate::ply::read_cloud_file(&full)
                }
            })
            .collect()
    }
}

impl SceneObject {
    pub fn instantiate(&self) -> Result<StructuralInstance, CliError> {
        let bp = self.blueprint.resolve().map_err(CliError::Input)?;
        instantiate(&bp, &self.params, self.pose, &self.joint_state).map_err(|e| CliError::input(&format!("object `{}`", self.name), e))
    }
}
