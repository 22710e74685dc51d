//! Parametric concept assets: parameter schemas, canonical solids,
//! affordance annotations and surface rendering.
//!
//! Canonical frames shared by every asset: z is up, the side a gripper
//! normally comes from is -y, and parts that attach to a larger body do so
//! on their +y side.

pub mod affordance;
pub mod registry;
pub mod shape;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{PointCloud, Vec3};
pub use affordance::{AffordanceRegion, RegionKind, RegionSupport};
pub use shape::Solid;

/// Thickness of a drawer front board.
pub const DRAWER_FACE_THICKNESS: f64 = 0.018;
/// Width of the pushable strip along a door's vertical edges.
pub const DOOR_EDGE_STRIP: f64 = 0.03;
/// Margin between a sunken door's outline and its front pocket.
pub const SUNKEN_MARGIN: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConceptError {
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("asset `{asset}`: parameter `{name}` is not bound")]
    Unbound { asset: String, name: String },
    #[error("asset `{asset}`: unknown parameter `{name}`")]
    UnknownParam { asset: String, name: String },
    #[error("asset `{asset}`: parameter `{name}` = {value} outside [{lower}, {upper}]")]
    OutOfRange { asset: String, name: String, value: f64, lower: f64, upper: f64 },
    #[error("asset `{asset}`: {reason}")]
    Invalid { asset: String, reason: String },
    #[error("sample count must be at least 1")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    /// Shapes the surface; recoverable from a point cloud.
    Geometric,
    /// Describes motion (e.g. drawer travel); invisible in a static cloud.
    Kinematic,
    /// Integer-valued (e.g. symmetry order); fixed during fitting.
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub unit: String,
    pub description: String,
    pub role: ParamRole,
}

impl ParamSpec {
    fn new(name: &str, lower: f64, upper: f64, unit: &str, role: ParamRole, description: &str) -> Self {
        ParamSpec {
            name: name.into(),
            lower,
            upper,
            unit: unit.into(),
            description: description.into(),
            role,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    CurveHandle,
    RingHandle,
    BarHandle,
    Knob,
    Lever,
    SunkenDoor,
    DrawerFace,
    DoorPanel,
    Housing,
}

impl AssetKind {
    pub const ALL: [AssetKind; 9] = [
        AssetKind::CurveHandle,
        AssetKind::RingHandle,
        AssetKind::BarHandle,
        AssetKind::Knob,
        AssetKind::Lever,
        AssetKind::SunkenDoor,
        AssetKind::DrawerFace,
        AssetKind::DoorPanel,
        AssetKind::Housing,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            AssetKind::CurveHandle => "curve_handle",
            AssetKind::RingHandle => "ring_handle",
            AssetKind::BarHandle => "bar_handle",
            AssetKind::Knob => "knob",
            AssetKind::Lever => "lever",
            AssetKind::SunkenDoor => "sunken_door",
            AssetKind::DrawerFace => "drawer_face",
            AssetKind::DoorPanel => "door_panel",
            AssetKind::Housing => "housing",
        }
    }

    pub fn from_id(id: &str) -> Option<AssetKind> {
        AssetKind::ALL.iter().copied().find(|k| k.id() == id)
    }
}

/// Descriptor of an affordance region, independent of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceAnnotation {
    pub region_id: String,
    pub kind: RegionKind,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptAsset {
    pub asset_id: String,
    pub kind: AssetKind,
    pub category_tags: Vec<String>,
    pub synopsis: String,
    pub params: Vec<ParamSpec>,
    pub affordance_annotations: Vec<AffordanceAnnotation>,
}

fn annotation(region_id: &str, kind: RegionKind, description: &str) -> AffordanceAnnotation {
    AffordanceAnnotation { region_id: region_id.into(), kind, description: description.into() }
}

impl ConceptAsset {
    pub fn builtin(kind: AssetKind) -> ConceptAsset {
        use ParamRole::*;
        use RegionKind::*;
        let (tags, synopsis, params, notes): (&[&str], &str, Vec<ParamSpec>, Vec<AffordanceAnnotation>) = match kind {
            AssetKind::CurveHandle => (
                &["handle", "curve"],
                "Curved pull handle: a round tube bent along a circular arc whose two ends meet the mounting surface.",
                vec![
                    ParamSpec::new("R_o", 0.02, 0.12, "m", Geometric, "arc radius of the tube centerline"),
                    ParamSpec::new("theta_c", 0.8, 3.0, "rad", Geometric, "angular extent of the arc"),
                    ParamSpec::new("r_t", 0.004, 0.015, "m", Geometric, "tube radius"),
                ],
                vec![annotation("arc_grasp", Grasp, "tube surface along the whole arc, pinched across the tube")],
            ),
            AssetKind::RingHandle => (
                &["handle", "ring"],
                "Ring pull: a flat ring standing off the surface, grasped by pinching its outer rim.",
                vec![
                    ParamSpec::new("R_i", 0.012, 0.05, "m", Geometric, "inner radius"),
                    ParamSpec::new("R_o", 0.02, 0.07, "m", Geometric, "outer radius"),
                    ParamSpec::new("thickness", 0.004, 0.014, "m", Geometric, "ring thickness"),
                ],
                vec![annotation("rim_grasp", Grasp, "top and bottom faces of the outer third of the ring")],
            ),
            AssetKind::BarHandle => (
                &["handle", "bar"],
                "Straight bar handle held off the surface by two short legs.",
                vec![
                    ParamSpec::new("length", 0.08, 0.4, "m", Geometric, "bar length"),
                    ParamSpec::new("width", 0.01, 0.03, "m", Geometric, "square bar cross-section side"),
                    ParamSpec::new("standoff", 0.02, 0.05, "m", Geometric, "distance from bar axis to the mounting surface"),
                ],
                vec![annotation("bar_grasp", Grasp, "front, top and bottom faces of the bar along its length")],
            ),
            AssetKind::Knob => (
                &["knob"],
                "Cylindrical knob protruding from the surface; may be turned about its axis.",
                vec![
                    ParamSpec::new("radius", 0.025, 0.035, "m", Geometric, "knob radius"),
                    ParamSpec::new("depth", 0.015, 0.04, "m", Geometric, "protrusion from the surface"),
                    ParamSpec::new("n", 1.0, 12.0, "count", Discrete, "order of rotational symmetry of the grip"),
                ],
                vec![annotation("knob_grasp", Grasp, "lateral surface of the knob, pinched across the diameter")],
            ),
            AssetKind::Lever => (
                &["lever", "faucet"],
                "Straight lever pivoting at one end; operated by pressing or lifting the free end.",
                vec![
                    ParamSpec::new("length", 0.06, 0.25, "m", Geometric, "distance from pivot to tip"),
                    ParamSpec::new("width", 0.01, 0.03, "m", Geometric, "square cross-section side"),
                ],
                vec![
                    annotation("tip_grasp", Grasp, "outer half of the lever, pinched across its width"),
                    annotation("tip_push", Push, "underside of the outer half of the lever"),
                ],
            ),
            AssetKind::SunkenDoor => (
                &["door"],
                "Door slab with a shallow pocket recessed into its front face.",
                vec![
                    ParamSpec::new("l", 0.25, 0.7, "m", Geometric, "horizontal size"),
                    ParamSpec::new("w", 0.25, 0.8, "m", Geometric, "vertical size"),
                    ParamSpec::new("h", 0.015, 0.04, "m", Geometric, "slab thickness"),
                    ParamSpec::new("recess", 0.003, 0.012, "m", Geometric, "pocket depth"),
                ],
                vec![
                    annotation("edge_push_left", Push, "front strip along the left vertical edge"),
                    annotation("edge_push_right", Push, "front strip along the right vertical edge"),
                ],
            ),
            AssetKind::DrawerFace => (
                &["drawer"],
                "Front board of a sliding drawer.",
                vec![
                    ParamSpec::new("w", 0.25, 0.6, "m", Geometric, "horizontal size"),
                    ParamSpec::new("h", 0.1, 0.3, "m", Geometric, "vertical size"),
                    ParamSpec::new("pull_travel", 0.15, 0.45, "m", Kinematic, "maximum slide-out distance"),
                ],
                vec![annotation("front_push", Push, "central area of the front board")],
            ),
            AssetKind::DoorPanel => (
                &["door"],
                "Flat rectangular door panel.",
                vec![
                    ParamSpec::new("l", 0.25, 0.7, "m", Geometric, "horizontal size"),
                    ParamSpec::new("w", 0.25, 0.8, "m", Geometric, "vertical size"),
                    ParamSpec::new("h", 0.015, 0.04, "m", Geometric, "panel thickness"),
                ],
                vec![
                    annotation("edge_push_left", Push, "front strip along the left vertical edge"),
                    annotation("edge_push_right", Push, "front strip along the right vertical edge"),
                ],
            ),
            AssetKind::Housing => (
                &["body"],
                "Box-shaped body carrying the moving parts; its front plane is y = 0.",
                vec![
                    ParamSpec::new("width", 0.1, 1.2, "m", Geometric, "horizontal size"),
                    ParamSpec::new("height", 0.03, 1.2, "m", Geometric, "vertical size"),
                    ParamSpec::new("depth", 0.05, 0.8, "m", Geometric, "front-to-back size"),
                ],
                vec![annotation("top_push", Push, "top face")],
            ),
        };
        ConceptAsset {
            asset_id: kind.id().into(),
            kind,
            category_tags: tags.iter().map(|s| s.to_string()).collect(),
            synopsis: synopsis.into(),
            params,
            affordance_annotations: notes,
        }
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.category_tags.iter().any(|t| t == tag)
    }

    /// Binds and validates parameters.
    pub fn instantiate(&self, params: &BTreeMap<String, f64>) -> Result<AssetInstance, ConceptError> {
        for name in params.keys() {
            if self.param(name).is_none() {
                return Err(ConceptError::UnknownParam { asset: self.asset_id.clone(), name: name.clone() });
            }
        }
        let mut bound = BTreeMap::new();
        for spec in &self.params {
            let value = *params.get(&spec.name).ok_or_else(|| ConceptError::Unbound {
                asset: self.asset_id.clone(),
                name: spec.name.clone(),
            })?;
            if !value.is_finite() || !spec.contains(value) {
                return Err(ConceptError::OutOfRange {
                    asset: self.asset_id.clone(),
                    name: spec.name.clone(),
                    value,
                    lower: spec.lower,
                    upper: spec.upper,
                });
            }
            let value = if spec.role == ParamRole::Discrete { value.round() } else { value };
            bound.insert(spec.name.clone(), value);
        }
        let inst = AssetInstance { kind: self.kind, params: bound };
        if let Some(reason) = inst.validity_violation() {
            return Err(ConceptError::Invalid { asset: self.asset_id.clone(), reason });
        }
        Ok(inst)
    }

    /// Uniformly drawn valid instance (rejection sampling over the ranges).
    pub fn random_instance<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> AssetInstance {
        loop {
            let params = self.params.iter().map(|p| (p.name.clone(), rng.random_range(p.lower..=p.upper))).collect();
            if let Ok(inst) = self.instantiate(&params) {
                return inst;
            }
        }
    }

    /// Instance at the middle of every parameter range.
    pub fn nominal(&self) -> AssetInstance {
        let params = self.params.iter().map(|p| (p.name.clone(), p.midpoint())).collect();
        self.instantiate(&params).expect("midpoints are valid for builtin assets")
    }
}

pub fn builtin_library() -> Vec<ConceptAsset> {
    AssetKind::ALL.iter().map(|k| ConceptAsset::builtin(*k)).collect()
}

pub fn find_asset<'a>(library: &'a [ConceptAsset], id: &str) -> Result<&'a ConceptAsset, ConceptError> {
    library
        .iter()
        .find(|a| a.asset_id == id)
        .ok_or_else(|| ConceptError::UnknownAsset(id.to_string()))
}

/// Assets tagged with `category`, in library order.
pub fn prune(library: &[ConceptAsset], category: &str) -> Vec<ConceptAsset> {
    library.iter().filter(|a| a.has_tag(category)).cloned().collect()
}

/// A concept asset with every parameter bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetInstance {
    #[serde(rename = "asset_id")]
    pub kind: AssetKind,
    pub params: BTreeMap<String, f64>,
}

impl AssetInstance {
    pub fn asset_id(&self) -> &'static str {
        self.kind.id()
    }

    pub fn get(&self, name: &str) -> f64 {
        *self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("{}: parameter `{}` not bound", self.kind.id(), name))
    }

    /// Checks that every schema parameter is bound.
    pub fn check_bound(&self) -> Result<(), ConceptError> {
        let asset = ConceptAsset::builtin(self.kind);
        for spec in &asset.params {
            if !self.params.contains_key(&spec.name) {
                return Err(ConceptError::Unbound { asset: asset.asset_id.clone(), name: spec.name.clone() });
            }
        }
        Ok(())
    }

    /// Cross-parameter validity rules beyond the per-parameter ranges.
    pub fn validity_violation(&self) -> Option<String> {
        let g = |n: &str| self.params.get(n).copied().unwrap_or(f64::NAN);
        match self.kind {
            AssetKind::CurveHandle if g("r_t") >= 0.5 * g("R_o") => Some("r_t must be below R_o / 2".into()),
            AssetKind::RingHandle if g("R_o") - g("R_i") < 0.006 => Some("R_o must exceed R_i by at least 6 mm".into()),
            AssetKind::BarHandle if g("standoff") < g("width") => Some("standoff must be at least the bar width".into()),
            AssetKind::BarHandle if g("length") < 4.0 * g("width") => Some("length must be at least 4 widths".into()),
            AssetKind::Lever if g("length") < 4.0 * g("width") => Some("length must be at least 4 widths".into()),
            AssetKind::SunkenDoor if g("recess") >= 0.5 * g("h") => Some("recess must be below h / 2".into()),
            _ => None,
        }
    }

    /// Copy with parameters clamped into their ranges and validity rules.
    pub fn clamped(kind: AssetKind, params: &BTreeMap<String, f64>) -> AssetInstance {
        let asset = ConceptAsset::builtin(kind);
        let mut out: BTreeMap<String, f64> = asset
            .params
            .iter()
            .map(|s| (s.name.clone(), s.clamp(params.get(&s.name).copied().unwrap_or(s.midpoint()))))
            .collect();
        fn fix(asset: &ConceptAsset, out: &mut BTreeMap<String, f64>, name: &str, v: f64) {
            let spec = asset.param(name).expect("known parameter");
            out.insert(name.into(), spec.clamp(v));
        }
        match kind {
            AssetKind::CurveHandle => {
                let (ro, rt) = (out["R_o"], out["r_t"]);
                if rt >= 0.5 * ro {
                    fix(&asset, &mut out, "r_t", 0.5 * ro - 1e-4);
                }
            }
            AssetKind::RingHandle => {
                let (ri, ro) = (out["R_i"], out["R_o"]);
                if ro - ri < 0.006 {
                    fix(&asset, &mut out, "R_i", ro - 0.006);
                }
            }
            AssetKind::BarHandle => {
                let w = out["width"];
                if out["standoff"] < w {
                    fix(&asset, &mut out, "standoff", w);
                }
                if out["length"] < 4.0 * w {
                    let v = out["length"] / 4.0;
                    fix(&asset, &mut out, "width", v);
                }
            }
            AssetKind::Lever => {
                if out["length"] < 4.0 * out["width"] {
                    let v = out["length"] / 4.0;
                    fix(&asset, &mut out, "width", v);
                }
            }
            AssetKind::SunkenDoor => {
                if out["recess"] >= 0.5 * out["h"] {
                    let v = 0.5 * out["h"] - 1e-4;
                    fix(&asset, &mut out, "recess", v);
                }
            }
            _ => {}
        }
        AssetInstance { kind, params: out }
    }

    /// Solid occupied by the instance in its canonical frame.
    pub fn solid(&self) -> Solid {
        let g = |n: &str| self.get(n);
        match self.kind {
            AssetKind::CurveHandle => {
                Solid::ArcTube { radius: g("R_o"), tube: g("r_t"), half_angle: 0.5 * g("theta_c") }
            }
            AssetKind::RingHandle => {
                Solid::Annulus { inner: g("R_i"), outer: g("R_o"), half_thickness: 0.5 * g("thickness") }
            }
            AssetKind::BarHandle => {
                let (l, w, s) = (g("length"), g("width"), g("standoff"));
                let leg_x = 0.5 * l - 0.5 * w;
                let leg = |x: f64| Solid::Cuboid {
                    center: Vec3::new(x, 0.5 * s, 0.0),
                    half: Vec3::new(0.5 * w, 0.5 * s, 0.5 * w),
                };
                Solid::Union(vec![
                    Solid::Cuboid { center: Vec3::zeros(), half: Vec3::new(0.5 * l, 0.5 * w, 0.5 * w) },
                    leg(-leg_x),
                    leg(leg_x),
                ])
            }
            AssetKind::Knob => Solid::Cylinder {
                center: Vec3::new(0.0, -0.5 * g("depth"), 0.0),
                axis: 1,
                radius: g("radius"),
                half_len: 0.5 * g("depth"),
            },
            AssetKind::Lever => {
                let (l, w) = (g("length"), g("width"));
                Solid::Cuboid { center: Vec3::new(0.5 * l, 0.0, 0.0), half: Vec3::new(0.5 * l, 0.5 * w, 0.5 * w) }
            }
            AssetKind::SunkenDoor => {
                let (l, w, h, r) = (g("l"), g("w"), g("h"), g("recess"));
                let slab = Solid::Cuboid { center: Vec3::zeros(), half: Vec3::new(0.5 * l, 0.5 * h, 0.5 * w) };
                // The pocket pokes slightly out of the front face so its
                // opening is an exact hole in the slab surface.
                let pocket = Solid::Cuboid {
                    center: Vec3::new(0.0, -0.5 * h, 0.0),
                    half: Vec3::new(0.5 * l - SUNKEN_MARGIN, r, 0.5 * w - SUNKEN_MARGIN),
                };
                Solid::Difference(Box::new(slab), Box::new(pocket))
            }
            AssetKind::DrawerFace => Solid::Cuboid {
                center: Vec3::zeros(),
                half: Vec3::new(0.5 * g("w"), 0.5 * DRAWER_FACE_THICKNESS, 0.5 * g("h")),
            },
            AssetKind::DoorPanel => Solid::Cuboid {
                center: Vec3::zeros(),
                half: Vec3::new(0.5 * g("l"), 0.5 * g("h"), 0.5 * g("w")),
            },
            AssetKind::Housing => {
                let (w, h, d) = (g("width"), g("height"), g("depth"));
                Solid::Cuboid { center: Vec3::new(0.0, 0.5 * d, 0.5 * h), half: Vec3::new(0.5 * w, 0.5 * d, 0.5 * h) }
            }
        }
    }

    /// Signed inequality: non-positive inside or on the solid.
    pub fn constraint(&self, p: &Vec3) -> f64 {
        self.solid().sdf(p)
    }

    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<PointCloud, ConceptError> {
        if n == 0 {
            return Err(ConceptError::EmptySample);
        }
        self.check_bound()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PointCloud::new(self.solid().sample_surface(n, &mut rng)))
    }

    pub fn affordance_regions(&self) -> Vec<AffordanceRegion> {
        let g = |n: &str| self.get(n);
        let region = |id: &str, kind: RegionKind, supports: Vec<RegionSupport>, axis: Vec3, half_angle: f64| {
            AffordanceRegion { region_id: id.into(), kind, supports, approach_axis: axis, approach_half_angle: half_angle }
        };
        let face = |center: Vec3, u: Vec3, v: Vec3, half_u: f64, half_v: f64| RegionSupport::Patch {
            center,
            u,
            v,
            half_u,
            half_v,
        };
        let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
        match self.kind {
            AssetKind::CurveHandle => vec![region(
                "arc_grasp",
                RegionKind::Grasp,
                vec![RegionSupport::TubeArc { radius: g("R_o"), tube: g("r_t"), half_angle: 0.5 * g("theta_c") }],
                y,
                PI / 2.0,
            )],
            AssetKind::RingHandle => {
                let (ri, ro, t) = (g("R_i"), g("R_o"), g("thickness"));
                let sector = |zz: f64| RegionSupport::AnnulusSector {
                    inner: ri + (ro - ri) / 3.0,
                    outer: ro,
                    z: zz,
                    half_angle: PI / 3.0,
                };
                vec![region("rim_grasp", RegionKind::Grasp, vec![sector(0.5 * t), sector(-0.5 * t)], y, PI / 2.0)]
            }
            AssetKind::BarHandle => {
                let (l, w) = (g("length"), g("width"));
                let hw = 0.5 * w;
                vec![region(
                    "bar_grasp",
                    RegionKind::Grasp,
                    vec![
                        face(Vec3::new(0.0, -hw, 0.0), x, z, 0.5 * l, hw),
                        face(Vec3::new(0.0, 0.0, hw), x, y, 0.5 * l, hw),
                        face(Vec3::new(0.0, 0.0, -hw), x, y, 0.5 * l, hw),
                    ],
                    y,
                    PI / 3.0,
                )]
            }
            AssetKind::Knob => vec![region(
                "knob_grasp",
                RegionKind::Grasp,
                vec![RegionSupport::CylinderBand {
                    center: Vec3::zeros(),
                    axis: -y,
                    radius: g("radius"),
                    lo: 0.0,
                    hi: g("depth"),
                }],
                y,
                PI / 4.0,
            )],
            AssetKind::Lever => {
                let (l, w) = (g("length"), g("width"));
                let hw = 0.5 * w;
                let cx = 0.75 * l;
                vec![
                    region(
                        "tip_grasp",
                        RegionKind::Grasp,
                        vec![
                            face(Vec3::new(cx, -hw, 0.0), x, z, 0.25 * l, hw),
                            face(Vec3::new(cx, 0.0, hw), x, y, 0.25 * l, hw),
                            face(Vec3::new(cx, 0.0, -hw), x, y, 0.25 * l, hw),
                        ],
                        y,
                        PI / 3.0,
                    ),
                    region("tip_push", RegionKind::Push, vec![face(Vec3::new(cx, 0.0, -hw), x, y, 0.25 * l, hw)], z, PI / 4.0),
                ]
            }
            AssetKind::SunkenDoor | AssetKind::DoorPanel => {
                let (l, w, h) = (g("l"), g("w"), g("h"));
                let strip = |sign: f64| {
                    face(
                        Vec3::new(sign * (0.5 * l - 0.5 * DOOR_EDGE_STRIP), -0.5 * h, 0.0),
                        x,
                        z,
                        0.5 * DOOR_EDGE_STRIP,
                        0.5 * w - DOOR_EDGE_STRIP,
                    )
                };
                vec![
                    region("edge_push_left", RegionKind::Push, vec![strip(-1.0)], y, PI / 4.0),
                    region("edge_push_right", RegionKind::Push, vec![strip(1.0)], y, PI / 4.0),
                ]
            }
            AssetKind::DrawerFace => {
                let (w, h) = (g("w"), g("h"));
                vec![region(
                    "front_push",
                    RegionKind::Push,
                    vec![face(Vec3::new(0.0, -0.5 * DRAWER_FACE_THICKNESS, 0.0), x, z, 0.5 * w - 0.02, 0.5 * h - 0.02)],
                    y,
                    PI / 4.0,
                )]
            }
            AssetKind::Housing => {
                let (w, h, d) = (g("width"), g("height"), g("depth"));
                vec![region(
                    "top_push",
                    RegionKind::Push,
                    vec![face(Vec3::new(0.0, 0.5 * d, h), x, y, 0.5 * w, 0.5 * d)],
                    -z,
                    PI / 4.0,
                )]
            }
        }
    }

    /// Parameter bindings that describe the same solid up to a rigid motion,
    /// including this one. Used when comparing fits against ground truth.
    pub fn equivalent_params(&self) -> Vec<BTreeMap<String, f64>> {
        let mut out = vec![self.params.clone()];
        // Slabs turned a quarter about their thickness axis.
        let pair = match self.kind {
            AssetKind::DoorPanel | AssetKind::SunkenDoor => Some(("l", "w")),
            AssetKind::DrawerFace => Some(("w", "h")),
            _ => None,
        };
        if let Some((a, b)) = pair {
            let mut swapped = self.params.clone();
            swapped.insert(a.into(), self.get(b));
            swapped.insert(b.into(), self.get(a));
            out.push(swapped);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_instance(kind: AssetKind, rng: &mut ChaCha8Rng) -> AssetInstance {
        ConceptAsset::builtin(kind).random_instance(rng)
    }

    #[test]
    fn library_has_named_params() {
        let lib = builtin_library();
        assert!(lib.len() >= 8);
        let door = find_asset(&lib, "sunken_door").unwrap();
        for n in ["l", "w", "h"] {
            assert!(door.param(n).is_some());
        }
        let curve = find_asset(&lib, "curve_handle").unwrap();
        assert!(curve.param("R_o").is_some() && curve.param("theta_c").is_some());
        for a in &lib {
            assert!(!a.synopsis.is_empty());
            assert!(!a.affordance_annotations.is_empty());
            for p in &a.params {
                assert!(p.lower < p.upper, "{}.{}", a.asset_id, p.name);
            }
        }
    }

    #[test]
    fn prune_by_tag() {
        let lib = builtin_library();
        let ids = |v: Vec<ConceptAsset>| v.into_iter().map(|a| a.asset_id).collect::<Vec<_>>();
        assert_eq!(ids(prune(&lib, "handle")), ["curve_handle", "ring_handle", "bar_handle"]);
        let doors = ids(prune(&lib, "door"));
        assert!(doors.contains(&"sunken_door".to_string()) && doors.contains(&"door_panel".to_string()));
        assert!(prune(&lib, "teapot").is_empty());
    }

    #[test]
    fn instantiate_reports_problems() {
        let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
        let mut p: BTreeMap<String, f64> = [("R_o", 0.05), ("theta_c", 1.5)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert!(matches!(asset.instantiate(&p), Err(ConceptError::Unbound { .. })));
        p.insert("r_t".into(), 0.5);
        assert!(matches!(asset.instantiate(&p), Err(ConceptError::OutOfRange { .. })));
        p.insert("r_t".into(), 0.008);
        p.insert("bogus".into(), 1.0);
        assert!(matches!(asset.instantiate(&p), Err(ConceptError::UnknownParam { .. })));
    }

    #[test]
    fn curve_handle_samples_within_tube_annulus() {
        let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
        let p = [("R_o", 0.05), ("theta_c", PI / 2.0), ("r_t", 0.008)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let inst = asset.instantiate(&p).unwrap();
        let cloud = inst.sample_surface(2048, 3).unwrap();
        assert_eq!(cloud.len(), 2048);
        for q in &cloud.points {
            let radial = (q.x * q.x + q.y * q.y).sqrt();
            assert!(radial >= 0.05 - 0.008 - 1e-9 && radial <= 0.05 + 0.008 + 1e-9);
        }
        assert_eq!(inst.sample_surface(2048, 3).unwrap(), cloud);
        assert_eq!(inst.sample_surface(1, 3).unwrap().len(), 1);
        assert!(inst.sample_surface(0, 3).is_err());
    }

    #[test]
    fn sunken_door_centroid_inside() {
        let asset = ConceptAsset::builtin(AssetKind::SunkenDoor);
        let p = [("l", 0.4), ("w", 0.3), ("h", 0.02), ("recess", 0.005)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let inst = asset.instantiate(&p).unwrap();
        // Box membership: the centroid is 0.01 from the front and back faces,
        // and the pocket reaches 0.005 deep, leaving 0.005 of material.
        let c = inst.constraint(&Vec3::zeros());
        assert!(c < 0.0);
        assert!((c + 0.005).abs() < 1e-12);
        assert!(inst.constraint(&Vec3::new(10.0, 0.0, 0.0)) > 0.0);
    }

    #[test]
    fn all_assets_sample_on_surface_and_regions_on_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in AssetKind::ALL {
            for trial in 0..100 {
                let inst = random_instance(kind, &mut rng);
                let cloud = inst.sample_surface(64, trial).unwrap();
                assert_eq!(cloud.len(), 64, "{kind:?}");
                for p in &cloud.points {
                    assert!(inst.constraint(p).abs() <= 1e-6, "{kind:?} {p:?}");
                }
                for region in inst.affordance_regions() {
                    let mut r2 = ChaCha8Rng::seed_from_u64(trial);
                    for p in region.sample(32, &mut r2).iter().chain(region.grid(0.004).iter()) {
                        assert!(inst.constraint(p).abs() <= 1e-6, "{kind:?} {} {p:?} {}", region.region_id, inst.constraint(p));
                        assert!(region.supports.iter().any(|s| s.contains_extent(p, 1e-9)));
                    }
                }
            }
        }
    }

    #[test]
    fn region_extents_follow_params() {
        let asset = ConceptAsset::builtin(AssetKind::BarHandle);
        let p = [("length", 0.2), ("width", 0.02), ("standoff", 0.03)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let regions = asset.instantiate(&p).unwrap().affordance_regions();
        match &regions[0].supports[0] {
            RegionSupport::Patch { half_u, .. } => assert!((2.0 * half_u - 0.2).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        let curve = ConceptAsset::builtin(AssetKind::CurveHandle).nominal();
        let regions = curve.affordance_regions();
        assert_eq!(regions.len(), 1);
        match &regions[0].supports[0] {
            RegionSupport::TubeArc { half_angle, .. } => assert_eq!(*half_angle, 0.5 * curve.get("theta_c")),
            other => panic!("unexpected {other:?}"),
        }
        let door = ConceptAsset::builtin(AssetKind::SunkenDoor).nominal();
        assert!(door.affordance_regions().iter().any(|r| r.region_id.starts_with("edge_push")));
    }
}
