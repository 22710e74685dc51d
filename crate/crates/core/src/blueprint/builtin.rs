//! Builtin articulated-object blueprints. Object frames put the origin at the
//! bottom of the body's front plane (y = 0), with the front facing -y.

use std::collections::BTreeMap;

use super::{Expr, JointKind, JointTemplate, MountTemplate, PartNode, StructuralBlueprint};
use crate::concepts::{AssetKind, ParamRole, ParamSpec};
use crate::geom::Vec3;

pub const BUILTIN_IDS: [&str; 6] = ["microwave", "cabinet", "drawer", "lever", "knob_door", "faucet"];

fn e(s: &str) -> Expr {
    Expr::parse(s).unwrap_or_else(|err| panic!("builtin expression `{s}`: {err}"))
}

fn fp(name: &str, lower: f64, upper: f64, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        lower,
        upper,
        unit: "m".into(),
        description: description.into(),
        role: ParamRole::Geometric,
    }
}

fn angle(name: &str, lower: f64, upper: f64, description: &str) -> ParamSpec {
    ParamSpec { unit: "rad".into(), ..fp(name, lower, upper, description) }
}

fn mount(t: [&str; 3], rpy: [&str; 3]) -> MountTemplate {
    MountTemplate { translation: t.map(e), rpy: rpy.map(e) }
}

fn part(id: &str, asset: AssetKind, params: &[(&str, &str)], parent: Option<&str>, m: MountTemplate) -> PartNode {
    PartNode {
        part_id: id.into(),
        asset,
        params: params.iter().map(|(k, v)| (k.to_string(), e(v))).collect::<BTreeMap<_, _>>(),
        mount: m,
        parent: parent.map(str::to_string),
        joint: None,
    }
}

fn joint(id: &str, kind: JointKind, anchor: [&str; 3], axis: Vec3, range: [&str; 2], opening_sign: f64) -> JointTemplate {
    JointTemplate { joint_id: id.into(), kind, anchor: anchor.map(e), axis, range: range.map(e), opening_sign }
}

fn body(w: (f64, f64), h: (f64, f64), d: (f64, f64)) -> (Vec<ParamSpec>, PartNode) {
    (
        vec![fp("W", w.0, w.1, "body width"), fp("H", h.0, h.1, "body height"), fp("D", d.0, d.1, "body depth")],
        part("body", AssetKind::Housing, &[("width", "W"), ("height", "H"), ("depth", "D")], None, MountTemplate::identity()),
    )
}

fn microwave() -> StructuralBlueprint {
    let (mut free, body) = body((0.4, 0.6), (0.28, 0.4), (0.3, 0.45));
    free.extend([
        fp("t_d", 0.015, 0.03, "door thickness"),
        fp("R_o", 0.05, 0.09, "handle arc radius"),
        angle("theta_c", 1.8, 2.8, "handle arc angle"),
        fp("r_t", 0.005, 0.01, "handle tube radius"),
    ]);
    let mut door = part(
        "door",
        AssetKind::DoorPanel,
        &[("l", "0.7*W"), ("w", "H - 0.02"), ("h", "t_d")],
        Some("body"),
        mount(["-W/2 + 0.01 + 0.35*W", "-t_d/2", "H/2"], ["0", "0", "0"]),
    );
    door.joint = Some(joint("door_hinge", JointKind::Revolute, ["-W/2 + 0.01", "-t_d", "0"], Vec3::z(), ["-1.9", "0"], -1.0));
    let handle = part(
        "handle",
        AssetKind::CurveHandle,
        &[("R_o", "R_o"), ("theta_c", "theta_c"), ("r_t", "r_t")],
        Some("door"),
        mount(["0.35*W - 0.06", "-t_d/2 + R_o*math::cos(theta_c/2)", "0"], ["0", "-pi/2", "0"]),
    );
    StructuralBlueprint {
        blueprint_id: "microwave".into(),
        category: "microwave".into(),
        description: "Box body with a left-hinged door carrying a vertical curved handle near its free edge.".into(),
        task_part: "handle".into(),
        free_params: free,
        parts: vec![body, door, handle],
    }
}

fn cabinet() -> StructuralBlueprint {
    let (mut free, body) = body((0.4, 0.7), (0.5, 0.8), (0.35, 0.5));
    free.extend([
        fp("t_d", 0.018, 0.03, "door thickness"),
        fp("R_o", 0.03, 0.05, "ring outer radius"),
        fp("R_i", 0.015, 0.024, "ring inner radius"),
        fp("t_r", 0.005, 0.01, "ring thickness"),
    ]);
    let mut door = part(
        "door",
        AssetKind::SunkenDoor,
        &[("l", "W - 0.02"), ("w", "H - 0.02"), ("h", "t_d"), ("recess", "0.006")],
        Some("body"),
        mount(["0", "-t_d/2", "H/2"], ["0", "0", "0"]),
    );
    door.joint = Some(joint("door_hinge", JointKind::Revolute, ["W/2 - 0.01", "-t_d", "0"], Vec3::z(), ["0", "1.9"], 1.0));
    let handle = part(
        "handle",
        AssetKind::RingHandle,
        &[("R_i", "R_i"), ("R_o", "R_o"), ("thickness", "t_r")],
        Some("door"),
        mount(["-(W - 0.02)/2 + 0.1", "-t_d/2 + 0.006 - R_o", "0"], ["0", "0", "0"]),
    );
    StructuralBlueprint {
        blueprint_id: "cabinet".into(),
        category: "cabinet".into(),
        description: "Cabinet with a right-hinged sunken door and a ring pull near the left edge.".into(),
        task_part: "handle".into(),
        free_params: free,
        parts: vec![body, door, handle],
    }
}

fn drawer() -> StructuralBlueprint {
    let (mut free, body) = body((0.4, 0.6), (0.15, 0.3), (0.35, 0.5));
    free.extend([
        fp("travel", 0.2, 0.4, "drawer slide travel"),
        fp("L_b", 0.1, 0.25, "bar handle length"),
        fp("w_b", 0.012, 0.025, "bar handle width"),
        fp("s_b", 0.025, 0.04, "bar handle standoff"),
    ]);
    let mut front = part(
        "front",
        AssetKind::DrawerFace,
        &[("w", "W - 0.02"), ("h", "H - 0.02"), ("pull_travel", "travel")],
        Some("body"),
        mount(["0", "-0.009", "H/2"], ["0", "0", "0"]),
    );
    front.joint = Some(joint("slide", JointKind::Prismatic, ["0", "0", "0"], -Vec3::y(), ["0", "travel"], 1.0));
    let handle = part(
        "handle",
        AssetKind::BarHandle,
        &[("length", "L_b"), ("width", "w_b"), ("standoff", "s_b")],
        Some("front"),
        mount(["0", "-0.009 - s_b", "0"], ["0", "0", "0"]),
    );
    StructuralBlueprint {
        blueprint_id: "drawer".into(),
        category: "drawer".into(),
        description: "Chest with one sliding drawer opened by a horizontal bar handle.".into(),
        task_part: "handle".into(),
        free_params: free,
        parts: vec![body, front, handle],
    }
}

fn lever() -> StructuralBlueprint {
    let (mut free, body) = body((0.12, 0.2), (0.15, 0.25), (0.05, 0.1));
    free.extend([fp("L_l", 0.08, 0.16, "lever length"), fp("w_l", 0.012, 0.02, "lever width")]);
    let mut lever = part(
        "lever",
        AssetKind::Lever,
        &[("length", "L_l"), ("width", "w_l")],
        Some("body"),
        mount(["-W/4", "-0.03", "0.6*H"], ["0", "0", "0"]),
    );
    lever.joint = Some(joint("pivot", JointKind::Revolute, ["-W/4", "-0.03", "0.6*H"], Vec3::y(), ["0", "1.2"], 1.0));
    StructuralBlueprint {
        blueprint_id: "lever".into(),
        category: "lever".into(),
        description: "Wall box with a horizontal lever pivoting in front of it; opening presses the lever down.".into(),
        task_part: "lever".into(),
        free_params: free,
        parts: vec![body, lever],
    }
}

fn knob_door() -> StructuralBlueprint {
    let (mut free, body) = body((0.4, 0.7), (0.5, 0.8), (0.35, 0.5));
    free.extend([
        fp("t_d", 0.018, 0.03, "door thickness"),
        fp("k_r", 0.025, 0.033, "knob radius"),
        fp("k_d", 0.02, 0.035, "knob depth"),
    ]);
    let mut door = part(
        "door",
        AssetKind::DoorPanel,
        &[("l", "W - 0.02"), ("w", "H - 0.02"), ("h", "t_d")],
        Some("body"),
        mount(["0", "-t_d/2", "H/2"], ["0", "0", "0"]),
    );
    door.joint = Some(joint("door_hinge", JointKind::Revolute, ["W/2 - 0.01", "-t_d", "0"], Vec3::z(), ["0", "1.9"], 1.0));
    let knob = part(
        "knob",
        AssetKind::Knob,
        &[("radius", "k_r"), ("depth", "k_d"), ("n", "6")],
        Some("door"),
        mount(["-(W - 0.02)/2 + 0.06", "-t_d/2", "0"], ["0", "0", "0"]),
    );
    StructuralBlueprint {
        blueprint_id: "knob_door".into(),
        category: "knob_door".into(),
        description: "Cabinet with a right-hinged flat door opened by a round knob.".into(),
        task_part: "knob".into(),
        free_params: free,
        parts: vec![body, door, knob],
    }
}

fn faucet() -> StructuralBlueprint {
    let (mut free, body) = body((0.08, 0.12), (0.15, 0.25), (0.08, 0.12));
    free.extend([fp("L_f", 0.08, 0.14, "handle length"), fp("w_f", 0.012, 0.02, "handle width")]);
    let mut lever = part(
        "lever",
        AssetKind::Lever,
        &[("length", "L_f"), ("width", "w_f")],
        Some("body"),
        mount(["0", "D/2", "H + 0.03"], ["-pi/2", "0", "0"]),
    );
    lever.joint = Some(joint("swivel", JointKind::Revolute, ["0", "D/2", "H + 0.03"], Vec3::z(), ["-1.4", "0"], -1.0));
    StructuralBlueprint {
        blueprint_id: "faucet".into(),
        category: "faucet".into(),
        description: "Faucet body with a horizontal handle on top that swings toward the front to open.".into(),
        task_part: "lever".into(),
        free_params: free,
        parts: vec![body, lever],
    }
}

pub fn builtin_blueprints() -> Vec<StructuralBlueprint> {
    vec![microwave(), cabinet(), drawer(), lever(), knob_door(), faucet()]
}

pub fn builtin_blueprint(id: &str) -> Option<StructuralBlueprint> {
    builtin_blueprints().into_iter().find(|b| b.blueprint_id == id)
}
