//! Point clouds as PLY vertex lists.

use std::io::{BufReader, Read, Write};

use eac_core::{PointCloud, Vec3};
use ply_rs::parser::Parser;
use ply_rs::ply::{Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType};
use ply_rs::writer::Writer;

use crate::CliError;

/// Writes an ASCII PLY with double-precision `x y z` vertices.
pub fn write_cloud(out: &mut dyn Write, cloud: &PointCloud) -> Result<(), CliError> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = Encoding::Ascii;
    let mut vertex = ElementDef::new("vertex".into());
    for axis in ["x", "y", "z"] {
        vertex.properties.add(PropertyDef::new(axis.into(), PropertyType::Scalar(ScalarType::Double)));
    }
    ply.header.elements.add(vertex);
    let rows = cloud
        .points
        .iter()
        .map(|p| {
            let mut e = DefaultElement::new();
            e.insert("x".into(), Property::Double(p.x));
            e.insert("y".into(), Property::Double(p.y));
            e.insert("z".into(), Property::Double(p.z));
            e
        })
        .collect();
    ply.payload.insert("vertex".into(), rows);
    let mut buf = Vec::new();
    Writer::new().write_ply(&mut buf, &mut ply).map_err(|e| CliError::Runtime(format!("cannot encode PLY: {e}")))?;
    out.write_all(&buf).map_err(|e| CliError::Runtime(format!("cannot write PLY: {e}")))
}

fn coord(e: &DefaultElement, axis: &str) -> Result<f64, String> {
    match e.get(axis) {
        Some(Property::Float(v)) => Ok(*v as f64),
        Some(Property::Double(v)) => Ok(*v),
        Some(other) => Err(format!("vertex property `{axis}` has unsupported type {other:?}")),
        None => Err(format!("vertex has no `{axis}` property")),
    }
}

/// Reads the `vertex` element of an ASCII or binary PLY.
pub fn read_cloud(input: impl Read) -> Result<PointCloud, String> {
    let mut reader = BufReader::new(input);
    let ply = Parser::<DefaultElement>::new().read_ply(&mut reader).map_err(|e| format!("not a PLY file: {e}"))?;
    let vertices = ply.payload.get("vertex").ok_or("PLY has no vertex element")?;
    let points = vertices
        .iter()
        .map(|e| Ok(Vec3::new(coord(e, "x")?, coord(e, "y")?, coord(e, "z")?)))
        .collect::<Result<Vec<_>, String>>()?;
    Ok(PointCloud::new(points))
}

pub fn read_cloud_file(path: &std::path::Path) -> Result<PointCloud, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::input(&path.display().to_string(), e))?;
    read_cloud(file).map_err(|e| CliError::input(&path.display().to_string(), e))
}
