use std::path::Path;

use wnorient_core::geometry::Vec3;
use wnorient_core::Point3;

use super::{finite_point, parse_error, unit_normal, CloudData};
use crate::CliError;

pub(super) fn parse(path: &Path, text: &str) -> Result<CloudData, CliError> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals = body
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(parse_error(
                path,
                line,
                format!("expected 3 or 6 values, found {}", vals.len()),
            ));
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {w} values like the first line"),
                ));
            }
            _ => {}
        }
        points.push(finite_point(path, line, [vals[0], vals[1], vals[2]])?);
        if vals.len() == 6 {
            normals.push(unit_normal(path, line, [vals[3], vals[4], vals[5]])?);
        }
    }
    let normals = (width == Some(6)).then_some(normals);
    Ok(CloudData { points, normals })
}

pub(super) fn encode(points: &[Point3], normals: &[Vec3]) -> Vec<u8> {
    let mut out = String::with_capacity(points.len() * 96);
    for (p, n) in points.iter().zip(normals) {
        out.push_str(&format!(
            "{:.8e} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e}\n",
            p.x, p.y, p.z, n.x, n.y, n.z
        ));
    }
    out.into_bytes()
}
