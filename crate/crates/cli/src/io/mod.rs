//! Point-cloud files: ASCII XYZ and PLY (ASCII or binary little-endian).

mod ply;
mod xyz;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wnorient_core::geometry::Vec3;
use wnorient_core::Point3;

use crate::CliError;

/// Normals whose length is off by more than this are rescaled on load.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xyz,
    Ply,
}

impl Format {
    /// `.ply` (any case) is PLY, everything else XYZ.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => Format::Ply,
            _ => Format::Xyz,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" => Ok(Format::Xyz),
            "ply" => Ok(Format::Ply),
            other => Err(format!("unknown format {other:?} (expected xyz or ply)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Xyz => "xyz",
            Format::Ply => "ply",
        })
    }
}

/// Positions plus the normals stored in the file, if any.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CloudData {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vec3>>,
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn finite_point(path: &Path, line: usize, c: [f64; 3]) -> Result<Point3, CliError> {
    if c.iter().all(|x| x.is_finite()) {
        Ok(Point3::from(c))
    } else {
        Err(parse_error(path, line, "non-finite coordinate"))
    }
}

pub(crate) fn unit_normal(path: &Path, line: usize, c: [f64; 3]) -> Result<Vec3, CliError> {
    let n = finite_point(path, line, c)?;
    let len = n.norm();
    if len == 0.0 {
        return Err(parse_error(path, line, "zero-length normal"));
    }
    Ok(if (len - 1.0).abs() > RENORMALIZE_TOLERANCE {
        n / len
    } else {
        n
    })
}

pub fn read_point_cloud(path: &Path, format: Format) -> Result<CloudData, CliError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    match format {
        Format::Xyz => {
            let text = std::str::from_utf8(&bytes).map_err(|_| parse_error(path, 0, "not UTF-8 text"))?;
            xyz::parse(path, text)
        }
        Format::Ply => ply::parse(path, &bytes),
    }
}

/// Renders `points` with `normals` as file contents. ASCII output uses nine
/// significant digits, so equal inputs give equal bytes.
pub fn encode_oriented_cloud(points: &[Point3], normals: &[Vec3], format: Format) -> Result<Vec<u8>, CliError> {
    if normals.is_empty() && !points.is_empty() {
        return Err(CliError::Config("cannot write a cloud without normals".into()));
    }
    if normals.len() != points.len() {
        return Err(CliError::Config(format!(
            "{} points but {} normals",
            points.len(),
            normals.len()
        )));
    }
    Ok(match format {
        Format::Xyz => xyz::encode(points, normals),
        Format::Ply => ply::encode(points, normals),
    })
}

pub fn write_oriented_cloud(points: &[Point3], normals: &[Vec3], path: &Path, format: Format) -> Result<(), CliError> {
    let bytes = encode_oriented_cloud(points, normals, format)?;
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// One `x y z w` line per examination point.
pub fn encode_exam_points(points: &[Point3], values: &[f64]) -> Vec<u8> {
    let mut out = String::with_capacity(points.len() * 64);
    for (p, w) in points.iter().zip(values) {
        out.push_str(&format!("{:.8e} {:.8e} {:.8e} {:.8e}\n", p.x, p.y, p.z, w));
    }
    out.into_bytes()
}

/// Writes every file or none: contents go to temporaries first and are
/// renamed into place only when all of them were written.
pub fn write_all_or_nothing(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let mut staged: Vec<PathBuf> = Vec::new();
    let cleanup = |staged: &[PathBuf]| {
        for t in staged {
            let _ = fs::remove_file(t);
        }
    };
    for (path, bytes) in files {
        let tmp = staging_path(path);
        if let Err(e) = fs::write(&tmp, bytes) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(io_error(path, e));
        }
        staged.push(tmp);
    }
    for (k, (path, _)) in files.iter().enumerate() {
        if let Err(e) = fs::rename(&staged[k], path) {
            cleanup(&staged[k..]);
            for (done, _) in &files[..k] {
                let _ = fs::remove_file(done);
            }
            return Err(io_error(path, e));
        }
    }
    Ok(())
}

fn staging_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".partial-{}", std::process::id()));
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_from_path_and_str() {
        assert_eq!(Format::from_path(Path::new("a/b.PLY")), Format::Ply);
        assert_eq!(Format::from_path(Path::new("a/b.xyz")), Format::Xyz);
        assert_eq!(Format::from_path(Path::new("noext")), Format::Xyz);
        assert_eq!("Ply".parse::<Format>().unwrap(), Format::Ply);
        assert!("obj".parse::<Format>().is_err());
    }

    #[test]
    fn normals_are_renormalized() {
        let p = Path::new("x");
        let n = unit_normal(p, 1, [0.0, 0.0, 2.0]).unwrap();
        assert_eq!(n, Point3::new(0.0, 0.0, 1.0));
        let tiny = 1.0 + 1e-9;
        assert_eq!(unit_normal(p, 1, [0.0, tiny, 0.0]).unwrap().y, tiny);
        assert!(unit_normal(p, 1, [0.0; 3]).is_err());
        assert!(unit_normal(p, 1, [f64::NAN, 0.0, 1.0]).is_err());
    }

    #[test]
    fn writing_requires_normals() {
        let pts = [Point3::ZERO];
        assert!(encode_oriented_cloud(&pts, &[], Format::Xyz).is_err());
    }
}
