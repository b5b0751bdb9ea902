//! Point cloud and depth frame files.
//!
//! Clouds: ASCII PLY (`double` x/y/z vertex properties) and CSV with an
//! `x,y,z` header. Depth frames: binary 16-bit PGM in millimeters and CSV
//! with one image row per line.

use std::fmt::Write as _;
use std::path::Path;

use super::{DepthImage, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

fn parse_err(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        location: location.into(),
        message: message.into(),
    }
}

pub fn ply_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ply\nformat ascii 1.0\nelement vertex {}", cloud.points.len());
    let _ = writeln!(
        out,
        "property double x\nproperty double y\nproperty double z\nend_header"
    );
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    std::fs::write(path, ply_string(cloud)).map_err(|e| Error::io(path, e))
}

/// Reads an ASCII PLY with a vertex element whose first three properties
/// are x, y, z. Other elements are ignored.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text, path)
}

fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(parse_err(path, "line 1", "missing 'ply' magic"));
    }
    let mut vertices = None;
    let mut before_vertex = 0usize;
    let mut props = Vec::new();
    let mut in_vertex = false;
    let mut header_end = None;
    for (n, line) in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", fmt, _] if *fmt != "ascii" => {
                return Err(parse_err(
                    path,
                    format!("line {}", n + 1),
                    format!("unsupported format {fmt}"),
                ));
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(path, format!("line {}", n + 1), "bad element count"))?;
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertices = Some(count);
                } else if vertices.is_none() {
                    before_vertex += count;
                }
            }
            ["property", .., name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => {
                header_end = Some(n);
                break;
            }
            _ => {}
        }
    }
    let header_end = header_end.ok_or_else(|| parse_err(path, "header", "missing end_header"))?;
    let count = vertices.ok_or_else(|| parse_err(path, "header", "no vertex element"))?;
    if props.len() < 3 || props[..3] != ["x", "y", "z"] {
        return Err(parse_err(path, "header", "vertex properties must start with x y z"));
    }
    let mut points = Vec::with_capacity(count);
    for (n, line) in lines.skip(before_vertex).take(count) {
        let loc = || format!("line {}", n + 1);
        let vals = line
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, loc(), e.to_string()))?;
        if vals.len() < 3 || vals.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, loc(), "expected three finite coordinates"));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    if points.len() != count {
        return Err(parse_err(
            path,
            format!("line {}", header_end + 2 + before_vertex + points.len()),
            format!("expected {count} vertices, found {}", points.len()),
        ));
    }
    Ok(PointCloud { points })
}

pub fn write_cloud_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["x", "y", "z"]).map_err(|e| csv_err(path, e))?;
    for p in &cloud.points {
        w.serialize((p.x, p.y, p.z)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cloud_csv(path: &Path) -> Result<PointCloud> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut points = Vec::new();
    for row in r.deserialize::<(f64, f64, f64)>() {
        let (x, y, z) = row.map_err(|e| csv_err(path, e))?;
        points.push(Vec3::new(x, y, z));
    }
    Ok(PointCloud { points })
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let location = e
        .position()
        .map_or_else(|| "file".to_string(), |p| format!("line {}", p.line()));
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_err(path, location, format!("{kind:?}")),
    }
}

/// Binary 16-bit PGM, depth rounded to whole millimeters and clamped to 65535.
pub fn pgm_bytes(depth: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", depth.width, depth.height).into_bytes();
    out.reserve(2 * depth.depths.len());
    for &d in &depth.depths {
        let mm = (d * 1000.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

pub fn write_depth_pgm(depth: &DepthImage, path: &Path) -> Result<()> {
    std::fs::write(path, pgm_bytes(depth)).map_err(|e| Error::io(path, e))
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // header: magic, width, height, maxval, then one whitespace byte
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(parse_err(path, "header", "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    i += 1;
    if fields[0] != "P5" {
        return Err(parse_err(path, "header", format!("expected P5, found {}", fields[0])));
    }
    let num = |k: usize| {
        fields[k]
            .parse::<u32>()
            .map_err(|_| parse_err(path, "header", format!("bad number {}", fields[k])))
    };
    let (width, height, maxval) = (num(1)?, num(2)?, num(3)?);
    if !(256..=65535).contains(&maxval) {
        return Err(parse_err(
            path,
            "header",
            format!("expected 16-bit maxval, found {maxval}"),
        ));
    }
    let n = width as usize * height as usize;
    let body = bytes
        .get(i..i + 2 * n)
        .ok_or_else(|| parse_err(path, "body", "truncated pixel data"))?;
    let depths = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 1000.0)
        .collect();
    Ok(DepthImage { width, height, depths })
}

/// One image row per line, no header.
pub fn write_depth_csv(depth: &DepthImage, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    for row in depth.depths.chunks(depth.width.max(1) as usize) {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_depth_csv(path: &Path) -> Result<DepthImage> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut depths = Vec::new();
    let mut width = 0;
    let mut height = 0u32;
    for row in r.deserialize::<Vec<f64>>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if let Some(bad) = row.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(parse_err(
                path,
                format!("line {}", height + 1),
                format!("invalid depth {bad}"),
            ));
        }
        width = row.len() as u32;
        depths.extend(row);
        height += 1;
    }
    Ok(DepthImage { width, height, depths })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> PointCloud {
        PointCloud {
            points: vec![Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0 / 3.0, 2e-9, -5.5)],
        }
    }

    #[test]
    fn ply_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_ply(&cloud(), &path).unwrap();
        assert_eq!(read_ply(&path).unwrap(), cloud());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_cloud_csv(&cloud(), &path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("x,y,z\n"));
        assert_eq!(read_cloud_csv(&path).unwrap(), cloud());
    }

    #[test]
    fn ply_truncated_body_is_parse_error() {
        let text = ply_string(&cloud());
        let cut = &text[..text.trim_end().rfind('\n').unwrap()];
        let err = parse_ply(cut, Path::new("x.ply")).unwrap_err();
        assert_eq!(err.kind(), "ParseError");
    }

    #[test]
    fn depth_round_trips() {
        let img = DepthImage {
            width: 3,
            height: 2,
            depths: vec![0.0, 1.0, 0.975, 1.2344, 2.5, 0.0004],
        };
        let dir = tempfile::tempdir().unwrap();
        let pgm = dir.path().join("d.pgm");
        write_depth_pgm(&img, &pgm).unwrap();
        let back = read_depth_pgm(&pgm).unwrap();
        assert_eq!(back.depths, vec![0.0, 1.0, 0.975, 1.234, 2.5, 0.0]);

        let csv_path = dir.path().join("d.csv");
        write_depth_csv(&img, &csv_path).unwrap();
        assert_eq!(read_depth_csv(&csv_path).unwrap(), img);
    }
}
