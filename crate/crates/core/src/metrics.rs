//! Per-brick error and timing series, their CSV table and SVG charts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::AssemblyLog;
use crate::geometry::Vec3;
use crate::perception::io::csv_err;

pub fn position_error(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm()
}

/// Orientation difference of two rectangles: `min_k |a − b + kπ|`, in `[0, π/2]`.
pub fn yaw_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
}

impl Aggregate {
    fn of(series: &[f64]) -> Self {
        Self {
            mean: series.iter().sum::<f64>() / series.len() as f64,
            max: series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: series.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub brick_ids: Vec<usize>,
    pub position_error_m: Vec<f64>,
    pub orientation_diff_rad: Vec<f64>,
    pub pose_time_s: Vec<f64>,
    pub traj_time_s: Vec<f64>,
    pub position_error: Aggregate,
    pub orientation_diff: Aggregate,
    pub pose_time: Aggregate,
    pub traj_time: Aggregate,
}

/// Errors compare the perception estimate with the spawn ground truth.
/// Placement is exact, so that offset is what the placed brick carries.
pub fn aggregate(log: &AssemblyLog) -> Result<MetricsSummary> {
    if log.records.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut records: Vec<_> = log.records.iter().collect();
    records.sort_by_key(|r| r.brick_id);
    let series =
        |f: &dyn Fn(&crate::executor::ExecutionRecord) -> f64| records.iter().map(|r| f(r)).collect::<Vec<_>>();
    let position_error_m = series(&|r| position_error(r.estimate.position, r.spawn.position));
    let orientation_diff_rad = series(&|r| yaw_difference(r.estimate.yaw, r.spawn.yaw));
    let pose_time_s = series(&|r| r.pose_estimate_time_s);
    let traj_time_s = series(&|r| r.trajectory_time_s);
    Ok(MetricsSummary {
        brick_ids: records.iter().map(|r| r.brick_id).collect(),
        position_error: Aggregate::of(&position_error_m),
        orientation_diff: Aggregate::of(&orientation_diff_rad),
        pose_time: Aggregate::of(&pose_time_s),
        traj_time: Aggregate::of(&traj_time_s),
        position_error_m,
        orientation_diff_rad,
        pose_time_s,
        traj_time_s,
    })
}

pub const CSV_HEADER: [&str; 5] = [
    "brick",
    "position_error_m",
    "orientation_diff_deg",
    "pose_time_s",
    "traj_time_s",
];

/// One row of the metrics table, orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub brick: usize,
    pub position_error_m: f64,
    pub orientation_diff_deg: f64,
    pub pose_time_s: f64,
    pub traj_time_s: f64,
}

impl MetricsSummary {
    pub fn rows(&self) -> Vec<MetricsRow> {
        (0..self.brick_ids.len())
            .map(|i| MetricsRow {
                brick: self.brick_ids[i],
                position_error_m: self.position_error_m[i],
                orientation_diff_deg: self.orientation_diff_rad[i].to_degrees(),
                pose_time_s: self.pose_time_s[i],
                traj_time_s: self.traj_time_s[i],
            })
            .collect()
    }
}

/// Header plus one row per brick. Floats use the shortest representation
/// that parses back to the same value.
pub fn emit_csv(summary: &MetricsSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in summary.rows() {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

struct Chart<'a> {
    file: &'a str,
    title: &'a str,
    y_label: &'a str,
    values: Vec<f64>,
}

/// Writes one scatter-and-line chart per metric into `dir` and returns the
/// paths in a fixed order.
pub fn emit_svg_plots(summary: &MetricsSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    let charts = [
        Chart {
            file: "position_error.svg",
            title: "Position error",
            y_label: "position error (m)",
            values: summary.position_error_m.clone(),
        },
        Chart {
            file: "orientation_diff.svg",
            title: "Orientation difference",
            y_label: "orientation difference (deg)",
            values: summary.orientation_diff_rad.iter().map(|r| r.to_degrees()).collect(),
        },
        Chart {
            file: "pose_time.svg",
            title: "Pose estimation time",
            y_label: "pose estimation time (s)",
            values: summary.pose_time_s.clone(),
        },
        Chart {
            file: "traj_time.svg",
            title: "Trajectory time",
            y_label: "trajectory time (s)",
            values: summary.traj_time_s.clone(),
        },
    ];
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for chart in &charts {
        let path = dir.join(chart.file);
        std::fs::write(&path, chart_svg(chart, &summary.brick_ids)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

fn chart_svg(chart: &Chart, ids: &[usize]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;

    let x_max = ids.iter().copied().max().unwrap_or(0).max(1) as f64;
    let y_max = chart.values.iter().copied().fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let px = |x: f64| LEFT + x / x_max * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - y / y_max * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        chart.title
    );
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            tick(v)
        );
        let xv = x_max * k as f64 / 4.0;
        let x = px(xv);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick(xv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">brick index</text>"#,
        (x0 + x1) / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        chart.y_label
    );
    let points: Vec<String> = ids
        .iter()
        .zip(&chart.values)
        .map(|(&i, &v)| format!("{:.2},{:.2}", px(i as f64), py(v)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#3060c0"/>"##,
        points.join(" ")
    );
    for p in &points {
        let (x, y) = p.split_once(',').expect("formatted pair");
        let _ = writeln!(
            s,
            r##"<circle class="sample" cx="{x}" cy="{y}" r="2.5" fill="#3060c0"/>"##
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::BrickPose;
    use crate::executor::{ExecutionRecord, ASSEMBLY_SCHEMA};
    use std::f64::consts::FRAC_PI_2;

    fn record(id: usize, err: f64, dyaw: f64) -> ExecutionRecord {
        let pose = BrickPose {
            position: Vec3::new(1.0, 2.0, 0.0125),
            yaw: 0.4,
        };
        ExecutionRecord {
            brick_id: id,
            commanded_target: pose,
            achieved: pose,
            spawn: pose,
            estimate: BrickPose {
                position: pose.position + Vec3::new(err, 0.0, 0.0),
                yaw: pose.yaw + dyaw,
            },
            trajectory_time_s: 4.0 + id as f64 / 7.0,
            pose_estimate_time_s: 0.1 + id as f64 / 3000.0,
        }
    }

    fn log(n: usize) -> AssemblyLog {
        AssemblyLog {
            schema: ASSEMBLY_SCHEMA.into(),
            seed: 0,
            records: (0..n)
                .map(|i| record(i, 0.001 * i as f64 / 3.0, 0.0001 * i as f64))
                .collect(),
            attempts: vec![1; n],
        }
    }

    #[test]
    fn position_error_examples() {
        assert!((position_error(Vec3::ZERO, Vec3::new(0.003, 0.004, 0.0)) - 0.005).abs() < 1e-15);
        assert_eq!(position_error(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 3.0)), 0.0);
        assert_eq!(position_error(Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO), 1.0);
    }

    #[test]
    fn yaw_difference_examples() {
        assert!(yaw_difference(0.1, 0.1 + PI) < 1e-15);
        assert_eq!(yaw_difference(0.0, FRAC_PI_2), FRAC_PI_2);
        assert!((yaw_difference(0.02, -0.03) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn single_record_aggregates() {
        let mut l = log(0);
        l.records.push(record(0, 0.002, 0.01));
        let s = aggregate(&l).unwrap();
        for a in [s.position_error, s.orientation_diff, s.pose_time, s.traj_time] {
            assert_eq!(a.mean, a.max);
            assert_eq!(a.min, a.max);
        }
        assert!((s.position_error.mean - 0.002).abs() < 1e-15);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(aggregate(&log(0)), Err(Error::EmptyLog)));
    }

    #[test]
    fn zero_errors_zero_aggregates() {
        let mut l = log(3);
        for r in &mut l.records {
            r.estimate = r.spawn;
        }
        let s = aggregate(&l).unwrap();
        assert_eq!(
            s.position_error,
            Aggregate {
                mean: 0.0,
                max: 0.0,
                min: 0.0
            }
        );
        assert_eq!(
            s.orientation_diff,
            Aggregate {
                mean: 0.0,
                max: 0.0,
                min: 0.0
            }
        );
    }

    #[test]
    fn csv_has_header_and_round_trips() {
        let s = aggregate(&log(136)).unwrap();
        assert_eq!(s.traj_time_s.len(), 136);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        emit_csv(&s, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 137);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(read_csv(&path).unwrap(), s.rows());
    }

    #[test]
    fn four_named_plots() {
        let s = aggregate(&log(10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_svg_plots(&s, dir.path()).unwrap();
        let names: Vec<_> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(
            names,
            [
                "position_error.svg",
                "orientation_diff.svg",
                "pose_time.svg",
                "traj_time.svg"
            ]
        );
        let svg = std::fs::read_to_string(&paths[1]).unwrap();
        assert!(svg.contains("(deg)"));
        assert_eq!(svg.matches(r#"class="sample""#).count(), 10);
        // deterministic markup
        let again = emit_svg_plots(&s, dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&again[1]).unwrap(), svg);
    }
}
