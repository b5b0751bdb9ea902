//! The four workflows behind the command line: generate, estimate,
//! simulate and report. Each writes its documents and returns what it did.

use std::path::{Path, PathBuf};

use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::column::{
    build_column, export_obj, export_svg_topview, validate_column, BrickDims, BrickPose, ColumnModel, LayerSelection,
    ValidationReport,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::executor::{run_assembly, AssemblyLog};
use crate::geometry::{Vec2, Vec3};
use crate::metrics::{aggregate, emit_csv, emit_svg_plots, MetricsSummary};
use crate::perception::io::{read_cloud_csv, read_ply, write_ply};
use crate::perception::{
    backproject, estimate_brick_pose, estimate_from_depth, filter_roi, mlesac_plane, render_depth, EstimatedPose,
    MlesacParams, PerceptionConfig, PointCloud, Scene,
};

pub const MODEL_SCHEMA: &str = "spiralbrick.model/1";
pub const ESTIMATE_SCHEMA: &str = "spiralbrick.estimate/1";
pub const REPORT_SCHEMA: &str = "spiralbrick.report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub validation: ValidationReport,
    pub model: ColumnModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDocument {
    pub schema: String,
    pub estimate: EstimatedPose,
    pub pose: BrickPose,
    /// Ground truth when the frame was synthesized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<BrickPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub bricks: usize,
    pub summary: MetricsSummary,
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path: path.display().to_string(),
            location: format!("line {} column {} ({field})", inner.line(), inner.column()),
            message: inner.to_string(),
        }
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Builds and checks the column. An overlapping layout is an error.
pub fn build_model(cfg: &RunConfig) -> Result<ModelDocument> {
    let model = build_column(&cfg.column_spec()?)?;
    let validation = validate_column(&model);
    if let Some(o) = validation.overlaps.first() {
        return Err(Error::Geometry(format!(
            "{} overlapping brick pairs, first in layer {} between bricks {} and {}",
            validation.overlaps.len(),
            o.layer,
            o.first,
            o.second
        )));
    }
    Ok(ModelDocument {
        schema: MODEL_SCHEMA.to_string(),
        validation,
        model,
    })
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOutputs {
    pub obj: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// Writes `model.json` into `out` plus the requested exports.
pub fn generate(cfg: &RunConfig, out: &Path, extra: &GenerateOutputs) -> Result<ModelDocument> {
    let doc = build_model(cfg)?;
    create_dir(out)?;
    write_json(&doc, &out.join("model.json"))?;
    if let Some(p) = &extra.obj {
        export_obj(&doc.model, p)?;
    }
    if let Some(p) = &extra.svg {
        export_svg_topview(&doc.model, LayerSelection::All, p)?;
    }
    info!(
        "{} bricks in {} layers written to {}",
        doc.model.placements.len(),
        doc.model.spec.layers,
        out.display()
    );
    Ok(doc)
}

/// Where `estimate` takes its points from.
#[derive(Debug, Clone)]
pub enum EstimateSource {
    /// A PLY or CSV point cloud in world coordinates.
    Cloud(PathBuf),
    /// A rendered frame of a brick at `(x, y, yaw)`, camera hovering above it.
    Synthetic { x: f64, y: f64, yaw: f64 },
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => read_ply(path),
        Some(e) if e.eq_ignore_ascii_case("csv") => read_cloud_csv(path),
        _ => Err(Error::Parse {
            path: path.display().to_string(),
            location: "file name".into(),
            message: "point clouds must end in .ply or .csv".into(),
        }),
    }
}

/// Estimates one brick pose. A synthetic frame is optionally saved as PLY
/// to `save_cloud`.
pub fn estimate(
    source: &EstimateSource,
    dims: &BrickDims,
    perception: &PerceptionConfig,
    seed: u64,
    save_cloud: Option<&Path>,
) -> Result<EstimateDocument> {
    let (estimate, truth) = match source {
        EstimateSource::Cloud(path) => {
            let cloud = read_cloud(path)?;
            let start = std::time::Instant::now();
            let fit = mlesac_plane(
                &cloud,
                &MlesacParams {
                    seed,
                    ..perception.mlesac
                },
            )?;
            let roi = filter_roi(&cloud, &fit.plane, perception.band_for(dims))?;
            let mut est = estimate_brick_pose(&roi, &fit.plane, dims)?;
            est.timestamp_ms = start.elapsed().as_secs_f64() * 1e3;
            (est, None)
        }
        &EstimateSource::Synthetic { x, y, yaw } => {
            let truth = BrickPose {
                position: Vec3::new(x, y, dims.h / 2.0),
                yaw,
            };
            let camera = perception.camera_over(Vec2::new(x, y), 0.0);
            camera.validate()?;
            let scene = Scene {
                plane_z: 0.0,
                brick: Some((truth, *dims)),
            };
            let depth = render_depth(&scene, &camera, perception.noise_sigma, seed)?;
            if let Some(p) = save_cloud {
                write_ply(&backproject(&depth, &camera), p)?;
            }
            let fit_seed = seed.wrapping_add(1);
            (
                estimate_from_depth(&depth, &camera, dims, perception, fit_seed)?,
                Some(truth),
            )
        }
    };
    Ok(EstimateDocument {
        schema: ESTIMATE_SCHEMA.to_string(),
        pose: estimate.brick_pose(dims),
        estimate,
        truth,
    })
}

/// Files of a simulate run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn log(&self) -> PathBuf {
        self.root.join("log.json")
    }
    pub fn clouds(&self) -> PathBuf {
        self.root.join("clouds")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Full assembly run. Writes config, model, log and report into `out`;
/// with `save_clouds` every rendered frame goes to `clouds/` as PLY.
pub fn simulate(cfg: &RunConfig, out: &Path, save_clouds: bool) -> Result<(ModelDocument, AssemblyLog)> {
    let dir = RunDir::new(out);
    create_dir(out)?;
    write_json(cfg, &dir.config())?;
    let doc = build_model(cfg)?;
    write_json(&doc, &dir.model())?;
    if save_clouds {
        create_dir(&dir.clouds())?;
    }
    let clouds = dir.clouds();
    let log = run_assembly(&doc.model, &cfg.assembly_settings(), |brick, attempt, depth, camera| {
        if save_clouds {
            let path = clouds.join(format!("brick_{brick:04}_{attempt}.ply"));
            write_ply(&backproject(depth, camera), &path)?;
        }
        Ok(())
    })?;
    write_json(&log, &dir.log())?;
    report(out)?;
    Ok((doc, log))
}

/// Reads `log.json` from a run directory and writes `report/`: the metrics
/// table, four charts and a summary document.
pub fn report(run_dir: &Path) -> Result<ReportDocument> {
    let dir = RunDir::new(run_dir);
    let log: AssemblyLog = read_json(&dir.log())?;
    let summary = aggregate(&log)?;
    let out = dir.report();
    create_dir(&out)?;
    emit_csv(&summary, &out.join("metrics.csv"))?;
    emit_svg_plots(&summary, &out)?;
    let doc = ReportDocument {
        schema: REPORT_SCHEMA.to_string(),
        bricks: summary.brick_ids.len(),
        summary,
    };
    write_json(&doc, &out.join("summary.json"))?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize_half_turn;

    #[test]
    fn synthetic_estimate_matches_truth() {
        let doc = estimate(
            &EstimateSource::Synthetic {
                x: 0.4,
                y: -0.3,
                yaw: 0.6,
            },
            &BrickDims::STANDARD,
            &PerceptionConfig {
                noise_sigma: 0.0,
                ..Default::default()
            },
            3,
            None,
        )
        .unwrap();
        let truth = doc.truth.unwrap();
        assert!((doc.pose.position - truth.position).norm() < 1e-3);
        let d = normalize_half_turn(doc.pose.yaw - truth.yaw);
        assert!(d.min(std::f64::consts::PI - d) < 0.01);
    }

    #[test]
    fn saved_cloud_estimates_the_same() {
        let dir = tempfile::tempdir().unwrap();
        let ply = dir.path().join("frame.ply");
        let cfg = PerceptionConfig {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let synthetic = estimate(
            &EstimateSource::Synthetic {
                x: 0.1,
                y: 0.2,
                yaw: 1.0,
            },
            &BrickDims::STANDARD,
            &cfg,
            5,
            Some(&ply),
        )
        .unwrap();
        let from_file = estimate(&EstimateSource::Cloud(ply), &BrickDims::STANDARD, &cfg, 5, None).unwrap();
        assert!((from_file.pose.position - synthetic.pose.position).norm() < 1e-9);
    }

    #[test]
    fn report_without_log_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(report(dir.path()).unwrap_err().kind(), "IoError");
    }

    #[test]
    fn simulate_writes_the_run_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::from_preset("square").unwrap();
        cfg.layers = 1;
        let (doc, log) = simulate(&cfg, dir.path(), true).unwrap();
        assert_eq!(log.records.len(), doc.model.placements.len());
        let run = RunDir::new(dir.path());
        for p in [run.config(), run.model(), run.log(), run.report().join("metrics.csv")] {
            assert!(p.is_file(), "{}", p.display());
        }
        assert_eq!(std::fs::read_dir(run.clouds()).unwrap().count(), 8);
        let reread: RunConfig = read_json(&run.config()).unwrap();
        assert_eq!(reread, cfg);
    }
}
