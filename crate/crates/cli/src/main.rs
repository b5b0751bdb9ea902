use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use spiralbrick::config::{parse_config, RunConfig};
use spiralbrick::run::{self, EstimateSource, GenerateOutputs};
use spiralbrick::Error;

/// Spiral brick columns: model generation, conveyor pose estimation and
/// kinematic pick-and-place simulation.
#[derive(Parser)]
#[command(name = "spiralbrick", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a column model and write model.json, optionally OBJ and SVG.
    Generate {
        #[command(flatten)]
        source: ConfigSource,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a triangulated OBJ mesh here.
        #[arg(long)]
        obj: Option<PathBuf>,
        /// Write an SVG top view here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Estimate a brick pose from a point cloud or a synthetic frame.
    Estimate {
        #[command(flatten)]
        source: ConfigSource,
        /// PLY or CSV point cloud in world coordinates.
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        cloud: Option<PathBuf>,
        /// Render a frame of a brick at --pose instead of reading a cloud.
        #[arg(long, requires = "pose")]
        synthetic: bool,
        /// Brick pose `x,y,yaw` in meters and radians.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        pose: Option<(f64, f64, f64)>,
        /// Depth noise standard deviation in meters.
        #[arg(long, allow_negative_numbers = true)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the estimate document here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Save the synthetic frame's point cloud as PLY here.
        #[arg(long)]
        save_clouds: Option<PathBuf>,
    },
    /// Run the full assembly and write a run directory.
    Simulate {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        overrides: RunOverrides,
        /// Run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep every rendered frame as PLY under clouds/.
        #[arg(long)]
        save_clouds: bool,
    },
    /// Compute metrics for a run directory written by simulate.
    Report {
        /// Run directory.
        run_dir: PathBuf,
    },
}

#[derive(Args)]
struct ConfigSource {
    /// Run configuration document.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: paper_defaults, parallel, orthogonal,
    /// triangle, square, concave_decagon or polynomial.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunOverrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Depth noise standard deviation in meters.
    #[arg(long, allow_negative_numbers = true)]
    noise: Option<f64>,
    /// Re-renders allowed per brick after a failed estimate.
    #[arg(long)]
    retries: Option<u32>,
}

fn parse_pose(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, yaw] if v.iter().all(|c| c.is_finite()) => Ok((*x, *y, *yaw)),
        _ => Err("expected three finite numbers x,y,yaw".into()),
    }
}

impl ConfigSource {
    fn load(&self) -> spiralbrick::Result<RunConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => parse_config(path),
            (None, Some(name)) => RunConfig::from_preset(name),
            (None, None) => RunConfig::from_preset("paper_defaults"),
        }
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(cfg.name.as_deref().unwrap_or("run")))
}

fn run(cli: Cli) -> spiralbrick::Result<()> {
    match cli.command {
        Command::Generate { source, out, obj, svg } => {
            let cfg = source.load()?;
            let out = out_dir(out, &cfg);
            let doc = run::generate(&cfg, &out, &GenerateOutputs { obj, svg })?;
            println!(
                "bricks={} layers={} per_layer={} closure_residual={:e} model={}",
                doc.model.placements.len(),
                doc.model.spec.layers,
                doc.model.bricks_per_layer(),
                doc.model.closure_residual,
                out.join("model.json").display()
            );
        }
        Command::Estimate {
            source,
            cloud,
            synthetic,
            pose,
            noise,
            seed,
            out,
            save_clouds,
        } => {
            let mut cfg = source.load()?;
            if let Some(n) = noise {
                cfg.perception.noise_sigma = n;
                cfg.validate()?;
            }
            let input = match (cloud, synthetic, pose) {
                (Some(path), _, _) => EstimateSource::Cloud(path),
                (None, true, Some((x, y, yaw))) => EstimateSource::Synthetic { x, y, yaw },
                _ => unreachable!("clap enforces --cloud or --synthetic --pose"),
            };
            let doc = run::estimate(
                &input,
                &cfg.dims,
                &cfg.perception,
                seed.unwrap_or(cfg.seed),
                save_clouds.as_deref(),
            )?;
            let p = doc.pose;
            println!(
                "x={} y={} z={} yaw={} time_ms={:.3}",
                p.position.x, p.position.y, p.position.z, p.yaw, doc.estimate.timestamp_ms
            );
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&doc).expect("documents serialize") + "\n";
                std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
            }
        }
        Command::Simulate {
            source,
            overrides,
            out,
            save_clouds,
        } => {
            let mut cfg = source.load()?;
            if let Some(s) = overrides.seed {
                cfg.seed = s;
            }
            if let Some(n) = overrides.noise {
                cfg.perception.noise_sigma = n;
            }
            if let Some(r) = overrides.retries {
                cfg.retries = r;
            }
            cfg.validate()?;
            let out = out_dir(out, &cfg);
            let (_, log) = run::simulate(&cfg, &out, save_clouds)?;
            let summary = spiralbrick::metrics::aggregate(&log)?;
            println!(
                "bricks={} mean_position_error_m={} mean_orientation_diff_deg={} mean_traj_time_s={} run={}",
                log.records.len(),
                summary.position_error.mean,
                summary.orientation_diff.mean.to_degrees(),
                summary.traj_time.mean,
                out.display()
            );
        }
        Command::Report { run_dir } => {
            let doc = run::report(&run_dir)?;
            info!("report for {} bricks", doc.bricks);
            println!("bricks={} report={}", doc.bricks, run_dir.join("report").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPIRALBRICK_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
