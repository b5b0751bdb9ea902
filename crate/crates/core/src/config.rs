//! Run configuration documents.
//!
//! A run configuration names one base family plus the brick, executor,
//! perception and conveyor settings. Everything but the base may be left
//! out and falls back to the documented defaults.
//!
//! ```json
//! {
//!   "schema": "spiralbrick.config/1",
//!   "base": { "polygon": { "regular": 4, "blocks": 2 } },
//!   "layers": 17,
//!   "seed": 7
//! }
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::column::{
    self, BaseSpec, BrickDims, ColumnSpec, PolygonBaseSpec, PolynomialBaseSpec, SegmentBaseSpec, DEFAULT_PHI,
};
use crate::error::{Error, Result};
use crate::executor::{AssemblySettings, ConveyorConfig, ExecutorConfig};
use crate::perception::PerceptionConfig;

pub const CONFIG_SCHEMA: &str = "spiralbrick.config/1";

/// Runs of bricks joined at a constant turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentsSection {
    pub s: usize,
    pub blocks: Vec<u32>,
    pub theta: f64,
}

/// Either explicit exterior turning angles or a regular `n`-gon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turning_angles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular: Option<usize>,
    pub blocks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSection {
    pub coefficients: Vec<f64>,
    pub domain: (f64, f64),
}

/// Exactly one of the fields must be present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<SegmentsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<PolygonSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<PolynomialSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base: BaseSection,
    #[serde(default = "default_dims")]
    pub dims: BrickDims,
    #[serde(default = "default_layers")]
    pub layers: u32,
    #[serde(default = "default_phi")]
    pub phi: f64,
    /// Gap between bricks along a run.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Extra spacing for polynomial bases.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub executor: ExecutorConfig,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub conveyor: ConveyorConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_dims() -> BrickDims {
    BrickDims::STANDARD
}
fn default_layers() -> u32 {
    column::presets::LAYERS
}
fn default_phi() -> f64 {
    DEFAULT_PHI
}
fn default_lambda() -> f64 {
    column::presets::LAMBDA
}
fn default_kappa() -> f64 {
    column::presets::KAPPA
}
fn default_retries() -> u32 {
    3
}

impl RunConfig {
    /// Config around a named base with every other field at its default.
    pub fn from_preset(name: &str) -> Result<Self> {
        if column::preset_base(name).is_none() {
            return Err(Error::Validation(vec![format!(
                "unknown preset '{name}', expected one of {}",
                column::PRESET_NAMES.join(", ")
            )]));
        }
        Ok(Self {
            schema: CONFIG_SCHEMA.to_string(),
            name: Some(name.to_string()),
            base: BaseSection {
                preset: Some(name.to_string()),
                ..Default::default()
            },
            dims: default_dims(),
            layers: default_layers(),
            phi: default_phi(),
            lambda: default_lambda(),
            kappa: default_kappa(),
            executor: ExecutorConfig::default(),
            perception: PerceptionConfig::default(),
            conveyor: ConveyorConfig::default(),
            seed: 0,
            retries: default_retries(),
            output_dir: None,
        })
    }

    /// Column spec described by this config. Preset bases take their
    /// spacing from the config, not from the preset.
    pub fn column_spec(&self) -> Result<ColumnSpec> {
        let b = &self.base;
        let base = match (&b.preset, &b.segments, &b.polygon, &b.polynomial) {
            (Some(name), None, None, None) => {
                let base = column::preset_base(name)
                    .ok_or_else(|| Error::Validation(vec![format!("base.preset: unknown preset '{name}'")]))?;
                match base {
                    BaseSpec::Segments(s) => BaseSpec::Segments(SegmentBaseSpec {
                        lambda: self.lambda,
                        ..s
                    }),
                    BaseSpec::Polygon(p) => BaseSpec::Polygon(PolygonBaseSpec {
                        lambda: self.lambda,
                        ..p
                    }),
                    BaseSpec::Polynomial(p) => BaseSpec::Polynomial(PolynomialBaseSpec { kappa: self.kappa, ..p }),
                }
            }
            (None, Some(s), None, None) => BaseSpec::Segments(SegmentBaseSpec {
                s: s.s,
                blocks: s.blocks.clone(),
                theta: s.theta,
                lambda: self.lambda,
            }),
            (None, None, Some(p), None) => {
                let spec = match (&p.turning_angles, p.regular) {
                    (Some(turns), None) => PolygonBaseSpec {
                        turning_angles: turns.clone(),
                        blocks: p.blocks,
                        lambda: self.lambda,
                    },
                    (None, Some(n)) if n >= 3 => PolygonBaseSpec::regular(n, p.blocks, self.lambda),
                    (None, Some(n)) => {
                        return Err(Error::Validation(vec![format!(
                            "base.polygon.regular: needs at least 3 edges, got {n}"
                        )]))
                    }
                    _ => {
                        return Err(Error::Validation(vec![
                            "base.polygon: give exactly one of turning_angles and regular".into(),
                        ]))
                    }
                };
                BaseSpec::Polygon(spec)
            }
            (None, None, None, Some(p)) => BaseSpec::Polynomial(PolynomialBaseSpec {
                coefficients: p.coefficients.clone(),
                domain: p.domain,
                kappa: self.kappa,
            }),
            _ => {
                let present: Vec<&str> = [
                    ("preset", b.preset.is_some()),
                    ("segments", b.segments.is_some()),
                    ("polygon", b.polygon.is_some()),
                    ("polynomial", b.polynomial.is_some()),
                ]
                .iter()
                .filter(|(_, p)| *p)
                .map(|(n, _)| *n)
                .collect();
                return Err(Error::Validation(vec![format!(
                    "base: exactly one of preset, segments, polygon, polynomial is required, found [{}]",
                    present.join(", ")
                )]));
            }
        };
        Ok(ColumnSpec {
            base,
            dims: self.dims,
            layers: self.layers,
            phi: self.phi,
        })
    }

    pub fn assembly_settings(&self) -> AssemblySettings {
        AssemblySettings {
            executor: self.executor,
            perception: self.perception,
            conveyor: self.conveyor,
            seed: self.seed,
            retries: self.retries,
        }
    }

    /// Checks every section and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut section = |prefix: &str, r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::Validation(list)) => problems.extend(list.into_iter().map(|p| {
                // column_spec problems already carry their field path
                if p.starts_with(prefix) {
                    p
                } else {
                    format!("{prefix}: {p}")
                }
            })),
            Err(Error::InvalidSpec(msg)) => problems.extend(msg.split("; ").map(|p| format!("{prefix}: {p}"))),
            Err(e) => problems.push(format!("{prefix}: {e}")),
        };
        if self.schema != CONFIG_SCHEMA {
            section(
                "schema",
                Err(Error::Validation(vec![format!(
                    "expected '{CONFIG_SCHEMA}', found '{}'",
                    self.schema
                )])),
            );
        }
        section("dims", self.dims.validate());
        if self.layers == 0 {
            section("layers", Err(Error::Validation(vec!["must be at least 1".into()])));
        }
        if !(self.phi.is_finite() && self.phi.abs() <= 2.0 * PI) {
            section(
                "phi",
                Err(Error::Validation(vec![format!(
                    "must lie in [-2π, 2π], got {}",
                    self.phi
                )])),
            );
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            section(
                "lambda",
                Err(Error::Validation(vec![format!(
                    "must be non-negative, got {}",
                    self.lambda
                )])),
            );
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            section(
                "kappa",
                Err(Error::Validation(vec![format!(
                    "must be non-negative, got {}",
                    self.kappa
                )])),
            );
        }
        match self.column_spec() {
            Ok(spec) => section("base", spec.base.validate()),
            Err(e) => section("base", Err(e)),
        }
        section("executor", self.executor.validate());
        section("perception.mlesac", self.perception.mlesac.validate());
        section(
            "perception.camera",
            self.perception.camera_over(self.conveyor.center, 0.0).validate(),
        );
        if !(self.perception.noise_sigma.is_finite() && self.perception.noise_sigma >= 0.0) {
            section(
                "perception.noise_sigma",
                Err(Error::Validation(vec![format!(
                    "must be non-negative, got {}",
                    self.perception.noise_sigma
                )])),
            );
        }
        if !(self.perception.mount_height.is_finite() && self.perception.mount_height > 0.0) {
            section(
                "perception.mount_height",
                Err(Error::Validation(vec![format!(
                    "must be positive, got {}",
                    self.perception.mount_height
                )])),
            );
        }
        section("conveyor", self.conveyor.validate());
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Parses and validates a config document. `origin` names the source in
/// error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let mut location = format!("line {} column {}", inner.line(), inner.column());
        if field != "." {
            location.push_str(&format!(" ({field})"));
        }
        Error::Parse {
            path: origin.to_string(),
            location,
            message: inner.to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, "test.json")
    }

    #[test]
    fn paper_defaults_preset() {
        let cfg = RunConfig::from_preset("paper_defaults").unwrap();
        cfg.validate().unwrap();
        assert_eq!(
            cfg.dims,
            BrickDims {
                l: 0.1,
                w: 0.5,
                h: 0.025
            }
        );
        assert_eq!(
            (cfg.lambda, cfg.kappa, cfg.layers, cfg.executor.eta),
            (0.01, 0.05, 17, 1.25)
        );
        let spec = cfg.column_spec().unwrap();
        assert_eq!(spec.base, BaseSpec::Polygon(PolygonBaseSpec::regular(4, 2, 0.01)));
    }

    #[test]
    fn omitted_fields_get_defaults() {
        let cfg =
            parse(r#"{"schema": "spiralbrick.config/1", "base": {"polygon": {"regular": 4, "blocks": 2}}}"#).unwrap();
        assert_eq!(cfg.phi, DEFAULT_PHI);
        assert_eq!(cfg.perception, PerceptionConfig::default());
        assert_eq!(cfg.executor, ExecutorConfig::default());
        assert_eq!(cfg.retries, 3);
    }

    #[test]
    fn two_bases_is_a_validation_error() {
        let err = parse(
            r#"{"schema": "spiralbrick.config/1", "base": {
                "polygon": {"regular": 4, "blocks": 2},
                "polynomial": {"coefficients": [2, 0, -0.5], "domain": [-2, 2]}}}"#,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "ValidationError");
        assert!(err.to_string().contains("[polygon, polynomial]"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let err = parse(
            r#"{"schema": "spiralbrick.config/1", "base": {"preset": "square"}, "layers": 0,
                "executor": {"v_max": -1}, "perception": {"mlesac": {"iterations": 0}}}"#,
        )
        .unwrap_err();
        let Error::Validation(list) = &err else { panic!("{err}") };
        assert_eq!(list.len(), 3, "{list:?}");
        assert!(list[0].starts_with("layers"));
        assert!(list[1].starts_with("executor: v_max"));
        assert!(list[2].starts_with("perception.mlesac: iterations"));
    }

    #[test]
    fn syntax_error_has_line_and_field() {
        let err = parse(
            "{\"schema\": \"spiralbrick.config/1\",\n \"base\": {\"polygon\": {\"regular\": \"four\", \"blocks\": 2}}}",
        )
        .unwrap_err();
        let Error::Parse { location, .. } = &err else {
            panic!("{err}")
        };
        assert!(location.starts_with("line 2"), "{location}");
        assert!(location.contains("base.polygon.regular"), "{location}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = parse(r#"{"schema": "spiralbrick.config/1", "base": {"preset": "square"}, "executor": {"vmax": 1}}"#)
            .unwrap_err();
        assert_eq!(err.kind(), "ParseError");
    }

    #[test]
    fn serialized_config_parses_back() {
        for name in column::PRESET_NAMES {
            let cfg = RunConfig::from_preset(name).unwrap();
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            assert_eq!(parse(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn malformed_inputs_never_panic() {
        for text in [
            "",
            "[]",
            "null",
            "{",
            r#"{"schema": 3}"#,
            r#"{"schema": "spiralbrick.config/1"}"#,
        ] {
            assert!(parse(text).is_err(), "{text}");
        }
    }
}
