//! Run configuration: a TOML file plus `--set section.key=value` overrides.

use std::path::{Path, PathBuf};

use codim_mpm::geometry::{DegeneratePolicy, MeshFormat};
use codim_mpm::metrics::DEFAULT_TAU;
use codim_mpm::{ElasticParams, OptimConfig, PhysParams, Real, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Initial cloth mesh (OBJ).
    pub cloth: Option<PathBuf>,
    /// Collider: an OBJ file (static) or a directory / manifest of frames.
    pub collider: Option<PathBuf>,
    /// Target sequence for `fit`, reference sequence for `eval`.
    pub target: Option<PathBuf>,
    /// Simulated sequence for `eval`.
    pub simulated: Option<PathBuf>,
    /// Closed body sequence for penetration depth in `eval`.
    pub body: Option<PathBuf>,
}

/// Physical parameters, flattened for the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub youngs: Real,
    pub poisson: Real,
    pub shear: Real,
    pub normal: Real,
    pub density: Real,
    pub alpha: Real,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self::from(PhysParams::default())
    }
}

impl From<PhysParams> for ParamsSection {
    fn from(p: PhysParams) -> Self {
        Self {
            youngs: p.elastic.youngs,
            poisson: p.elastic.poisson,
            shear: p.elastic.shear,
            normal: p.elastic.normal,
            density: p.density,
            alpha: p.alpha,
        }
    }
}

impl From<ParamsSection> for PhysParams {
    fn from(p: ParamsSection) -> Self {
        Self {
            elastic: ElasticParams {
                youngs: p.youngs,
                poisson: p.poisson,
                shear: p.shear,
                normal: p.normal,
            },
            density: p.density,
            alpha: p.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// F-score threshold.
    pub tau: Real,
    /// Surface samples per mesh for Chamfer and F-score.
    pub samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: MeshFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: MeshFormat::Obj,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Frames to simulate after the initial one.
    pub frames: usize,
    pub degenerate_faces: DegeneratePolicy,
    pub inputs: Inputs,
    pub output: OutputSection,
    pub sim: SimConfig,
    pub params: ParamsSection,
    pub optim: OptimConfig,
    pub metrics: MetricsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 50,
            degenerate_faces: DegeneratePolicy::default(),
            inputs: Inputs::default(),
            output: OutputSection::default(),
            sim: SimConfig::default(),
            params: ParamsSection::default(),
            optim: OptimConfig::default(),
            metrics: MetricsSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path`, applies overrides and resolves relative paths against the
    /// config file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            message: format!("cannot read config: {e}"),
            path: Some(path.to_path_buf()),
        })?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
            message: e.message().to_string(),
            path: Some(path.to_path_buf()),
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config {
            message: e.message().to_string(),
            path: Some(path.to_path_buf()),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        for p in [&mut i.cloth, &mut i.collider, &mut i.target, &mut i.simulated, &mut i.body]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn phys_params(&self) -> PhysParams {
        self.params.into()
    }

    /// Module-level validation shared by every command.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |message: String| CliError::Config {
            message,
            path: None,
        };
        self.sim.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.phys_params()
            .validate()
            .map_err(|e| cfg_err(e.to_string()))?;
        if !(self.metrics.tau > 0.0) {
            return Err(cfg_err(format!("metrics.tau must be positive, got {}", self.metrics.tau)));
        }
        if self.metrics.samples == 0 {
            return Err(cfg_err("metrics.samples must be at least 1".into()));
        }
        let i = &self.inputs;
        for (name, p) in [
            ("cloth", &i.cloth),
            ("collider", &i.collider),
            ("target", &i.target),
            ("simulated", &i.simulated),
            ("body", &i.body),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(CliError::Config {
                        message: format!("inputs.{name} does not exist"),
                        path: Some(p.clone()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, name: &str, p: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        p.as_deref().ok_or_else(|| CliError::Config {
            message: format!("inputs.{name} is required for this command"),
            path: None,
        })
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML value and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let bad = |message: String| CliError::Config {
        message,
        path: None,
    };
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| bad(format!("override `{assignment}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| bad(format!("empty key in `{assignment}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| bad(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    doc.parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_keys_and_parse_values() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "sim.substeps=12").unwrap();
        apply_override(&mut t, "sim.gravity=[0, -1, 0]").unwrap();
        apply_override(&mut t, "output.dir=results").unwrap();
        apply_override(&mut t, "sim.deterministic = false").unwrap();
        let cfg: RunConfig = t.try_into().unwrap();
        assert_eq!(cfg.sim.substeps, 12);
        assert_eq!(cfg.sim.gravity.y, -1.0);
        assert!(!cfg.sim.deterministic);
        assert_eq!(cfg.output.dir, PathBuf::from("results"));
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "=3").is_err());
        apply_override(&mut t, "seed=3").unwrap();
        assert!(apply_override(&mut t, "seed.x=1").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let t: toml::Table = "[sim]\nsubstep = 3".parse().unwrap();
        assert!(t.try_into::<RunConfig>().is_err());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn params_section_matches_phys_params() {
        let p = PhysParams::default();
        assert_eq!(PhysParams::from(ParamsSection::from(p)), p);
    }
}
