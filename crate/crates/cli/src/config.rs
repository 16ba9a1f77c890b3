//! Versioned experiment configuration and input resolution.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use yieldopt::{gen_upper_triangular, Instance, RewardDistributionF64};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Distribution given by file path or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistSource {
    Path { path: PathBuf },
    Inline(RewardDistributionF64),
}

/// Instance given by file path, triangular parameters, or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Path { path: PathBuf },
    Triangular { m: usize, n: u64, seed: u64 },
    Inline(Instance),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let cfg: Self = read_json(path)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "config schema {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// A `--dist` argument: inline JSON when it starts with `{`, else a file path.
pub fn parse_dist_arg(arg: &str) -> Result<DistSource, CliError> {
    if arg.trim_start().starts_with('{') {
        let dist = serde_json::from_str(arg).map_err(|e| CliError::validation(format!("--dist: {e}")))?;
        Ok(DistSource::Inline(dist))
    } else {
        Ok(DistSource::Path { path: arg.into() })
    }
}

pub fn load_dist(src: &DistSource) -> Result<RewardDistributionF64, CliError> {
    match src {
        DistSource::Path { path } => read_json(path),
        DistSource::Inline(d) => Ok(d.clone()),
    }
}

/// Resolves the instance and its supply factor (declared, or the given one for
/// generated instances).
pub fn load_instance(src: &InstanceSource, supply: Option<f64>) -> Result<Instance, CliError> {
    match src {
        InstanceSource::Path { path } => read_json(path),
        InstanceSource::Inline(i) => Ok(i.clone()),
        InstanceSource::Triangular { m, n, seed } => {
            let f = supply.ok_or_else(|| CliError::validation("triangular instance needs a supply factor"))?;
            Ok(gen_upper_triangular(*m, *n, f, *seed)?)
        }
    }
}

/// Exactly one of a flag value and a config value.
pub fn exactly_one<T>(flag: Option<T>, cfg: Option<T>, what: &str) -> Result<T, CliError> {
    match (flag, cfg) {
        (Some(v), None) | (None, Some(v)) => Ok(v),
        (Some(_), Some(_)) => Err(CliError::validation(format!("{what} given both as a flag and in the config"))),
        (None, None) => Err(CliError::validation(format!("missing {what}"))),
    }
}

/// Flag value if present, else the config value.
pub fn either<T>(flag: Option<T>, cfg: Option<T>) -> Option<T> {
    flag.or(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let json = r#"{"schema":1,"dist":{"support":[0.0,0.5],"cum_mass":[0.5,1.0]},"penalty":1.0,"supply":2.0,"instance":{"m":3,"n":2,"seed":4},"seeds":[1,2]}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert!(matches!(cfg.instance, Some(InstanceSource::Triangular { m: 3, .. })));
        assert!(matches!(cfg.dist, Some(DistSource::Inline(_))));
        assert_eq!(serde_json::to_string(&cfg).unwrap(), json);
    }

    #[test]
    fn sources_are_exclusive() {
        assert!(exactly_one(Some(1), Some(2), "x").is_err());
        assert!(exactly_one::<u8>(None, None, "x").is_err());
        assert_eq!(exactly_one(None, Some(2), "x").unwrap(), 2);
    }
}
