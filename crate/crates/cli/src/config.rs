//! Run configuration: defaults, then a JSON file, then flags.
//!
//! Both files and `--set` use dotted keys (`"train.lr": 1e-3`); nested
//! objects are accepted too, so a written `resolved_config.json` can be fed
//! straight back in.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sparsefield::inference::SamplerConfig;
use sparsefield::signals::PolynomialConfig;
use sparsefield::training::TrainConfig;
use sparsefield::{ModelConfig, Precision};
use sparsefield_service::ServeConfig;

use crate::UsageError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Polynomial,
    Idx,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// IDX image file for `task = idx`.
    pub path: Option<PathBuf>,
    /// Box-resample images to `[rows, cols]`.
    pub resize: Option<[usize; 2]>,
    /// Keep only the first this-many images.
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    /// Text file of `x_1 .. x_p v_1 .. v_d` rows.
    pub observe: Option<PathBuf>,
    /// `path:index` of a signal to observe cells from.
    pub from_signal: Option<String>,
    pub num_observed: usize,
    pub num_samples: usize,
    /// Output raster; defaults to the checkpoint's.
    pub grid: Option<Vec<usize>>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            observe: None,
            from_signal: None,
            num_observed: 32,
            num_samples: 3,
            grid: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Observation-set sizes to sweep.
    pub sizes: Vec<usize>,
    pub num_images: usize,
    /// Sampled reconstructions per image and size.
    pub num_draws: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sizes: vec![4, 16, 64, 256],
            num_images: 16,
            num_draws: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: Task,
    /// Seeds training, observation choice and sampling.
    pub seed: u64,
    pub precision: Precision,
    pub out: Option<PathBuf>,
    pub ckpt: Option<PathBuf>,
    pub data: DataConfig,
    pub poly: PolynomialConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub generate: GenerateConfig,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::default(),
            seed: 0,
            precision: Precision::F32,
            out: None,
            ckpt: None,
            data: DataConfig::default(),
            poly: PolynomialConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            sampler: SamplerConfig::default(),
            generate: GenerateConfig::default(),
            eval: EvalConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn out_dir(&self) -> anyhow::Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| UsageError::new("an output directory is required (--out or \"out\")").into())
    }

    pub fn checkpoint(&self) -> anyhow::Result<&Path> {
        self.ckpt
            .as_deref()
            .ok_or_else(|| UsageError::new("a checkpoint is required (--ckpt or \"ckpt\")").into())
    }

    /// Writes the resolved configuration as JSON into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join("resolved_config.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Accumulates configuration layers over the defaults.
pub struct Builder {
    tree: Value,
}

impl Builder {
    pub fn new() -> Self {
        Builder {
            tree: serde_json::to_value(RunConfig::default()).expect("defaults serialize"),
        }
    }

    /// Merges a JSON file whose keys may be dotted, nested, or both.
    pub fn file(mut self, path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError::new(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| UsageError::new(format!("config {} is not valid JSON: {e}", path.display())))?;
        let Value::Object(map) = value else {
            return Err(UsageError::new(format!("config {} must be a JSON object", path.display())).into());
        };
        self.merge_object("", map)?;
        Ok(self)
    }

    /// Sets one dotted key to a JSON value.
    pub fn set(mut self, key: &str, value: Value) -> anyhow::Result<Self> {
        self.assign(key, value)?;
        Ok(self)
    }

    /// Parses `key=value`; the value is read as JSON, or as a string if it
    /// is not valid JSON.
    pub fn set_str(self, assignment: &str) -> anyhow::Result<Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| UsageError::new(format!("--set expects key=value, got {assignment:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set(key.trim(), value)
    }

    fn merge_object(&mut self, prefix: &str, map: Map<String, Value>) -> anyhow::Result<()> {
        for (k, v) in map {
            let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
            match v {
                // Recurse only where the default is itself a section, so
                // map-valued settings are replaced whole.
                Value::Object(inner) if matches!(lookup(&self.tree, &key), Some(Value::Object(_))) => {
                    self.merge_object(&key, inner)?
                }
                other => self.assign(&key, other)?,
            }
        }
        Ok(())
    }

    fn assign(&mut self, key: &str, value: Value) -> anyhow::Result<()> {
        let mut node = &mut self.tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let Value::Object(map) = node else {
                return Err(unknown(key));
            };
            let child = map.get_mut(*part).ok_or_else(|| unknown(key))?;
            if i + 1 == parts.len() {
                if matches!(child, Value::Object(_)) && !value.is_object() {
                    return Err(UsageError::new(format!("{key} is a section, not a value")).into());
                }
                *child = value;
                return Ok(());
            }
            node = child;
        }
        Err(unknown(key))
    }

    /// Deserializes, reporting the offending key on type errors.
    pub fn build(self) -> anyhow::Result<RunConfig> {
        let mut cfg: RunConfig = serde_path_to_error::deserialize(self.tree).map_err(|e| {
            UsageError::new(format!("config key {}: {}", e.path(), e.inner()))
        })?;
        // One seed drives the whole run.
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }
}

fn lookup<'a>(tree: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(tree, |node, part| node.get(part))
}

fn unknown(key: &str) -> anyhow::Error {
    UsageError::new(format!("unknown config key {key:?}")).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_and_nested_keys_merge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"train.lr": 0.01, "model": {"d_model": 64}, "seed": 5}"#).unwrap();
        let cfg = Builder::new().file(&path).unwrap().build().unwrap();
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.model.d_model, 64);
        assert_eq!(cfg.model.n_heads, ModelConfig::default().n_heads);
        assert_eq!(cfg.train.seed, 5);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"train.steps": 100}"#).unwrap();
        let cfg = Builder::new()
            .file(&path)
            .unwrap()
            .set("train.steps", json!(7))
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cfg.train.steps, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Builder::new().set("train.learning_rate", json!(1)).is_err());
        assert!(Builder::new().set("nope", json!(1)).is_err());
        assert!(Builder::new().set("train", json!(1)).is_err());
        assert!(Builder::new().set("seed.x", json!(1)).is_err());
        let nested_unknown = Builder::new().set("model", json!({"depth": 3})).unwrap().build();
        assert!(nested_unknown.is_err());
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = Builder::new().set_str("train.steps=many").unwrap().build().unwrap_err();
        assert!(err.to_string().contains("train.steps"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = Builder::new()
            .set_str("generate.grid=[8,8]")
            .unwrap()
            .set_str("out=runs/x")
            .unwrap()
            .build()
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = cfg.write_resolved(dir.path()).unwrap();
        let back = Builder::new().file(&path).unwrap().build().unwrap();
        assert_eq!(back, cfg);
    }
}
