//! TOML run configuration and its resolution into an [`ExperimentConfig`].
//!
//! ```toml
//! [dataset]
//! path = "features.alfx"      # relative to this file; or a [dataset.synthetic] table
//! eval_fraction = 0.2
//! split_seed = 0
//!
//! [experiment]
//! batch_size = 20
//! cycles = 20
//! repetitions = 10
//! master_seed = 0
//!
//! [train]
//! epochs = 200
//!
//! [selector]
//! kind = "boss"               # a strategy name, boss, cdo or sas-batch
//! preset = "boss-xxs"         # optional named bundle
//! assess_epochs = 10          # any selector field overrides the preset
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use bossal::baselines::{CdoConfig, SasConfig};
use bossal::boss::BossConfig;
use bossal::data::{generate_synthetic, load_feature_file};
use bossal::harness::{ExperimentConfig, Selector};
use bossal::{Dataset, StrategyId, SyntheticSpec, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: RawDataset,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    train: TrainConfig,
    selector: toml::Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: Option<PathBuf>,
    synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_eval_fraction")]
    eval_fraction: f64,
    #[serde(default)]
    split_seed: u64,
}

fn default_eval_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    batch_size: usize,
    cycles: usize,
    repetitions: usize,
    master_seed: u64,
}

impl Default for RawExperiment {
    fn default() -> Self {
        Self {
            batch_size: 20,
            cycles: 20,
            repetitions: 10,
            master_seed: 0,
        }
    }
}

/// Where the instances come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    File {
        path: PathBuf,
        sha256: String,
    },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DataSource::File { path, .. } => load_feature_file(path)?,
            DataSource::Synthetic(spec) => generate_synthetic(spec)?,
        })
    }
}

/// A fully resolved run: every default filled in and every preset expanded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: DataSource,
    pub experiment: ExperimentConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    /// Parses config text; relative dataset paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        let dataset = match (raw.dataset.path, raw.dataset.synthetic) {
            (Some(p), None) => {
                let path = base.join(p);
                let bytes = fs::read(&path).map_err(|source| CliError::Read {
                    path: path.clone(),
                    source,
                })?;
                DataSource::File {
                    path,
                    sha256: hex::encode(Sha256::digest(&bytes)),
                }
            }
            (None, Some(spec)) => DataSource::Synthetic(spec),
            _ => {
                return Err(CliError::config(
                    "dataset: set exactly one of `path` or a `[dataset.synthetic]` table",
                ))
            }
        };
        let selector = resolve_selector(raw.selector, overrides.preset.as_deref())?;
        let experiment = ExperimentConfig {
            batch_size: raw.experiment.batch_size,
            cycles: raw.experiment.cycles,
            train: raw.train,
            repetitions: raw.experiment.repetitions,
            master_seed: overrides.seed.unwrap_or(raw.experiment.master_seed),
            eval_fraction: raw.dataset.eval_fraction,
            split_seed: raw.dataset.split_seed,
            ..ExperimentConfig::new(raw.experiment.batch_size, selector)
        };
        experiment.validate()?;
        if let DataSource::Synthetic(spec) = &dataset {
            spec.validate()?;
        }
        Ok(Self {
            dataset,
            experiment,
        })
    }

    /// Canonical JSON: object keys sorted, no insignificant whitespace.
    pub fn canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(bossal::Error::from)?;
        Ok(serde_json::to_string(&value).map_err(bossal::Error::from)?)
    }

    /// SHA-256 of [`RunConfig::canonical_json`], hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_json()?.as_bytes())))
    }
}

/// Turns a `[selector]` table into a [`Selector`]. The preset (from the
/// command line, else the table) supplies the starting values; remaining keys
/// override individual fields.
fn resolve_selector(mut table: toml::Table, cli_preset: Option<&str>) -> Result<Selector> {
    let kind = match table.remove("kind") {
        Some(toml::Value::String(s)) => Some(s),
        Some(other) => {
            return Err(CliError::config(format!(
                "selector.kind: expected a string, found {}",
                other.type_str()
            )))
        }
        None => None,
    };
    let file_preset = match table.remove("preset") {
        Some(toml::Value::String(s)) => Some(s),
        Some(other) => {
            return Err(CliError::config(format!(
                "selector.preset: expected a string, found {}",
                other.type_str()
            )))
        }
        None => None,
    };
    let preset = cli_preset.map(str::to_owned).or(file_preset);
    let kind = match (kind, preset.as_deref()) {
        (Some(k), _) => k,
        (None, Some(p)) => kind_of_preset(p)
            .ok_or_else(|| CliError::config(format!("selector.preset: unknown preset `{p}`")))?
            .to_owned(),
        (None, None) => return Err(CliError::config("selector.kind is missing")),
    };

    match kind.as_str() {
        "boss" => Ok(Selector::Boss(merge(
            &kind,
            preset_or_default(preset.as_deref(), BossConfig::preset)?,
            table,
        )?)),
        "cdo" => Ok(Selector::Cdo(merge(
            &kind,
            preset_or_default(preset.as_deref(), CdoConfig::preset)?,
            table,
        )?)),
        "sas-batch" => Ok(Selector::SasBatch(merge(
            &kind,
            preset_or_default(preset.as_deref(), SasConfig::preset)?,
            table,
        )?)),
        name => {
            let id: StrategyId = name
                .parse()
                .map_err(|e: bossal::Error| CliError::config(format!("selector.kind: {e}")))?;
            if let Some(p) = preset {
                return Err(CliError::config(format!(
                    "selector.preset: `{p}` does not apply to the plain strategy `{name}`"
                )));
            }
            if let Some(key) = table.keys().next() {
                return Err(CliError::config(format!(
                    "selector.{key}: the plain strategy `{name}` takes no options"
                )));
            }
            Ok(Selector::Strategy(id))
        }
    }
}

fn kind_of_preset(preset: &str) -> Option<&'static str> {
    if BossConfig::preset(preset).is_some() {
        Some("boss")
    } else if preset.starts_with("cdo") && CdoConfig::preset(preset).is_some() {
        Some("cdo")
    } else if preset.starts_with("sas") && SasConfig::preset(preset).is_some() {
        Some("sas-batch")
    } else {
        None
    }
}

fn preset_or_default<T: Default>(name: Option<&str>, lookup: fn(&str) -> Option<T>) -> Result<T> {
    match name {
        None => Ok(T::default()),
        Some(n) => lookup(n).ok_or_else(|| CliError::config(format!("selector.preset: unknown preset `{n}`"))),
    }
}

fn merge<T: Serialize + DeserializeOwned>(kind: &str, base: T, overrides: toml::Table) -> Result<T> {
    let to_json = |e: serde_json::Error| CliError::config(format!("selector ({kind}): {e}"));
    let mut value = serde_json::to_value(&base).map_err(to_json)?;
    let extra = serde_json::to_value(&overrides).map_err(to_json)?;
    if let (Some(obj), serde_json::Value::Object(extra)) = (value.as_object_mut(), extra) {
        obj.extend(extra);
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::config(format!("selector ({kind}): {inner}"))
        } else {
            CliError::config(format!("selector.{path}: {inner}"))
        }
    })
}
