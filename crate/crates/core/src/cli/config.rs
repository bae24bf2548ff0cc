use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{
    gen_factor_grid, gen_linear_manifold, gen_sinusoidal_manifold, load_idx, read_csv, SyntheticKind, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::trainer::TrainConfig;

/// Environment variables `ARDVAE_<SECTION>_<KEY>` override config keys,
/// e.g. `ARDVAE_TRAIN_BETA=0.25`.
pub const ENV_PREFIX: &str = "ARDVAE_";

fn default_name() -> String {
    "run".into()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_metrics() -> Vec<String> {
    vec!["mse".into(), "frechet".into()]
}
fn default_generate_count() -> usize {
    2000
}
fn default_threshold() -> f64 {
    crate::relevance::DEFAULT_THRESHOLD
}
fn default_probes() -> usize {
    crate::relevance::DEFAULT_PROBES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_name")]
    pub name: String,
    /// Parent of the run directory; the run lands in `out_dir/name`.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Write wall-clock seconds into epochs.csv. Off by default so reruns
    /// are byte-identical.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "default_generate_count")]
    pub generate_count: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            name: default_name(),
            out_dir: default_out_dir(),
            record_timing: false,
            metrics: default_metrics(),
            generate_count: default_generate_count(),
            threshold: default_threshold(),
            probes: default_probes(),
        }
    }
}

fn default_variance_range() -> [f64; 2] {
    SyntheticSpec::linear(1, 2, 1, 0.0, 0).variance_range
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataConfig {
    Linear {
        intrinsic_dim: usize,
        ambient_dim: usize,
        samples: usize,
        #[serde(default)]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_variance_range")]
        variance_range: [f64; 2],
    },
    Sinusoidal {
        intrinsic_dim: usize,
        ambient_dim: usize,
        samples: usize,
        #[serde(default)]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    FactorGrid {
        cardinalities: Vec<usize>,
        ambient_dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Idx {
        path: PathBuf,
    },
    Csv {
        path: PathBuf,
    },
}

/// Data matrix plus factor labels when the source has them.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedData {
    pub x: Tensor,
    pub factors: Option<Vec<Vec<usize>>>,
}

impl DataConfig {
    pub fn load(&self) -> Result<LoadedData> {
        let x = match self {
            DataConfig::Linear {
                intrinsic_dim,
                ambient_dim,
                samples,
                noise_std,
                seed,
                variance_range,
            } => {
                let mut spec = SyntheticSpec::linear(*intrinsic_dim, *ambient_dim, *samples, *noise_std, *seed);
                spec.variance_range = *variance_range;
                gen_linear_manifold(&spec)?
            }
            DataConfig::Sinusoidal {
                intrinsic_dim,
                ambient_dim,
                samples,
                noise_std,
                seed,
            } => gen_sinusoidal_manifold(&SyntheticSpec {
                kind: SyntheticKind::Sinusoidal,
                ..SyntheticSpec::linear(*intrinsic_dim, *ambient_dim, *samples, *noise_std, *seed)
            })?,
            DataConfig::FactorGrid {
                cardinalities,
                ambient_dim,
                seed,
            } => {
                let grid = gen_factor_grid(cardinalities, *ambient_dim, *seed)?;
                return Ok(LoadedData {
                    x: grid.data,
                    factors: Some(grid.factors),
                });
            }
            DataConfig::Idx { path } => load_idx(path)?,
            DataConfig::Csv { path } => read_csv(path)?,
        };
        Ok(LoadedData { x, factors: None })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub data: DataConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.run.threshold > 0.0 && self.run.threshold <= 1.0) {
            return Err(Error::Config(format!("run.threshold must be in (0, 1], got {}", self.run.threshold)));
        }
        if self.run.probes == 0 || self.run.generate_count == 0 {
            return Err(Error::Config("run.probes and run.generate_count must be positive".into()));
        }
        for m in &self.run.metrics {
            crate::cli::Metric::parse(m)?;
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.run.out_dir.join(&self.run.name)
    }
}

/// Parses a value the way it would appear on the right of `key = …` in
/// TOML, falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `ARDVAE_<SECTION>_<KEY>` pairs to a parsed document. Keys are
/// matched case-insensitively; unknown sections are rejected.
pub fn apply_overrides(doc: &mut toml::Table, overrides: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    for (name, raw) in overrides {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let rest = rest.to_ascii_lowercase();
        let (section, key) = rest
            .split_once('_')
            .ok_or_else(|| Error::Config(format!("override {name} needs the form {ENV_PREFIX}SECTION_KEY")))?;
        if !matches!(section, "run" | "data" | "train") {
            return Err(Error::Config(format!("override {name}: unknown section {section:?}")));
        }
        let table = doc
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let table = table
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("[{section}] is not a table")))?;
        table.insert(key.to_string(), parse_override_value(&raw));
    }
    Ok(())
}

pub fn parse_config(text: &str, overrides: impl IntoIterator<Item = (String, String)>) -> Result<RunConfig> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    apply_overrides(&mut doc, overrides)?;
    let config: RunConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads a config file and applies overrides from the process environment.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX));
    parse_config(&text, env).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
