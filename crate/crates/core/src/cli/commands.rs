use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{LoadedData, RunConfig};
use crate::datasets::write_csv;
use crate::error::{Error, Result};
use crate::metrics::{frechet_gaussian, mig, mse_per_element, MigResult, DEFAULT_MIG_BINS};
use crate::model::{
    encode, generate_with_variances, load_checkpoint, reconstruct, save_checkpoint, Checkpoint, ModelParams,
};
use crate::prior::LatentPrior;
use crate::relevance::{analyze, RelevanceReport, VarianceSource};
use crate::tensor::Tensor;
use crate::trainer::{train, write_epoch_csv, EpochRecord, TrainOutcome};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SEED_FILE: &str = "seed.json";
pub const RELEVANCE_FILE: &str = "relevance.json";
pub const GENERATED_FILE: &str = "generated.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const ABLATION_HEADER: &str = "setting,active_dims,frechet,mse";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    Frechet,
    Mig,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Metric> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(Metric::Mse),
            "frechet" => Ok(Metric::Frechet),
            "mig" => Ok(Metric::Mig),
            other => Err(Error::UnsupportedMetric(format!("unknown metric {other:?}"))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(Metric::parse).collect()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value)?)
}

fn check_input_dim(params: &ModelParams, x: &Tensor) -> Result<()> {
    if x.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "dataset vs checkpoint",
            left: vec![params.input_dim()],
            right: vec![x.cols()],
        });
    }
    Ok(())
}

/// Relevance using the learned prior when present, otherwise the empirical
/// variance of the encoded means.
pub fn relevance_report(
    params: &ModelParams,
    prior: Option<&LatentPrior>,
    probe: &Tensor,
    threshold: f64,
    n_probe: usize,
) -> Result<RelevanceReport> {
    check_input_dim(params, probe)?;
    let source = match prior {
        Some(p) => VarianceSource::Prior(p),
        None => VarianceSource::EncodedMeans,
    };
    analyze(params, source, probe, threshold, n_probe)
}

/// Latent variances used for generation: the learned prior, or the unit
/// prior of the fixed-prior baseline.
pub fn generation_variances(params: &ModelParams, prior: Option<&LatentPrior>) -> Vec<f64> {
    match prior {
        Some(p) => p.sigma_hat_sq.clone(),
        None => vec![1.0; params.latent_dim()],
    }
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub outcome: TrainOutcome,
}

impl TrainSummary {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.outcome.records.last()
    }
}

fn epoch_csv(records: &[EpochRecord], with_timing: bool) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_epoch_csv(&mut buf, records, with_timing).map_err(|e| Error::io(Path::new(EPOCHS_FILE), e))?;
    Ok(buf)
}

/// Trains per `config` and writes a self-contained run directory.
pub fn cmd_train(config: &RunConfig, run_dir: &Path) -> Result<TrainSummary> {
    config.validate()?;
    let data = config.data.load()?;
    let outcome = train(&config.train, &data.x)?;

    create_dir(run_dir)?;
    write_file(&run_dir.join(CONFIG_FILE), config.to_toml()?)?;
    write_json(
        &run_dir.join(SEED_FILE),
        &serde_json::json!({ "train_seed": config.train.seed }),
    )?;
    write_file(&run_dir.join(EPOCHS_FILE), epoch_csv(&outcome.records, config.run.record_timing)?)?;
    let ckpt = Checkpoint::new(&outcome.params, outcome.prior.as_ref(), serde_json::to_value(config)?);
    save_checkpoint(&run_dir.join(CHECKPOINT_FILE), &ckpt)?;
    Ok(TrainSummary {
        run_dir: run_dir.to_path_buf(),
        outcome,
    })
}

pub fn load_model(checkpoint: &Path) -> Result<(ModelParams, Option<LatentPrior>)> {
    let ckpt = load_checkpoint(checkpoint)?;
    Ok((ckpt.model()?, ckpt.prior()?))
}

pub fn cmd_relevance(checkpoint: &Path, probe: &Tensor, threshold: f64, n_probe: usize, out_dir: &Path) -> Result<RelevanceReport> {
    let (params, prior) = load_model(checkpoint)?;
    let report = relevance_report(&params, prior.as_ref(), probe, threshold, n_probe)?;
    create_dir(out_dir)?;
    write_json(&out_dir.join(RELEVANCE_FILE), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateOptions {
    pub count: usize,
    pub seed: u64,
    pub all_axes: bool,
    pub threshold: f64,
    pub n_probe: usize,
}

/// Decodes prior samples. Unless `all_axes` is set only the active axes
/// are sampled; the rest stay at zero.
pub fn generate_samples(
    params: &ModelParams,
    prior: Option<&LatentPrior>,
    probe: &Tensor,
    opts: &GenerateOptions,
) -> Result<Tensor> {
    let axes: Vec<usize> = if opts.all_axes {
        (0..params.latent_dim()).collect()
    } else {
        relevance_report(params, prior, probe, opts.threshold, opts.n_probe)?.active_set
    };
    generate_with_variances(params, &generation_variances(params, prior), &axes, opts.count, opts.seed)
}

pub fn cmd_generate(checkpoint: &Path, probe: &Tensor, opts: &GenerateOptions, out_dir: &Path) -> Result<PathBuf> {
    let (params, prior) = load_model(checkpoint)?;
    let samples = generate_samples(&params, prior.as_ref(), probe, opts)?;
    create_dir(out_dir)?;
    let path = out_dir.join(GENERATED_FILE);
    write_csv(&path, &samples)?;
    Ok(path)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: Option<f64>,
    pub active_dims: Option<usize>,
    /// Generated from the active axes only.
    pub frechet_active: Option<f64>,
    /// Generated from every latent axis.
    pub frechet_all: Option<f64>,
    pub warnings: Vec<String>,
    pub mig: Option<MigResult>,
}

impl EvalReport {
    /// `(metric, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows = Vec::new();
        if let Some(v) = self.mse {
            rows.push(("mse", v));
        }
        if let Some(v) = self.active_dims {
            rows.push(("active_dims", v as f64));
        }
        if let Some(v) = self.frechet_active {
            rows.push(("frechet_active", v));
        }
        if let Some(v) = self.frechet_all {
            rows.push(("frechet_all", v));
        }
        if let Some(m) = &self.mig {
            rows.push(("mig", m.mig));
        }
        rows
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub metrics: Vec<Metric>,
    pub generate_count: usize,
    pub seed: u64,
    pub threshold: f64,
    pub n_probe: usize,
}

pub fn evaluate(
    params: &ModelParams,
    prior: Option<&LatentPrior>,
    data: &LoadedData,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    check_input_dim(params, &data.x)?;
    if opts.metrics.contains(&Metric::Mig) && data.factors.is_none() {
        return Err(Error::UnsupportedMetric("mig needs a dataset with factor labels".into()));
    }
    let mut report = EvalReport::default();
    for metric in &opts.metrics {
        match metric {
            Metric::Mse => report.mse = Some(mse_per_element(&data.x, &reconstruct(params, &data.x)?)?),
            Metric::Frechet => {
                let mut gen = GenerateOptions {
                    count: opts.generate_count,
                    seed: opts.seed,
                    all_axes: false,
                    threshold: opts.threshold,
                    n_probe: opts.n_probe,
                };
                let rel = relevance_report(params, prior, &data.x, opts.threshold, opts.n_probe)?;
                report.active_dims = Some(rel.active_set.len());
                let active = generate_samples(params, prior, &data.x, &gen)?;
                gen.all_axes = true;
                let all = generate_samples(params, prior, &data.x, &gen)?;
                let fa = frechet_gaussian(&active, &data.x)?;
                let fb = frechet_gaussian(&all, &data.x)?;
                report.warnings.extend(fa.warning.into_iter().chain(fb.warning));
                report.frechet_active = Some(fa.distance);
                report.frechet_all = Some(fb.distance);
            }
            Metric::Mig => {
                let factors = data.factors.as_ref().expect("checked above");
                let latents = encode(params, &data.x)?.mu;
                let m = mig(&latents, factors, DEFAULT_MIG_BINS)?;
                report.warnings.extend(m.warnings.iter().cloned());
                report.mig = Some(m);
            }
        }
    }
    Ok(report)
}

pub fn cmd_eval(checkpoint: &Path, data: &LoadedData, opts: &EvalOptions, out_dir: &Path) -> Result<EvalReport> {
    let (params, prior) = load_model(checkpoint)?;
    let report = evaluate(&params, prior.as_ref(), data, opts)?;
    create_dir(out_dir)?;
    write_json(&out_dir.join(METRICS_JSON), &report)?;

    let csv_path = out_dir.join(METRICS_CSV);
    let fresh = !csv_path.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv_path)
        .map_err(|e| Error::io(&csv_path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str("metric,value\n");
    }
    for (name, value) in report.rows() {
        writeln!(text, "{name},{value}").expect("writing to a String");
    }
    file.write_all(text.as_bytes()).map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    AlphaSize,
    LatentSize,
    Beta,
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "alpha_size" => Ok(AblationAxis::AlphaSize),
            "latent_size" => Ok(AblationAxis::LatentSize),
            "beta" => Ok(AblationAxis::Beta),
            other => Err(Error::InvalidArgument(format!(
                "unknown ablation axis {other:?} (expected alpha_size, latent_size or beta)"
            ))),
        }
    }
}

impl AblationAxis {
    fn apply(self, config: &mut RunConfig, value: f64) -> Result<String> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!("{self:?} needs positive integers, got {v}")))
            }
        };
        Ok(match self {
            AblationAxis::AlphaSize => {
                config.train.alpha_subset_size = as_count(value)?;
                config.train.alpha_subset_size.to_string()
            }
            AblationAxis::LatentSize => {
                config.train.latent_dim = as_count(value)?;
                config.train.latent_dim.to_string()
            }
            AblationAxis::Beta => {
                config.train.beta = value;
                value.to_string()
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub active_dims: usize,
    pub frechet: f64,
    pub mse: f64,
}

impl AblationRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.setting, self.active_dims, self.frechet, self.mse)
    }
}

/// Scores a trained model on its own validation split.
pub fn summarize_run(config: &RunConfig, data: &Tensor, outcome: &TrainOutcome, setting: String) -> Result<AblationRow> {
    let val = data.select_rows(&outcome.val_indices);
    let prior = outcome.prior.as_ref();
    let report = relevance_report(&outcome.params, prior, &val, config.run.threshold, config.run.probes)?;
    let samples = generate_with_variances(
        &outcome.params,
        &generation_variances(&outcome.params, prior),
        &report.active_set,
        config.run.generate_count,
        config.train.seed,
    )?;
    Ok(AblationRow {
        setting,
        active_dims: report.active_set.len(),
        frechet: frechet_gaussian(&samples, &val)?.distance,
        mse: mse_per_element(&val, &reconstruct(&outcome.params, &val)?)?,
    })
}

/// Sweeps one setting with everything else (including the seed) fixed.
/// Settings run one after another.
pub fn cmd_ablate(config: &RunConfig, axis: AblationAxis, values: &[f64], out_dir: &Path) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("ablation needs at least one value".into()));
    }
    config.validate()?;
    let mut settings = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = config.clone();
        let label = axis.apply(&mut c, v)?;
        c.validate()?;
        settings.push((c, label));
    }

    let data = config.data.load()?;
    let mut rows = Vec::with_capacity(settings.len());
    for (c, label) in settings {
        let outcome = train(&c.train, &data.x)?;
        rows.push(summarize_run(&c, &data.x, &outcome, label)?);
    }

    create_dir(out_dir)?;
    let mut text = String::from(ABLATION_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_file(&out_dir.join(ABLATION_FILE), text)?;
    Ok(rows)
}
