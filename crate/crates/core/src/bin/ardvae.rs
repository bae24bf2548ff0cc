use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ardvae::cli::{
    cmd_ablate, cmd_eval, cmd_generate, cmd_relevance, cmd_train, load_config, AblationAxis, EvalOptions,
    GenerateOptions, Metric, RunConfig,
};

#[derive(Parser)]
#[command(name = "ardvae", version, about = "Relevance-prior VAE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run directory (default: run.out_dir/run.name).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute mse / frechet / mig for a checkpoint on the config's dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated list (default: run.metrics).
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Rank latent axes and write a relevance report.
    Relevance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode samples from the learned prior into CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// Sample every latent axis instead of only the active ones.
        #[arg(long)]
        all_axes: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one setting and write a summary CSV.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// alpha_size, latent_size or beta.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn config_with_seed(path: &Path, seed: Option<u64>) -> ardvae::Result<RunConfig> {
    let mut config = load_config(path)?;
    if let Some(s) = seed {
        config.train.seed = s;
    }
    Ok(config)
}

fn default_out(checkpoint: &Path) -> PathBuf {
    checkpoint.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> ardvae::Result<()> {
    match cli.command {
        Command::Train { config, out, seed } => {
            let config = config_with_seed(&config, seed)?;
            let dir = out.unwrap_or_else(|| config.run_dir());
            let summary = cmd_train(&config, &dir)?;
            if let Some(r) = summary.final_record() {
                println!("final epoch {}: train {:.6} val {:.6}", r.epoch, r.train_loss, r.val_loss);
                if let (Some(lo), Some(hi)) = (r.min_var, r.max_var) {
                    println!("estimated variance range [{lo:.3e}, {hi:.3e}]");
                }
            }
            println!("run directory: {}", dir.display());
        }
        Command::Eval {
            config,
            checkpoint,
            metrics,
            out,
            seed,
            threshold,
        } => {
            let config = config_with_seed(&config, seed)?;
            let metrics = match metrics {
                Some(list) => Metric::parse_list(&list)?,
                None => config.run.metrics.iter().map(|m| Metric::parse(m)).collect::<ardvae::Result<_>>()?,
            };
            let opts = EvalOptions {
                metrics,
                generate_count: config.run.generate_count,
                seed: config.train.seed,
                threshold: threshold.unwrap_or(config.run.threshold),
                n_probe: config.run.probes,
            };
            let data = config.data.load()?;
            let report = cmd_eval(&checkpoint, &data, &opts, &out.unwrap_or_else(|| default_out(&checkpoint)))?;
            for (name, value) in report.rows() {
                println!("{name}: {value}");
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Relevance {
            config,
            checkpoint,
            threshold,
            out,
        } => {
            let config = load_config(&config)?;
            let data = config.data.load()?;
            let report = cmd_relevance(
                &checkpoint,
                &data.x,
                threshold.unwrap_or(config.run.threshold),
                config.run.probes,
                &out.unwrap_or_else(|| default_out(&checkpoint)),
            )?;
            println!("active dimensions: {}", report.active_set.len());
            println!("active axes: {:?}", report.active_set);
        }
        Command::Generate {
            config,
            checkpoint,
            count,
            all_axes,
            seed,
            threshold,
            out,
        } => {
            let config = config_with_seed(&config, seed)?;
            let data = config.data.load()?;
            let opts = GenerateOptions {
                count: count.unwrap_or(config.run.generate_count),
                seed: config.train.seed,
                all_axes,
                threshold: threshold.unwrap_or(config.run.threshold),
                n_probe: config.run.probes,
            };
            let path = cmd_generate(&checkpoint, &data.x, &opts, &out.unwrap_or_else(|| default_out(&checkpoint)))?;
            println!("wrote {} samples to {}", opts.count, path.display());
        }
        Command::Ablate {
            config,
            axis,
            values,
            out,
            seed,
        } => {
            let config = config_with_seed(&config, seed)?;
            let axis: AblationAxis = axis.parse()?;
            let dir = out.unwrap_or_else(|| config.run_dir());
            let rows = cmd_ablate(&config, axis, &values, &dir)?;
            println!("{}", ardvae::cli::ABLATION_HEADER);
            for r in rows {
                println!("{}", r.csv_row());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
