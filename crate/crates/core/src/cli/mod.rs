//! Experiment commands behind the `ardvae` binary.

mod commands;
mod config;

pub use commands::{
    cmd_ablate, cmd_eval, cmd_generate, cmd_relevance, cmd_train, evaluate, generate_samples, generation_variances,
    load_model, relevance_report, summarize_run, AblationAxis, AblationRow, EvalOptions, EvalReport, GenerateOptions,
    Metric, TrainSummary, ABLATION_FILE, ABLATION_HEADER, CHECKPOINT_FILE, CONFIG_FILE, EPOCHS_FILE, GENERATED_FILE,
    METRICS_CSV, METRICS_JSON, RELEVANCE_FILE, SEED_FILE,
};
pub use config::{
    apply_overrides, load_config, parse_config, DataConfig, LoadedData, RunConfig, RunSection, ENV_PREFIX,
};
