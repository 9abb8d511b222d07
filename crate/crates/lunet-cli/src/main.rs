//! Command-line front end: dataset generation, training, evaluation, and
//! inversion as reproducible single-process runs.
//!
//! Every command reads an optional JSON run configuration, takes a global
//! `--seed` override and `--out` directory, writes its artifacts under that
//! directory, and prints exactly one JSON document to stdout. Exit codes
//! are scriptable: 0 success, 2 configuration error, 3 numeric abort during
//! training, 4 singular layer during inversion, 5 corrupt artifact file,
//! 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use lunet::checkpoint::{config_hash, Checkpoint, Provenance};
use lunet::dataio::{read_dataset, read_vector, write_dataset, write_vector};
use lunet::error::Error;
use lunet::network::{InvertibleNet, NetConfig};
use lunet::tasks::{
    generate_embedding_pairs, generate_function_dataset, Dataset, DatasetDescriptor,
};
use lunet::train::{evaluate, fit, noise_perturbed_inversion, TrainConfig};
use lunet::{rng, Vector};

#[derive(Parser)]
#[command(
    name = "lunet",
    version,
    about = "Invertible networks with LU-structured weights: generate, train, invert"
)]
struct Cli {
    /// JSON run configuration (task, net, train sections).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for generated artifacts.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset described by the config (and the oracle
    /// checkpoint for the embedding task).
    GenData,
    /// Train a fresh network on a dataset; writes checkpoint and metrics.
    Train {
        /// Dataset file (default: <out>/dataset.lds).
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset's evaluation split.
    Eval {
        /// Checkpoint file (default: <out>/model.ckpt).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Dataset file (default: <out>/dataset.lds).
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Invert a target vector through a checkpointed network.
    Invert {
        /// Checkpoint file (default: <out>/model.ckpt).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Vector file holding the target to invert.
        #[arg(long, value_name = "PATH")]
        target: PathBuf,
        /// Standard deviation of Gaussian noise added to the target before
        /// inverting. Zero adds nothing.
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
        /// Where to write the result (default: <out>/inverse.json).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Measure round-trip error inverse(forward(x)) vs x on random inputs.
    RoundTrip {
        /// Checkpoint file (default: <out>/model.ckpt).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Number of random probe inputs.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Probe inputs are sampled coordinatewise from [-radius, radius].
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
    },
    /// Print metadata of a checkpoint or dataset file.
    Inspect {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
}

/// Top-level JSON configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    task: DatasetDescriptor,
    #[serde(default)]
    net: Option<NetConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

impl RunConfig {
    fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("config file {}: {e}", path.display())))
    }

    /// Replace every seed with the command-line override.
    fn override_seed(&mut self, seed: u64) {
        match &mut self.task {
            DatasetDescriptor::Function(spec) => spec.seed = seed,
            DatasetDescriptor::Embedding { seed: s, .. } => *s = seed,
        }
        if let Some(train) = &mut self.train {
            train.seed = seed;
        }
    }

    fn task_seed(&self) -> u64 {
        match &self.task {
            DatasetDescriptor::Function(spec) => spec.seed,
            DatasetDescriptor::Embedding { seed, .. } => *seed,
        }
    }

    fn net_config(&self) -> Result<NetConfig, Error> {
        let cfg = self
            .net
            .clone()
            .unwrap_or_else(|| NetConfig::new(self.task.dim()));
        if cfg.dim != self.task.dim() {
            return Err(Error::InvalidParameter(format!(
                "net dim {} does not match task dim {}",
                cfg.dim,
                self.task.dim()
            )));
        }
        Ok(cfg)
    }

    fn train_config(&self) -> TrainConfig {
        self.train
            .clone()
            .unwrap_or_else(|| TrainConfig::new(self.task_seed()))
    }

    /// Fingerprint of the effective configuration (after seed overrides).
    fn fingerprint(&self) -> Result<String, Error> {
        let canon = serde_json::to_string(self)?;
        Ok(config_hash(canon.as_bytes()))
    }
}

fn require_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Error::InvalidParameter("this command needs --config <PATH>".into())
    })?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn generate_dataset(cfg: &RunConfig) -> Result<(Dataset, Option<InvertibleNet>), Error> {
    match &cfg.task {
        DatasetDescriptor::Function(spec) => Ok((generate_function_dataset(spec)?, None)),
        DatasetDescriptor::Embedding {
            dim,
            depth,
            train_count,
            eval_count,
            seed,
        } => {
            let pairs =
                generate_embedding_pairs(*dim, train_count + eval_count, *depth, *seed)?;
            let ds = pairs.split(*train_count, cfg.task.clone())?;
            Ok((ds, Some(pairs.oracle)))
        }
    }
}

fn cmd_gen_data(cli: &Cli) -> Result<serde_json::Value, Error> {
    let cfg = require_config(cli)?;
    let (dataset, oracle) = generate_dataset(&cfg)?;
    std::fs::create_dir_all(&cli.out)?;
    let data_path = cli.out.join("dataset.lds");
    write_dataset(&data_path, &dataset)?;

    let oracle_path = match oracle {
        Some(net) => {
            let path = cli.out.join("oracle.ckpt");
            let prov = Provenance {
                seed: cfg.task_seed(),
                config_hash: cfg.fingerprint()?,
                epoch: 0,
            };
            Checkpoint::from_net(&net, prov).save(&path)?;
            Some(path.display().to_string())
        }
        None => None,
    };

    Ok(json!({
        "dataset": data_path.display().to_string(),
        "oracle": oracle_path,
        "dim": dataset.dim(),
        "train_count": dataset.train.len(),
        "eval_count": dataset.eval.len(),
    }))
}

fn cmd_train(cli: &Cli, dataset_path: Option<&Path>) -> Result<serde_json::Value, Error> {
    let cfg = require_config(cli)?;
    let data_path = dataset_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("dataset.lds"));
    let dataset = read_dataset(&data_path)?;

    let net_cfg = cfg.net_config()?;
    if net_cfg.dim != dataset.dim() {
        return Err(Error::InvalidParameter(format!(
            "net dim {} does not match dataset dim {}",
            net_cfg.dim,
            dataset.dim()
        )));
    }
    let train_cfg = cfg.train_config();
    train_cfg.validate()?;

    let mut init_rng = rng::stream(train_cfg.seed, rng::STREAM_INIT);
    let mut net = InvertibleNet::init(&net_cfg, &mut init_rng)?;
    let metrics = fit(&mut net, &dataset.train, &dataset.eval, &train_cfg)?;

    std::fs::create_dir_all(&cli.out)?;
    let metrics_path = cli.out.join("metrics.jsonl");
    let mut lines = String::new();
    for record in &metrics {
        lines.push_str(&serde_json::to_string(record)?);
        lines.push('\n');
    }
    std::fs::write(&metrics_path, lines)?;

    let ckpt_path = cli.out.join("model.ckpt");
    let prov = Provenance {
        seed: train_cfg.seed,
        config_hash: cfg.fingerprint()?,
        epoch: train_cfg.epochs as u64,
    };
    Checkpoint::from_net(&net, prov).save(&ckpt_path)?;

    let last = metrics.last().expect("epochs is validated positive");
    Ok(json!({
        "checkpoint": ckpt_path.display().to_string(),
        "metrics": metrics_path.display().to_string(),
        "epochs": train_cfg.epochs,
        "final": last,
    }))
}

fn load_net(cli: &Cli, checkpoint: Option<&Path>) -> Result<InvertibleNet, Error> {
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("model.ckpt"));
    Checkpoint::load(&path)?.to_net()
}

fn cmd_eval(
    cli: &Cli,
    checkpoint: Option<&Path>,
    dataset_path: Option<&Path>,
) -> Result<serde_json::Value, Error> {
    let net = load_net(cli, checkpoint)?;
    let data_path = dataset_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("dataset.lds"));
    let dataset = read_dataset(&data_path)?;
    if net.dim() != dataset.dim() {
        return Err(Error::InvalidParameter(format!(
            "checkpoint dim {} does not match dataset dim {}",
            net.dim(),
            dataset.dim()
        )));
    }
    let summary = evaluate(&net, &dataset.eval)?;
    Ok(json!({
        "eval_mse": summary.eval_mse,
        "eval_max_abs": summary.eval_max_abs,
        "inversion_error": summary.inversion_error,
        "inversion_max_abs": summary.inversion_max_abs,
        "round_trip_error": summary.round_trip_error,
        "determinants": net.weight_determinants(),
        "determinant_product": net.determinant_product(),
        "condition": net.condition_estimates()?,
    }))
}

fn cmd_invert(
    cli: &Cli,
    checkpoint: Option<&Path>,
    target: &Path,
    noise_std: f64,
    output: Option<&Path>,
) -> Result<serde_json::Value, Error> {
    if !noise_std.is_finite() || noise_std < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "--noise-std must be finite and non-negative, got {noise_std}"
        )));
    }
    let net = load_net(cli, checkpoint)?;
    let y = read_vector(target)?;
    let seed = cli.seed.unwrap_or(0);
    let x = noise_perturbed_inversion(&net, &y, noise_std * noise_std, seed)?;

    std::fs::create_dir_all(&cli.out)?;
    let out_path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("inverse.json"));
    write_vector(&out_path, &x)?;
    Ok(json!({
        "output": out_path.display().to_string(),
        "noise_std": noise_std,
        "seed": seed,
        "values": x.as_slice(),
    }))
}

fn cmd_round_trip(
    cli: &Cli,
    checkpoint: Option<&Path>,
    count: usize,
    radius: f64,
) -> Result<serde_json::Value, Error> {
    if count == 0 {
        return Err(Error::InvalidParameter("--count must be positive".into()));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "--radius must be positive and finite, got {radius}"
        )));
    }
    let net = load_net(cli, checkpoint)?;
    let seed = cli.seed.unwrap_or(0);
    let mut sample_rng = rng::stream(seed, rng::STREAM_DATA);
    let xs: Vec<Vector> = (0..count)
        .map(|_| {
            Vector::new(
                (0..net.dim())
                    .map(|_| sample_rng.random_range(-radius..radius))
                    .collect(),
            )
        })
        .collect();
    let err = net.round_trip_error(&xs)?;
    Ok(json!({
        "round_trip_error": err,
        "count": count,
        "radius": radius,
        "dim": net.dim(),
        "seed": seed,
    }))
}

fn cmd_inspect(
    checkpoint: Option<&Path>,
    dataset: Option<&Path>,
) -> Result<serde_json::Value, Error> {
    if checkpoint.is_none() && dataset.is_none() {
        return Err(Error::InvalidParameter(
            "inspect needs --checkpoint and/or --dataset".into(),
        ));
    }
    let mut report = serde_json::Map::new();
    if let Some(path) = checkpoint {
        let ckpt = Checkpoint::load(path)?;
        let net = ckpt.to_net()?;
        report.insert(
            "checkpoint".into(),
            json!({
                "path": path.display().to_string(),
                "dim": ckpt.dim(),
                "depth": ckpt.depth(),
                "provenance": ckpt.provenance(),
                "determinant_product": net.determinant_product(),
                "condition": net.condition_estimates()?,
            }),
        );
    }
    if let Some(path) = dataset {
        let ds = read_dataset(path)?;
        report.insert(
            "dataset".into(),
            json!({
                "path": path.display().to_string(),
                "dim": ds.dim(),
                "train_count": ds.train.len(),
                "eval_count": ds.eval.len(),
                "descriptor": ds.descriptor,
            }),
        );
    }
    Ok(serde_json::Value::Object(report))
}

/// Exit code for an error, per the documented map.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidParameter(_)
        | Error::InvalidDomain { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyDataset(_)
        | Error::TraceMismatch(_) => 2,
        Error::NonFiniteLoss { .. } | Error::NonFinite(_) => 3,
        Error::SingularDiagonal { .. } => 4,
        Error::CorruptCheckpoint(_) | Error::CorruptDataset(_) => 5,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, Error> {
    match &cli.command {
        Command::GenData => cmd_gen_data(cli),
        Command::Train { dataset } => cmd_train(cli, dataset.as_deref()),
        Command::Eval {
            checkpoint,
            dataset,
        } => cmd_eval(cli, checkpoint.as_deref(), dataset.as_deref()),
        Command::Invert {
            checkpoint,
            target,
            noise_std,
            output,
        } => cmd_invert(
            cli,
            checkpoint.as_deref(),
            target,
            *noise_std,
            output.as_deref(),
        ),
        Command::RoundTrip {
            checkpoint,
            count,
            radius,
        } => cmd_round_trip(cli, checkpoint.as_deref(), *count, *radius),
        Command::Inspect {
            checkpoint,
            dataset,
        } => cmd_inspect(checkpoint.as_deref(), dataset.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
