mod config;
mod eval;
mod generate;
mod output;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{Builder, RunConfig};

/// Bad invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        UsageError(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "sparsefield", version, about = "Train and query sample-conditioned field models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus an evaluation log.
    Train {
        #[command(flatten)]
        common: Common,
        /// polynomial or idx
        #[arg(long)]
        task: Option<String>,
        /// IDX image file for the idx task.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Infer the mean and draw samples given observations.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Observation file with one `x.. v..` row per line.
        #[arg(long)]
        observe: Option<PathBuf>,
        /// Observe cells of a stored signal, given as `path:index`.
        #[arg(long)]
        from_signal: Option<String>,
        #[arg(long)]
        num_observed: Option<usize>,
        #[arg(long)]
        num_samples: Option<usize>,
        /// Autoregressive steps before the mean fill.
        #[arg(long)]
        n_prime: Option<usize>,
    },
    /// Sweep observation-set sizes and report reconstruction metrics.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Test data; IDX images, or omitted for fresh polynomials.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated observation-set sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        num_images: Option<usize>,
        #[arg(long)]
        num_draws: Option<usize>,
        #[arg(long)]
        n_prime: Option<usize>,
    },
    /// Serve checkpoints over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bind: Option<String>,
        /// Checkpoint to load as `id=path`; repeatable. `--ckpt` loads as `default`.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// f32 or f64
    #[arg(long)]
    precision: Option<String>,
    /// Override any config key, e.g. `--set train.lr=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(common: &Common, flags: Vec<(&str, Option<Value>)>) -> anyhow::Result<RunConfig> {
    let mut b = Builder::new();
    if let Some(path) = &common.config {
        b = b.file(path)?;
    }
    for s in &common.set {
        b = b.set_str(s)?;
    }
    let shared = [
        ("out", common.out.as_ref().map(|p| json!(p))),
        ("seed", common.seed.map(|s| json!(s))),
        ("ckpt", common.ckpt.as_ref().map(|p| json!(p))),
        ("precision", common.precision.as_ref().map(|p| json!(p))),
    ];
    for (key, value) in shared.into_iter().chain(flags) {
        if let Some(v) = value {
            b = b.set(key, v)?;
        }
    }
    let cfg = b.build()?;
    log::info!("resolved config: {}", serde_json::to_string(&cfg)?);
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { common, task, data, steps } => {
            let cfg = resolve(
                &common,
                vec![
                    ("task", task.map(Value::String)),
                    ("data.path", data.map(|p| json!(p))),
                    ("train.steps", steps.map(|s| json!(s))),
                ],
            )?;
            train::run(&cfg)
        }
        Command::Generate {
            common,
            observe,
            from_signal,
            num_observed,
            num_samples,
            n_prime,
        } => {
            let cfg = resolve(
                &common,
                vec![
                    ("generate.observe", observe.map(|p| json!(p))),
                    ("generate.from_signal", from_signal.map(Value::String)),
                    ("generate.num_observed", num_observed.map(|n| json!(n))),
                    ("generate.num_samples", num_samples.map(|n| json!(n))),
                    ("sampler.n_prime", n_prime.map(|n| json!(n))),
                ],
            )?;
            generate::run(&cfg)
        }
        Command::Eval {
            common,
            data,
            sizes,
            num_images,
            num_draws,
            n_prime,
        } => {
            let cfg = resolve(
                &common,
                vec![
                    ("data.path", data.map(|p| json!(p))),
                    ("eval.sizes", sizes.map(|s| json!(s))),
                    ("eval.num_images", num_images.map(|n| json!(n))),
                    ("eval.num_draws", num_draws.map(|n| json!(n))),
                    ("sampler.n_prime", n_prime.map(|n| json!(n))),
                ],
            )?;
            eval::run(&cfg)
        }
        Command::Serve { common, bind, checkpoints } => {
            let list = (!checkpoints.is_empty()).then(|| json!(checkpoints));
            let mut cfg = resolve(&common, vec![("serve.bind", bind.map(Value::String)), ("serve.checkpoints", list)])?;
            if let Some(path) = &cfg.ckpt {
                cfg.serve.checkpoints.push(format!("default={}", path.display()));
            }
            let serve = cfg.serve.with_env()?;
            if serve.checkpoints.is_empty() {
                return Err(UsageError::new("no checkpoints to serve (--checkpoint id=path or --ckpt)").into());
            }
            sparsefield_service::run(serve)?;
            Ok(())
        }
    }
}

/// 2 for anything the caller can fix by changing arguments or inputs.
fn exit_code(err: &anyhow::Error) -> u8 {
    use sparsefield::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<sparsefield::Error>() {
            return match e {
                E::Config(_) | E::Usage(_) | E::Input(_) => 2,
                _ => 1,
            };
        }
        if let Some(sparsefield_service::ServiceError::Config(_)) = cause.downcast_ref() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
