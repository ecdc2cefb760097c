//! Argument parsing and dispatch for the `sbcm` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use sbcm_core::fusion::FusionKind;

use crate::commands::{self, Context, Partition};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "sbcm", version, about = "Sub-band cepstral spoofing countermeasures")]
pub struct Cli {
    /// Experiment config (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub train_protocol: Option<PathBuf>,
    #[arg(long)]
    pub train_audio: Option<PathBuf>,
    #[arg(long)]
    pub eval_protocol: Option<PathBuf>,
    #[arg(long)]
    pub eval_audio: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract LFCC features for every protocol trial.
    Extract {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        audio_dir: PathBuf,
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// Train a bona fide / spoof GMM pair from cached features.
    Train {
        #[arg(long)]
        cache_dir: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score cached features with a trained countermeasure.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cache_dir: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full-band min t-DCF, EER and Bhattacharyya distance per filter count.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [20, 30, 40, 50, 60, 70])]
        filters: Vec<usize>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Min t-DCF heat-map over the configured band grid for one attack.
    Heatmap {
        #[arg(long)]
        attack: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Centre of mass of a heat-map.
    Com {
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a score fuser: linear, multinomial, gmm or svm-poly.
    FuseTrain {
        #[arg(long, value_parser = parse_kind)]
        kind: FusionKind,
        #[arg(long, num_args = 1.., required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a trained fuser to aligned score files.
    FuseApply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pooled and per-attack EER and min t-DCF of a score file.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        protocol: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with band-limited attack artefacts.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate score files for a Gaussian-cluster scenario.
    Scenario {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_kind(s: &str) -> std::result::Result<FusionKind, String> {
    FusionKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = FusionKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn pick(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| Error::Usage(format!("--{name} is required (or set it under [paths])")))
}

fn partitions(d: &DataArgs, cfg: &ExperimentConfig) -> Result<(Partition, Partition)> {
    let p = &cfg.paths;
    Ok((
        Partition {
            protocol: pick(&d.train_protocol, &p.train_protocol, "train-protocol")?,
            audio_dir: pick(&d.train_audio, &p.train_audio, "train-audio")?,
        },
        Partition {
            protocol: pick(&d.eval_protocol, &p.eval_protocol, "eval-protocol")?,
            audio_dir: pick(&d.eval_audio, &p.eval_audio, "eval-audio")?,
        },
    ))
}

fn print(out: Option<&Path>, text: &str) {
    if out.is_none() {
        print!("{text}");
    }
}

/// Runs a parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    let mut config = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let ctx = Context::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Extract { protocol, audio_dir, cache_dir } => {
            commands::extract(&ctx, protocol, audio_dir, cache_dir).map(|_| ())
        }
        Command::Train { cache_dir, protocol, out } => commands::train(&ctx, cache_dir, protocol, out).map(|_| ()),
        Command::Score { model, cache_dir, protocol, out } => {
            commands::score(&ctx, model, cache_dir, protocol, out).map(|_| ())
        }
        Command::Sweep { filters, data, out } => {
            let (tr, ev) = partitions(data, &ctx.config)?;
            commands::sweep(&ctx, &tr, &ev, filters, out).map(|_| ())
        }
        Command::Heatmap { attack, data, out } => {
            let (tr, ev) = partitions(data, &ctx.config)?;
            commands::heatmap(&ctx, &tr, &ev, attack, out).map(|_| ())
        }
        Command::Com { heatmap, epsilon, out } => {
            let text = commands::com(&ctx, heatmap, *epsilon, out.as_deref())?;
            print(out.as_deref(), &text);
            Ok(())
        }
        Command::FuseTrain { kind, scores, protocol, out } => {
            commands::fuse_train(&ctx, *kind, scores, protocol, out).map(|_| ())
        }
        Command::FuseApply { model, scores, out } => commands::fuse_apply(&ctx, model, scores, out).map(|_| ()),
        Command::Evaluate { scores, protocol, out } => {
            let (_, text) = commands::evaluate_scores(&ctx, scores, protocol.as_deref(), out.as_deref())?;
            print(out.as_deref(), &text);
            Ok(())
        }
        Command::Synth { spec, out } => commands::synth(&ctx, spec.as_deref(), out).map(|_| ()),
        Command::Scenario { spec, out } => commands::scenario(&ctx, spec.as_deref(), out).map(|_| ()),
    })
}

/// Parses `args`, runs the command and returns the process exit status:
/// 0 on success, 1 for usage errors, 2 when a computation fails.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
