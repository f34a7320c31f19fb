//! `ntklab`: build benchmarks, score architectures and run searches.
//!
//! Exit status is 0 on success, 2 for usage or configuration errors and 1
//! for everything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "ntklab", version, about = "Score cell architectures with neural tangent kernel metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each one overrides the matching key of
/// the config file; the defaults shown apply when neither sets it.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Flat TOML run configuration
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run seed from which every random stream is derived [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long)]
    jobs: Option<usize>,
    /// Normalization mode for kernels: eval or train [default: eval]
    #[arg(long)]
    mode: Option<String>,
    /// Weight init: xavier, kaiming, gaussian or gaussian:<std> [default: kaiming]
    #[arg(long)]
    init: Option<String>,
    /// Probe batch size [default: 32]
    #[arg(long)]
    probe_size: Option<usize>,
    /// Dataset file to load instead of generating one [default: generate]
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Directory for output files not given explicitly [default: .]
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Override any other config key, e.g. --set epochs=10 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every architecture of the space and cache metrics at snapshot epochs
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Benchmark file; existing records are kept [default: <out-dir>/bench.jsonl]
        #[arg(long, value_name = "FILE")]
        bench: Option<PathBuf>,
        /// Snapshot epochs at which metrics are cached
        #[arg(long, default_value = "0,1,3,5,10")]
        snapshots: String,
        /// Metrics to cache
        #[arg(long, default_value = "fnorm,mean,ncn,lga")]
        metrics: String,
        /// Normalization modes to cache
        #[arg(long, default_value = "train,eval")]
        modes: String,
    },
    /// Print one metric value for one architecture after t epochs
    Score {
        #[command(flatten)]
        common: Common,
        /// Cell encoding, e.g. "1|2|0|0|3|4"
        #[arg(long)]
        arch: String,
        /// Metric id: fnorm, mean, ncn or lga
        #[arg(long, default_value = "lga")]
        metric: String,
        /// Training epochs before the kernel is taken
        #[arg(long, default_value_t = 0)]
        t: usize,
    },
    /// Kendall tau between cached metrics and final accuracy
    Rankcorr {
        #[command(flatten)]
        common: Common,
        /// Benchmark file written by `oracle`
        #[arg(long, value_name = "FILE")]
        bench: PathBuf,
        /// Metrics to correlate
        #[arg(long, default_value = "fnorm,mean,ncn,lga")]
        metrics: String,
        /// Epochs at which the metrics are read
        #[arg(long, default_value = "0,1,3,5,10")]
        t: String,
        /// Modes to report [default: the configured mode]
        #[arg(long)]
        modes: Option<String>,
        /// Compute missing cache entries and write them back to the benchmark
        #[arg(long)]
        recompute: bool,
        /// Report file [default: <out-dir>/rankcorr.csv]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Per-decile rank correlation over accuracy-sorted architectures
    Decile {
        #[command(flatten)]
        common: Common,
        /// Benchmark file written by `oracle`
        #[arg(long, value_name = "FILE")]
        bench: PathBuf,
        /// Metric id
        #[arg(long, default_value = "lga")]
        metric: String,
        /// Epoch at which the metric is read
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Resampling rounds per decile
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Architectures sampled per decile and round
        #[arg(long, default_value_t = 10)]
        per_decile: usize,
        /// Compute missing cache entries and write them back to the benchmark
        #[arg(long)]
        recompute: bool,
        /// Report file [default: <out-dir>/decile.csv]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Per-epoch kernel correlation and relative difference against initialization
    #[command(name = "ntk-evolution")]
    NtkEvolution {
        #[command(flatten)]
        common: Common,
        /// Cell encoding
        #[arg(long)]
        arch: String,
        /// Epochs to train [default: the configured epochs]
        #[arg(long)]
        epochs: Option<usize>,
        /// Report file [default: <out-dir>/evolution.csv]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Random search scored by LGA after t epochs
    Randsearch {
        #[command(flatten)]
        common: Common,
        /// Candidates to sample
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Training epochs per candidate
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Sample distinct architectures
        #[arg(long)]
        without_replacement: bool,
        /// Result file [default: <out-dir>/randsearch.json]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Regularized evolution scored by LGA after t epochs
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Population size
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Total evaluations, population included
        #[arg(long, default_value_t = 100)]
        budget: usize,
        /// Training epochs per candidate
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Result file [default: <out-dir>/evolve.json]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write the dataset the configuration would generate
    #[command(name = "gen-data")]
    GenData {
        #[command(flatten)]
        common: Common,
        /// Dataset file [default: <out-dir>/data.txt]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Oracle { common, .. }
            | Command::Score { common, .. }
            | Command::Rankcorr { common, .. }
            | Command::Decile { common, .. }
            | Command::NtkEvolution { common, .. }
            | Command::Randsearch { common, .. }
            | Command::Evolve { common, .. }
            | Command::GenData { common, .. } => common,
        }
    }
}

fn resolve(common: &Common) -> ntk_lab::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&common.overrides)?;
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = &common.mode {
        cfg.mode = v.clone();
    }
    if let Some(v) = &common.init {
        cfg.init = v.clone();
    }
    if let Some(v) = common.probe_size {
        cfg.probe_size = v;
    }
    if let Some(v) = &common.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &common.out_dir {
        cfg.out_dir = v.clone();
    }
    Ok(cfg)
}

fn dispatch(cmd: Command) -> ntk_lab::Result<()> {
    let cfg = resolve(cmd.common())?;
    if cfg.jobs > 0 {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    match cmd {
        Command::Oracle { bench, snapshots, metrics, modes, .. } => {
            commands::oracle(&cfg, bench.as_deref(), &snapshots, &metrics, &modes)
        }
        Command::Score { arch, metric, t, .. } => commands::score(&cfg, &arch, &metric, t),
        Command::Rankcorr { bench, metrics, t, modes, recompute, out, .. } => {
            commands::rankcorr(&cfg, &bench, &metrics, &t, modes.as_deref(), recompute, out.as_deref())
        }
        Command::Decile { bench, metric, t, seeds, per_decile, recompute, out, .. } => {
            commands::decile(&cfg, &bench, &metric, t, seeds, per_decile, recompute, out.as_deref())
        }
        Command::NtkEvolution { arch, epochs, out, .. } => commands::ntk_evolution(&cfg, &arch, epochs, out.as_deref()),
        Command::Randsearch { n, t, without_replacement, out, .. } => {
            commands::randsearch(&cfg, n, t, without_replacement, out.as_deref())
        }
        Command::Evolve { n, budget, t, out, .. } => commands::evolve(&cfg, n, budget, t, out.as_deref()),
        Command::GenData { out, .. } => commands::gen_data(&cfg, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version print to stdout and succeed.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ntklab: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
