use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use jpt_cli::commands::{self, BedArgs, MetricsArgs, ModesArgs, SampleArgs, SceneKind};
use jpt_cli::config::RunConfig;
use jpt_cli::service::{self, AppState, ServiceConfig};
use jpt_core::analysis::hypothesis_from_truth;
use jpt_core::bed::{BedConfig, Planner, DEFAULT_BUDGET, DEFAULT_RELIABILITY};
use jpt_core::io::{load_ground_truth, load_observations, DEFAULT_NOISE};
use jpt_core::Scene;
use serde_json::json;

#[derive(Parser)]
#[command(name = "jpt", version, about = "Multi-object tracking by joint posterior sampling")]
struct Cli {
    /// Worker threads for replicate and candidate parallelism.
    #[arg(long, global = true, env = "JPT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scene: observations, ground truth, labels, modes and a config.
    Generate {
        #[arg(value_enum)]
        kind: SceneKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_NOISE)]
        noise: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run independent chains and write one sample file per chain plus a manifest.
    Sample {
        #[arg(long, required_unless_present = "manifest")]
        obs: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        config: Option<PathBuf>,
        /// Rerun exactly what a previous manifest describes.
        #[arg(long, conflicts_with_all = ["obs", "config", "chains", "iters", "seed"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// CLEAR MOT of every sample against ground truth.
    Metrics {
        #[arg(long, num_args = 1.., required = true)]
        samples: Vec<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Match radius; defaults to three observation-noise SDs.
        #[arg(long)]
        radius: Option<f64>,
        /// Evaluate in chunks of this many frames with identities reset per chunk.
        #[arg(long)]
        chunk: Option<usize>,
        /// Per-sample CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest reference mode of every sample, histogram and TV curve.
    Modes {
        #[arg(long, num_args = 1.., required = true)]
        samples: Vec<PathBuf>,
        #[arg(long)]
        modes: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Target::Uniform)]
        target: Target,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Closed-loop annotation experiment with a simulated annotator.
    Bed {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 5)]
        replicates: usize,
        #[command(flatten)]
        bed: BedFlags,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Serve the annotation API.
    Serve {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[command(flatten)]
        bed: BedFlags,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Uniform,
}

#[derive(Args)]
struct BedFlags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value = "mi", value_parser = parse_planner)]
    planner: Planner,
    #[arg(long, default_value_t = DEFAULT_RELIABILITY)]
    reliability: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Chains per posterior; defaults to the config's replicate count.
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_planner(s: &str) -> Result<Planner, String> {
    s.parse().map_err(|e: jpt_core::Error| e.to_string())
}

impl BedFlags {
    fn load(&self, obs: &jpt_core::ObservationSet) -> Result<(RunConfig, BedConfig)> {
        let mut run = RunConfig::load(&self.config)?;
        override_sampler(&mut run, self.chains, self.iters, self.seed);
        let bed = BedConfig {
            rounds: self.rounds,
            planner: self.planner,
            reliability: self.reliability,
            budget: self.budget,
            sampler: run.sampler.clone(),
            stlc: run.stlc_for(obs),
        };
        bed.validate()?;
        Ok((run, bed))
    }
}

fn override_sampler(run: &mut RunConfig, chains: Option<usize>, iters: Option<usize>, seed: Option<u64>) {
    if let Some(c) = chains {
        run.sampler.replicates = c;
    }
    if let Some(i) = iters {
        run.sampler.iterations = i;
    }
    if let Some(s) = seed {
        run.sampler.seed = s;
    }
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Generate { kind, seed, noise, out_dir } => commands::generate(kind, seed, noise, &out_dir),
        Command::Sample { obs, config, manifest, chains, iters, seed, out_dir } => {
            let args = match manifest {
                Some(m) => commands::from_manifest(&m, out_dir)?,
                None => {
                    let mut run = RunConfig::load(&config.expect("required by clap"))?;
                    override_sampler(&mut run, chains, iters, seed);
                    SampleArgs { obs: obs.expect("required by clap"), config: run, out_dir }
                }
            };
            commands::sample(&args)
        }
        Command::Metrics { samples, gt, config, radius, chunk, out } => {
            let config = RunConfig::load(&config)?;
            commands::metrics(&MetricsArgs {
                samples: &samples,
                truth: &gt,
                config: &config,
                radius,
                chunk,
                out: out.as_deref(),
            })
        }
        Command::Modes { samples, modes, obs, config, target: Target::Uniform, out_dir } => {
            let config = RunConfig::load(&config)?;
            commands::modes(&ModesArgs { samples: &samples, modes: &modes, obs: &obs, config: &config, out_dir: &out_dir })
        }
        Command::Bed { obs, gt, labels, replicates, bed, out_dir } => {
            let (run, config) = bed.load(&load_observations(&obs)?)?;
            commands::bed(&BedArgs {
                obs: &obs,
                truth: &gt,
                labels: &labels,
                config,
                model: run.model,
                replicates,
                out_dir: &out_dir,
            })
        }
        Command::Serve { obs, gt, port, host, bed } => {
            let observations = load_observations(&obs)?;
            let (run, config) = bed.load(&observations)?;
            let truth = gt.map(|p| load_ground_truth(p).map(|g| hypothesis_from_truth(&g))).transpose()?;
            let scene = Scene::new(observations, run.model)?;
            let (state, writer) = AppState::new(scene, truth, ServiceConfig::new(config))?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state, writer, SocketAddr::new(host, port)))?;
            Ok(json!({ "stopped": true }))
        }
    }
}

/// Error line: `{"error": kind, "message": ...}`. Library validation errors
/// exit with 2, everything else with 1.
fn report(err: &anyhow::Error) -> ExitCode {
    let core = err.chain().find_map(|e| e.downcast_ref::<jpt_core::Error>());
    let kind = core.map_or("runtime", |e| e.kind());
    let message = err.chain().map(|e| e.to_string()).collect::<Vec<_>>().join(": ");
    eprintln!("{}", json!({ "error": kind, "message": message }));
    match core {
        Some(jpt_core::Error::Io(_)) | None => ExitCode::from(1),
        Some(_) => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
