//! `fedsim`: run simulations, synthesise inputs and summarise outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedsim::config::{load_config_with_overrides, parse_override, ExperimentConfig};
use fedsim::engine::{build_dataset, RunOutputs, Simulation};
use fedsim::feddata::{
    heterogeneity_report, partition, write_mapping, PartitionMode, PartitionSpec, TaskGenerator,
    DEFAULT_RADIUS,
};
use fedsim::report::{
    accuracy_histogram, parse_client_accuracy, parse_timelines, straggler_report,
    write_accuracy_histogram, write_straggler_report,
};
use fedsim::traces::{synth_traces, write_availability, write_profiles, HeterogeneitySpec};
use fedsim::workerproto::{run_worker, Dispatcher, LocalPool, RemotePool, WorkerOptions};

#[derive(Parser)]
#[command(
    name = "fedsim",
    version,
    about = "Trace-driven federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment.
    Run(RunArgs),
    /// Generate synthetic traces or datasets.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Summarise a dataset or the outputs of a run.
    Report(ReportArgs),
    /// Serve training tasks for a coordinator started with `run --listen`.
    Worker {
        #[arg(long, value_name = "HOST:PORT")]
        connect: String,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a config key; applied after the file, left to right.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let overrides = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<fedsim::Result<Vec<_>>>()?;
        load_config_with_overrides(&self.config, &overrides)
            .with_context(|| format!("loading {}", self.config.display()))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Local training threads, or remote workers to wait for with --listen.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Accept remote workers on this address instead of training locally.
    #[arg(long, value_name = "HOST:PORT")]
    listen: Option<String>,
    #[arg(long)]
    emit_timelines: bool,
    #[arg(long)]
    emit_client_acc: bool,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Client profiles and availability slots.
    Traces {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// A client-to-samples mapping file for the synthetic task.
    Data {
        #[arg(long)]
        clients: usize,
        /// Dirichlet concentration; IID when omitted.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// Dataset to analyse for heterogeneity.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE", requires = "config")]
    overrides: Vec<String>,
    /// Timeline CSV from `run --emit-timelines`.
    #[arg(long, value_name = "PATH")]
    timelines: Option<PathBuf>,
    /// Completion rank compared with the median; the last completion if
    /// omitted.
    #[arg(long, requires = "timelines")]
    participants: Option<usize>,
    /// Client accuracy CSV from `run --emit-client-acc`.
    #[arg(long, value_name = "PATH")]
    client_acc: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.config.load()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("config.resolved"), cfg.to_kv_string())?;

    let dispatcher: Box<dyn Dispatcher> = match &args.listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!(
                "waiting for {} worker(s) on {}",
                args.workers,
                listener.local_addr()?
            );
            Box::new(RemotePool::accept(
                listener,
                args.workers,
                &WorkerOptions::default(),
            )?)
        }
        None => Box::new(LocalPool::new(args.workers)),
    };
    let outputs = RunOutputs {
        metrics: Some(args.out.join("metrics.csv")),
        timelines: args.emit_timelines.then(|| args.out.join("timelines.csv")),
        client_acc: args
            .emit_client_acc
            .then(|| args.out.join("client_acc.csv")),
    };
    let mut sim = Simulation::from_config(cfg, dispatcher)?;
    let log = sim.run(&outputs)?;
    if log.total_bytes() != sim.traffic().total() {
        bail!(
            "byte accounting mismatch: rounds report {} bytes, transfer counter {}",
            log.total_bytes(),
            sim.traffic().total()
        );
    }
    let mut out = std::io::stdout().lock();
    match log.final_accuracy() {
        Some(a) => writeln!(out, "final accuracy: {a:.4}")?,
        None => writeln!(out, "final accuracy: n/a")?,
    }
    writeln!(out, "virtual time: {:.3} h", log.total_virtual_s() / 3600.0)?;
    writeln!(out, "traffic: {:.3} GB", log.total_bytes() as f64 / 1e9)?;
    Ok(())
}

fn cmd_synth(cmd: &SynthCmd) -> Result<()> {
    match cmd {
        SynthCmd::Traces { n, seed, out } => {
            if *n == 0 {
                bail!("--n must be at least 1");
            }
            fs::create_dir_all(out)?;
            let set = synth_traces(*n, *seed, &HeterogeneitySpec::default());
            write_profiles(create(&out.join("profiles.csv"))?, set.profiles.values())?;
            write_availability(
                create(&out.join("availability.csv"))?,
                set.availability.values(),
            )?;
        }
        SynthCmd::Data {
            clients,
            alpha,
            classes,
            dim,
            seed,
            out,
        } => {
            fs::create_dir_all(out)?;
            let gen = TaskGenerator::on_sphere(*classes, *dim, DEFAULT_RADIUS, *seed)?;
            let mode = match alpha {
                Some(a) if *a > 0.0 => PartitionMode::Dirichlet { alpha: *a },
                Some(a) => bail!("--alpha must be positive, got {a}"),
                None => PartitionMode::Iid,
            };
            let ds = partition(&gen, *clients, &PartitionSpec::with_mode(mode), *seed)?;
            write_mapping(create(&out.join("mapping.csv"))?, &ds)?;
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    if args.config.is_none() && args.timelines.is_none() && args.client_acc.is_none() {
        bail!("nothing to report: pass --config, --timelines or --client-acc");
    }
    fs::create_dir_all(&args.out)?;
    if let Some(config) = &args.config {
        let cfg = ConfigArgs {
            config: config.clone(),
            overrides: args.overrides.clone(),
        }
        .load()?;
        let ds = build_dataset(&cfg)?;
        let report = heterogeneity_report(&ds, cfg.seed)?;
        report.write_csv(create(&args.out.join("heterogeneity.csv"))?)?;
        println!("mean pairwise JS distance: {:.4}", report.mean_js());
    }
    if let Some(path) = &args.timelines {
        let rows = parse_timelines(File::open(path)?, &path.display().to_string())?;
        let report = straggler_report(&rows, args.participants);
        write_straggler_report(create(&args.out.join("stragglers.csv"))?, &report)?;
        if !report.is_empty() {
            let mean = report.iter().map(|r| r.ratio).sum::<f64>() / report.len() as f64;
            println!("mean straggler ratio: {mean:.4}");
        }
    }
    if let Some(path) = &args.client_acc {
        let acc = parse_client_accuracy(File::open(path)?, &path.display().to_string())?;
        let hist = accuracy_histogram(acc.values().copied(), 10);
        write_accuracy_histogram(create(&args.out.join("accuracy_hist.csv"))?, &hist)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Synth(cmd) => cmd_synth(cmd),
        Cmd::Report(args) => cmd_report(args),
        Cmd::Worker { connect } => run_worker(connect, &WorkerOptions::default())
            .map(|n| log::info!("worker finished after {n} tasks"))
            .map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
