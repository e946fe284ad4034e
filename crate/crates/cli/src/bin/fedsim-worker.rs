//! Standalone training worker: `fedsim-worker --connect host:port`.

use std::process::ExitCode;

use clap::Parser;
use fedsim::workerproto::{run_worker, WorkerOptions};

#[derive(Parser)]
#[command(
    name = "fedsim-worker",
    version,
    about = "Training worker for fedsim run --listen"
)]
struct Args {
    #[arg(long, value_name = "HOST:PORT")]
    connect: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run_worker(&args.connect, &WorkerOptions::default()) {
        Ok(n) => {
            log::info!("worker finished after {n} tasks");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
