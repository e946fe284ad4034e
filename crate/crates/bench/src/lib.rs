//! Shared fixtures for the benchmarks.

use fedsim::config::ExperimentConfig;
use fedsim::Algorithm;

/// Logistic model on the synthetic task, traces on, evaluation only at the
/// end.
pub fn bench_config(clients: usize, participants: usize, rounds: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::with_defaults(Algorithm::FedAvg, rounds);
    cfg.data.num_clients = clients;
    cfg.target_participants = participants;
    cfg.eval_every = rounds.max(1);
    cfg.seed = 1;
    cfg
}
