//! Trace-driven federated learning simulator.
//!
//! Rounds run against a virtual clock: client compute, network transfer and
//! availability come from per-client traces, while local training is real
//! gradient descent on a desk-scale model. Physical execution order (thread
//! pool or remote workers) never influences any simulated quantity.
//!
//! The crate is organised by concern:
//!
//! - [`config`]: experiment configuration and the learning-rate schedule
//! - [`traces`]: client compute/network profiles and availability slots
//! - [`feddata`]: synthetic tasks, partitioners and heterogeneity analysis
//! - [`learning`]: models, gradients and local SGD
//! - [`aggregation`]: FedAvg / FedYoGi server steps, DP and clipping
//! - [`adversary`]: label-flipping clients
//! - [`engine`]: the discrete-event round loop and metrics
//! - [`workerproto`]: task dispatch to local threads or remote workers
//! - [`report`]: straggler and accuracy-bias summaries

pub mod adversary;
pub mod aggregation;
pub mod config;
pub mod engine;
mod error;
pub mod feddata;
pub mod learning;
pub mod report;
pub mod rng;
pub mod traces;
pub mod workerproto;

mod client_id;

pub use client_id::ClientId;
pub use config::{effective_lr, load_config, Algorithm, ExperimentConfig};
pub use engine::{run_experiment, MetricsLog, RoundRecord, Simulation};
pub use error::{Error, Result};
pub use feddata::{FederatedDataset, Sample};
pub use learning::{ModelKind, ModelState, ModelUpdate};
pub use traces::{AvailabilityTrace, ClientProfile};
