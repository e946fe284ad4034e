use crate::error::{Error, Result};
use crate::learning::ModelUpdate;
use crate::traces::ClientProfile;
use crate::ClientId;

/// Simulated seconds spent in each phase of a client's round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Durations {
    pub compute_s: f64,
    pub down_s: f64,
    pub up_s: f64,
}

impl Durations {
    /// Download, then compute, then upload.
    pub fn total_s(&self) -> f64 {
        self.down_s + self.compute_s + self.up_s
    }
}

/// Compute time is `samples × ms/sample`; transfer time is
/// `8·bytes / 1000 / kbps` with 1 kbps = 1000 bit/s.
pub fn client_duration(
    profile: &ClientProfile,
    samples_processed: usize,
    model_bytes_down: u64,
    update_bytes_up: u64,
) -> Result<Durations> {
    let p = profile;
    for (name, v) in [
        (
            "compute_latency_ms_per_sample",
            p.compute_latency_ms_per_sample,
        ),
        ("down_kbps", p.down_kbps),
        ("up_kbps", p.up_kbps),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Invalid(format!(
                "client `{}` has non-positive {name} ({v})",
                p.client_id
            )));
        }
    }
    Ok(Durations {
        compute_s: samples_processed as f64 * p.compute_latency_ms_per_sample / 1000.0,
        down_s: 8.0 * model_bytes_down as f64 / 1000.0 / p.down_kbps,
        up_s: 8.0 * update_bytes_up as f64 / 1000.0 / p.up_kbps,
    })
}

/// What happened to one selected client in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientTaskOutcome {
    pub client_id: ClientId,
    pub compute_s: f64,
    pub down_s: f64,
    pub up_s: f64,
    pub total_s: f64,
    /// False when the client's availability slot ended first.
    pub completed: bool,
    /// Among the first `N` completions; its update was aggregated.
    pub admitted: bool,
    /// Present exactly when `completed`; stragglers keep theirs even though
    /// it is not aggregated.
    pub update: Option<ModelUpdate>,
}
