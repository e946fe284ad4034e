use std::time::Instant;

use super::codec::{ResultMsg, TaskMsg, TaskOutcome};
use crate::error::{Error, Result};
use crate::feddata::Sample;
use crate::learning::{local_train, ModelState, TrainParams};

fn unpack(task: &TaskMsg) -> Result<(ModelState, Vec<Sample>, TrainParams)> {
    let dim = task.model.feature_dim();
    if task.features.len() != task.labels.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: task.labels.len() * dim,
            got: task.features.len(),
        });
    }
    let params = task.params.iter().map(|&x| x as f64).collect();
    let model = ModelState::from_params(task.model, params)?;
    let samples = if dim == 0 {
        task.labels
            .iter()
            .map(|&label| Sample {
                features: Vec::new(),
                label,
            })
            .collect()
    } else {
        task.features
            .chunks_exact(dim)
            .zip(&task.labels)
            .map(|(f, &label)| Sample {
                features: f.to_vec(),
                label,
            })
            .collect()
    };
    let train = TrainParams {
        lr: task.lr,
        local_steps: task.local_steps as usize,
        batch_size: task.batch_size as usize,
        prox_mu: task.prox_mu,
    };
    Ok((model, samples, train))
}

/// Runs one training task. Failures are reported inside the result rather
/// than as an error so that the coordinator sees which task failed.
pub fn execute_task(task: &TaskMsg) -> ResultMsg {
    let start = Instant::now();
    let outcome = unpack(task)
        .and_then(|(model, samples, train)| {
            local_train(
                &model,
                &samples,
                &train,
                task.seed,
                task.client_id.as_str().into(),
            )
        })
        .map(|u| TaskOutcome::Trained {
            num_samples: u.num_samples as u64,
            delta: u.delta.iter().map(|&x| x as f32).collect(),
        })
        .unwrap_or_else(|e| TaskOutcome::Failed(e.to_string()));
    ResultMsg {
        task_id: task.task_id,
        client_id: task.client_id.clone(),
        outcome,
        wall_time_us: start.elapsed().as_micros() as u64,
    }
}
