use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{accumulate, check_batch, ModelState, Scratch};
use crate::config::{effective_lr, ExperimentConfig};
use crate::error::{Error, Result};
use crate::feddata::Sample;
use crate::ClientId;

/// A client's contribution: `delta = final − round_initial`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub client_id: ClientId,
    pub delta: Vec<f64>,
    pub num_samples: usize,
    pub byte_size: u64,
}

impl ModelUpdate {
    pub fn norm(&self) -> f64 {
        self.delta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub local_steps: usize,
    pub batch_size: usize,
    pub prox_mu: f64,
}

impl TrainParams {
    pub fn for_round(cfg: &ExperimentConfig, round: usize) -> Self {
        Self {
            lr: effective_lr(cfg, round),
            local_steps: cfg.local_steps,
            batch_size: cfg.batch_size,
            prox_mu: cfg.algorithm.prox_mu(),
        }
    }
}

/// Samples a client touches in one round: `K × min(batch, |data|)`.
pub fn samples_processed(local_steps: usize, batch_size: usize, data_len: usize) -> usize {
    local_steps * batch_size.min(data_len)
}

/// `K` steps of mini-batch SGD with an optional proximal pull towards the
/// round-initial model:
///
/// `w ← w − lr·(∇ℓ(w) + μ·(w − w_round))`
///
/// Batches of `min(batch, |data|)` indices are taken without replacement
/// from a shuffled permutation; the permutation is redrawn once fewer than
/// a batch remain. Indices inside a batch are visited in ascending order.
pub fn local_train(
    model: &ModelState,
    data: &[Sample],
    params: &TrainParams,
    seed: u64,
    client_id: ClientId,
) -> Result<ModelUpdate> {
    if data.is_empty() {
        return Err(Error::Empty("client data"));
    }
    let kind = model.kind();
    check_batch(kind, data)?;
    let n = data.len();
    let b = params.batch_size.min(n);
    let w0 = model.params();
    let mut w = w0.to_vec();
    let mut delta = vec![0.0; w.len()];
    let mut grad = vec![0.0; w.len()];
    let mut scratch = Scratch::new(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pos = n;
    let mut batch = Vec::with_capacity(b);

    for _ in 0..params.local_steps {
        if pos + b > n {
            perm.shuffle(&mut rng);
            pos = 0;
        }
        batch.clear();
        batch.extend_from_slice(&perm[pos..pos + b]);
        batch.sort_unstable();
        pos += b;

        accumulate(
            kind,
            &w,
            batch.iter().map(|&i| &data[i]),
            &mut grad,
            &mut scratch,
        );
        for ((d, wi), (g, w0i)) in delta.iter_mut().zip(w.iter_mut()).zip(grad.iter().zip(w0)) {
            *d -= params.lr * (g + params.prox_mu * *d);
            *wi = w0i + *d;
        }
    }

    Ok(ModelUpdate {
        client_id,
        delta,
        num_samples: n,
        byte_size: kind.byte_size(),
    })
}
