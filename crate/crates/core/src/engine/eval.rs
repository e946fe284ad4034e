use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::feddata::{FederatedDataset, Role};
use crate::learning::ModelState;
use crate::ClientId;

pub trait Classifier {
    fn classify(&self, features: &[f32]) -> u32;
}

impl Classifier for ModelState {
    fn classify(&self, features: &[f32]) -> u32 {
        self.predict(features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClientAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl ClientAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Sample-weighted over all clients of the split.
    pub accuracy: f64,
    pub per_client: BTreeMap<ClientId, ClientAccuracy>,
}

/// Full pass over every client holding `split`, in client-id order.
pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    dataset: &FederatedDataset,
    split: Role,
) -> Result<Evaluation> {
    let mut per_client = BTreeMap::new();
    let (mut correct, mut total) = (0usize, 0usize);
    for (id, data) in dataset.clients().iter().filter(|(_, d)| d.role == split) {
        let c = data
            .samples
            .iter()
            .filter(|s| model.classify(&s.features) == s.label)
            .count();
        correct += c;
        total += data.samples.len();
        per_client.insert(
            id.clone(),
            ClientAccuracy {
                correct: c,
                total: data.samples.len(),
            },
        );
    }
    if total == 0 {
        return Err(Error::Empty("evaluation split"));
    }
    Ok(Evaluation {
        accuracy: correct as f64 / total as f64,
        per_client,
    })
}
