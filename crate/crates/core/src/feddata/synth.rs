use rand::Rng;

use super::Sample;
use crate::error::{Error, Result};
use crate::rng::{self, BoxMuller};

/// Class-conditional Gaussian task: `x | y ~ N(mean_y, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGenerator {
    means: Vec<Vec<f64>>,
}

pub const DEFAULT_RADIUS: f64 = 3.0;

/// Task with class means drawn uniformly on the sphere of radius 3.
pub fn synth_task(num_classes: usize, feature_dim: usize, seed: u64) -> Result<TaskGenerator> {
    TaskGenerator::on_sphere(num_classes, feature_dim, DEFAULT_RADIUS, seed)
}

impl TaskGenerator {
    pub fn on_sphere(
        num_classes: usize,
        feature_dim: usize,
        radius: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_classes < 2 || feature_dim < 2 {
            return Err(Error::Invalid(format!(
                "task needs >= 2 classes and >= 2 dims, got {num_classes} x {feature_dim}"
            )));
        }
        let mut g = BoxMuller::new(rng::stream(seed, "task.means", 0, ""));
        let means = (0..num_classes)
            .map(|_| {
                // an isotropic Gaussian direction is uniform on the sphere
                let v: Vec<f64> = (0..feature_dim).map(|_| g.next_gaussian()).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| radius * x / norm).collect()
            })
            .collect();
        Ok(Self { means })
    }

    /// Task with explicit class means.
    pub fn from_means(means: Vec<Vec<f64>>) -> Result<Self> {
        let dim = means.first().map_or(0, Vec::len);
        if means.len() < 2 || dim < 2 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::Invalid(
                "means must be >= 2 vectors of equal dim >= 2".into(),
            ));
        }
        Ok(Self { means })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn sample<R: Rng>(&self, label: u32, rng: &mut R) -> Sample {
        let mean = &self.means[label as usize];
        let mut g = BoxMuller::new(rng);
        let features = mean
            .iter()
            .map(|m| (m + g.next_gaussian()) as f32)
            .collect();
        Sample { features, label }
    }
}
