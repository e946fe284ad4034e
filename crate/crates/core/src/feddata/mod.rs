//! Federated datasets: per-client labelled samples, synthetic tasks,
//! partitioners and label-heterogeneity analysis.

mod hetero;
mod mapping;
mod synth;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::ClientId;

pub use hetero::{heterogeneity_report, js_distance, HeterogeneityReport, PAIR_CAP};
pub use mapping::{parse_mapping, read_mapping, write_mapping, MAPPING_HEADER};
pub use synth::{synth_task, TaskGenerator, DEFAULT_RADIUS};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f32>,
    pub label: u32,
}

/// Which client group a client belongs to. Splits are by client, never by
/// sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    pub role: Role,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    num_classes: usize,
    feature_dim: usize,
    clients: BTreeMap<ClientId, ClientData>,
}

impl FederatedDataset {
    pub fn new(
        num_classes: usize,
        feature_dim: usize,
        clients: BTreeMap<ClientId, ClientData>,
    ) -> Result<Self> {
        for (id, data) in &clients {
            if data.samples.is_empty() {
                return Err(Error::Invalid(format!("client `{id}` has no samples")));
            }
            for s in &data.samples {
                if s.label as usize >= num_classes {
                    return Err(Error::Invalid(format!(
                        "client `{id}`: label {} out of range for {num_classes} classes",
                        s.label
                    )));
                }
                if s.features.len() != feature_dim {
                    return Err(Error::DimensionMismatch {
                        expected: feature_dim,
                        got: s.features.len(),
                    });
                }
            }
        }
        Ok(Self {
            num_classes,
            feature_dim,
            clients,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn clients(&self) -> &BTreeMap<ClientId, ClientData> {
        &self.clients
    }

    pub fn client(&self, id: &ClientId) -> Option<&ClientData> {
        self.clients.get(id)
    }

    /// Client ids with the given role, ascending.
    pub fn ids_with_role(&self, role: Role) -> Vec<ClientId> {
        self.clients
            .iter()
            .filter(|(_, d)| d.role == role)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn total_samples(&self) -> usize {
        self.clients.values().map(|d| d.samples.len()).sum()
    }

    /// Empirical label distribution of one client.
    pub fn label_distribution(&self, id: &ClientId) -> Option<Vec<f64>> {
        self.clients
            .get(id)
            .map(|d| label_distribution(&d.samples, self.num_classes))
    }
}

pub fn label_distribution(samples: &[Sample], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; num_classes];
    for s in samples {
        counts[s.label as usize] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionMode {
    Iid,
    Dirichlet { alpha: f64 },
    Mapping(PathBuf),
}

/// Per-client sample counts: `round(LogNormal(ln median, sigma_log))`
/// clamped to `[1, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeSpec {
    pub median: f64,
    pub sigma_log: f64,
    pub max: usize,
}

impl Default for SampleSizeSpec {
    fn default() -> Self {
        Self {
            median: 40.0,
            sigma_log: 1.0,
            max: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    pub sizes: SampleSizeSpec,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            mode: PartitionMode::Iid,
            sizes: SampleSizeSpec::default(),
            val_fraction: 0.1,
            test_fraction: 0.1,
        }
    }
}

impl PartitionSpec {
    pub fn with_mode(mode: PartitionMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

fn dirichlet<R: Rng>(rng: &mut R, alpha: f64, k: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut p: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        p.iter_mut().for_each(|x| *x /= sum);
    } else {
        // every component underflowed: all mass lands on one class
        let hot = rng.random_range(0..k);
        p.iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = f64::from(u8::from(i == hot)));
    }
    p
}

fn categorical<R: Rng>(rng: &mut R, p: &[f64]) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i as u32;
        }
    }
    // rounding left u above the cumulative sum: take the last positive class
    p.iter().rposition(|&w| w > 0.0).unwrap_or(p.len() - 1) as u32
}

/// Seeded client-level role split: `floor(test·n)` test clients,
/// `floor(val·n)` validation clients, the rest train.
pub fn assign_roles(
    ids: &[ClientId],
    val_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> BTreeMap<ClientId, Role> {
    let n = ids.len();
    let n_test = (test_fraction * n as f64).floor() as usize;
    let n_val = (val_fraction * n as f64).floor() as usize;
    let n_train = n - n_test - n_val;
    let mut order: Vec<ClientId> = ids.to_vec();
    order.sort();
    order.shuffle(&mut rng::stream(seed, "partition.roles", 0, ""));
    order
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let role = if i < n_train {
                Role::Train
            } else if i < n_train + n_val {
                Role::Validation
            } else {
                Role::Test
            };
            (id, role)
        })
        .collect()
}

/// Builds a federated dataset of `n_clients` clients (`c000000..`).
///
/// IID clients draw labels from the uniform prior; Dirichlet clients draw a
/// label distribution from `Dir(alpha·1)` first. Mapping mode ignores the
/// generator and `n_clients` and reads clients from the file.
pub fn partition(
    gen: &TaskGenerator,
    n_clients: usize,
    spec: &PartitionSpec,
    seed: u64,
) -> Result<FederatedDataset> {
    let k = gen.num_classes();
    let per_client: BTreeMap<ClientId, Vec<Sample>> = match &spec.mode {
        PartitionMode::Mapping(path) => read_mapping(path, k, gen.feature_dim())?,
        mode => {
            if n_clients == 0 {
                return Err(Error::Empty("partition needs at least one client"));
            }
            let sizes = LogNormal::new(spec.sizes.median.ln(), spec.sizes.sigma_log)
                .map_err(|e| Error::Invalid(format!("sample-size distribution: {e}")))?;
            let uniform = vec![1.0 / k as f64; k];
            (0..n_clients)
                .map(|i| {
                    let id = ClientId::indexed(i);
                    let mut rng = rng::stream(seed, "partition.client", 0, id.as_str());
                    let n = (sizes.sample(&mut rng).round() as usize).clamp(1, spec.sizes.max);
                    let prior = match mode {
                        PartitionMode::Dirichlet { alpha } => dirichlet(&mut rng, *alpha, k),
                        _ => uniform.clone(),
                    };
                    let mut feat_rng = rng::stream(seed, "partition.features", 0, id.as_str());
                    let samples = (0..n)
                        .map(|_| gen.sample(categorical(&mut rng, &prior), &mut feat_rng))
                        .collect();
                    (id, samples)
                })
                .collect()
        }
    };
    let ids: Vec<ClientId> = per_client.keys().cloned().collect();
    let roles = assign_roles(&ids, spec.val_fraction, spec.test_fraction, seed);
    let clients = per_client
        .into_iter()
        .map(|(id, samples)| {
            let role = roles[&id];
            (id, ClientData { role, samples })
        })
        .collect();
    FederatedDataset::new(k, gen.feature_dim(), clients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen() -> TaskGenerator {
        synth_task(10, 8, 1).unwrap()
    }

    #[test]
    fn roles_are_disjoint_and_cover() {
        let ds = partition(&gen(), 100, &PartitionSpec::default(), 3).unwrap();
        let train = ds.ids_with_role(Role::Train);
        let val = ds.ids_with_role(Role::Validation);
        let test = ds.ids_with_role(Role::Test);
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));
        let mut all: Vec<_> = train.iter().chain(&val).chain(&test).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn sizes_follow_lognormal_median() {
        let ds = partition(&gen(), 2000, &PartitionSpec::default(), 5).unwrap();
        let mut sizes: Vec<usize> = ds.clients().values().map(|c| c.samples.len()).collect();
        sizes.sort_unstable();
        let median = sizes[sizes.len() / 2] as f64;
        assert!((34.0..=47.0).contains(&median), "median {median}");
        assert!(sizes[0] >= 1);
    }

    #[test]
    fn iid_histograms_near_uniform() {
        let spec = PartitionSpec {
            sizes: SampleSizeSpec {
                median: 400.0,
                sigma_log: 0.0,
                max: 10_000,
            },
            ..PartitionSpec::default()
        };
        let ds = partition(&gen(), 30, &spec, 11).unwrap();
        for (id, data) in ds.clients() {
            let n = data.samples.len() as f64;
            let p = 0.1;
            let sd = (n * p * (1.0 - p)).sqrt();
            let dist = ds.label_distribution(id).unwrap();
            for q in dist {
                // 4σ keeps the family-wise false alarm rate negligible over 300 checks
                assert!(
                    (q * n - n * p).abs() <= 4.0 * sd,
                    "count {} vs {}",
                    q * n,
                    n * p
                );
            }
        }
    }

    #[test]
    fn dirichlet_small_alpha_concentrates() {
        let ds = partition(
            &gen(),
            50,
            &PartitionSpec::with_mode(PartitionMode::Dirichlet { alpha: 0.1 }),
            2,
        )
        .unwrap();
        let concentrated = ds
            .clients()
            .keys()
            .filter(|id| {
                let d = ds.label_distribution(id).unwrap();
                d.iter().cloned().fold(0.0, f64::max) > 0.5
            })
            .count();
        assert!(concentrated > 35, "{concentrated}");
    }

    #[test]
    fn partition_is_deterministic() {
        let spec = PartitionSpec::with_mode(PartitionMode::Dirichlet { alpha: 0.5 });
        let a = partition(&gen(), 40, &spec, 9).unwrap();
        let b = partition(&gen(), 40, &spec, 9).unwrap();
        assert_eq!(a, b);
        let c = partition(&gen(), 40, &spec, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_labels() {
        let mut clients = BTreeMap::new();
        clients.insert(
            ClientId::from("x"),
            ClientData {
                role: Role::Train,
                samples: vec![Sample {
                    features: vec![0.0, 0.0],
                    label: 3,
                }],
            },
        );
        assert!(FederatedDataset::new(3, 2, clients).is_err());
    }

    #[test]
    fn categorical_handles_rounding_tail() {
        let mut rng = rng::stream(0, "t", 0, "");
        for _ in 0..1000 {
            let c = categorical(&mut rng, &[0.0, 0.3, 0.7, 0.0]);
            assert!(c == 1 || c == 2);
        }
    }
}
