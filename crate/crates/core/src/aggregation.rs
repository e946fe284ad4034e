//! Server-side combination of client updates.

use crate::config::{Algorithm, YogiParams};
use crate::error::{Error, Result};
use crate::learning::{ModelState, ModelUpdate};
use crate::rng::{self, BoxMuller};

/// Adaptive-optimiser moments kept by the server across rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerOptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub round: u64,
}

impl ServerOptState {
    /// `m = 0`, `v = τ²`.
    pub fn new(len: usize, tau: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![tau * tau; len],
            round: 0,
        }
    }

    pub fn for_algorithm(algorithm: &Algorithm, len: usize) -> Self {
        match algorithm {
            Algorithm::FedYoGi(p) => Self::new(len, p.tau),
            _ => Self::new(len, 0.0),
        }
    }
}

/// Sample-weighted mean of the deltas.
pub fn fedavg_combine(updates: &[ModelUpdate]) -> Result<Vec<f64>> {
    let first = updates.first().ok_or(Error::Empty("update list"))?;
    let len = first.delta.len();
    let mut acc = vec![0.0; len];
    let mut total = 0.0;
    for u in updates {
        if u.delta.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: u.delta.len(),
            });
        }
        if u.num_samples == 0 {
            return Err(Error::Invalid(format!(
                "update from `{}` has zero weight",
                u.client_id
            )));
        }
        let w = u.num_samples as f64;
        total += w;
        for (a, d) in acc.iter_mut().zip(&u.delta) {
            *a += w * d;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn yogi_step(p: &YogiParams, state: &mut ServerOptState, w: &mut [f64], delta: &[f64]) {
    for i in 0..w.len() {
        let d = delta[i];
        let d2 = d * d;
        state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * d;
        state.v[i] -= (1.0 - p.beta2) * d2 * sign(state.v[i] - d2);
        debug_assert!(
            state.v[i] > 0.0,
            "yogi second moment left the positive orthant"
        );
        w[i] += p.eta * state.m[i] / (state.v[i].sqrt() + p.tau);
    }
}

/// Applies the combined delta. FedAvg and FedProx add it; FedYoGi takes an
/// adaptive step from its moment estimates.
pub fn server_step(
    algorithm: &Algorithm,
    state: &mut ServerOptState,
    model: &ModelState,
    combined: &[f64],
) -> Result<ModelState> {
    let len = model.params().len();
    if combined.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: combined.len(),
        });
    }
    let mut next = model.clone();
    match algorithm {
        Algorithm::FedAvg | Algorithm::FedProx { .. } => {
            for (w, d) in next.params_mut().iter_mut().zip(combined) {
                *w += d;
            }
        }
        Algorithm::FedYoGi(p) => {
            if state.m.len() != len || state.v.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: state.m.len(),
                });
            }
            yogi_step(p, state, next.params_mut(), combined);
        }
    }
    state.round += 1;
    Ok(next)
}

fn scale_to_norm(delta: &mut [f64], bound: f64) {
    let norm = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > bound {
        let factor = bound / norm;
        delta.iter_mut().for_each(|x| *x *= factor);
    }
}

/// Clips the delta to L2 norm `clip` and adds `N(0, σ²·clip²)` noise per
/// coordinate, drawn by Box–Muller from `noise_seed`. With `σ = 0` no noise
/// is drawn at all.
pub fn dp_sanitize(update: &ModelUpdate, clip: f64, sigma: f64, noise_seed: u64) -> ModelUpdate {
    let mut out = update.clone();
    scale_to_norm(&mut out.delta, clip);
    if sigma > 0.0 {
        let std = sigma * clip;
        let mut g = BoxMuller::new(rng::stream(noise_seed, "dp.noise", 0, ""));
        for x in &mut out.delta {
            *x += std * g.next_gaussian();
        }
    }
    out
}

/// Norm-bounding defense: L2 clip without noise.
pub fn defense_clip(update: &ModelUpdate, bound: f64) -> ModelUpdate {
    let mut out = update.clone();
    scale_to_norm(&mut out.delta, bound);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::ModelKind;
    use proptest::prelude::*;

    fn upd(delta: Vec<f64>, n: usize) -> ModelUpdate {
        ModelUpdate {
            client_id: "c".into(),
            delta,
            num_samples: n,
            byte_size: 0,
        }
    }

    fn scalar_model(w: f64) -> ModelState {
        // a 1×1 logistic model has two parameters; only the first is used
        ModelState::from_params(
            ModelKind::Logistic {
                num_classes: 1,
                feature_dim: 1,
            },
            vec![w, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn weighted_mean() {
        let c = fedavg_combine(&[upd(vec![2.0], 1), upd(vec![4.0], 3)]).unwrap();
        assert_eq!(c, vec![3.5]);
        let same = fedavg_combine(&[upd(vec![1.0, -2.0], 3), upd(vec![1.0, -2.0], 8)]).unwrap();
        assert_eq!(same, vec![1.0, -2.0]);
        assert_eq!(fedavg_combine(&[upd(vec![0.3], 5)]).unwrap(), vec![0.3]);
    }

    #[test]
    fn combine_errors() {
        assert!(matches!(fedavg_combine(&[]), Err(Error::Empty(_))));
        assert!(matches!(
            fedavg_combine(&[upd(vec![1.0], 1), upd(vec![1.0, 2.0], 1)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn combine_permutation_and_scale_invariant(
            rows in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 3), 1usize..50), 1..8),
            rot in 0usize..8,
        ) {
            let ups: Vec<ModelUpdate> = rows.iter().map(|(d, n)| upd(d.clone(), *n)).collect();
            let base = fedavg_combine(&ups).unwrap();
            let mut rotated = ups.clone();
            rotated.rotate_left(rot % ups.len());
            let doubled: Vec<ModelUpdate> = ups.iter().map(|u| upd(u.delta.clone(), u.num_samples * 2)).collect();
            for other in [fedavg_combine(&rotated).unwrap(), fedavg_combine(&doubled).unwrap()] {
                for (a, b) in base.iter().zip(&other) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn dp_without_noise_bounds_norm(delta in prop::collection::vec(-100.0f64..100.0, 1..20), clip in 0.01f64..10.0) {
            let out = dp_sanitize(&upd(delta, 1), clip, 0.0, 3);
            prop_assert!(out.norm() <= clip + 1e-9);
        }
    }

    #[test]
    fn fedavg_zero_delta_is_identity() {
        let m = scalar_model(0.7);
        let mut s = ServerOptState::new(2, 0.0);
        let next = server_step(&Algorithm::FedAvg, &mut s, &m, &[0.0, 0.0]).unwrap();
        assert_eq!(next, m);
    }

    #[test]
    fn yogi_zero_update_fixed_point() {
        let p = YogiParams::default();
        let m = scalar_model(0.7);
        let mut s = ServerOptState::new(2, p.tau);
        let next = server_step(&Algorithm::FedYoGi(p), &mut s, &m, &[0.0, 0.0]).unwrap();
        assert_eq!(next, m);
    }

    #[test]
    fn yogi_single_step_hand_trace() {
        // m = 0.1·0.1 = 0.01
        // v = 1e-6 − 0.01·0.01·sign(1e-6 − 0.01) = 1.01e-4
        // Δw = 0.01·0.01 / (√1.01e-4 + 1e-3) = 0.009049875621…
        let p = YogiParams::default();
        let m = scalar_model(0.0);
        let mut s = ServerOptState::new(2, p.tau);
        let next = server_step(&Algorithm::FedYoGi(p), &mut s, &m, &[0.1, 0.0]).unwrap();
        assert!((s.m[0] - 0.01).abs() < 1e-15);
        assert!((s.v[0] - 1.01e-4).abs() < 1e-15);
        assert!((next.params()[0] - 0.009_049_875_621).abs() < 1e-6);
        assert_eq!(s.round, 1);
    }

    #[test]
    fn server_step_length_mismatch() {
        let m = scalar_model(0.0);
        let mut s = ServerOptState::new(2, 0.0);
        assert!(server_step(&Algorithm::FedAvg, &mut s, &m, &[1.0]).is_err());
    }

    #[test]
    fn dp_identity_regime_and_clipping() {
        let u = upd(vec![0.3, 0.4], 2);
        assert_eq!(dp_sanitize(&u, 1.0, 0.0, 1), u);
        let big = upd(vec![6.0, 8.0], 2);
        let out = dp_sanitize(&big, 1.0, 0.0, 1);
        assert!((out.delta[0] - 0.6).abs() < 1e-15 && (out.delta[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn dp_noise_is_seeded() {
        let u = upd(vec![0.1; 50], 2);
        let a = dp_sanitize(&u, 1.0, 0.5, 42);
        assert_eq!(a, dp_sanitize(&u, 1.0, 0.5, 42));
        assert_ne!(a, dp_sanitize(&u, 1.0, 0.5, 43));
        assert_ne!(a, u);
    }

    #[test]
    fn defense_clip_cases() {
        let small = upd(vec![0.3, 0.4], 1);
        assert_eq!(defense_clip(&small, 1.0), small);
        let big = upd(vec![0.0, 4.0], 1);
        assert_eq!(defense_clip(&big, 1.0).delta, vec![0.0, 1.0]);
        let zero = upd(vec![0.0; 3], 1);
        assert_eq!(defense_clip(&zero, 1.0), zero);
    }

    #[test]
    fn fedavg_matches_average_of_final_models() {
        let w = scalar_model(0.25);
        let finals = [(0.9, 3usize), (-0.4, 1), (0.1, 6)];
        let ups: Vec<ModelUpdate> = finals
            .iter()
            .map(|&(f, n)| upd(vec![f - 0.25, 0.0], n))
            .collect();
        let combined = fedavg_combine(&ups).unwrap();
        let mut s = ServerOptState::new(2, 0.0);
        let next = server_step(&Algorithm::FedAvg, &mut s, &w, &combined).unwrap();
        let closed = finals.iter().map(|&(f, n)| f * n as f64).sum::<f64>() / 10.0;
        assert!((next.params()[0] - closed).abs() < 1e-9);
    }
}
