use fedsim::config::Overcommit;
use fedsim::engine::Simulation;
use fedsim::feddata::{partition, synth_task, FederatedDataset, PartitionSpec};
use fedsim::traces::{AvailabilityTrace, ClientProfile, Slot, TraceSet};
use fedsim::workerproto::LocalPool;
use fedsim::{Algorithm, ClientId, ExperimentConfig};
use proptest::prelude::*;

fn dataset(clients: usize, seed: u64) -> FederatedDataset {
    let gen = synth_task(2, 2, seed).unwrap();
    let spec = PartitionSpec {
        val_fraction: 0.0,
        test_fraction: 0.0,
        ..PartitionSpec::default()
    };
    let mut all = partition(&gen, clients, &spec, seed)
        .unwrap()
        .clients()
        .clone();
    let test = partition(
        &gen,
        1,
        &PartitionSpec {
            test_fraction: 1.0,
            ..spec
        },
        seed + 1,
    )
    .unwrap();
    all.insert(
        "zz-test".into(),
        test.clients().values().next().unwrap().clone(),
    );
    FederatedDataset::new(2, 2, all).unwrap()
}

fn config(n: usize, rounds: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::with_defaults(Algorithm::FedAvg, rounds);
    cfg.target_participants = n;
    cfg.overcommit = Overcommit::new(2, 1).unwrap();
    cfg.data.num_classes = 2;
    cfg.data.feature_dim = 2;
    cfg.local_steps = 2;
    cfg.batch_size = 4;
    cfg
}

fn traces(ms: &[f64], ends: &[f64]) -> TraceSet {
    let mut set = TraceSet::default();
    for (i, (&m, &end)) in ms.iter().zip(ends).enumerate() {
        let id = ClientId::indexed(i);
        set.profiles.insert(
            id.clone(),
            ClientProfile::new(id.clone(), m, 0.05, 0.05).unwrap(),
        );
        let slots = vec![
            Slot {
                start_s: 0.0,
                end_s: end,
            },
            Slot {
                start_s: end + 5.0,
                end_s: end + 500.0,
            },
        ];
        set.availability
            .insert(id.clone(), AvailabilityTrace::new(id, slots).unwrap());
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slowing_a_straggler_changes_nothing(
        ms in prop::collection::vec(prop::sample::select(vec![100.0, 300.0, 700.0, 1500.0]), 2..8),
        ends in prop::collection::vec(5.0f64..80.0, 8),
        n in 1usize..4,
        factor in 1.5f64..10.0,
    ) {
        let k = ms.len();
        let ends = &ends[..k];
        let run = |ms: &[f64]| {
            let mut sim = Simulation::new(
                config(n, 1),
                dataset(k, 9),
                Some(&traces(ms, ends)),
                Box::new(LocalPool::new(1)),
            ).unwrap();
            sim.run_round().unwrap()
        };
        let before = run(&ms);
        let admitted = |r: &fedsim::RoundRecord| -> Vec<ClientId> {
            r.per_client.iter().filter(|o| o.admitted).map(|o| o.client_id.clone()).collect()
        };
        prop_assert!(before.admitted <= n);
        prop_assert!(before.selected <= 2 * n);
        if let Some(slow) = before.per_client.iter().find(|o| !o.admitted && o.completed) {
            let idx: usize = slow.client_id.as_str()[1..].parse().unwrap();
            let mut slower = ms.clone();
            slower[idx] *= factor;
            let after = run(&slower);
            prop_assert_eq!(admitted(&before), admitted(&after));
            prop_assert_eq!(before.round_duration_s, after.round_duration_s);
        }
    }

    #[test]
    fn clock_is_monotone_over_rounds(
        ms in prop::collection::vec(prop::sample::select(vec![100.0, 300.0, 700.0]), 2..8),
        ends in prop::collection::vec(5.0f64..80.0, 8),
        n in 1usize..4,
    ) {
        let k = ms.len();
        let mut sim = Simulation::new(
            config(n, 6),
            dataset(k, 4),
            Some(&traces(&ms, &ends[..k])),
            Box::new(LocalPool::new(1)),
        ).unwrap();
        let mut last = 0.0;
        for _ in 0..6 {
            let rec = sim.run_round().unwrap();
            prop_assert!(rec.virtual_time_s >= last);
            prop_assert!(rec.round_duration_s >= 0.0);
            prop_assert_eq!(rec.selected, rec.admitted + rec.dropped + rec.stragglers);
            last = rec.virtual_time_s;
        }
    }
}
