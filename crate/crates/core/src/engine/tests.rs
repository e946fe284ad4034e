use super::*;
use crate::config::{Algorithm, Overcommit};
use crate::feddata::{synth_task, PartitionSpec};
use crate::traces::Slot;

fn cfg(n: usize, overcommit: Overcommit, rounds: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_defaults(Algorithm::FedAvg, rounds);
    c.target_participants = n;
    c.overcommit = overcommit;
    c.data.num_classes = 3;
    c.data.feature_dim = 4;
    c.eval_every = 1;
    c.seed = 11;
    c
}

fn dataset(clients: usize) -> FederatedDataset {
    let mut spec = PartitionSpec {
        val_fraction: 0.0,
        test_fraction: 0.0,
        ..PartitionSpec::default()
    };
    let gen = synth_task(3, 4, 1).unwrap();
    let mut all = partition(&gen, clients, &spec, 1)
        .unwrap()
        .clients()
        .clone();
    // one extra client holding the test split
    spec.test_fraction = 1.0;
    let test = partition(&gen, 1, &spec, 2).unwrap();
    let (_, data) = test.clients().iter().next().unwrap();
    all.insert("test".into(), data.clone());
    FederatedDataset::new(3, 4, all).unwrap()
}

/// Profiles whose compute time dominates; `ms[i]` is client i's latency.
fn traces(ms: &[f64], slot_end: f64) -> TraceSet {
    let mut set = TraceSet::default();
    for (i, &m) in ms.iter().enumerate() {
        let id = ClientId::indexed(i);
        set.profiles.insert(
            id.clone(),
            ClientProfile::new(id.clone(), m, 1e9, 1e9).unwrap(),
        );
        set.availability.insert(
            id.clone(),
            AvailabilityTrace::new(
                id,
                vec![Slot {
                    start_s: 0.0,
                    end_s: slot_end,
                }],
            )
            .unwrap(),
        );
    }
    set
}

fn sim(c: ExperimentConfig, ms: &[f64], slot_end: f64, workers: usize) -> Simulation {
    Simulation::new(
        c,
        dataset(ms.len()),
        Some(&traces(ms, slot_end)),
        Box::new(LocalPool::new(workers)),
    )
    .unwrap()
}

#[test]
fn second_of_three_completions_closes_round() {
    let mut s = sim(
        cfg(2, Overcommit::new(3, 2).unwrap(), 1),
        &[5.0, 7.0, 9.0],
        1e9,
        1,
    );
    let rec = s.run_round().unwrap();
    assert_eq!(rec.selected, 3);
    assert_eq!(rec.admitted, 2);
    assert_eq!(rec.stragglers, 1);
    let mut totals: Vec<f64> = rec.per_client.iter().map(|o| o.total_s).collect();
    totals.sort_by(f64::total_cmp);
    assert_eq!(rec.round_duration_s, totals[1]);
    assert_eq!(s.clock().now_s(), totals[1]);
    assert!(rec
        .per_client
        .iter()
        .all(|o| o.completed && o.update.is_some()));
    assert_eq!(rec.bytes_up, 2 * s.model().byte_size());
    assert!(rec.test_accuracy.is_some());
}

#[test]
fn all_dropped_leaves_model_unchanged() {
    let mut s = sim(
        cfg(2, Overcommit::new(3, 2).unwrap(), 1),
        &[5.0, 7.0, 9.0],
        0.5,
        1,
    );
    let before = s.model().clone();
    let rec = s.run_round().unwrap();
    assert_eq!((rec.selected, rec.admitted, rec.dropped), (3, 0, 3));
    assert_eq!(s.model(), &before);
    assert_eq!(rec.round_duration_s, 0.5);
    assert_eq!(rec.bytes_up, 0);
    assert!(rec
        .per_client
        .iter()
        .all(|o| !o.completed && o.update.is_none()));
}

#[test]
fn empty_population_stalls() {
    let mut s = sim(cfg(2, Overcommit::default(), 2), &[5.0, 7.0], 1e9, 1);
    // move past the slot end: nobody is available afterwards
    s.clock.advance_to(2e9);
    let rec = s.run_round().unwrap();
    assert_eq!(rec.selected, 0);
    assert_eq!(rec.round_duration_s, 60.0);
    assert_eq!(s.clock().now_s(), 2e9 + 60.0);
    assert_eq!(s.round(), 1);
}

#[test]
fn pool_size_does_not_change_metrics() {
    let run = |workers| {
        let mut c = cfg(4, Overcommit::default(), 6);
        c.data.num_clients = 60;
        let mut s = Simulation::from_config(c, Box::new(LocalPool::new(workers))).unwrap();
        let log = s.run(&RunOutputs::default()).unwrap();
        (log.to_csv(), s.model().clone(), s.traffic())
    };
    let (a, ma, ta) = run(1);
    let (b, mb, tb) = run(4);
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert_eq!(ta, tb);
}

#[test]
fn byte_counters_agree() {
    let mut c = cfg(5, Overcommit::default(), 8);
    c.data.num_clients = 200;
    let mut s = Simulation::from_config(c, Box::new(LocalPool::new(2))).unwrap();
    let log = s.run(&RunOutputs::default()).unwrap();
    let t = s.traffic();
    assert_eq!(log.rows.iter().map(|r| r.bytes_down).sum::<u64>(), t.down);
    assert_eq!(log.rows.iter().map(|r| r.bytes_up).sum::<u64>(), t.up);
    assert_eq!(log.total_bytes(), t.total());
    assert!(log.rows.iter().all(|r| r.admitted <= 5 && r.selected <= 7));
}

#[test]
fn zero_rounds_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = RunOutputs {
        metrics: Some(dir.path().join("m.csv")),
        ..RunOutputs::default()
    };
    let mut c = cfg(2, Overcommit::default(), 0);
    c.data.num_clients = 20;
    let log = run_experiment(&c, None, &out).unwrap();
    assert!(log.rows.is_empty());
    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(text, format!("{METRICS_HEADER}\n"));
}

#[test]
fn traces_disabled_never_drops() {
    let mut c = cfg(5, Overcommit::default(), 5);
    c.traces_enabled = false;
    c.data.num_clients = 100;
    let log = run_experiment(&c, None, &RunOutputs::default()).unwrap();
    assert_eq!(log.total_dropped(), 0);
    assert!(log.rows.iter().all(|r| r.selected == 7 && r.admitted == 5));
}
