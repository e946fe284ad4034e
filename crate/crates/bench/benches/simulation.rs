use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fedsim::engine::Simulation;
use fedsim::feddata::{partition, synth_task, PartitionSpec};
use fedsim::learning::{init_model, local_train, ModelKind, TrainParams};
use fedsim::workerproto::{decode, encode, LocalPool, Message, TaskMsg, DEFAULT_MAX_FRAME};
use fedsim_bench::bench_config;

fn local_training(c: &mut Criterion) {
    let gen = synth_task(10, 32, 1).unwrap();
    let ds = partition(&gen, 20, &PartitionSpec::default(), 1).unwrap();
    let data = &ds
        .clients()
        .values()
        .max_by_key(|c| c.samples.len())
        .unwrap()
        .samples;
    let params = TrainParams {
        lr: 0.04,
        local_steps: 20,
        batch_size: 32,
        prox_mu: 0.0,
    };
    for kind in [
        ModelKind::Logistic {
            num_classes: 10,
            feature_dim: 32,
        },
        ModelKind::Mlp {
            num_classes: 10,
            feature_dim: 32,
            hidden: 64,
        },
    ] {
        let model = init_model(kind, 1);
        let name = match kind {
            ModelKind::Logistic { .. } => "local_train/logistic",
            ModelKind::Mlp { .. } => "local_train/mlp64",
        };
        c.bench_function(name, |b| {
            b.iter(|| local_train(&model, black_box(data), &params, 7, "c".into()).unwrap())
        });
    }
}

fn rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("round");
    group.sample_size(10);
    for workers in [1, 4] {
        group.bench_function(format!("n100_workers{workers}"), |b| {
            b.iter_batched(
                || {
                    Simulation::from_config(
                        bench_config(1000, 100, 1),
                        Box::new(LocalPool::new(workers)),
                    )
                    .unwrap()
                },
                |mut sim| sim.run_round().unwrap(),
                criterion::BatchSize::PerIteration,
            )
        });
    }
    group.finish();
}

fn codec(c: &mut Criterion) {
    let msg = Message::Task(TaskMsg {
        task_id: 1,
        round: 0,
        client_id: "c000001".into(),
        model: ModelKind::Logistic {
            num_classes: 10,
            feature_dim: 32,
        },
        params: vec![0.1; 330],
        lr: 0.04,
        prox_mu: 0.0,
        local_steps: 20,
        batch_size: 32,
        seed: 1,
        labels: vec![3; 200],
        features: vec![0.5; 200 * 32],
    });
    let frame = encode(&msg);
    c.bench_function("codec/encode_task", |b| b.iter(|| encode(black_box(&msg))));
    c.bench_function("codec/decode_task", |b| {
        b.iter(|| decode(black_box(&frame), DEFAULT_MAX_FRAME).unwrap())
    });
}

criterion_group!(benches, local_training, rounds, codec);
criterion_main!(benches);
