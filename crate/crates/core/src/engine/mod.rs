//! Discrete-event round loop.
//!
//! A round selects clients available at the current virtual time, works
//! out each one's download/compute/upload time from its profile, and turns
//! the outcomes into events: `ClientDone` at the completion time, or
//! `ClientDropped` at the slot end when the slot closes first. Events pop
//! in `(time, kind, client_id)` order; the first `N` completions are
//! admitted and the round closes at the `N`-th. Training itself runs on a
//! [`Dispatcher`] and never affects timing.

mod clock;
mod eval;
mod metrics;
mod select;
mod timing;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

pub use clock::{DropReason, EventKind, EventQueue, SimEvent, VirtualClock};
pub use eval::{evaluate, Classifier, ClientAccuracy, Evaluation};
pub use metrics::{
    write_client_accuracy, CsvSink, MetricsLog, RoundRecord, TrafficCounter, CLIENT_ACC_HEADER,
    METRICS_HEADER, TIMELINE_HEADER,
};
pub use select::{
    select_participants, Selection, SelectionContext, SelectionStrategy, UniformSelection,
};
pub use timing::{client_duration, ClientTaskOutcome, Durations};

use crate::adversary::{mark_corrupted, poison_view, AdversarySpec};
use crate::aggregation::{defense_clip, dp_sanitize, fedavg_combine, server_step, ServerOptState};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::feddata::{partition, FederatedDataset, Role, TaskGenerator};
use crate::learning::{init_model, samples_processed, ModelState, ModelUpdate, TrainParams};
use crate::rng::derive_seed;
use crate::traces::{
    load_availability, load_profiles, synth_traces, AvailabilityTrace, ClientProfile, TraceSet,
};
use crate::workerproto::{Dispatcher, LocalPool, TaskMsg, TaskOutcome};
use crate::ClientId;

/// Where [`Simulation::run`] writes its CSV files.
#[derive(Debug, Clone, Default)]
pub struct RunOutputs {
    pub metrics: Option<PathBuf>,
    pub timelines: Option<PathBuf>,
    pub client_acc: Option<PathBuf>,
}

struct Plan {
    id: ClientId,
    durations: Durations,
    finish_s: f64,
    /// Slot end when the client drops.
    drop_at: Option<f64>,
}

pub struct Simulation {
    cfg: ExperimentConfig,
    dataset: FederatedDataset,
    train_ids: Vec<ClientId>,
    profiles: BTreeMap<ClientId, ClientProfile>,
    /// `None` means every client is always available.
    availability: Option<BTreeMap<ClientId, AvailabilityTrace>>,
    corrupted: BTreeSet<ClientId>,
    model: ModelState,
    opt: ServerOptState,
    clock: VirtualClock,
    queue: EventQueue,
    round: usize,
    dispatcher: Box<dyn Dispatcher>,
    strategy: Box<dyn SelectionStrategy>,
    feedback: Vec<ClientTaskOutcome>,
    traffic: TrafficCounter,
    last_eval: Option<Evaluation>,
    next_task_id: u64,
}

/// Dataset described by the config: a synthetic Gaussian task split across
/// `data.clients` clients (or read from a mapping file).
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<FederatedDataset> {
    let d = &cfg.data;
    let gen = TaskGenerator::on_sphere(d.num_classes, d.feature_dim, d.radius, cfg.seed)?;
    partition(&gen, d.num_clients, &d.partition, cfg.seed)
}

/// Traces described by the config, or `None` when traces are disabled.
/// A profile or availability file that is not given is synthesised.
pub fn build_traces(cfg: &ExperimentConfig, n_clients: usize) -> Result<Option<TraceSet>> {
    if !cfg.traces_enabled {
        return Ok(None);
    }
    let t = &cfg.traces;
    let mut set = if t.profiles.is_none() || t.availability.is_none() {
        synth_traces(n_clients, cfg.seed, &t.synth)
    } else {
        TraceSet::default()
    };
    if let Some(p) = &t.profiles {
        set.profiles = load_profiles(p)?;
    }
    if let Some(p) = &t.availability {
        set.availability = load_availability(p)?;
    }
    Ok(Some(set))
}

type Bound = (
    BTreeMap<ClientId, ClientProfile>,
    BTreeMap<ClientId, AvailabilityTrace>,
);

/// Gives every client a profile and availability trace. Clients named in
/// the trace set keep their own; the rest take trace entries round-robin in
/// id order.
fn bind_traces(ids: &[ClientId], traces: &TraceSet) -> Result<Bound> {
    let pool: Vec<&ClientId> = traces.profiles.keys().collect();
    if pool.is_empty() {
        return Err(Error::Empty("trace profiles"));
    }
    let mut profiles = BTreeMap::new();
    let mut avail = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let src = if traces.profiles.contains_key(id) {
            id
        } else {
            pool[i % pool.len()]
        };
        let mut p = traces.profiles[src].clone();
        p.client_id = id.clone();
        profiles.insert(id.clone(), p);
        let slots = traces
            .availability
            .get(src)
            .map(|a| a.slots().to_vec())
            .unwrap_or_default();
        avail.insert(id.clone(), AvailabilityTrace::new(id.clone(), slots)?);
    }
    Ok((profiles, avail))
}

impl Simulation {
    /// `traces = None` runs with uniform profiles and permanent
    /// availability.
    pub fn new(
        cfg: ExperimentConfig,
        dataset: FederatedDataset,
        traces: Option<&TraceSet>,
        dispatcher: Box<dyn Dispatcher>,
    ) -> Result<Self> {
        cfg.validate()?;
        let kind = cfg.model_kind();
        if dataset.num_classes() != kind.num_classes()
            || dataset.feature_dim() != kind.feature_dim()
        {
            return Err(Error::Invalid(format!(
                "dataset is {} classes x {} dims but the model expects {} x {}",
                dataset.num_classes(),
                dataset.feature_dim(),
                kind.num_classes(),
                kind.feature_dim()
            )));
        }
        let train_ids = dataset.ids_with_role(Role::Train);
        if train_ids.is_empty() {
            return Err(Error::Empty("training clients"));
        }
        let (profiles, availability) = match traces {
            Some(t) => {
                let (p, a) = bind_traces(&train_ids, t)?;
                (p, Some(a))
            }
            None => (
                train_ids
                    .iter()
                    .map(|id| (id.clone(), cfg.traces.synth.uniform_profile(id.clone())))
                    .collect(),
                None,
            ),
        };
        let corrupted = mark_corrupted(
            dataset.clients().keys(),
            &AdversarySpec {
                corrupted_fraction: cfg.corrupted_fraction,
                flip_rule: cfg.flip_rule,
                seed: cfg.seed,
            },
        );
        let model = init_model(kind, cfg.seed);
        let opt = ServerOptState::for_algorithm(&cfg.algorithm, kind.param_count());
        Ok(Simulation {
            cfg,
            dataset,
            train_ids,
            profiles,
            availability,
            corrupted,
            model,
            opt,
            clock: VirtualClock::new(),
            queue: EventQueue::new(),
            round: 0,
            dispatcher,
            strategy: Box::new(UniformSelection),
            feedback: Vec::new(),
            traffic: TrafficCounter::default(),
            last_eval: None,
            next_task_id: 0,
        })
    }

    /// Builds dataset and traces from the config.
    pub fn from_config(cfg: ExperimentConfig, dispatcher: Box<dyn Dispatcher>) -> Result<Self> {
        let dataset = build_dataset(&cfg)?;
        let traces = build_traces(&cfg, dataset.clients().len())?;
        Self::new(cfg, dataset, traces.as_ref(), dispatcher)
    }

    pub fn with_strategy(mut self, strategy: Box<dyn SelectionStrategy>) -> Self {
        self.strategy = strategy;
        self
    }

    /// Replaces the initial model. The kind must match the config.
    pub fn with_model(mut self, model: ModelState) -> Result<Self> {
        if model.kind() != self.cfg.model_kind() {
            return Err(Error::Invalid("model kind differs from config".into()));
        }
        self.model = model;
        Ok(self)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn dataset(&self) -> &FederatedDataset {
        &self.dataset
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn clock(&self) -> VirtualClock {
        self.clock
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn traffic(&self) -> TrafficCounter {
        self.traffic
    }

    pub fn corrupted(&self) -> &BTreeSet<ClientId> {
        &self.corrupted
    }

    pub fn profile(&self, id: &ClientId) -> Option<&ClientProfile> {
        self.profiles.get(id)
    }

    pub fn last_evaluation(&self) -> Option<&Evaluation> {
        self.last_eval.as_ref()
    }

    pub fn evaluate(&self, split: Role) -> Result<Evaluation> {
        evaluate(&self.model, &self.dataset, split)
    }

    /// End of the availability slot holding `t`; infinite without traces.
    fn slot_end(&self, id: &ClientId, t: f64) -> Option<f64> {
        match &self.availability {
            None => Some(f64::INFINITY),
            Some(a) => a.get(id).and_then(|tr| tr.containing(t)).map(|s| s.end_s),
        }
    }

    fn eval_due(&self, round: usize) -> bool {
        (round + 1).is_multiple_of(self.cfg.eval_every) || round + 1 == self.cfg.total_rounds
    }

    fn run_evaluation(&mut self) -> Result<f64> {
        let e = evaluate(&self.model, &self.dataset, Role::Test)?;
        let acc = e.accuracy;
        self.last_eval = Some(e);
        Ok(acc)
    }

    fn stall(&mut self, round: usize, start: f64) -> Result<RoundRecord> {
        let probe = self.cfg.stall_probe_s;
        log::warn!("round {round}: no client available at t={start}s; probing again in {probe}s");
        self.clock.advance_by(probe);
        let test_accuracy = if self.eval_due(round) {
            Some(self.run_evaluation()?)
        } else {
            None
        };
        self.feedback.clear();
        self.round += 1;
        Ok(RoundRecord {
            round,
            virtual_time_s: self.clock.now_s(),
            selected: 0,
            admitted: 0,
            dropped: 0,
            stragglers: 0,
            shortfall: self.cfg.request_size(),
            round_duration_s: probe,
            bytes_down: 0,
            bytes_up: 0,
            test_accuracy,
            per_client: Vec::new(),
        })
    }

    fn train(&mut self, round: usize, plans: &[Plan]) -> Result<HashMap<ClientId, ModelUpdate>> {
        let kind = self.model.kind();
        let train = TrainParams::for_round(&self.cfg, round);
        let params: Vec<f32> = self.model.params().iter().map(|&x| x as f32).collect();
        let k = self.dataset.num_classes();
        let mut tasks = Vec::new();
        for p in plans.iter().filter(|p| p.drop_at.is_none()) {
            let samples = &self.dataset.client(&p.id).expect("train client").samples;
            let labels = if self.corrupted.contains(&p.id) {
                poison_view(samples, self.cfg.flip_rule, k)
                    .iter()
                    .map(|(_, y)| y)
                    .collect()
            } else {
                samples.iter().map(|s| s.label).collect()
            };
            tasks.push(TaskMsg {
                task_id: self.next_task_id,
                round: round as u32,
                client_id: p.id.to_string(),
                model: kind,
                params: params.clone(),
                lr: train.lr,
                prox_mu: train.prox_mu,
                local_steps: train.local_steps as u32,
                batch_size: train.batch_size as u32,
                seed: derive_seed(self.cfg.seed, "train", round as u64, p.id.as_str()),
                labels,
                features: samples
                    .iter()
                    .flat_map(|s| s.features.iter().copied())
                    .collect(),
            });
            self.next_task_id += 1;
        }
        let expected = tasks.len();
        let results = self.dispatcher.dispatch(tasks)?;
        let mut updates = HashMap::with_capacity(expected);
        for r in results {
            let id = ClientId::new(r.client_id);
            match r.outcome {
                TaskOutcome::Trained { num_samples, delta } => {
                    let update = ModelUpdate {
                        client_id: id.clone(),
                        delta: delta.into_iter().map(f64::from).collect(),
                        num_samples: num_samples as usize,
                        byte_size: kind.byte_size(),
                    };
                    if updates.insert(id.clone(), update).is_some() {
                        return Err(Error::Dispatch(format!("two results for client `{id}`")));
                    }
                }
                TaskOutcome::Failed(msg) => {
                    return Err(Error::Dispatch(format!(
                        "training failed for `{id}`: {msg}"
                    )))
                }
            }
        }
        if updates.len() != expected {
            return Err(Error::Dispatch(format!(
                "expected {expected} results, got {}",
                updates.len()
            )));
        }
        Ok(updates)
    }

    /// Runs one round and advances the clock to its close.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let round = self.round;
        let start = self.clock.now_s();
        let model_bytes = self.model.byte_size();
        let n_target = self.cfg.target_participants;

        let available: Vec<ClientId> = self
            .train_ids
            .iter()
            .filter(|id| self.slot_end(id, start).is_some())
            .cloned()
            .collect();
        if available.is_empty() {
            return self.stall(round, start);
        }
        let ctx = SelectionContext {
            available: &available,
            request: self.cfg.request_size(),
            round,
            now_s: start,
            feedback: &self.feedback,
            seed: self.cfg.seed,
        };
        let selection = select_participants(self.strategy.as_mut(), &ctx)?;
        if selection.shortfall > 0 {
            log::info!(
                "round {round}: {} of {} requested clients available",
                selection.ids.len(),
                ctx.request
            );
        }
        drop(available);

        let (k, b) = (self.cfg.local_steps, self.cfg.batch_size);
        let mut plans = Vec::with_capacity(selection.ids.len());
        for id in selection.ids {
            let n = self.dataset.client(&id).map_or(0, |c| c.samples.len());
            let durations = client_duration(
                &self.profiles[&id],
                samples_processed(k, b, n),
                model_bytes,
                model_bytes,
            )?;
            let finish_s = start + durations.total_s();
            let slot_end = self
                .slot_end(&id, start)
                .expect("selected clients are available");
            let drop_at = (finish_s >= slot_end).then_some(slot_end);
            self.traffic.download(model_bytes);
            plans.push(Plan {
                id,
                durations,
                finish_s,
                drop_at,
            });
        }

        let mut updates = self.train(round, &plans)?;

        let n_done = plans.iter().filter(|p| p.drop_at.is_none()).count();
        let target = n_target.min(n_done);
        for p in &plans {
            match p.drop_at {
                Some(t) => self.queue.push(
                    t,
                    EventKind::ClientDropped(p.id.clone(), DropReason::SlotEnded),
                ),
                None => self
                    .queue
                    .push(p.finish_s, EventKind::ClientDone(p.id.clone())),
            }
        }
        let eval_due = self.eval_due(round);
        let mut admitted: Vec<ClientId> = Vec::with_capacity(target);
        let mut close_scheduled = false;
        loop {
            let Some(ev) = self.queue.pop() else {
                // nothing completed: close when the last client dropped
                debug_assert_eq!(target, 0);
                self.queue.push(self.clock.now_s(), EventKind::RoundClosed);
                close_scheduled = true;
                continue;
            };
            self.clock.advance_to(ev.at_s);
            match ev.kind {
                EventKind::ClientDone(id) => {
                    self.traffic.upload(model_bytes);
                    if admitted.len() < target {
                        admitted.push(id);
                        if admitted.len() == target {
                            self.queue.push(ev.at_s, EventKind::RoundClosed);
                            close_scheduled = true;
                        }
                    }
                }
                EventKind::ClientDropped(..) => {}
                EventKind::RoundClosed => break,
                EventKind::EvalDue => unreachable!("evaluation is scheduled after close"),
            }
        }
        debug_assert!(close_scheduled);
        let close = self.clock.now_s();
        if eval_due {
            self.queue.push(close, EventKind::EvalDue);
        }
        let mut test_accuracy = None;

        admitted.sort();
        if admitted.len() < n_target {
            log::info!(
                "round {round}: only {} of {n_target} clients completed",
                admitted.len()
            );
        }
        if !admitted.is_empty() {
            let processed: Vec<ModelUpdate> = admitted
                .iter()
                .map(|id| {
                    let mut u = updates[id].clone();
                    if let Some(bound) = self.cfg.defense_clip {
                        u = defense_clip(&u, bound);
                    }
                    if let Some(dp) = self.cfg.dp {
                        let seed = derive_seed(self.cfg.seed, "dp", round as u64, id.as_str());
                        u = dp_sanitize(&u, dp.clip, dp.sigma, seed);
                    }
                    u
                })
                .collect();
            let combined = fedavg_combine(&processed)?;
            self.model = server_step(&self.cfg.algorithm, &mut self.opt, &self.model, &combined)?;
        }

        while let Some(ev) = self.queue.pop() {
            if ev.kind == EventKind::EvalDue {
                test_accuracy = Some(self.run_evaluation()?);
                break;
            }
        }
        self.queue.clear();

        let finished_by_close = plans
            .iter()
            .filter(|p| p.drop_at.is_none() && p.finish_s <= close)
            .count() as u64;
        let per_client: Vec<ClientTaskOutcome> = plans
            .iter()
            .map(|p| ClientTaskOutcome {
                client_id: p.id.clone(),
                compute_s: p.durations.compute_s,
                down_s: p.durations.down_s,
                up_s: p.durations.up_s,
                total_s: p.durations.total_s(),
                completed: p.drop_at.is_none(),
                admitted: admitted.binary_search(&p.id).is_ok(),
                update: updates.remove(&p.id),
            })
            .collect();
        self.feedback = per_client.clone();
        self.round += 1;
        Ok(RoundRecord {
            round,
            virtual_time_s: close,
            selected: plans.len(),
            admitted: admitted.len(),
            dropped: plans.len() - n_done,
            stragglers: n_done - admitted.len(),
            shortfall: selection.shortfall,
            round_duration_s: close - start,
            bytes_down: plans.len() as u64 * model_bytes,
            bytes_up: finished_by_close * model_bytes,
            test_accuracy,
            per_client,
        })
    }

    /// Runs the remaining rounds, appending CSV rows as each finishes.
    pub fn run(&mut self, outputs: &RunOutputs) -> Result<MetricsLog> {
        let mut metrics = outputs
            .metrics
            .as_deref()
            .map(|p| CsvSink::create(p, METRICS_HEADER))
            .transpose()?;
        let mut timelines = outputs
            .timelines
            .as_deref()
            .map(|p| CsvSink::create(p, TIMELINE_HEADER))
            .transpose()?;
        let mut log = MetricsLog::default();
        while self.round < self.cfg.total_rounds {
            let mut rec = self.run_round()?;
            log::debug!(
                "round {}: t={:.1}s admitted {}/{} dropped {} acc {:?}",
                rec.round,
                rec.virtual_time_s,
                rec.admitted,
                rec.selected,
                rec.dropped,
                rec.test_accuracy
            );
            if let Some(sink) = metrics.as_mut() {
                sink.row(&rec.csv_row())?;
            }
            if let Some(sink) = timelines.as_mut() {
                for row in rec.timeline_rows() {
                    sink.row(&row)?;
                }
            }
            rec.per_client = Vec::new();
            log.rows.push(rec);
        }
        log.final_eval = self.last_eval.clone();
        if let (Some(path), Some(eval)) = (&outputs.client_acc, &log.final_eval) {
            write_client_accuracy(path, eval)?;
        }
        Ok(log)
    }
}

/// Builds a simulation from `cfg` and runs every round. Without a
/// dispatcher, training runs on a single local thread.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    dispatcher: Option<Box<dyn Dispatcher>>,
    outputs: &RunOutputs,
) -> Result<MetricsLog> {
    let dispatcher = dispatcher.unwrap_or_else(|| Box::new(LocalPool::new(1)));
    Simulation::from_config(cfg.clone(), dispatcher)?.run(outputs)
}

#[cfg(test)]
mod tests;
