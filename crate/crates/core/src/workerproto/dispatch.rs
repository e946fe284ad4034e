use std::collections::{HashSet, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::{self, JoinHandle};

use super::codec::{ResultMsg, TaskMsg};
use super::exec::execute_task;
use crate::error::{Error, Result};

/// Runs a batch of training tasks and returns one result per task, in
/// arrival order.
pub trait Dispatcher: Send {
    fn workers(&self) -> usize;
    fn dispatch(&mut self, tasks: Vec<TaskMsg>) -> Result<Vec<ResultMsg>>;
}

pub(crate) enum WorkerEvent {
    Done { worker: usize, result: ResultMsg },
    Lost { worker: usize, reason: String },
}

/// Sending half of a worker connection.
pub(crate) trait WorkerLink: Send {
    fn send(&mut self, task: &TaskMsg) -> std::result::Result<(), String>;
}

/// Shared scheduling loop. Each worker holds at most one task, so handing
/// the queue head to the lowest-indexed idle worker is least-outstanding
/// assignment. A task whose worker is lost is re-queued at the front once;
/// a second loss is fatal.
pub(crate) fn schedule(
    links: &mut [Option<Box<dyn WorkerLink>>],
    events: &Receiver<WorkerEvent>,
    tasks: Vec<TaskMsg>,
) -> Result<Vec<ResultMsg>> {
    let total = tasks.len();
    let mut ids = HashSet::with_capacity(total);
    for t in &tasks {
        if !ids.insert(t.task_id) {
            return Err(Error::Dispatch(format!(
                "task id {} submitted twice",
                t.task_id
            )));
        }
    }
    let mut queue: VecDeque<TaskMsg> = tasks.into();
    let mut busy: Vec<Option<TaskMsg>> = (0..links.len()).map(|_| None).collect();
    let mut retried = HashSet::new();
    let mut done = HashSet::with_capacity(total);
    let mut results = Vec::with_capacity(total);

    let mut requeue = |task: TaskMsg, queue: &mut VecDeque<TaskMsg>, why: &str| {
        if !retried.insert(task.task_id) {
            return Err(Error::Dispatch(format!(
                "task {} for client {} failed twice: {why}",
                task.task_id, task.client_id
            )));
        }
        log::warn!("re-queueing task {} after worker loss: {why}", task.task_id);
        queue.push_front(task);
        Ok(())
    };

    while results.len() < total {
        for w in 0..links.len() {
            if busy[w].is_some() {
                continue;
            }
            let Some(link) = links[w].as_mut() else {
                continue;
            };
            let Some(task) = queue.pop_front() else { break };
            match link.send(&task) {
                Ok(()) => busy[w] = Some(task),
                Err(why) => {
                    links[w] = None;
                    requeue(task, &mut queue, &why)?;
                }
            }
        }
        if links.iter().all(Option::is_none) {
            return Err(Error::Dispatch(format!(
                "no workers left with {} tasks outstanding",
                total - results.len()
            )));
        }
        let event = events
            .recv()
            .map_err(|_| Error::Dispatch("worker event channel closed".into()))?;
        match event {
            WorkerEvent::Done { worker, result } => {
                if done.contains(&result.task_id) {
                    return Err(Error::Dispatch(format!(
                        "duplicate result for task {}",
                        result.task_id
                    )));
                }
                match busy.get_mut(worker).and_then(Option::take) {
                    Some(t) if t.task_id == result.task_id => {}
                    _ => {
                        return Err(Error::Dispatch(format!(
                            "worker {worker} returned unexpected task id {}",
                            result.task_id
                        )))
                    }
                }
                done.insert(result.task_id);
                results.push(result);
            }
            WorkerEvent::Lost { worker, reason } => {
                if let Some(slot) = links.get_mut(worker) {
                    *slot = None;
                }
                if let Some(task) = busy.get_mut(worker).and_then(Option::take) {
                    requeue(task, &mut queue, &reason)?;
                }
            }
        }
    }
    Ok(results)
}

struct ChannelLink(Sender<TaskMsg>);

impl WorkerLink for ChannelLink {
    fn send(&mut self, task: &TaskMsg) -> std::result::Result<(), String> {
        self.0
            .send(task.clone())
            .map_err(|_| "worker thread exited".to_string())
    }
}

/// In-process pool of training threads.
pub struct LocalPool {
    links: Vec<Option<Box<dyn WorkerLink>>>,
    events: Receiver<WorkerEvent>,
    handles: Vec<JoinHandle<()>>,
}

impl LocalPool {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let (ev_tx, events) = mpsc::channel();
        let mut links: Vec<Option<Box<dyn WorkerLink>>> = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let (tx, rx) = mpsc::channel::<TaskMsg>();
            let ev_tx = ev_tx.clone();
            handles.push(thread::spawn(move || {
                for task in rx {
                    let event = match panic::catch_unwind(AssertUnwindSafe(|| execute_task(&task)))
                    {
                        Ok(result) => WorkerEvent::Done { worker: w, result },
                        Err(_) => WorkerEvent::Lost {
                            worker: w,
                            reason: "training panicked".into(),
                        },
                    };
                    let lost = matches!(event, WorkerEvent::Lost { .. });
                    if ev_tx.send(event).is_err() || lost {
                        return;
                    }
                }
            }));
            links.push(Some(Box::new(ChannelLink(tx))));
        }
        LocalPool {
            links,
            events,
            handles,
        }
    }
}

impl Dispatcher for LocalPool {
    fn workers(&self) -> usize {
        self.links.iter().filter(|l| l.is_some()).count()
    }

    fn dispatch(&mut self, tasks: Vec<TaskMsg>) -> Result<Vec<ResultMsg>> {
        schedule(&mut self.links, &self.events, tasks)
    }
}

impl Drop for LocalPool {
    fn drop(&mut self) {
        self.links.clear();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::ModelKind;
    use crate::workerproto::TaskOutcome;

    pub(crate) fn task(id: u64) -> TaskMsg {
        TaskMsg {
            task_id: id,
            round: 0,
            client_id: format!("c{id}"),
            model: ModelKind::Logistic {
                num_classes: 2,
                feature_dim: 1,
            },
            params: vec![0.0; 4],
            lr: 0.1,
            prox_mu: 0.0,
            local_steps: 2,
            batch_size: 1,
            seed: id,
            labels: vec![0, 1, (id % 2) as u32],
            features: vec![1.0, -1.0, id as f32],
        }
    }

    #[test]
    fn pool_results_match_direct_execution() {
        let tasks: Vec<_> = (0..17).map(task).collect();
        let mut pool = LocalPool::new(4);
        let mut got = pool.dispatch(tasks.clone()).unwrap();
        got.sort_by_key(|r| r.task_id);
        for (t, r) in tasks.iter().zip(&got) {
            assert_eq!(r.task_id, t.task_id);
            assert_eq!(r.outcome, execute_task(t).outcome);
            assert!(matches!(r.outcome, TaskOutcome::Trained { .. }));
        }
        // pool is reusable
        assert_eq!(pool.dispatch(vec![task(99)]).unwrap().len(), 1);
        assert!(pool.dispatch(Vec::new()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_submission_rejected() {
        let mut pool = LocalPool::new(2);
        assert!(pool.dispatch(vec![task(1), task(1)]).is_err());
    }

    struct Flaky {
        tx: Sender<WorkerEvent>,
        worker: usize,
        fail: bool,
    }

    impl WorkerLink for Flaky {
        fn send(&mut self, task: &TaskMsg) -> std::result::Result<(), String> {
            let ev = if self.fail {
                WorkerEvent::Lost {
                    worker: self.worker,
                    reason: "gone".into(),
                }
            } else {
                WorkerEvent::Done {
                    worker: self.worker,
                    result: execute_task(task),
                }
            };
            self.tx.send(ev).unwrap();
            Ok(())
        }
    }

    fn flaky_links(fails: &[bool]) -> (Vec<Option<Box<dyn WorkerLink>>>, Receiver<WorkerEvent>) {
        let (tx, rx) = mpsc::channel();
        let links = fails
            .iter()
            .enumerate()
            .map(|(worker, &fail)| {
                Some(Box::new(Flaky {
                    tx: tx.clone(),
                    worker,
                    fail,
                }) as Box<dyn WorkerLink>)
            })
            .collect();
        (links, rx)
    }

    #[test]
    fn lost_task_retried_on_another_worker() {
        let (mut links, rx) = flaky_links(&[true, false]);
        let out = schedule(&mut links, &rx, vec![task(1), task(2)]).unwrap();
        let mut ids: Vec<_> = out.iter().map(|r| r.task_id).collect();
        ids.sort();
        assert_eq!(ids, vec![1, 2]);
        assert!(links[0].is_none());
    }

    #[test]
    fn second_loss_is_fatal() {
        let (mut links, rx) = flaky_links(&[true, true, false]);
        let err = schedule(&mut links, &rx, vec![task(5)]).unwrap_err();
        assert!(err.to_string().contains("twice"), "{err}");
    }

    #[test]
    fn unexpected_task_id_is_fatal() {
        let (tx, rx) = mpsc::channel();
        struct Liar(Sender<WorkerEvent>);
        impl WorkerLink for Liar {
            fn send(&mut self, task: &TaskMsg) -> std::result::Result<(), String> {
                let mut r = execute_task(task);
                r.task_id += 1000;
                self.0
                    .send(WorkerEvent::Done {
                        worker: 0,
                        result: r,
                    })
                    .unwrap();
                Ok(())
            }
        }
        let mut links: Vec<Option<Box<dyn WorkerLink>>> = vec![Some(Box::new(Liar(tx)))];
        assert!(schedule(&mut links, &rx, vec![task(1)]).is_err());
    }
}
