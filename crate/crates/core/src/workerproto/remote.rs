use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::codec::{
    encode_task, read_message, write_message, Message, ResultMsg, TaskMsg, DEFAULT_MAX_FRAME,
};
use super::dispatch::{schedule, Dispatcher, WorkerEvent, WorkerLink};
use super::exec::execute_task;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct WorkerOptions {
    /// Workers send a heartbeat this often; the coordinator drops a worker
    /// after two silent intervals.
    pub heartbeat_interval: Duration,
    pub max_frame: usize,
    /// How long to wait for connections (coordinator) or to retry
    /// connecting (worker).
    pub connect_timeout: Duration,
}

impl Default for WorkerOptions {
    fn default() -> Self {
        WorkerOptions {
            heartbeat_interval: Duration::from_secs(5),
            max_frame: DEFAULT_MAX_FRAME,
            connect_timeout: Duration::from_secs(300),
        }
    }
}

struct TcpLink(BufWriter<TcpStream>);

impl WorkerLink for TcpLink {
    fn send(&mut self, task: &TaskMsg) -> std::result::Result<(), String> {
        let frame = encode_task(task);
        self.0
            .write_all(&frame)
            .and_then(|_| self.0.flush())
            .map_err(|e| e.to_string())
    }
}

/// Coordinator side of the TCP transport.
pub struct RemotePool {
    links: Vec<Option<Box<dyn WorkerLink>>>,
    streams: Vec<TcpStream>,
    events: Receiver<WorkerEvent>,
    readers: Vec<JoinHandle<()>>,
}

fn reader_loop(worker: usize, stream: TcpStream, max_frame: usize, tx: Sender<WorkerEvent>) {
    let mut r = BufReader::new(stream);
    let lost = |reason: String| WorkerEvent::Lost { worker, reason };
    loop {
        let event = match read_message(&mut r, max_frame) {
            Ok(Some(Message::Result(result))) => WorkerEvent::Done { worker, result },
            Ok(Some(Message::Heartbeat)) => continue,
            Ok(Some(other)) => lost(format!(
                "unexpected message tag {} from worker",
                other.tag()
            )),
            Ok(None) => lost("connection closed".into()),
            Err(e) => lost(e.to_string()),
        };
        let stop = matches!(event, WorkerEvent::Lost { .. });
        if tx.send(event).is_err() || stop {
            return;
        }
    }
}

impl RemotePool {
    /// Blocks until `workers` processes have connected to `listener`.
    pub fn accept(listener: TcpListener, workers: usize, opts: &WorkerOptions) -> Result<Self> {
        let deadline = Instant::now() + opts.connect_timeout;
        listener.set_nonblocking(true)?;
        let (tx, events) = mpsc::channel();
        let mut pool = RemotePool {
            links: Vec::with_capacity(workers),
            streams: Vec::with_capacity(workers),
            events,
            readers: Vec::with_capacity(workers),
        };
        while pool.streams.len() < workers {
            let stream = match listener.accept() {
                Ok((s, peer)) => {
                    log::info!("worker {} connected from {peer}", pool.streams.len());
                    s
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() > deadline {
                        return Err(Error::Dispatch(format!(
                            "only {} of {workers} workers connected",
                            pool.streams.len()
                        )));
                    }
                    thread::sleep(Duration::from_millis(20));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            stream.set_nonblocking(false)?;
            stream.set_nodelay(true)?;
            stream.set_read_timeout(Some(opts.heartbeat_interval * 2))?;
            let w = pool.streams.len();
            let read_half = stream.try_clone()?;
            let tx = tx.clone();
            let max_frame = opts.max_frame;
            pool.readers.push(thread::spawn(move || {
                reader_loop(w, read_half, max_frame, tx)
            }));
            pool.links
                .push(Some(Box::new(TcpLink(BufWriter::new(stream.try_clone()?)))));
            pool.streams.push(stream);
        }
        Ok(pool)
    }
}

impl Dispatcher for RemotePool {
    fn workers(&self) -> usize {
        self.links.iter().filter(|l| l.is_some()).count()
    }

    fn dispatch(&mut self, tasks: Vec<TaskMsg>) -> Result<Vec<ResultMsg>> {
        schedule(&mut self.links, &self.events, tasks)
    }
}

impl Drop for RemotePool {
    fn drop(&mut self) {
        for s in &self.streams {
            let mut w = s;
            let _ = write_message(&mut w, &Message::Shutdown);
            let _ = s.shutdown(Shutdown::Both);
        }
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
    }
}

fn connect(addr: &str, timeout: Duration) -> Result<TcpStream> {
    let deadline = Instant::now() + timeout;
    loop {
        let last = match addr.to_socket_addrs() {
            Ok(mut addrs) => match addrs.next() {
                Some(a) => match TcpStream::connect(a) {
                    Ok(s) => return Ok(s),
                    Err(e) => e,
                },
                None => return Err(Error::Invalid(format!("address {addr} did not resolve"))),
            },
            Err(e) => e,
        };
        if Instant::now() > deadline {
            return Err(last.into());
        }
        thread::sleep(Duration::from_millis(100));
    }
}

/// Worker side: connects to a coordinator and trains tasks until told to
/// shut down or the connection closes. Returns the number of tasks run.
pub fn run_worker(addr: &str, opts: &WorkerOptions) -> Result<u64> {
    let stream = connect(addr, opts.connect_timeout)?;
    stream.set_nodelay(true)?;
    let writer = Arc::new(Mutex::new(BufWriter::new(stream.try_clone()?)));

    let (stop_tx, stop_rx) = mpsc::channel::<()>();
    let hb_writer = Arc::clone(&writer);
    let interval = opts.heartbeat_interval;
    let heartbeat = thread::spawn(move || loop {
        match stop_rx.recv_timeout(interval) {
            Err(RecvTimeoutError::Timeout) => {
                let mut w = hb_writer.lock().unwrap_or_else(|p| p.into_inner());
                if write_message(&mut *w, &Message::Heartbeat).is_err() {
                    return;
                }
            }
            _ => return,
        }
    });

    let mut reader = BufReader::new(stream);
    let mut count = 0u64;
    let outcome = loop {
        match read_message(&mut reader, opts.max_frame) {
            Ok(Some(Message::Task(task))) => {
                let result = execute_task(&task);
                count += 1;
                let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
                if let Err(e) = write_message(&mut *w, &Message::Result(result)) {
                    break Err(e.into());
                }
            }
            Ok(Some(Message::Shutdown)) | Ok(None) => break Ok(count),
            Ok(Some(other)) => {
                break Err(Error::Dispatch(format!(
                    "unexpected message tag {} from coordinator",
                    other.tag()
                )))
            }
            Err(e) => break Err(e.into()),
        }
    };
    drop(stop_tx);
    let _ = heartbeat.join();
    outcome
}
