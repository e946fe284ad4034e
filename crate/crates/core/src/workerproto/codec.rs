use std::io::{self, Read, Write};

use thiserror::Error;

use crate::learning::ModelKind;

pub const TAG_TASK: u8 = 0;
pub const TAG_RESULT: u8 = 1;
pub const TAG_HEARTBEAT: u8 = 2;
pub const TAG_SHUTDOWN: u8 = 3;

/// 64 MiB.
pub const DEFAULT_MAX_FRAME: usize = 64 << 20;

const HEADER_LEN: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("frame payload of {len} bytes exceeds limit of {max}")]
    TooLarge { len: usize, max: usize },
    #[error("malformed payload: {0}")]
    Malformed(String),
}

/// A training request.
///
/// Payload order: `task_id u64`, `round u32`, `client_id str`,
/// `model_tag u8` (0 logistic, 1 mlp), `num_classes u32`, `feature_dim u32`,
/// `hidden u32`, `params [f32]`, `lr f64`, `prox_mu f64`, `local_steps u32`,
/// `batch_size u32`, `seed u64`, `labels [u32]`, `features [f32]`
/// (row-major, `labels.len() × feature_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMsg {
    pub task_id: u64,
    pub round: u32,
    pub client_id: String,
    pub model: ModelKind,
    pub params: Vec<f32>,
    pub lr: f64,
    pub prox_mu: f64,
    pub local_steps: u32,
    pub batch_size: u32,
    pub seed: u64,
    pub labels: Vec<u32>,
    pub features: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutcome {
    Trained { num_samples: u64, delta: Vec<f32> },
    Failed(String),
}

/// A training result.
///
/// Payload order: `task_id u64`, `client_id str`, `status u8`
/// (0 trained, 1 failed), then either `num_samples u64`, `delta [f32]` or
/// `error str`, and finally `wall_time_us u64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultMsg {
    pub task_id: u64,
    pub client_id: String,
    pub outcome: TaskOutcome,
    /// Physical training time; never used for simulated quantities.
    pub wall_time_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Task(TaskMsg),
    Result(ResultMsg),
    Heartbeat,
    Shutdown,
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Task(_) => TAG_TASK,
            Message::Result(_) => TAG_RESULT,
            Message::Heartbeat => TAG_HEARTBEAT,
            Message::Shutdown => TAG_SHUTDOWN,
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("vector longer than u32::MAX"));
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        self.len(v.len());
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn u32s(&mut self, v: &[u32]) {
        self.len(v.len());
        for x in v {
            self.u32(*x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.buf.len() < n {
            return Err(ProtocolError::Malformed(format!(
                "field needs {n} bytes, {} left in payload",
                self.buf.len()
            )));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn count(&mut self, elem: usize) -> Result<usize, ProtocolError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem) > self.buf.len() {
            return Err(ProtocolError::Malformed(format!(
                "vector of {n} elements overruns payload"
            )));
        }
        Ok(n)
    }
    fn str(&mut self) -> Result<String, ProtocolError> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| ProtocolError::Malformed("string is not UTF-8".into()))
    }
    fn f32s(&mut self) -> Result<Vec<f32>, ProtocolError> {
        let n = self.count(4)?;
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn u32s(&mut self) -> Result<Vec<u32>, ProtocolError> {
        let n = self.count(4)?;
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_task(t: &TaskMsg, w: &mut Writer) {
    w.u64(t.task_id);
    w.u32(t.round);
    w.str(&t.client_id);
    let (tag, hidden) = match t.model {
        ModelKind::Logistic { .. } => (0, 0),
        ModelKind::Mlp { hidden, .. } => (1, hidden),
    };
    w.u8(tag);
    w.u32(t.model.num_classes() as u32);
    w.u32(t.model.feature_dim() as u32);
    w.u32(hidden as u32);
    w.f32s(&t.params);
    w.f64(t.lr);
    w.f64(t.prox_mu);
    w.u32(t.local_steps);
    w.u32(t.batch_size);
    w.u64(t.seed);
    w.u32s(&t.labels);
    w.f32s(&t.features);
}

fn encode_payload(msg: &Message, w: &mut Writer) {
    match msg {
        Message::Task(t) => write_task(t, w),
        Message::Result(r) => {
            w.u64(r.task_id);
            w.str(&r.client_id);
            match &r.outcome {
                TaskOutcome::Trained { num_samples, delta } => {
                    w.u8(0);
                    w.u64(*num_samples);
                    w.f32s(delta);
                }
                TaskOutcome::Failed(msg) => {
                    w.u8(1);
                    w.str(msg);
                }
            }
            w.u64(r.wall_time_us);
        }
        Message::Heartbeat | Message::Shutdown => {}
    }
}

fn finish(w: Writer, tag: u8) -> Vec<u8> {
    let mut frame = w.0;
    let len = u32::try_from(frame.len() - HEADER_LEN).expect("payload longer than u32::MAX");
    frame[..4].copy_from_slice(&len.to_be_bytes());
    frame[4] = tag;
    frame
}

/// Encodes one frame.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut w = Writer(vec![0; HEADER_LEN]);
    encode_payload(msg, &mut w);
    finish(w, msg.tag())
}

/// Same bytes as `encode(&Message::Task(task.clone()))` without the copy.
pub(crate) fn encode_task(task: &TaskMsg) -> Vec<u8> {
    let mut w = Writer(vec![0; HEADER_LEN]);
    write_task(task, &mut w);
    finish(w, TAG_TASK)
}

fn decode_payload(tag: u8, payload: &[u8]) -> Result<Message, ProtocolError> {
    let mut r = Reader { buf: payload };
    let msg = match tag {
        TAG_TASK => {
            let task_id = r.u64()?;
            let round = r.u32()?;
            let client_id = r.str()?;
            let model_tag = r.u8()?;
            let num_classes = r.u32()? as usize;
            let feature_dim = r.u32()? as usize;
            let hidden = r.u32()? as usize;
            let model = match model_tag {
                0 => ModelKind::Logistic {
                    num_classes,
                    feature_dim,
                },
                1 => ModelKind::Mlp {
                    num_classes,
                    feature_dim,
                    hidden,
                },
                t => return Err(ProtocolError::Malformed(format!("unknown model tag {t}"))),
            };
            Message::Task(TaskMsg {
                task_id,
                round,
                client_id,
                model,
                params: r.f32s()?,
                lr: r.f64()?,
                prox_mu: r.f64()?,
                local_steps: r.u32()?,
                batch_size: r.u32()?,
                seed: r.u64()?,
                labels: r.u32s()?,
                features: r.f32s()?,
            })
        }
        TAG_RESULT => {
            let task_id = r.u64()?;
            let client_id = r.str()?;
            let outcome = match r.u8()? {
                0 => TaskOutcome::Trained {
                    num_samples: r.u64()?,
                    delta: r.f32s()?,
                },
                1 => TaskOutcome::Failed(r.str()?),
                s => {
                    return Err(ProtocolError::Malformed(format!(
                        "unknown result status {s}"
                    )))
                }
            };
            Message::Result(ResultMsg {
                task_id,
                client_id,
                outcome,
                wall_time_us: r.u64()?,
            })
        }
        TAG_HEARTBEAT => Message::Heartbeat,
        TAG_SHUTDOWN => Message::Shutdown,
        t => return Err(ProtocolError::UnknownTag(t)),
    };
    if !r.buf.is_empty() {
        return Err(ProtocolError::Malformed(format!(
            "{} trailing bytes after message",
            r.buf.len()
        )));
    }
    Ok(msg)
}

fn check_header(header: &[u8], max_len: usize) -> Result<(usize, u8), ProtocolError> {
    let len = u32::from_be_bytes(header[..4].try_into().unwrap()) as usize;
    if len > max_len {
        return Err(ProtocolError::TooLarge { len, max: max_len });
    }
    let tag = header[4];
    if tag > TAG_SHUTDOWN {
        return Err(ProtocolError::UnknownTag(tag));
    }
    Ok((len, tag))
}

/// Decodes the frame at the start of `bytes`, returning the message and the
/// number of bytes consumed.
pub fn decode(bytes: &[u8], max_len: usize) -> Result<(Message, usize), ProtocolError> {
    if bytes.len() < HEADER_LEN {
        return Err(ProtocolError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let (len, tag) = check_header(bytes, max_len)?;
    let end = HEADER_LEN + len;
    if bytes.len() < end {
        return Err(ProtocolError::Truncated {
            needed: end,
            available: bytes.len(),
        });
    }
    Ok((decode_payload(tag, &bytes[HEADER_LEN..end])?, end))
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream before any
/// header byte.
pub fn read_message<R: Read>(r: &mut R, max_len: usize) -> io::Result<Option<Message>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    ProtocolError::Truncated {
                        needed: HEADER_LEN,
                        available: got,
                    },
                ))
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let (len, tag) = check_header(&header, max_len)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    decode_payload(tag, &payload)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&encode(msg))?;
    w.flush()
}
