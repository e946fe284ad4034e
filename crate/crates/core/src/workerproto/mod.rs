//! Dispatch of client training tasks to local threads or remote worker
//! processes.
//!
//! Every frame on the wire is
//!
//! ```text
//! +----------------------+---------+------------------+
//! | payload length (u32) | tag (u8)| payload          |
//! | big-endian           |         | `length` bytes   |
//! +----------------------+---------+------------------+
//! ```
//!
//! with tags `0 = TASK`, `1 = RESULT`, `2 = HEARTBEAT`, `3 = SHUTDOWN`.
//! Payload integers and floats are little-endian; vectors are a `u32`
//! element count followed by the elements; strings are a `u32` byte count
//! followed by UTF-8. Field order is given on [`TaskMsg`] and [`ResultMsg`].
//!
//! Neither message carries a simulated quantity: virtual timing is decided
//! by the engine before dispatch, and the physical wall time in a result is
//! diagnostic only.

mod codec;
mod dispatch;
mod exec;
mod remote;

pub use codec::{
    decode, encode, read_message, write_message, Message, ProtocolError, ResultMsg, TaskMsg,
    TaskOutcome, DEFAULT_MAX_FRAME, TAG_HEARTBEAT, TAG_RESULT, TAG_SHUTDOWN, TAG_TASK,
};
pub use dispatch::{Dispatcher, LocalPool};
pub use exec::execute_task;
pub use remote::{run_worker, RemotePool, WorkerOptions};
