use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::ClientId;

/// Simulated time in seconds. Only the event loop moves it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VirtualClock {
    now_s: f64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_s(&self) -> f64 {
        self.now_s
    }

    /// Panics if `t` is earlier than the current time.
    pub fn advance_to(&mut self, t: f64) {
        assert!(
            t >= self.now_s,
            "clock moved backwards: {} -> {t}",
            self.now_s
        );
        self.now_s = t;
    }

    pub fn advance_by(&mut self, dt: f64) {
        self.advance_to(self.now_s + dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// The availability slot ended at or before the would-be completion.
    SlotEnded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    ClientDone(ClientId),
    ClientDropped(ClientId, DropReason),
    RoundClosed,
    EvalDue,
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::ClientDone(_) => 0,
            EventKind::ClientDropped(..) => 1,
            EventKind::RoundClosed => 2,
            EventKind::EvalDue => 3,
        }
    }

    fn client(&self) -> &str {
        match self {
            EventKind::ClientDone(c) | EventKind::ClientDropped(c, _) => c.as_str(),
            _ => "",
        }
    }
}

/// Ordered by `(at_s, kind rank, client_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub at_s: f64,
    pub kind: EventKind,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at_s
            .total_cmp(&other.at_s)
            .then_with(|| self.kind.rank().cmp(&other.kind.rank()))
            .then_with(|| self.kind.client().cmp(other.kind.client()))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of events. Pop order depends only on event contents.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<SimEvent>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at_s: f64, kind: EventKind) {
        assert!(at_s.is_finite(), "event time must be finite");
        self.heap.push(std::cmp::Reverse(SimEvent { at_s, kind }));
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek(&self) -> Option<&SimEvent> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn clear(&mut self) {
        self.heap.clear();
    }
}
