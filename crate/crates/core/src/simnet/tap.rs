use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex};

use super::{EntityAddr, LinkId, Millis};
use crate::wirefmt::SimPacket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TapId(pub(crate) u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TapOutcome {
    Delivered { at: Millis },
    Dropped,
    /// Delivered, then discarded by the receiver as a redundant copy.
    EliminatedDuplicate,
    /// Delivered, then discarded by the receiver (unknown tunnel, no route).
    Discarded { reason: &'static str },
}

/// One observation of traffic on a link.
#[derive(Debug, Clone)]
pub struct TapRecord {
    /// Position in the network-wide observation order.
    pub seq: u64,
    pub ts: Millis,
    pub link: LinkId,
    pub from: EntityAddr,
    pub to: EntityAddr,
    pub packet: Arc<SimPacket>,
    pub outcome: TapOutcome,
}

impl TapRecord {
    pub fn is_send(&self) -> bool {
        matches!(
            self.outcome,
            TapOutcome::Delivered { .. } | TapOutcome::Dropped
        )
    }
}

/// Receives tap records in observation order. Sinks must not reach back
/// into the simulator.
pub trait TapSink: Send {
    fn observe(&mut self, record: &TapRecord);
}

/// Ordered handoff to a consumer in another context.
impl TapSink for Sender<TapRecord> {
    fn observe(&mut self, record: &TapRecord) {
        // a hung-up receiver just stops observing
        let _ = self.send(record.clone());
    }
}

/// Shared in-memory record log.
#[derive(Debug, Clone, Default)]
pub struct TapLog(Arc<Mutex<Vec<TapRecord>>>);

impl TapLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<TapRecord> {
        self.0.lock().expect("tap log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("tap log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TapSink for TapLog {
    fn observe(&mut self, record: &TapRecord) {
        self.0.lock().expect("tap log poisoned").push(record.clone());
    }
}
