//! Network data analytics: tap ingestion, the append-only event store, KPI
//! synthesis and periodic analytics subscriptions.

mod event;
mod ingest;
mod kpi;
mod node;
mod store;

use std::fmt;
use std::str::FromStr;

pub use event::{NwdafEvent, Outcome, SchemaError};
pub use ingest::normalize;
pub use kpi::{
    kpi_packet_counts, kpi_report, kpi_throughput_matrix, EntityCount, KpiReport, PacketCounts,
    ThroughputMatrix, Window, COUNTING_SEMANTICS,
};
pub use node::{Anlf, Mtlf, NwdafNode, ReportSink, Subscription};
pub use store::{EventStore, StoreError};

use crate::simnet::TapRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KpiKind {
    PacketCounts,
    Throughput,
}

impl KpiKind {
    pub fn code(self) -> u8 {
        match self {
            KpiKind::PacketCounts => 0,
            KpiKind::Throughput => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(KpiKind::PacketCounts),
            1 => Some(KpiKind::Throughput),
            _ => None,
        }
    }
}

impl fmt::Display for KpiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KpiKind::PacketCounts => "packet_counts",
            KpiKind::Throughput => "throughput",
        })
    }
}

impl FromStr for KpiKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "packet_counts" | "counts" => Ok(KpiKind::PacketCounts),
            "throughput" => Ok(KpiKind::Throughput),
            _ => Err(format!("unknown KPI kind `{s}`")),
        }
    }
}

/// Ingestion side of the analytics function: every offered tap record is
/// either stored or counted as a schema rejection.
#[derive(Debug, Clone, Default)]
pub struct Nwdaf {
    store: EventStore,
    offered: u64,
    rejections: u64,
    last_rejection: Option<SchemaError>,
}

impl Nwdaf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ingest(&mut self, record: &TapRecord) -> Result<u64, SchemaError> {
        self.offered += 1;
        match self.store.append(normalize(record)) {
            Ok(id) => Ok(id),
            Err(e) => {
                self.rejections += 1;
                self.last_rejection = Some(e.clone());
                Err(e)
            }
        }
    }

    pub fn store(&self) -> &EventStore {
        &self.store
    }

    pub fn offered(&self) -> u64 {
        self.offered
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    pub fn last_rejection(&self) -> Option<&SchemaError> {
        self.last_rejection.as_ref()
    }

    pub fn packet_counts(&self, window: Window) -> PacketCounts {
        kpi_packet_counts(self.store.events(), window, None)
    }

    pub fn throughput(&self, window: Window) -> ThroughputMatrix {
        kpi_throughput_matrix(self.store.events(), window)
    }
}
