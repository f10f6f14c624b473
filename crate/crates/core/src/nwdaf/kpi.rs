use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::NwdafEvent;
use crate::simnet::Millis;

/// Half-open time window `[start, end)` in virtual ms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: Millis,
    pub end: Millis,
}

impl Window {
    pub fn new(start: Millis, end: Millis) -> Self {
        Window { start, end }
    }

    pub fn contains(&self, t: Millis) -> bool {
        t >= self.start && t < self.end
    }

    pub fn seconds(&self) -> f64 {
        self.end.saturating_sub(self.start) as f64 / 1000.0
    }
}

/// How per-entity totals are formed. The `packets` column counts events
/// where the entity is source or destination.
pub const COUNTING_SEMANTICS: &str = "src_or_dst";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EntityCount {
    /// Delivered events with the entity as source or destination.
    pub packets: u64,
    pub sent: u64,
    pub received: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketCounts {
    pub window: Window,
    pub rows: BTreeMap<String, EntityCount>,
}

impl PacketCounts {
    pub fn get(&self, entity: &str) -> EntityCount {
        self.rows.get(entity).copied().unwrap_or_default()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("entity,packets,sent,received\n");
        for (name, c) in &self.rows {
            let _ = writeln!(s, "{name},{},{},{}", c.packets, c.sent, c.received);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputMatrix {
    pub window: Window,
    /// Delivered bytes per directed (src, dst) pair.
    pub bytes: BTreeMap<(String, String), u64>,
}

impl ThroughputMatrix {
    pub fn bytes_between(&self, src: &str, dst: &str) -> u64 {
        self.bytes
            .get(&(src.to_string(), dst.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn rate(&self, src: &str, dst: &str) -> f64 {
        let secs = self.window.seconds();
        if secs == 0.0 {
            return 0.0;
        }
        self.bytes_between(src, dst) as f64 / secs
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes.values().sum()
    }

    pub fn to_csv(&self) -> String {
        let secs = self.window.seconds();
        let mut s = String::from("src,dst,bytes,bytes_per_sec\n");
        for ((src, dst), b) in &self.bytes {
            let rate = if secs == 0.0 { 0.0 } else { *b as f64 / secs };
            let _ = writeln!(s, "{src},{dst},{b},{rate:.3}");
        }
        s
    }
}

/// Per-entity counts over delivered events in the window. Every entity seen
/// anywhere in the log gets a row.
pub fn kpi_packet_counts(events: &[NwdafEvent], window: Window, filter: Option<&[&str]>) -> PacketCounts {
    let keep = |n: &str| filter.is_none_or(|f| f.contains(&n));
    let mut rows: BTreeMap<String, EntityCount> = BTreeMap::new();
    for e in events {
        for n in [&e.src, &e.dst] {
            if keep(n) && !rows.contains_key(n.as_str()) {
                rows.insert(n.clone(), EntityCount::default());
            }
        }
        if !e.is_delivered() || !window.contains(e.ts) {
            continue;
        }
        if let Some(c) = rows.get_mut(e.src.as_str()) {
            c.packets += 1;
            c.sent += 1;
        }
        if let Some(c) = rows.get_mut(e.dst.as_str()) {
            c.packets += 1;
            c.received += 1;
        }
    }
    PacketCounts { window, rows }
}

/// Delivered bytes per directed pair; every pair seen in the log gets a row.
pub fn kpi_throughput_matrix(events: &[NwdafEvent], window: Window) -> ThroughputMatrix {
    let mut bytes: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    for e in events {
        if seen.insert((&e.src, &e.dst)) {
            bytes.entry((e.src.clone(), e.dst.clone())).or_insert(0);
        }
        if e.is_delivered() && window.contains(e.ts) {
            *bytes.get_mut(&(e.src.clone(), e.dst.clone())).expect("inserted above") += e.bytes;
        }
    }
    ThroughputMatrix { window, bytes }
}

/// Combined analytics output handed to consumers and subscribers.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub window: Window,
    pub counts: PacketCounts,
    pub throughput: ThroughputMatrix,
    pub delivered_events: u64,
    pub delivered_bytes: u64,
    pub counting: &'static str,
}

pub fn kpi_report(events: &[NwdafEvent], window: Window) -> KpiReport {
    let counts = kpi_packet_counts(events, window, None);
    let throughput = kpi_throughput_matrix(events, window);
    let delivered: Vec<_> = events
        .iter()
        .filter(|e| e.is_delivered() && window.contains(e.ts))
        .collect();
    KpiReport {
        window,
        delivered_events: delivered.len() as u64,
        delivered_bytes: delivered.iter().map(|e| e.bytes).sum(),
        counts,
        throughput,
        counting: COUNTING_SEMANTICS,
    }
}
