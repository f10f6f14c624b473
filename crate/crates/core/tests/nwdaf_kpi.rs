mod common;

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::sync::Arc;

use common::*;
use fivegsim::nwdaf::{kpi_packet_counts, kpi_report, kpi_throughput_matrix, Nwdaf, SchemaError};
use fivegsim::simnet::{EntityAddr, LinkId, TapOutcome, TapRecord};
use fivegsim::wirefmt::{MsgKind, Protocol, SimPacket, Tag, TlvMessage};
use fivegsim::{default_topology, EventStore, KpiKind, NwdafEvent, Outcome, RedundancyKind, SimError, Simulator, Window};
use proptest::prelude::*;

fn heartbeat_record(to_name: &str) -> TapRecord {
    let body = TlvMessage::new(MsgKind::NfHeartbeatReq).with_str(Tag::NfId, "AUSF").encode().unwrap();
    TapRecord {
        seq: 0,
        ts: 3355,
        link: LinkId::new("AUSF-NRF"),
        from: EntityAddr::new("AUSF", Ipv4Addr::new(192, 168, 0, 15)),
        to: EntityAddr::new(to_name, Ipv4Addr::new(192, 168, 0, 12)),
        packet: Arc::new(SimPacket::new(
            Protocol::Sbi,
            (Ipv4Addr::new(192, 168, 0, 15), 7777),
            (Ipv4Addr::new(192, 168, 0, 12), 7777),
            body,
        )),
        outcome: TapOutcome::Delivered { at: 3356 },
    }
}

#[test]
fn ingest_heartbeat() {
    let mut n = Nwdaf::new();
    n.ingest(&heartbeat_record("NRF")).unwrap();
    let e = &n.store().events()[0];
    assert_eq!(e.protocol, Protocol::Sbi);
    assert_eq!(e.outcome, Outcome::Delivered);
    assert_eq!(e.msg(), Some("NF_HEARTBEAT_REQ"));
    assert_eq!(e.event_id, 1);
}

#[test]
fn ingest_rejects_missing_dst() {
    let mut n = Nwdaf::new();
    assert_eq!(n.ingest(&heartbeat_record("")), Err(SchemaError::Missing("dst")));
    assert_eq!((n.offered(), n.rejections(), n.store().len()), (1, 1, 0));
}

fn single_request_run() -> Simulator {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    sim.establish_session(UE1, RedundancyKind::None).unwrap();
    sim.request_document(UE1, "document").unwrap();
    sim.run_until(11_000).unwrap();
    sim
}

#[test]
fn store_matches_send_count() {
    let sim = single_request_run();
    let a = sim.analytics();
    assert_eq!(a.rejections(), 0);
    assert_eq!(a.offered() as usize, a.store().len());
    let sends = a.store().events().iter().filter(|e| e.is_send()).count() as u64;
    assert_eq!(sends, sim.total_sends());
    let evs = a.store().events();
    assert!(evs.windows(2).all(|w| w[0].event_id < w[1].event_id && w[0].ts <= w[1].ts));
}

#[test]
fn empty_inputs() {
    let w = Window::new(0, 10_000);
    let c = kpi_packet_counts(&[], w, None);
    assert!(c.rows.is_empty());
    assert_eq!(c.get("UE").packets, 0);
    let m = kpi_throughput_matrix(&[], w);
    assert_eq!(m.total_bytes(), 0);

    let sim = single_request_run();
    let quiet = kpi_throughput_matrix(sim.analytics().store().events(), Window::new(500_000, 600_000));
    assert!(quiet.bytes.values().all(|b| *b == 0));
}

#[test]
fn kpis_match_brute_force_oracle() {
    let sim = single_request_run();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.tsv");
    sim.export_events(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().count() <= 10_000);
    let imported = EventStore::import(&path).unwrap();
    for w in [Window::new(1000, 11_000), Window::new(0, 11_000), Window::new(250, 260)] {
        let (c, t) = oracle_csv(&text, w);
        assert_eq!(kpi_packet_counts(imported.events(), w, None).to_csv(), c);
        assert_eq!(kpi_throughput_matrix(imported.events(), w).to_csv(), t);
    }
}

#[test]
fn report_invariants() {
    let sim = single_request_run();
    let evs = sim.analytics().store().events();
    let w = Window::new(1000, 11_000);
    let r = kpi_report(evs, w);
    assert_eq!(r.throughput.total_bytes(), r.delivered_bytes);
    let total: u64 = r.counts.rows.values().map(|c| c.packets).sum();
    assert_eq!(total, 2 * r.delivered_events);
    assert_eq!(r.counting, "src_or_dst");
}

#[test]
fn export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    EventStore::new().export(&empty).unwrap();
    assert_eq!(std::fs::read(&empty).unwrap().len(), 0);
    assert!(EventStore::import(&empty).unwrap().is_empty());

    let sim = single_request_run();
    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    sim.export_events(&a).unwrap();
    let store = EventStore::import(&a).unwrap();
    assert_eq!(store.events(), sim.analytics().store().events());
    store.export(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

fn synthetic(n: usize) -> EventStore {
    let mut s = EventStore::new();
    for i in 0..n {
        s.append(NwdafEvent {
            event_id: 0,
            ts: i as u64 / 3,
            link: "A-B".into(),
            src: if i % 2 == 0 { "A" } else { "B" }.into(),
            dst: if i % 2 == 0 { "B" } else { "A" }.into(),
            protocol: Protocol::Sbi,
            bytes: 18 + (i % 7) as u64,
            outcome: if i % 11 == 0 { Outcome::Dropped } else { Outcome::Delivered },
            attrs: BTreeMap::new(),
        })
        .unwrap();
    }
    s
}

#[test]
fn export_line_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("big.tsv");
    synthetic(10_000).export(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 10_000);
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn import_rejects_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.tsv");
    std::fs::write(&p, "1\t0\tA-B\tA\tB\tSBI\t18\tDELIVERED\n1\t0\tA-B\tA\tB\tSBI\t18\tDELIVERED\n").unwrap();
    assert!(EventStore::import(&p).is_err());
    std::fs::write(&p, "1\t5\tA-B\tA\tB\tSBI\t18\tDELIVERED\n2\t4\tA-B\tA\tB\tSBI\t18\tDELIVERED\n").unwrap();
    assert!(EventStore::import(&p).is_err());
}

#[test]
fn analytics_subscription_notifies_each_period() {
    let mut sim = booted(with_nwdaf());
    let id = sim.subscribe_analytics("PCF", KpiKind::Throughput, 5000).unwrap();
    let start = sim.now();
    sim.run_until(start + 10_000).unwrap();
    assert_eq!(count_msg(&sim, "ANALYTICS_NOTIFY"), 2);
    sim.settle().unwrap();
    let (_, received) = sim.nf_counters("PCF").unwrap();
    assert_eq!(received, 2);
    let sub = sim.nwdaf_node().unwrap().subscriptions().find(|s| s.id == id).unwrap().clone();
    assert_eq!(sub.notifications, 2);
    // the notifications are themselves observed traffic
    let m = kpi_throughput_matrix(sim.analytics().store().events(), Window::new(start, start + 10_001));
    assert!(m.bytes_between("NWDAF", "PCF") > 0);
    assert_eq!(sim.nwdaf_node().unwrap().anlf.reports, 2);
}

#[test]
fn unregistered_consumer_is_refused() {
    let mut sim = booted(with_nwdaf());
    assert!(matches!(
        sim.subscribe_analytics("imsi-001010000000001", KpiKind::PacketCounts, 5000),
        Err(SimError::UnknownConsumer(_))
    ));
    sim.deregister_nf("PCF").unwrap();
    assert!(matches!(
        sim.subscribe_analytics("PCF", KpiKind::PacketCounts, 5000),
        Err(SimError::UnknownConsumer(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn windowed_counts_are_additive(n in 0usize..400, t0 in 0u64..50, d1 in 0u64..80, d2 in 0u64..80) {
        let s = synthetic(n);
        let (t1, t2) = (t0 + d1, t0 + d1 + d2);
        let a = kpi_packet_counts(s.events(), Window::new(t0, t1), None);
        let b = kpi_packet_counts(s.events(), Window::new(t1, t2), None);
        let all = kpi_packet_counts(s.events(), Window::new(t0, t2), None);
        for (name, c) in &all.rows {
            prop_assert_eq!(a.get(name).packets + b.get(name).packets, c.packets);
            prop_assert_eq!(a.get(name).sent + b.get(name).sent, c.sent);
        }
        let ta = kpi_throughput_matrix(s.events(), Window::new(t0, t1));
        let tb = kpi_throughput_matrix(s.events(), Window::new(t1, t2));
        let tall = kpi_throughput_matrix(s.events(), Window::new(t0, t2));
        for (pair, bytes) in &tall.bytes {
            prop_assert_eq!(ta.bytes[pair] + tb.bytes[pair], *bytes);
        }
    }

    #[test]
    fn event_line_round_trip(ts in any::<u64>(), bytes in any::<u64>(), src in "[A-Za-z0-9]{1,8}",
                             attrs in prop::collection::btree_map("[a-z_]{1,6}", "[ -~&&[^=]]{0,10}", 0..5)) {
        let e = NwdafEvent {
            event_id: 9,
            ts,
            link: format!("{src}-X"),
            src: src.clone(),
            dst: "X".into(),
            protocol: Protocol::Gtpu,
            bytes,
            outcome: Outcome::EliminatedDuplicate,
            attrs,
        };
        let line = e.to_line();
        prop_assert_eq!(NwdafEvent::parse_line(line.trim_end_matches('\n')).unwrap(), e);
    }
}
