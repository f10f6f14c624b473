#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use fivegsim::core_cp::NfType;
use fivegsim::nwdaf::NwdafEvent;
use fivegsim::topology::{EntityKind, EntitySpec, LinkSpec};
use fivegsim::{default_topology, Simulator, TopologyConfig};

pub const UE1: &str = "imsi-001010000000001";
pub const UE2: &str = "imsi-001010000000002";

pub fn add_entity(t: &mut TopologyConfig, kind: EntityKind, name: &str, ip: [u8; 4]) {
    t.entities.push(EntitySpec {
        name: name.into(),
        kind,
        ip: Ipv4Addr::from(ip),
    });
}

pub fn add_link(t: &mut TopologyConfig, a: &str, b: &str, reliable: bool) {
    t.links.push(LinkSpec {
        a: a.into(),
        b: b.into(),
        latency_ms: 1,
        loss_prob: 0.0,
        reliable,
    });
}

/// Default topology plus an NWDAF linked to the NRF, PCF and NSSF.
pub fn with_nwdaf() -> TopologyConfig {
    let mut t = default_topology();
    add_entity(&mut t, EntityKind::Nf(NfType::Nwdaf), "NWDAF", [192, 168, 0, 33]);
    for peer in ["NRF", "PCF", "NSSF"] {
        add_link(&mut t, "NWDAF", peer, false);
    }
    t
}

pub fn booted(t: TopologyConfig) -> Simulator {
    let mut sim = Simulator::new(t, 42).unwrap();
    sim.boot().unwrap();
    sim
}

pub fn events(sim: &Simulator) -> Vec<NwdafEvent> {
    sim.analytics().store().events().to_vec()
}

pub fn count_msg(sim: &Simulator, msg: &str) -> usize {
    sim.analytics()
        .store()
        .events()
        .iter()
        .filter(|e| e.is_send() && e.msg() == Some(msg))
        .count()
}

pub fn involving(sim: &Simulator, entity: &str) -> usize {
    sim.analytics()
        .store()
        .events()
        .iter()
        .filter(|e| e.src == entity || e.dst == entity)
        .count()
}

/// First-packet timestamps of the six user-plane stages for one UE address:
/// RLS up, GTP up, plain to server, server response, GTP down, RLS down.
pub fn stage_times(events: &[NwdafEvent], ue_ip: Ipv4Addr) -> [Option<u64>; 6] {
    use fivegsim::wirefmt::Protocol;
    let ip = ue_ip.to_string();
    let ip = ip.as_str();
    let stages: [&dyn Fn(&NwdafEvent) -> bool; 6] = [
        &|e| e.protocol == Protocol::Rls && e.src == "UE" && e.attr("inner_src") == Some(ip),
        &|e| e.protocol == Protocol::Gtpu && e.src.starts_with("gNB") && e.attr("inner_src") == Some(ip),
        &|e| e.protocol == Protocol::App && e.dst == "AppServer" && e.attr("src_ip") == Some(ip),
        &|e| e.protocol == Protocol::App && e.src == "AppServer" && e.attr("dst_ip") == Some(ip),
        &|e| e.protocol == Protocol::Gtpu && e.dst.starts_with("gNB") && e.attr("inner_dst") == Some(ip),
        &|e| e.protocol == Protocol::Rls && e.dst == "UE" && e.attr("inner_dst") == Some(ip),
    ];
    stages.map(|f| events.iter().find(|e| e.is_send() && f(e)).map(|e| e.ts))
}

pub fn strictly_ordered(t: &[Option<u64>; 6]) -> bool {
    t.iter().all(Option::is_some) && t.windows(2).all(|w| w[0] < w[1])
}

/// One evidence class per checklist entry: events matching the predicate
/// are deleted to build the mutation log for that check.
pub type Mutation = (fivegsim::Check, fn(&NwdafEvent) -> bool);

pub fn mutation_classes() -> [Mutation; 6] {
    use fivegsim::wirefmt::Protocol;
    use fivegsim::Check;
    fn msg_prefix(e: &NwdafEvent, p: &str) -> bool {
        e.msg().is_some_and(|m| m.starts_with(p))
    }
    [
        (Check::SbiPort, |e| msg_prefix(e, "NF_STATUS_NOTIFY")),
        (Check::PfcpAssociation, |e| msg_prefix(e, "PFCP_ASSOCIATION_")),
        (Check::NgSetupOrder, |e| msg_prefix(e, "NG_SETUP_")),
        (Check::HeartbeatCadence, |e| msg_prefix(e, "NF_HEARTBEAT_")),
        (Check::UeRegistration, |e| msg_prefix(e, "UE_AUTH_")),
        (Check::GtpRouting, |e| e.protocol == Protocol::Gtpu),
    ]
}

/// Booted default topology, one UE with a session, one document request
/// and heartbeats running to the end of the 10-second window.
pub fn nominal_run() -> Simulator {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    sim.establish_session(UE1, fivegsim::RedundancyKind::None).unwrap();
    sim.request_document(UE1, "document").unwrap();
    sim.run_until(11_000).unwrap();
    sim
}

/// Names and addresses of the default topology, in file order.
pub const SAMPLE_ADDRESSES: [(&str, [u8; 4]); 13] = [
    ("NRF", [192, 168, 0, 12]),
    ("AMF", [192, 168, 0, 13]),
    ("SMF", [192, 168, 0, 14]),
    ("AUSF", [192, 168, 0, 15]),
    ("UDM", [192, 168, 0, 16]),
    ("UDR", [192, 168, 0, 17]),
    ("PCF", [192, 168, 0, 18]),
    ("NSSF", [192, 168, 0, 19]),
    ("BSF", [192, 168, 0, 20]),
    ("UPF1", [192, 168, 0, 21]),
    ("gNB", [192, 168, 0, 22]),
    ("UE", [192, 168, 0, 30]),
    ("UPF2", [192, 168, 0, 32]),
];

/// Independent recomputation from the exported text: splits each line by
/// hand and tallies delivered events in the window.
pub fn oracle_csv(text: &str, w: fivegsim::Window) -> (String, String) {
    let mut counts: BTreeMap<String, [u64; 3]> = BTreeMap::new();
    let mut bytes: BTreeMap<(String, String), u64> = BTreeMap::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        let (ts, src, dst, size, outcome) = (f[1].parse::<u64>().unwrap(), f[3], f[4], f[6].parse::<u64>().unwrap(), f[7]);
        counts.entry(src.into()).or_default();
        counts.entry(dst.into()).or_default();
        let pair = bytes.entry((src.into(), dst.into())).or_default();
        if outcome == "DELIVERED" && ts >= w.start && ts < w.end {
            *pair += size;
            let s = counts.get_mut(src).unwrap();
            s[0] += 1;
            s[1] += 1;
            let d = counts.get_mut(dst).unwrap();
            d[0] += 1;
            d[2] += 1;
        }
    }
    let mut c = String::from("entity,packets,sent,received\n");
    for (n, [p, s, r]) in &counts {
        writeln!(c, "{n},{p},{s},{r}").unwrap();
    }
    let secs = (w.end - w.start) as f64 / 1000.0;
    let mut t = String::from("src,dst,bytes,bytes_per_sec\n");
    for ((a, b), n) in &bytes {
        writeln!(t, "{a},{b},{n},{:.3}", *n as f64 / secs).unwrap();
    }
    (c, t)
}
