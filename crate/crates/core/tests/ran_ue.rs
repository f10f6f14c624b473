mod common;

use common::*;
use fivegsim::ran_ue::{RanError, TransferStatus, UeState};
use fivegsim::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};
use fivegsim::{default_topology, dual_gnb_topology, RedundancyKind, SimError};

#[test]
fn rls_transmit_reaches_gnb() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    let before = events(&sim).len();
    let msg = TlvMessage::new(MsgKind::RlsData).with_str(Tag::UeId, UE1);
    sim.rls_transmit(UE1, "gNB", &msg).unwrap();
    let evs = events(&sim);
    let e = &evs[before];
    assert_eq!((e.protocol, e.src.as_str(), e.dst.as_str()), (Protocol::Rls, "UE", "gNB"));
    assert_eq!(e.link, "UE-gNB");
}

#[test]
fn rls_transmit_requires_attachment() {
    let mut sim = booted(dual_gnb_topology());
    sim.add_ue(UE1).unwrap();
    let msg = TlvMessage::new(MsgKind::RlsData);
    assert!(matches!(
        sim.rls_transmit(UE1, "gNB2", &msg),
        Err(SimError::Ran(RanError::NotAttached { .. }))
    ));
    assert!(matches!(
        sim.rls_transmit("imsi-nobody", "gNB", &msg),
        Err(SimError::Ran(RanError::UnknownUe(_)))
    ));
}

#[test]
fn request_needs_active_session() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    assert!(matches!(
        sim.request_document(UE1, "document"),
        Err(SimError::Ran(RanError::WrongState { state: UeState::Registered, .. }))
    ));
}

#[test]
fn serving_gnb_count_follows_mode() {
    let mut sim = booted(dual_gnb_topology());
    for ue in [UE1, UE2] {
        sim.add_ue(ue).unwrap();
        sim.register_ue(ue).unwrap();
    }
    sim.establish_session(UE1, RedundancyKind::DualConnectivity).unwrap();
    sim.establish_session(UE2, RedundancyKind::None).unwrap();
    assert_eq!(sim.ue(UE1).unwrap().serving_gnbs.len(), 2);
    assert_eq!(sim.ue(UE2).unwrap().serving_gnbs.len(), 1);
}

#[test]
fn ue_and_nf_namespaces_are_disjoint() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    let nrf = sim.nrf().unwrap();
    assert!(nrf.profiles().all(|p| !p.nf_id.starts_with("imsi-") && p.nf_id != "UE"));
}

#[test]
fn ten_ues_follow_the_data_path_order() {
    let mut sim = booted(default_topology());
    let ues: Vec<String> = (1..=10).map(|i| format!("imsi-0010100000000{i:02}")).collect();
    for ue in &ues {
        sim.add_ue(ue).unwrap();
        sim.register_ue(ue).unwrap();
        sim.establish_session(ue, RedundancyKind::None).unwrap();
    }
    for ue in &ues {
        sim.begin_request(ue, "document").unwrap();
    }
    sim.settle().unwrap();
    let evs = events(&sim);
    for ue in &ues {
        let t = sim.ue(ue).unwrap().transfers().last().unwrap().clone();
        assert_eq!(t.status, TransferStatus::Complete);
        assert_eq!(t.bytes_received, 487_659);
        let ip = sim.ue(ue).unwrap().ue_ip.unwrap();
        let stages = stage_times(&evs, ip);
        assert!(strictly_ordered(&stages), "{ue}: {stages:?}");
    }
}

#[test]
fn many_ues_send_many_rls_packets() {
    let mut sim = booted(default_topology());
    let n = 100;
    let ues: Vec<String> = (1..=n).map(|i| format!("imsi-001010000000{i:03}")).collect();
    for ue in &ues {
        sim.add_ue(ue).unwrap();
        sim.begin_registration(ue).unwrap();
    }
    sim.settle().unwrap();
    for ue in &ues {
        sim.begin_session(ue, RedundancyKind::None).unwrap();
    }
    sim.settle().unwrap();
    let start = events(&sim).len();
    for ue in &ues {
        sim.begin_request(ue, "document").unwrap();
    }
    sim.settle().unwrap();
    let uplink = events(&sim)[start..]
        .iter()
        .filter(|e| e.protocol == Protocol::Rls && e.src == "UE")
        .count();
    assert!(uplink >= n);
    for ue in &ues {
        let t = sim.ue(ue).unwrap().transfers().last().unwrap().clone();
        assert_eq!(t.status, TransferStatus::Complete, "{ue}");
    }
}
