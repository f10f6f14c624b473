mod common;

use std::net::Ipv4Addr;

use common::*;
use fivegsim::core_cp::{AssocState, GnbState, NfProfile, NfStatus, NfType, Nrf, NrfError};
use fivegsim::ran_ue::UeState;
use fivegsim::topology::EntityKind;
use fivegsim::wirefmt::Protocol;
use fivegsim::{default_topology, dual_gnb_topology, RedundancyKind, SimError, Simulator};

#[test]
fn registry_after_boot() {
    let sim = booted(default_topology());
    let nrf = sim.nrf().unwrap();
    let amfs = nrf.discover("SMF", NfType::Amf).unwrap();
    assert_eq!(amfs.len(), 1);
    assert_eq!(amfs[0].addr, Ipv4Addr::new(192, 168, 0, 13));
    assert_eq!(amfs[0].status, NfStatus::Registered);

    let smfs = nrf.discover("AMF", NfType::Smf).unwrap();
    assert_eq!(smfs.len(), 1);
    assert_eq!(smfs[0].addr, Ipv4Addr::new(192, 168, 0, 14));

    let upfs: Vec<_> = nrf.discover("SMF", NfType::Upf).unwrap().into_iter().map(|p| p.nf_id).collect();
    assert_eq!(upfs, ["UPF1", "UPF2"]);
    assert!(nrf.discover("SMF", NfType::Nwdaf).unwrap().is_empty());
    // 9 control NFs (NRF excluded from its own registry) plus 2 UPFs
    assert_eq!(nrf.profiles().count(), 10);
}

#[test]
fn nrf_registry_rules() {
    let mut nrf = Nrf::new("NRF", Ipv4Addr::new(192, 168, 0, 12), 3333);
    let amf = NfProfile::new("AMF", NfType::Amf, Ipv4Addr::new(192, 168, 0, 13));
    nrf.register(amf.clone(), 0).unwrap();
    assert_eq!(nrf.register(amf.clone(), 5), Err(NrfError::Duplicate("AMF".into())));
    assert_eq!(nrf.heartbeat("X", 10), Err(NrfError::Unknown("X".into())));
    nrf.deregister("AMF").unwrap();
    assert_eq!(nrf.heartbeat("AMF", 10), Err(NrfError::Deregistered("AMF".into())));
    nrf.register(amf, 20).unwrap();

    // silent for exactly two intervals is still fine, one ms more is not
    assert!(nrf.sweep(20 + 2 * 3333).is_empty());
    assert_eq!(nrf.sweep(20 + 2 * 3333 + 1), vec!["AMF".to_string()]);
    assert_eq!(nrf.profile("AMF").unwrap().status, NfStatus::Suspended);
    assert_eq!(nrf.heartbeat("AMF", 7000), Ok(NfStatus::Registered));
}

#[test]
fn silent_nf_is_suspended() {
    let mut sim = booted(default_topology());
    sim.silence_nf("AUSF").unwrap();
    sim.run_until(sim.now() + 4 * 3333).unwrap();
    let nrf = sim.nrf().unwrap();
    assert_eq!(nrf.profile("AUSF").unwrap().status, NfStatus::Suspended);
    assert_eq!(nrf.profile("UDM").unwrap().status, NfStatus::Registered);
}

#[test]
fn registered_heartbeats_stay_fresh() {
    let mut sim = booted(default_topology());
    sim.run_until(20_000).unwrap();
    let nrf = sim.nrf().unwrap();
    for p in nrf.profiles() {
        assert_eq!(p.status, NfStatus::Registered, "{}", p.nf_id);
        assert!(sim.now() - p.last_heartbeat <= 2 * 3333, "{}", p.nf_id);
    }
}

#[test]
fn discover_after_deregistration() {
    let mut sim = booted(default_topology());
    sim.deregister_nf("UPF2").unwrap();
    let nrf = sim.nrf().unwrap();
    let upfs: Vec<_> = nrf.discover("SMF", NfType::Upf).unwrap().into_iter().map(|p| p.nf_id).collect();
    assert_eq!(upfs, ["UPF1"]);
    assert_eq!(nrf.profile("UPF2").unwrap().status, NfStatus::Deregistered);
}

#[test]
fn pfcp_association_per_pair() {
    let mut sim = booted(default_topology());
    assert_eq!(count_msg(&sim, "PFCP_ASSOCIATION_SETUP_REQ"), 2);
    assert_eq!(count_msg(&sim, "PFCP_ASSOCIATION_SETUP_RESP"), 2);
    let first = sim.pfcp_associate("SMF", "UPF1").unwrap();
    assert_eq!(first.state, AssocState::Active);
    let again = sim.pfcp_associate("SMF", "UPF1").unwrap();
    assert_eq!(first, again);
    assert_eq!(count_msg(&sim, "PFCP_ASSOCIATION_SETUP_REQ"), 2);
    assert_eq!(sim.smf("SMF").unwrap().associations().count(), 2);
}

#[test]
fn fully_meshed_smfs_and_upfs() {
    let mut t = default_topology();
    add_entity(&mut t, EntityKind::Nf(NfType::Smf), "SMF2", [192, 168, 0, 24]);
    for peer in ["NRF", "UPF1", "UPF2", "AMF"] {
        add_link(&mut t, "SMF2", peer, false);
    }
    let sim = booted(t);
    let mut pairs = Vec::new();
    for smf in sim.smfs() {
        for a in smf.associations() {
            assert_eq!(a.state, AssocState::Active);
            pairs.push((a.smf_id.clone(), a.upf_id.clone()));
        }
    }
    pairs.sort();
    let want: Vec<_> = ["SMF", "SMF2"]
        .iter()
        .flat_map(|s| ["UPF1", "UPF2"].map(|u| (s.to_string(), u.to_string())))
        .collect();
    assert_eq!(pairs, want);
    assert_eq!(count_msg(&sim, "PFCP_ASSOCIATION_SETUP_REQ"), 4);
}

#[test]
fn association_needs_registered_parties() {
    let mut sim = booted(default_topology());
    sim.deregister_nf("UPF2").unwrap();
    assert!(matches!(sim.pfcp_associate("SMF", "UPF2"), Err(SimError::Setup(_))));
}

#[test]
fn ng_setup_registers_gnb() {
    let mut sim = booted(default_topology());
    let reg = sim.ng_setup("gNB").unwrap();
    assert_eq!(reg.amf_id, "AMF");
    assert_eq!(reg.state, GnbState::Registered);
    let gnb = sim.gnb("gNB").unwrap();
    assert_eq!(gnb.addr(), Ipv4Addr::new(192, 168, 0, 22));
    assert!(gnb.is_registered());
    let evs = events(&sim);
    let req = evs.iter().position(|e| e.msg() == Some("NG_SETUP_REQ")).unwrap();
    let resp = evs.iter().position(|e| e.msg() == Some("NG_SETUP_RESP")).unwrap();
    assert!(req < resp);
    assert_eq!(evs[req].protocol, Protocol::Ngap);
    assert_eq!(evs[req].link, "gNB-AMF");
}

#[test]
fn ng_setup_needs_reliable_link() {
    let mut t = default_topology();
    t.link_mut("gNB", "AMF").unwrap().reliable = false;
    let mut sim = Simulator::new(t, 42).unwrap();
    match sim.boot() {
        Err(SimError::Config(msg)) => assert!(msg.contains("reliable"), "{msg}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn two_gnbs_register_independently() {
    let sim = booted(dual_gnb_topology());
    let mut regs: Vec<_> = sim.amf().unwrap().gnb_registrations().cloned().collect();
    regs.sort_by(|a, b| a.gnb_id.cmp(&b.gnb_id));
    assert_eq!(regs.len(), 2);
    assert_eq!(regs[0].gnb_id, "gNB");
    assert_eq!(regs[1].gnb_id, "gNB2");
    assert!(regs.iter().all(|r| r.state == GnbState::Registered));
}

#[test]
fn ue_registration_walks_the_core() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    let before: Vec<_> = ["AUSF", "UDM", "UDR", "PCF"].iter().map(|n| involving(&sim, n)).collect();
    assert_eq!(sim.register_ue(UE1).unwrap(), UeState::Registered);
    for (i, n) in ["AUSF", "UDM", "UDR", "PCF"].iter().enumerate() {
        assert!(involving(&sim, n) > before[i], "{n} saw no registration traffic");
    }
    assert_eq!(sim.amf().unwrap().registrations_accepted(), 1);
}

#[test]
fn unprovisioned_ue_is_rejected() {
    let mut sim = booted(default_topology());
    sim.add_ue("imsi-999999999999999").unwrap();
    assert!(matches!(sim.register_ue("imsi-999999999999999"), Err(SimError::Rejected { .. })));
    let dev = sim.ue("imsi-999999999999999").unwrap();
    assert_eq!(dev.state, UeState::Deregistered);
    assert!(dev.reject_cause.is_some());
    assert!(sim.establish_session("imsi-999999999999999", RedundancyKind::None).is_err());
}

#[test]
fn reregistration_is_a_no_op() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    let ausf = involving(&sim, "AUSF");
    let total = sim.total_sends();
    assert_eq!(sim.register_ue(UE1).unwrap(), UeState::Registered);
    assert_eq!(involving(&sim, "AUSF"), ausf);
    assert_eq!(sim.total_sends(), total);
}

#[test]
fn sessions_allocate_sequential_addresses() {
    let mut sim = booted(default_topology());
    for ue in [UE1, UE2] {
        sim.add_ue(ue).unwrap();
        sim.register_ue(ue).unwrap();
    }
    let s1 = sim.establish_session(UE1, RedundancyKind::None).unwrap();
    let s2 = sim.establish_session(UE2, RedundancyKind::None).unwrap();
    assert_eq!(s1.ue_ip, Ipv4Addr::new(10, 45, 0, 2));
    assert_eq!(s2.ue_ip, Ipv4Addr::new(10, 45, 0, 3));
    assert_ne!(s1.upf_teid(), s2.upf_teid());
    // lowest nf_id wins the UPF selection
    assert_eq!(s1.redundancy.paths[0].upf, "UPF1");
}

#[test]
fn session_needs_association() {
    let mut t = default_topology();
    t.links.retain(|l| !(l.joins("SMF", "UPF1") || l.joins("SMF", "UPF2")));
    let mut sim = booted(t);
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    assert!(matches!(sim.establish_session(UE1, RedundancyKind::None), Err(SimError::Session { .. })));
    assert_eq!(sim.ue(UE1).unwrap().state, UeState::Registered);
}

#[test]
fn every_sbi_packet_uses_port_7777() {
    let mut sim = booted(with_nwdaf());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    sim.establish_session(UE1, RedundancyKind::None).unwrap();
    sim.subscribe_analytics("PCF", fivegsim::KpiKind::Throughput, 5000).unwrap();
    sim.request_document(UE1, "document").unwrap();
    sim.run_until(12_000).unwrap();
    let sbi: Vec<_> = events(&sim).into_iter().filter(|e| e.protocol == Protocol::Sbi).collect();
    assert!(sbi.len() > 50);
    assert!(sbi.iter().all(|e| e.attr("dport") == Some("7777")));
}

#[test]
fn control_before_user_plane() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    sim.establish_session(UE1, RedundancyKind::None).unwrap();
    sim.request_document(UE1, "document").unwrap();
    let evs = events(&sim);
    let first = |pred: &dyn Fn(&fivegsim::NwdafEvent) -> bool| evs.iter().find(|e| pred(e)).unwrap().ts;
    let ng = first(&|e| e.msg() == Some("NG_SETUP_RESP"));
    let accept = first(&|e| e.attr("nas") == Some("REGISTRATION_ACCEPT"));
    let session = first(&|e| e.attr("nas") == Some("PDU_SESSION_ESTABLISHMENT_ACCEPT"));
    let user = first(&|e| e.protocol == Protocol::Gtpu);
    assert!(ng < accept && accept < session && session < user, "{ng} {accept} {session} {user}");
}
