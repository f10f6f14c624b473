mod common;

use std::collections::BTreeSet;

use common::*;
use fivegsim::urllc::{
    eliminate_duplicates, measure_delivery_reliability, DuplicateEliminator, PathDescriptor, RedundancyMode,
};
use fivegsim::{default_topology, dual_gnb_topology, RedundancyKind, SimError};
use proptest::prelude::*;

fn seqs(input: &[u16]) -> Vec<u16> {
    eliminate_duplicates(input.iter().map(|&s| (s, ()))).into_iter().map(|(s, _)| s).collect()
}

#[test]
fn elimination_examples() {
    assert_eq!(seqs(&[1, 2, 2, 3]), [1, 2, 3]);
    // both copies of 5 lost upstream
    assert_eq!(seqs(&[3, 4, 4, 3, 6, 6]), [3, 4, 6]);
}

#[test]
fn elimination_across_wraparound() {
    let mut f = DuplicateEliminator::new();
    for s in [65_534u16, 65_535, 0, 1] {
        assert!(f.accept(s));
    }
    for s in [65_535u16, 0, 65_534] {
        assert!(!f.accept(s));
    }
    assert_eq!((f.passed(), f.eliminated()), (4, 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// Two copies of a numbered stream, interleaved arbitrarily with both
    /// copies kept in order: the output is one copy per number in order of
    /// first arrival.
    #[test]
    fn interleaved_replicas(start in any::<u16>(), n in 1usize..600, picks in prop::collection::vec(any::<bool>(), 1200)) {
        let stream: Vec<u16> = (0..n).map(|i| start.wrapping_add(i as u16)).collect();
        let (mut a, mut b) = (0, 0);
        let mut merged = Vec::new();
        for &pick in picks.iter().chain(std::iter::repeat(&true)) {
            if a == n && b == n {
                break;
            }
            if (pick && a < n) || b == n {
                merged.push((stream[a], 'a'));
                a += 1;
            } else {
                merged.push((stream[b], 'b'));
                b += 1;
            }
        }
        let out = eliminate_duplicates(merged.clone());
        let mut seen = BTreeSet::new();
        let expected: Vec<_> = merged.iter().filter(|(s, _)| seen.insert(*s)).cloned().collect();
        prop_assert_eq!(out.iter().map(|p| p.0).collect::<Vec<_>>(), expected.iter().map(|p| p.0).collect::<Vec<_>>());
        prop_assert_eq!(out.len(), n);
    }

    #[test]
    fn lossy_replicas_keep_survivors(n in 1usize..400, lost_a in prop::collection::vec(any::<bool>(), 400),
                                     lost_b in prop::collection::vec(any::<bool>(), 400)) {
        let merged: Vec<(u16, ())> = (0..n)
            .flat_map(|i| {
                let s = i as u16;
                [(!lost_a[i]).then_some((s, ())), (!lost_b[i]).then_some((s, ()))]
            })
            .flatten()
            .collect();
        let want: Vec<u16> = (0..n).filter(|&i| !lost_a[i] || !lost_b[i]).map(|i| i as u16).collect();
        prop_assert_eq!(seqs(&merged.iter().map(|p| p.0).collect::<Vec<_>>()), want);
    }
}

#[test]
fn reliability_single_path() {
    let r = measure_delivery_reliability(RedundancyKind::None, 0.1, 10_000, 42);
    assert!((r.delivery_ratio() - 0.9).abs() <= 0.01, "{}", r.delivery_ratio());
}

#[test]
fn reliability_lossless_all_modes() {
    for kind in RedundancyKind::ALL {
        assert_eq!(measure_delivery_reliability(kind, 0.0, 500, 7).delivery_ratio(), 1.0, "{kind}");
    }
}

#[test]
fn reliability_replicated_modes() {
    for kind in [RedundancyKind::N3Replication, RedundancyKind::PsaAnchor, RedundancyKind::DualConnectivity] {
        let r = measure_delivery_reliability(kind, 0.1, 10_000, 42);
        assert!((r.loss_ratio() - 0.01).abs() <= 0.005, "{kind}: {}", r.loss_ratio());
        assert_eq!(r.paths.len(), 2);
        assert!(r.paths.iter().all(|p| p.sent == 10_000));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replication_dominates_packet_for_packet(seed in any::<u64>(), p in 0.01f64..0.6) {
        let single = measure_delivery_reliability(RedundancyKind::None, p, 300, seed);
        for kind in [RedundancyKind::N3Replication, RedundancyKind::PsaAnchor, RedundancyKind::DualConnectivity] {
            let r = measure_delivery_reliability(kind, p, 300, seed);
            prop_assert!(r.delivered >= single.delivered);
            for (a, b) in single.delivered_mask.iter().zip(&r.delivered_mask) {
                prop_assert!(!a || *b);
            }
        }
    }
}

fn path(gnb: &str, upf: &str, anchor: &str, teid: u32, links: &[&str]) -> PathDescriptor {
    PathDescriptor {
        gnb: gnb.into(),
        upf: upf.into(),
        anchor: anchor.into(),
        gnb_teid: teid,
        upf_teid: teid,
        links: links.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn mode_layout_invariants() {
    let dual = RedundancyMode {
        kind: RedundancyKind::DualConnectivity,
        paths: vec![
            path("gNB", "UPF1", "UPF1", 1, &["gNB-UPF1"]),
            path("gNB2", "UPF2", "UPF2", 1, &["gNB2-UPF2"]),
        ],
        psa_upf: None,
    };
    dual.validate().unwrap();
    let mut shared = dual.clone();
    shared.paths[1].gnb = "gNB".into();
    assert!(shared.validate().is_err());

    let n3 = RedundancyMode {
        kind: RedundancyKind::N3Replication,
        paths: vec![path("gNB", "UPF1", "UPF1", 1, &[]), path("gNB", "UPF1", "UPF1", 2, &[])],
        psa_upf: None,
    };
    n3.validate().unwrap();
    let mut same_teid = n3.clone();
    same_teid.paths[1].gnb_teid = 1;
    assert!(same_teid.validate().is_err());

    let psa = RedundancyMode {
        kind: RedundancyKind::PsaAnchor,
        paths: vec![path("gNB", "UPF1", "UPF1", 1, &[]), path("gNB", "UPF2", "UPF1", 1, &[])],
        psa_upf: Some("UPF1".into()),
    };
    psa.validate().unwrap();
    let mut bypass = psa.clone();
    bypass.paths[1].anchor = "UPF2".into();
    assert!(bypass.validate().is_err());
}

#[test]
fn dual_session_uses_disjoint_paths() {
    let mut sim = booted(dual_gnb_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    let s = sim.establish_session(UE1, RedundancyKind::DualConnectivity).unwrap();
    s.redundancy.validate().unwrap();
    assert!(s.redundancy.paths_disjoint());
    let upfs: Vec<_> = s.redundancy.paths.iter().map(|p| p.upf.as_str()).collect();
    assert_eq!(upfs, ["UPF1", "UPF2"]);
    let t = sim.request_document(UE1, "document").unwrap();
    assert_eq!(t.bytes_received, 487_659);
    assert!(sim.ue(UE1).unwrap().duplicates_eliminated() > 0);
}

#[test]
fn dual_needs_second_gnb() {
    let mut sim = booted(default_topology());
    sim.add_ue(UE1).unwrap();
    sim.register_ue(UE1).unwrap();
    assert!(matches!(
        sim.establish_session(UE1, RedundancyKind::DualConnectivity),
        Err(SimError::Ran(_)) | Err(SimError::Session { .. })
    ));
}

#[test]
fn replicated_modes_emit_two_copies_deliver_one() {
    for kind in [RedundancyKind::N3Replication, RedundancyKind::PsaAnchor] {
        let mut sim = booted(default_topology());
        sim.add_ue(UE1).unwrap();
        sim.register_ue(UE1).unwrap();
        sim.establish_session(UE1, kind).unwrap();
        sim.request_document(UE1, "document").unwrap();
        let evs = events(&sim);
        let up_copies = evs
            .iter()
            .filter(|e| e.is_send() && e.src == "gNB" && e.protocol == fivegsim::wirefmt::Protocol::Gtpu)
            .count();
        assert_eq!(up_copies, 2, "{kind}");
        assert_eq!(sim.app_server().requests_served(), 1, "{kind}");
        // 9 downlink packets, each replicated, one copy removed at the gNB
        let eliminated = evs.iter().filter(|e| e.outcome == fivegsim::Outcome::EliminatedDuplicate).count();
        assert_eq!(eliminated, 10, "{kind}");
    }
}
