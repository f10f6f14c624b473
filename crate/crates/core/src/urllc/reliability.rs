use std::net::Ipv4Addr;

use super::{DuplicateEliminator, RedundancyKind};
use crate::simnet::{EntityAddr, Fired, Link, LinkId, Network};
use crate::wirefmt::{
    encode_packet, gtpu_decapsulate, gtpu_encapsulate, MsgKind, PacketView, Protocol, SimPacket,
    Tag, TlvMessage, TlvView,
};

const GTPU_PORT: u16 = 2152;
const UE_IP: Ipv4Addr = Ipv4Addr::new(10, 45, 0, 2);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStats {
    pub link: String,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub kind: RedundancyKind,
    pub loss_prob: f64,
    pub packets: usize,
    /// Distinct packets reaching the consumer after duplicate elimination.
    pub delivered: usize,
    pub eliminated: u64,
    /// Lossy tunnel links, `n3-a` first.
    pub paths: Vec<PathStats>,
    /// Per-packet delivery flags, indexed by packet number.
    pub delivered_mask: Vec<bool>,
}

impl ReliabilityReport {
    pub fn delivery_ratio(&self) -> f64 {
        if self.packets == 0 {
            1.0
        } else {
            self.delivered as f64 / self.packets as f64
        }
    }

    pub fn loss_ratio(&self) -> f64 {
        1.0 - self.delivery_ratio()
    }
}

struct Node {
    name: &'static str,
    ip: Ipv4Addr,
}

const GNB: Node = Node { name: "gNB", ip: Ipv4Addr::new(192, 0, 2, 2) };
const GNB2: Node = Node { name: "gNB2", ip: Ipv4Addr::new(192, 0, 2, 3) };
const UPF1: Node = Node { name: "UPF1", ip: Ipv4Addr::new(192, 0, 2, 4) };
const UPF2: Node = Node { name: "UPF2", ip: Ipv4Addr::new(192, 0, 2, 5) };
const SERVER: Node = Node { name: "AppServer", ip: Ipv4Addr::new(192, 0, 2, 6) };

fn addr(n: &Node) -> EntityAddr {
    EntityAddr::new(n.name, n.ip)
}

/// One uplink copy: where it enters, which tunnel it uses.
struct Copy {
    link: LinkId,
    from: &'static Node,
    to: &'static Node,
    teid: u32,
}

/// Sends `packets` uplink user packets through a minimal fabric laid out
/// for `kind` and counts what reaches the consumer after elimination.
///
/// Every mode shares the lossy links `n3-a` and `n3-b` (loss `loss_prob`
/// each, independent substreams) and everything else is lossless, so for
/// one seed the `n3-a` loss pattern is identical across modes.
pub fn measure_delivery_reliability(
    kind: RedundancyKind,
    loss_prob: f64,
    packets: usize,
    seed: u64,
) -> ReliabilityReport {
    let mut net: Network = Network::new(seed);
    let lossy = |id: &str, a: &Node, b: &Node| {
        Link::new(id, addr(a), addr(b), 1, loss_prob.clamp(0.0, 1.0), false).expect("valid link")
    };
    let n3a = LinkId::new("n3-a");
    let n3b = LinkId::new("n3-b");
    let copies: Vec<Copy> = match kind {
        RedundancyKind::None => {
            net.add_link(lossy("n3-a", &GNB, &UPF1)).unwrap();
            vec![Copy { link: n3a.clone(), from: &GNB, to: &UPF1, teid: 1 }]
        }
        RedundancyKind::N3Replication => {
            net.add_link(lossy("n3-a", &GNB, &UPF1)).unwrap();
            net.add_link(lossy("n3-b", &GNB, &UPF1)).unwrap();
            vec![
                Copy { link: n3a.clone(), from: &GNB, to: &UPF1, teid: 1 },
                Copy { link: n3b.clone(), from: &GNB, to: &UPF1, teid: 2 },
            ]
        }
        RedundancyKind::PsaAnchor => {
            net.add_link(lossy("n3-a", &GNB, &UPF1)).unwrap();
            net.add_link(lossy("n3-b", &GNB, &UPF2)).unwrap();
            net.add_link(Link::lossless("n9", addr(&UPF2), addr(&UPF1), 1)).unwrap();
            vec![
                Copy { link: n3a.clone(), from: &GNB, to: &UPF1, teid: 1 },
                Copy { link: n3b.clone(), from: &GNB, to: &UPF2, teid: 1 },
            ]
        }
        RedundancyKind::DualConnectivity => {
            net.add_link(lossy("n3-a", &GNB, &UPF1)).unwrap();
            net.add_link(lossy("n3-b", &GNB2, &UPF2)).unwrap();
            net.add_link(Link::lossless("n6-a", addr(&UPF1), addr(&SERVER), 1)).unwrap();
            net.add_link(Link::lossless("n6-b", addr(&UPF2), addr(&SERVER), 1)).unwrap();
            vec![
                Copy { link: n3a.clone(), from: &GNB, to: &UPF1, teid: 1 },
                Copy { link: n3b.clone(), from: &GNB2, to: &UPF2, teid: 1 },
            ]
        }
    };
    let use_seq = kind.is_redundant();

    let mut eliminator = DuplicateEliminator::new();
    let mut mask = vec![false; packets];
    let mut delivered = 0usize;

    let mut consume = |n: usize, seq: Option<u16>| {
        let fresh = match seq {
            Some(s) if use_seq => eliminator.accept(s),
            _ => true,
        };
        if fresh {
            delivered += 1;
            if let Some(slot) = mask.get_mut(n) {
                *slot = true;
            }
        }
    };
    let mut handle = |net: &mut Network, fired: Fired<()>| {
        let Fired::Delivery(d) = fired else { return };
        match (kind, d.packet.protocol) {
            (RedundancyKind::PsaAnchor, Protocol::Gtpu) if d.to.ip == UPF2.ip => {
                // intermediate UPF: relay over N9 keeping the sequence number
                let pdu = gtpu_decapsulate(&d.packet.payload).expect("well-formed");
                let gtp = gtpu_encapsulate(pdu.inner, 2, pdu.seq).expect("non-empty");
                let pkt = SimPacket::new(Protocol::Gtpu, (UPF2.ip, GTPU_PORT), (UPF1.ip, GTPU_PORT), gtp);
                net.send(&LinkId::new("n9"), pkt).expect("n9 exists");
            }
            (RedundancyKind::DualConnectivity, Protocol::Gtpu) => {
                // anchor UPF: decapsulate and route to the server
                let pdu = gtpu_decapsulate(&d.packet.payload).expect("well-formed");
                let inner = PacketView::parse(pdu.inner).expect("well-formed").to_owned();
                let n6 = if d.to.ip == UPF1.ip { "n6-a" } else { "n6-b" };
                net.send(&LinkId::new(n6), inner).expect("n6 exists");
            }
            (RedundancyKind::DualConnectivity, Protocol::App) => {
                let body = TlvView::parse(&d.packet.payload).expect("well-formed");
                let n = body.get_u32(Tag::Offset).unwrap_or(u32::MAX) as usize;
                consume(n, body.get_u16(Tag::Seq));
            }
            (_, Protocol::Gtpu) => {
                let pdu = gtpu_decapsulate(&d.packet.payload).expect("well-formed");
                let inner = PacketView::parse(pdu.inner).expect("well-formed");
                let body = TlvView::parse(inner.payload).expect("well-formed");
                let n = body.get_u32(Tag::Offset).unwrap_or(u32::MAX) as usize;
                consume(n, pdu.seq);
            }
            _ => {}
        }
    };

    for i in 0..packets {
        let seq = i as u16;
        let body = TlvMessage::new(MsgKind::AppGet)
            .with_u32(Tag::Offset, i as u32)
            .with_u16(Tag::Seq, seq)
            .encode()
            .expect("small body");
        let inner = encode_packet(&SimPacket::new(
            Protocol::App,
            (UE_IP, 49152),
            (SERVER.ip, 80),
            body,
        ))
        .expect("small packet");
        for c in &copies {
            let gtp = gtpu_encapsulate(&inner, c.teid, use_seq.then_some(seq)).expect("non-empty");
            let pkt = SimPacket::new(Protocol::Gtpu, (c.from.ip, GTPU_PORT), (c.to.ip, GTPU_PORT), gtp);
            net.send(&c.link, pkt).expect("link exists");
        }
        net.run_until(i as u64 + 1, &mut handle).expect("clock moves forward");
    }
    // longest layout is two hops
    let end = net.now() + 2;
    net.run_until(end, &mut handle).expect("clock moves forward");
    let eliminated = eliminator.eliminated();

    let paths = copies
        .iter()
        .map(|c| {
            let s = net.link_stats(&c.link).unwrap_or_default();
            PathStats {
                link: c.link.to_string(),
                sent: s.sent,
                delivered: s.delivered,
                dropped: s.dropped,
            }
        })
        .collect();
    ReliabilityReport {
        kind,
        loss_prob,
        packets,
        delivered,
        eliminated,
        paths,
        delivered_mask: mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_delivers_everything_once() {
        for kind in RedundancyKind::ALL {
            let r = measure_delivery_reliability(kind, 0.0, 300, 1);
            assert_eq!(r.delivered, 300, "{kind}");
            assert_eq!(r.delivery_ratio(), 1.0);
            let expected_elim = if kind.is_redundant() { 300 } else { 0 };
            assert_eq!(r.eliminated, expected_elim, "{kind}");
        }
    }

    #[test]
    fn certain_loss_delivers_nothing() {
        let r = measure_delivery_reliability(RedundancyKind::N3Replication, 1.0, 50, 1);
        assert_eq!(r.delivered, 0);
        assert_eq!(r.paths[0].dropped, 50);
        assert_eq!(r.paths[1].dropped, 50);
    }

    #[test]
    fn replication_dominates_single_path() {
        let single = measure_delivery_reliability(RedundancyKind::None, 0.3, 2000, 11);
        for kind in [
            RedundancyKind::N3Replication,
            RedundancyKind::PsaAnchor,
            RedundancyKind::DualConnectivity,
        ] {
            let r = measure_delivery_reliability(kind, 0.3, 2000, 11);
            for (i, (a, b)) in single.delivered_mask.iter().zip(&r.delivered_mask).enumerate() {
                assert!(!a || *b, "{kind}: packet {i} lost only with redundancy");
            }
        }
    }
}
