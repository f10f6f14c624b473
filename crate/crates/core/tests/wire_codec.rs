use std::net::Ipv4Addr;
use std::path::Path;

use fivegsim::nwdaf::NwdafEvent;
use fivegsim::wirefmt::{
    decode_packet, encode_packet, gtpu_decapsulate, gtpu_encapsulate, gtpu_encapsulate_packet, MsgKind,
    PacketView, Protocol, SimPacket, Tag, TlvMessage, TlvView, WireError, ENVELOPE_HEADER_LEN, MAX_PAYLOAD,
};
use proptest::prelude::*;

const TAGS: [Tag; 8] = [
    Tag::NfId,
    Tag::UeId,
    Tag::Nas,
    Tag::Teid,
    Tag::Seq,
    Tag::Data,
    Tag::Pdu,
    Tag::Eliminate,
];

fn golden(name: &str) -> Vec<u8> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let digits: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    hex::decode(digits).unwrap()
}

fn ip() -> impl Strategy<Value = Ipv4Addr> {
    any::<u32>().prop_map(Ipv4Addr::from)
}

fn protocol() -> impl Strategy<Value = Protocol> {
    prop::sample::select(Protocol::ALL.to_vec())
}

prop_compose! {
    fn packet()(proto in protocol(), src in ip(), dst in ip(), sp in any::<u16>(), dp in any::<u16>(),
                payload in prop::collection::vec(any::<u8>(), 0..600)) -> SimPacket {
        SimPacket::new(proto, (src, sp), (dst, dp), payload)
    }
}

prop_compose! {
    fn tlv()(kind in prop::sample::select(MsgKind::ALL.to_vec()),
             elems in prop::collection::vec((prop::sample::select(TAGS.to_vec()),
                                             prop::collection::vec(any::<u8>(), 0..64)), 0..8)) -> TlvMessage {
        let mut m = TlvMessage::new(kind);
        for (t, v) in elems {
            m.push(t, v);
        }
        m
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn packet_round_trip(p in packet()) {
        let bytes = encode_packet(&p).unwrap();
        prop_assert_eq!(bytes.len(), ENVELOPE_HEADER_LEN + p.payload.len());
        prop_assert_eq!(bytes.len(), p.wire_len());
        prop_assert_eq!(&decode_packet(&bytes).unwrap(), &p);
        prop_assert_eq!(PacketView::parse(&bytes).unwrap().to_owned(), p);
    }

    #[test]
    fn gtpu_round_trip(inner in prop::collection::vec(any::<u8>(), 1..600), teid in any::<u32>(),
                       seq in prop::option::of(any::<u16>())) {
        let out = gtpu_encapsulate(&inner, teid, seq).unwrap();
        let hdr = if seq.is_some() { 12 } else { 8 };
        prop_assert_eq!(out.len(), hdr + inner.len());
        // S flag set exactly when a sequence number is carried
        prop_assert_eq!(out[0] & 0x02 != 0, seq.is_some());
        let pdu = gtpu_decapsulate(&out).unwrap();
        prop_assert_eq!(pdu.teid, teid);
        prop_assert_eq!(pdu.seq, seq);
        prop_assert_eq!(pdu.inner, &inner[..]);
    }

    #[test]
    fn tlv_round_trip(m in tlv()) {
        let bytes = m.encode().unwrap();
        prop_assert_eq!(bytes.len(), m.encoded_len());
        prop_assert_eq!(&TlvMessage::decode(&bytes).unwrap(), &m);
        let view = TlvView::parse(&bytes).unwrap();
        prop_assert_eq!(view.msg_kind(), m.msg_kind());
        prop_assert_eq!(view.elements().count(), m.elements.len());
    }

    #[test]
    fn encapsulated_packet_preserves_inner(p in packet(), teid in any::<u32>(), seq in prop::option::of(any::<u16>())) {
        let out = gtpu_encapsulate_packet(&p, teid, seq).unwrap();
        let pdu = gtpu_decapsulate(&out).unwrap();
        prop_assert_eq!(decode_packet(pdu.inner).unwrap(), p);
    }

    #[test]
    fn decoders_total_on_random_buffers(b in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_packet(&b);
        let _ = PacketView::parse(&b);
        let _ = gtpu_decapsulate(&b);
        let _ = TlvMessage::decode(&b);
        let _ = TlvView::parse(&b);
        let _ = NwdafEvent::parse_line(&String::from_utf8_lossy(&b));
    }

    #[test]
    fn decoders_total_on_corrupted_encodings(p in packet(), flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6),
                                             cut in any::<prop::sample::Index>()) {
        let mut b = encode_packet(&p).unwrap();
        for (i, x) in &flips {
            let i = i.index(b.len());
            b[i] ^= x;
        }
        let keep = cut.index(b.len() + 1);
        let b = &b[..keep];
        if let Ok(q) = decode_packet(b) {
            // whatever decodes must re-encode to the same bytes
            prop_assert_eq!(encode_packet(&q).unwrap(), b.to_vec());
        }
        let _ = gtpu_decapsulate(b);
        let _ = TlvView::parse(b);
    }
}

#[test]
fn oversized_payload_is_rejected() {
    let p = SimPacket::new(
        Protocol::App,
        (Ipv4Addr::new(192, 168, 0, 40), 80),
        (Ipv4Addr::new(10, 45, 0, 2), 49152),
        vec![b'x'; 487_659],
    );
    assert!(matches!(encode_packet(&p), Err(WireError::Oversized { len: 487_659, .. })));
    let p = SimPacket::new(Protocol::App, (Ipv4Addr::LOCALHOST, 1), (Ipv4Addr::LOCALHOST, 2), vec![0; MAX_PAYLOAD]);
    assert_eq!(encode_packet(&p).unwrap().len(), ENVELOPE_HEADER_LEN + MAX_PAYLOAD);
}

#[test]
fn short_buffer_is_truncation() {
    assert!(matches!(decode_packet(&[1u8; 17]), Err(WireError::Truncated { .. })));
}

#[test]
fn golden_empty_sbi_packet() {
    let p = SimPacket::new(
        Protocol::Sbi,
        (Ipv4Addr::new(192, 168, 0, 12), 7777),
        (Ipv4Addr::new(192, 168, 0, 13), 7777),
        Vec::new(),
    );
    let want = golden("packet_sbi_empty.hex");
    assert_eq!(want.len(), 18);
    assert_eq!(encode_packet(&p).unwrap(), want);
    assert_eq!(decode_packet(&want).unwrap(), p);
}

#[test]
fn golden_app_get() {
    let body = TlvMessage::new(MsgKind::AppGet).with_str(Tag::DocName, "document");
    let p = SimPacket::new(
        Protocol::App,
        (Ipv4Addr::new(10, 45, 0, 2), 49152),
        (Ipv4Addr::new(192, 168, 0, 40), 80),
        body.encode().unwrap(),
    );
    assert_eq!(encode_packet(&p).unwrap(), golden("packet_app_get.hex"));
}

#[test]
fn golden_gtpu_headers() {
    let inner: Vec<u8> = (0..100).collect();
    let plain = gtpu_encapsulate(&inner, 1, None).unwrap();
    assert_eq!(plain.len(), 108);
    assert_eq!(plain[0], 0x30);
    assert_eq!(plain, golden("gtpu_teid1_noseq.hex"));

    let seq = gtpu_encapsulate(&inner, 7, Some(42)).unwrap();
    assert_eq!(seq.len(), 112);
    assert_eq!(seq[0], 0x32);
    assert_eq!(u16::from_be_bytes([seq[2], seq[3]]), 104);
    assert_eq!(seq, golden("gtpu_teid7_seq42.hex"));
}

#[test]
fn golden_tlv() {
    let m = TlvMessage::new(MsgKind::NfHeartbeatReq).with_str(Tag::NfId, "AUSF");
    assert_eq!(m.encode().unwrap(), golden("tlv_heartbeat.hex"));
}

#[test]
fn gtpu_rejects_empty_inner() {
    assert!(matches!(gtpu_encapsulate(&[], 1, None), Err(WireError::EmptyInner)));
}
