use std::collections::BTreeMap;

use super::{NwdafEvent, Outcome};
use crate::simnet::{TapOutcome, TapRecord};
use crate::wirefmt::{gtpu_decapsulate, MsgKind, PacketView, Protocol, Tag, TlvView};

fn msg_name(kind: Option<MsgKind>) -> String {
    kind.map(|k| k.name().to_string()).unwrap_or_else(|| "?".to_string())
}

/// Attributes of a TLV body: message kind, UE id, embedded NAS kind and
/// replication number.
fn tlv_attrs(body: &[u8], prefix: &str, attrs: &mut BTreeMap<String, String>) {
    let Ok(v) = TlvView::parse(body) else {
        attrs.insert(format!("{prefix}msg"), "?".into());
        return;
    };
    attrs.insert(format!("{prefix}msg"), msg_name(v.msg_kind()));
    if !prefix.is_empty() {
        return;
    }
    if let Some(ue) = v.get_str(Tag::UeId) {
        attrs.insert("ue".into(), ue.to_string());
    }
    if let Some(nas) = v.get(Tag::Nas).and_then(|b| TlvView::parse(b).ok()) {
        attrs.insert("nas".into(), msg_name(nas.msg_kind()));
    }
    if let Some(s) = v.get_u32(Tag::Seq) {
        attrs.insert("rseq".into(), s.to_string());
    }
}

fn inner_attrs(inner: &[u8], attrs: &mut BTreeMap<String, String>) {
    let Ok(p) = PacketView::parse(inner) else {
        attrs.insert("inner_proto".into(), "?".into());
        return;
    };
    attrs.insert("inner_proto".into(), p.protocol.as_str().into());
    attrs.insert("inner_src".into(), p.src_ip.to_string());
    attrs.insert("inner_dst".into(), p.dst_ip.to_string());
    tlv_attrs(p.payload, "inner_", attrs);
}

/// Normalises a tap record into an event (id assigned by the store).
pub fn normalize(record: &TapRecord) -> NwdafEvent {
    let p = &record.packet;
    let mut attrs = BTreeMap::new();
    attrs.insert("src_ip".to_string(), p.src_ip.to_string());
    attrs.insert("dst_ip".to_string(), p.dst_ip.to_string());
    attrs.insert("dport".to_string(), p.dst_port.to_string());
    match p.protocol {
        Protocol::Gtpu => match gtpu_decapsulate(&p.payload) {
            Ok(g) => {
                attrs.insert("teid".into(), g.teid.to_string());
                if let Some(s) = g.seq {
                    attrs.insert("seq".into(), s.to_string());
                }
                inner_attrs(g.inner, &mut attrs);
            }
            Err(_) => {
                attrs.insert("teid".into(), "?".into());
            }
        },
        _ => {
            tlv_attrs(&p.payload, "", &mut attrs);
            if p.protocol == Protocol::Rls {
                if let Some(pdu) = TlvView::parse(&p.payload).ok().and_then(|v| v.get(Tag::Pdu)) {
                    inner_attrs(pdu, &mut attrs);
                    attrs.remove("inner_proto");
                }
            }
        }
    }
    let outcome = match record.outcome {
        TapOutcome::Delivered { .. } => Outcome::Delivered,
        TapOutcome::Dropped => Outcome::Dropped,
        TapOutcome::EliminatedDuplicate => Outcome::EliminatedDuplicate,
        TapOutcome::Discarded { reason } => {
            attrs.insert("reason".into(), reason.to_string());
            Outcome::Dropped
        }
    };
    NwdafEvent {
        event_id: 0,
        ts: record.ts,
        link: record.link.to_string(),
        src: record.from.name.to_string(),
        dst: record.to.name.to_string(),
        protocol: p.protocol,
        bytes: p.wire_len() as u64,
        outcome,
        attrs,
    }
}
