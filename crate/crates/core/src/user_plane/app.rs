use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use sha2::{Digest, Sha256};

use crate::sim::{Ctx, APP_PORT};
use crate::simnet::Delivery;
use crate::topology::DocumentSpec;
use crate::wirefmt::{MsgKind, Protocol, SimPacket, Tag, TlvMessage};

/// Deterministic document body: a printable byte pattern keyed by the name.
pub fn document_content(name: &str, size: usize) -> Vec<u8> {
    let key = name.bytes().fold(17u32, |h, b| h.wrapping_mul(31).wrapping_add(b as u32));
    (0..size)
        .map(|i| {
            let v = (i as u32).wrapping_mul(7).wrapping_add(key) % 95;
            b' ' + v as u8
        })
        .collect()
}

pub fn document_digest(name: &str, size: usize) -> [u8; 32] {
    Sha256::digest(document_content(name, size)).into()
}

/// Splits a document into segment messages: one empty segment for an empty
/// document, otherwise ceil(size / segment_bytes) pieces.
pub fn segment_document(name: &str, content: &[u8], segment_bytes: usize) -> Vec<TlvMessage> {
    let seg = |offset: usize, data: &[u8]| {
        TlvMessage::new(MsgKind::AppSegment)
            .with_str(Tag::DocName, name)
            .with_u32(Tag::Offset, offset as u32)
            .with_u32(Tag::TotalSize, content.len() as u32)
            .with(Tag::Data, data.to_vec())
    };
    if content.is_empty() {
        return vec![seg(0, &[])];
    }
    content
        .chunks(segment_bytes.max(1))
        .enumerate()
        .map(|(i, c)| seg(i * segment_bytes, c))
        .collect()
}

/// Data-network host answering document requests from UEs.
#[derive(Debug, Clone)]
pub struct AppServer {
    name: String,
    ip: Ipv4Addr,
    documents: BTreeMap<String, usize>,
    cache: BTreeMap<String, Vec<u8>>,
    /// Replicated request numbers already served, per UE.
    seen: BTreeMap<Ipv4Addr, BTreeSet<u32>>,
    /// Next response number per UE on replicated sessions.
    next_rseq: BTreeMap<Ipv4Addr, u32>,
    requests: u64,
    duplicates: u64,
}

impl AppServer {
    pub fn new(name: &str, ip: Ipv4Addr, documents: &[DocumentSpec]) -> Self {
        AppServer {
            name: name.to_string(),
            ip,
            documents: documents.iter().map(|d| (d.name.clone(), d.size)).collect(),
            cache: BTreeMap::new(),
            seen: BTreeMap::new(),
            next_rseq: BTreeMap::new(),
            requests: 0,
            duplicates: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.ip
    }

    pub fn requests_served(&self) -> u64 {
        self.requests
    }

    pub fn duplicate_requests(&self) -> u64 {
        self.duplicates
    }

    /// Response messages for one request, in send order.
    pub fn respond(&mut self, doc: &str, segment_bytes: usize) -> Vec<TlvMessage> {
        let Some(&size) = self.documents.get(doc) else {
            return vec![TlvMessage::new(MsgKind::AppError)
                .with_str(Tag::DocName, doc)
                .with_str(Tag::Cause, "document not found")];
        };
        let content = self
            .cache
            .entry(doc.to_string())
            .or_insert_with(|| document_content(doc, size));
        let mut out = vec![TlvMessage::new(MsgKind::AppAck)
            .with_str(Tag::DocName, doc)
            .with_u32(Tag::TotalSize, size as u32)];
        out.extend(segment_document(doc, content, segment_bytes));
        out
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        if d.packet.protocol != Protocol::App {
            ctx.discard(d, "unexpected protocol");
            return;
        }
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        if msg.msg_kind() != Some(MsgKind::AppGet) {
            ctx.discard(d, "unsupported message");
            return;
        }
        let ue = d.packet.src_ip;
        let replicated = msg.get_u32(Tag::Seq);
        if let Some(rseq) = replicated {
            if !self.seen.entry(ue).or_default().insert(rseq) {
                self.duplicates += 1;
                ctx.eliminated(d);
                return;
            }
        }
        self.requests += 1;
        let doc = msg.get_str(Tag::DocName).unwrap_or("").to_string();
        let routes = ctx.routes.get(&ue).cloned().unwrap_or_default();
        let Some(&first) = routes.first() else {
            ctx.fault(self.ip, format!("no route to {ue}"));
            return;
        };
        let ue_port = d.packet.src_port;
        for mut m in self.respond(&doc, ctx.params.segment_bytes) {
            match replicated {
                Some(_) => {
                    let n = self.next_rseq.entry(ue).or_insert(0);
                    m = m.with_u32(Tag::Seq, *n);
                    *n += 1;
                    for upf in &routes {
                        self.send(ctx, *upf, ue, ue_port, &m);
                    }
                }
                None => self.send(ctx, first, ue, ue_port, &m),
            }
        }
    }

    fn send(&self, ctx: &mut Ctx, upf: Ipv4Addr, ue: Ipv4Addr, port: u16, m: &TlvMessage) {
        match m.encode() {
            Ok(payload) => {
                let p = SimPacket::new(Protocol::App, (self.ip, APP_PORT), (ue, port), payload);
                ctx.send_packet(self.ip, upf, p);
            }
            Err(e) => ctx.fault(self.ip, e.to_string()),
        }
    }
}
