use std::collections::{BTreeMap, BTreeSet};

use super::{NfAgent, NfType};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::Delivery;
use crate::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};

pub(crate) fn decode_sbi(ctx: &mut Ctx, d: &Delivery) -> Option<TlvMessage> {
    if d.packet.protocol != Protocol::Sbi {
        ctx.discard(d, "unexpected protocol");
        return None;
    }
    match TlvMessage::decode(&d.packet.payload) {
        Ok(m) => Some(m),
        Err(_) => {
            ctx.discard(d, "malformed body");
            None
        }
    }
}

/// Opaque challenge/response authentication.
#[derive(Debug, Clone)]
pub(crate) struct Ausf {
    pub agent: NfAgent,
    pub authentications: u64,
}

impl Ausf {
    pub fn new(agent: NfAgent) -> Self {
        Ausf {
            agent,
            authentications: 0,
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if self.agent.handle(ctx, d, &msg) {
            return;
        }
        if msg.msg_kind() == Some(MsgKind::UeAuthReq) {
            self.authentications += 1;
            let ue = msg.get_str(Tag::UeId).unwrap_or("");
            let resp = TlvMessage::new(MsgKind::UeAuthResp)
                .with_str(Tag::UeId, ue)
                .with_u8(Tag::Status, 0);
            ctx.send_msg(self.agent.ip(), d.packet.src_ip, Protocol::Sbi, &resp);
        } else {
            ctx.discard(d, "unsupported message");
        }
    }
}

/// Subscriber data management; consults the UDR for every fetch.
#[derive(Debug, Clone)]
pub(crate) struct Udm {
    pub agent: NfAgent,
    pending: BTreeMap<String, Vec<std::net::Ipv4Addr>>,
}

impl Udm {
    pub fn new(mut agent: NfAgent) -> Self {
        agent.needs = vec![NfType::Udr];
        Udm {
            agent,
            pending: BTreeMap::new(),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if self.agent.handle(ctx, d, &msg) {
            return;
        }
        let ue = msg.get_str(Tag::UeId).unwrap_or("").to_string();
        match msg.msg_kind() {
            Some(MsgKind::SdmGetReq) => match self.agent.peer(NfType::Udr).map(|p| p.addr) {
                Some(udr) => {
                    self.pending.entry(ue.clone()).or_default().push(d.packet.src_ip);
                    let q = TlvMessage::new(MsgKind::UdrQueryReq).with_str(Tag::UeId, &ue);
                    ctx.send_msg(self.agent.ip(), udr, Protocol::Sbi, &q);
                }
                None => {
                    let resp = TlvMessage::new(MsgKind::SdmGetResp)
                        .with_str(Tag::UeId, &ue)
                        .with_str(Tag::Cause, "no UDR available");
                    ctx.send_msg(self.agent.ip(), d.packet.src_ip, Protocol::Sbi, &resp);
                }
            },
            Some(MsgKind::UdrQueryResp) => {
                let Some(waiting) = self.pending.get_mut(&ue).and_then(|v| {
                    if v.is_empty() {
                        None
                    } else {
                        Some(v.remove(0))
                    }
                }) else {
                    ctx.discard(d, "no pending fetch");
                    return;
                };
                if self.pending.get(&ue).is_some_and(|v| v.is_empty()) {
                    self.pending.remove(&ue);
                }
                let mut resp = TlvMessage::new(MsgKind::SdmGetResp).with_str(Tag::UeId, &ue);
                match msg.get_str(Tag::Cause) {
                    Some(c) => resp.push(Tag::Cause, c.as_bytes().to_vec()),
                    None => resp.push(Tag::Status, vec![0]),
                }
                ctx.send_msg(self.agent.ip(), waiting, Protocol::Sbi, &resp);
            }
            _ => ctx.discard(d, "unsupported message"),
        }
    }
}

/// Holds the provisioned subscriber identities.
#[derive(Debug, Clone)]
pub(crate) struct Udr {
    pub agent: NfAgent,
    pub subscribers: BTreeSet<String>,
}

impl Udr {
    pub fn new(agent: NfAgent, subscribers: impl IntoIterator<Item = String>) -> Self {
        Udr {
            agent,
            subscribers: subscribers.into_iter().collect(),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if self.agent.handle(ctx, d, &msg) {
            return;
        }
        if msg.msg_kind() == Some(MsgKind::UdrQueryReq) {
            let ue = msg.get_str(Tag::UeId).unwrap_or("");
            let mut resp = TlvMessage::new(MsgKind::UdrQueryResp).with_str(Tag::UeId, ue);
            if self.subscribers.contains(ue) {
                resp.push(Tag::Status, vec![0]);
            } else {
                resp.push(Tag::Cause, b"unknown subscriber".to_vec());
            }
            ctx.send_msg(self.agent.ip(), d.packet.src_ip, Protocol::Sbi, &resp);
        } else {
            ctx.discard(d, "unsupported message");
        }
    }
}

/// Access-management policy; always grants the default policy.
#[derive(Debug, Clone)]
pub(crate) struct Pcf {
    pub agent: NfAgent,
    pub policies_issued: u64,
}

impl Pcf {
    pub fn new(agent: NfAgent) -> Self {
        Pcf {
            agent,
            policies_issued: 0,
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if self.agent.handle(ctx, d, &msg) {
            return;
        }
        if msg.msg_kind() == Some(MsgKind::AmPolicyReq) {
            self.policies_issued += 1;
            let ue = msg.get_str(Tag::UeId).unwrap_or("");
            let resp = TlvMessage::new(MsgKind::AmPolicyResp)
                .with_str(Tag::UeId, ue)
                .with_u8(Tag::Status, 0);
            ctx.send_msg(self.agent.ip(), d.packet.src_ip, Protocol::Sbi, &resp);
        } else {
            ctx.discard(d, "unsupported message");
        }
    }
}

/// A function that only talks to the NRF (NSSF, BSF).
#[derive(Debug, Clone)]
pub(crate) struct PlainNf {
    pub agent: NfAgent,
}

impl PlainNf {
    pub fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if !self.agent.handle(ctx, d, &msg) {
            ctx.discard(d, "unsupported message");
        }
    }
}
