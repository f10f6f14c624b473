use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use thiserror::Error;

use super::agent::encode_profile;
use super::{NfProfile, NfStatus, NfType};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::{Delivery, Millis};
use crate::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NrfError {
    #[error("NF `{0}` is already registered")]
    Duplicate(String),
    #[error("NF `{0}` is not registered")]
    Unknown(String),
    #[error("NF `{0}` is deregistered")]
    Deregistered(String),
    #[error("address {0} is not part of the topology")]
    UnknownAddress(Ipv4Addr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationAck {
    pub nf_id: String,
    pub status: NfStatus,
    /// Subscribers to notify about the new registration.
    pub notify: Vec<Ipv4Addr>,
}

/// NF repository: profiles keyed by nf_id, heartbeat bookkeeping and
/// status subscriptions.
#[derive(Debug, Clone)]
pub struct Nrf {
    pub name: String,
    pub addr: Ipv4Addr,
    heartbeat_ms: Millis,
    profiles: BTreeMap<String, NfProfile>,
    subscribers: BTreeMap<String, Ipv4Addr>,
    notifications_sent: u64,
}

impl Nrf {
    pub fn new(name: &str, addr: Ipv4Addr, heartbeat_ms: Millis) -> Self {
        Nrf {
            name: name.to_string(),
            addr,
            heartbeat_ms,
            profiles: BTreeMap::new(),
            subscribers: BTreeMap::new(),
            notifications_sent: 0,
        }
    }

    pub fn heartbeat_ms(&self) -> Millis {
        self.heartbeat_ms
    }

    /// Stores `profile` as REGISTERED. A deregistered id may register again.
    pub fn register(&mut self, mut profile: NfProfile, now: Millis) -> Result<RegistrationAck, NrfError> {
        if let Some(existing) = self.profiles.get(&profile.nf_id) {
            if existing.status != NfStatus::Deregistered {
                return Err(NrfError::Duplicate(profile.nf_id));
            }
        }
        profile.status = NfStatus::Registered;
        profile.last_heartbeat = now;
        let notify = self
            .subscribers
            .iter()
            .filter(|(id, _)| **id != profile.nf_id)
            .map(|(_, ip)| *ip)
            .collect();
        let nf_id = profile.nf_id.clone();
        self.profiles.insert(nf_id.clone(), profile);
        Ok(RegistrationAck {
            nf_id,
            status: NfStatus::Registered,
            notify,
        })
    }

    /// Refreshes the heartbeat time; a suspended NF becomes REGISTERED again.
    pub fn heartbeat(&mut self, nf_id: &str, now: Millis) -> Result<NfStatus, NrfError> {
        let p = self
            .profiles
            .get_mut(nf_id)
            .ok_or_else(|| NrfError::Unknown(nf_id.to_string()))?;
        if p.status == NfStatus::Deregistered {
            return Err(NrfError::Deregistered(nf_id.to_string()));
        }
        p.last_heartbeat = now;
        p.status = NfStatus::Registered;
        Ok(p.status)
    }

    /// REGISTERED profiles of `nf_type`, ordered by nf_id.
    pub fn discover(&self, requester: &str, nf_type: NfType) -> Result<Vec<NfProfile>, NrfError> {
        match self.profiles.get(requester) {
            None => return Err(NrfError::Unknown(requester.to_string())),
            Some(p) if p.status == NfStatus::Deregistered => {
                return Err(NrfError::Deregistered(requester.to_string()))
            }
            Some(_) => {}
        }
        Ok(self
            .profiles
            .values()
            .filter(|p| p.nf_type == nf_type && p.status == NfStatus::Registered)
            .cloned()
            .collect())
    }

    pub fn deregister(&mut self, nf_id: &str) -> Result<(), NrfError> {
        let p = self
            .profiles
            .get_mut(nf_id)
            .ok_or_else(|| NrfError::Unknown(nf_id.to_string()))?;
        if p.status == NfStatus::Deregistered {
            return Err(NrfError::Deregistered(nf_id.to_string()));
        }
        p.status = NfStatus::Deregistered;
        self.subscribers.remove(nf_id);
        Ok(())
    }

    pub fn subscribe(&mut self, nf_id: &str) -> Result<(), NrfError> {
        let p = self
            .profiles
            .get(nf_id)
            .ok_or_else(|| NrfError::Unknown(nf_id.to_string()))?;
        self.subscribers.insert(nf_id.to_string(), p.addr);
        Ok(())
    }

    /// Suspends REGISTERED profiles silent for more than two intervals and
    /// returns their ids.
    pub fn sweep(&mut self, now: Millis) -> Vec<String> {
        let limit = 2 * self.heartbeat_ms;
        let mut suspended = Vec::new();
        for p in self.profiles.values_mut() {
            if p.status == NfStatus::Registered && now.saturating_sub(p.last_heartbeat) > limit {
                p.status = NfStatus::Suspended;
                suspended.push(p.nf_id.clone());
            }
        }
        suspended
    }

    pub fn profile(&self, nf_id: &str) -> Option<&NfProfile> {
        self.profiles.get(nf_id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &NfProfile> {
        self.profiles.values()
    }

    pub fn is_registered(&self, nf_id: &str) -> bool {
        self.profiles
            .get(nf_id)
            .is_some_and(|p| p.status == NfStatus::Registered)
    }

    pub fn notifications_sent(&self) -> u64 {
        self.notifications_sent
    }

    fn notify(&mut self, ctx: &mut Ctx, targets: &[Ipv4Addr], profile: &NfProfile) {
        let msg = TlvMessage::new(MsgKind::NfStatusNotify).with(Tag::NfEntry, encode_profile(profile));
        for ip in targets {
            self.notifications_sent += 1;
            ctx.send_msg(self.addr, *ip, Protocol::Sbi, &msg);
        }
    }

    fn subscribers_except(&self, nf_id: &str) -> Vec<Ipv4Addr> {
        self.subscribers
            .iter()
            .filter(|(id, _)| id.as_str() != nf_id)
            .map(|(_, ip)| *ip)
            .collect()
    }

    pub(crate) fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        if action != TimerAction::NrfSweep {
            return;
        }
        let now = ctx.now();
        for id in self.sweep(now) {
            let targets = self.subscribers_except(&id);
            let p = self.profiles[&id].clone();
            self.notify(ctx, &targets, &p);
        }
        ctx.timer(now + self.heartbeat_ms, self.addr, TimerAction::NrfSweep);
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        if d.packet.protocol != Protocol::Sbi {
            ctx.discard(d, "unexpected protocol");
            return;
        }
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let from = d.packet.src_ip;
        let now = ctx.now();
        let nf_id = msg.get_str(Tag::NfId).unwrap_or("").to_string();
        let reply = |kind: MsgKind, r: Result<(), NrfError>| {
            let m = TlvMessage::new(kind).with_str(Tag::NfId, &nf_id);
            match r {
                Ok(()) => m.with_u8(Tag::Status, 0),
                Err(e) => m.with_str(Tag::Cause, &e.to_string()),
            }
        };
        match msg.msg_kind() {
            Some(MsgKind::NfRegisterReq) => {
                let nf_type = msg.get_u8(Tag::NfType).and_then(NfType::from_code);
                let addr = msg.get_ip(Tag::Addr).unwrap_or(from);
                let result = match nf_type {
                    _ if ctx.book.name_of(addr).is_none() => Err(NrfError::UnknownAddress(addr)),
                    None => Err(NrfError::Unknown(nf_id.clone())),
                    Some(t) => self.register(NfProfile::new(&nf_id, t, addr), now),
                };
                match result {
                    Ok(ack) => {
                        ctx.send_msg(self.addr, from, Protocol::Sbi, &reply(MsgKind::NfRegisterResp, Ok(())));
                        let p = self.profiles[&ack.nf_id].clone();
                        self.notify(ctx, &ack.notify, &p);
                    }
                    Err(e) => {
                        ctx.send_msg(self.addr, from, Protocol::Sbi, &reply(MsgKind::NfRegisterResp, Err(e)));
                    }
                }
            }
            Some(MsgKind::NfHeartbeatReq) => {
                let r = self.heartbeat(&nf_id, now).map(|_| ());
                ctx.send_msg(self.addr, from, Protocol::Sbi, &reply(MsgKind::NfHeartbeatResp, r));
            }
            Some(MsgKind::NfStatusSubscribeReq) => {
                let r = self.subscribe(&nf_id);
                ctx.send_msg(self.addr, from, Protocol::Sbi, &reply(MsgKind::NfStatusSubscribeResp, r));
            }
            Some(MsgKind::NfDiscoverReq) => {
                let t = msg.get_u8(Tag::NfType).unwrap_or(u8::MAX);
                let mut m = TlvMessage::new(MsgKind::NfDiscoverResp).with_u8(Tag::NfType, t);
                match NfType::from_code(t).ok_or(NrfError::Unknown(nf_id.clone())).and_then(|t| self.discover(&nf_id, t)) {
                    Ok(list) => {
                        for p in &list {
                            m.push(Tag::NfEntry, encode_profile(p));
                        }
                    }
                    Err(e) => m.push(Tag::Cause, e.to_string()),
                }
                ctx.send_msg(self.addr, from, Protocol::Sbi, &m);
            }
            Some(MsgKind::NfDeregisterReq) => {
                let r = self.deregister(&nf_id);
                let ok = r.is_ok();
                ctx.send_msg(self.addr, from, Protocol::Sbi, &reply(MsgKind::NfDeregisterResp, r));
                if ok {
                    let targets = self.subscribers_except(&nf_id);
                    let p = self.profiles[&nf_id].clone();
                    self.notify(ctx, &targets, &p);
                }
            }
            Some(MsgKind::NfStatusNotifyAck) => {}
            _ => ctx.discard(d, "unsupported message"),
        }
    }
}
