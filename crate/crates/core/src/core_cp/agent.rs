use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use super::{NfProfile, NfStatus, NfType};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::Delivery;
use crate::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};

/// Wire form of a profile inside discovery and notification bodies:
/// type(1) | addr(4) | status(1) | nf_id.
pub(crate) fn encode_profile(p: &NfProfile) -> Vec<u8> {
    let mut v = Vec::with_capacity(6 + p.nf_id.len());
    v.push(p.nf_type.code());
    v.extend_from_slice(&p.addr.octets());
    v.push(p.status.code());
    v.extend_from_slice(p.nf_id.as_bytes());
    v
}

pub(crate) fn decode_profile(b: &[u8]) -> Option<NfProfile> {
    if b.len() < 6 {
        return None;
    }
    let status = match b[5] {
        0 => NfStatus::Registered,
        1 => NfStatus::Suspended,
        2 => NfStatus::Deregistered,
        _ => return None,
    };
    Some(NfProfile {
        nf_type: NfType::from_code(b[0])?,
        addr: Ipv4Addr::new(b[1], b[2], b[3], b[4]),
        status,
        nf_id: std::str::from_utf8(&b[6..]).ok()?.to_string(),
        last_heartbeat: 0,
    })
}

/// NRF client behaviour shared by every network function: registration,
/// heartbeats, discovery, status notifications and analytics reception.
#[derive(Debug, Clone)]
pub(crate) struct NfAgent {
    pub profile: NfProfile,
    pub nrf: Option<Ipv4Addr>,
    pub registered: bool,
    /// Stops heartbeats without deregistering (fault injection).
    pub silent: bool,
    pub subscribe_status: bool,
    pub needs: Vec<NfType>,
    pub peers: BTreeMap<NfType, Vec<NfProfile>>,
    pub notifications: Vec<(String, NfStatus)>,
    pub heartbeats_sent: u64,
    pub analytics_received: u64,
    pub analytics_subscriptions: Vec<u32>,
}

impl NfAgent {
    pub fn new(nf_id: &str, nf_type: NfType, addr: Ipv4Addr, nrf: Option<Ipv4Addr>) -> Self {
        let mut profile = NfProfile::new(nf_id, nf_type, addr);
        profile.status = NfStatus::Deregistered;
        NfAgent {
            profile,
            nrf,
            registered: false,
            silent: false,
            subscribe_status: false,
            needs: Vec::new(),
            peers: BTreeMap::new(),
            notifications: Vec::new(),
            heartbeats_sent: 0,
            analytics_received: 0,
            analytics_subscriptions: Vec::new(),
        }
    }

    pub fn ip(&self) -> Ipv4Addr {
        self.profile.addr
    }

    /// Selected instance of a peer type: the lowest nf_id.
    pub fn peer(&self, t: NfType) -> Option<&NfProfile> {
        self.peers.get(&t).and_then(|v| v.first())
    }

    fn to_nrf(&self, ctx: &mut Ctx, msg: TlvMessage) {
        match self.nrf {
            Some(nrf) => {
                ctx.send_msg(self.ip(), nrf, Protocol::Sbi, &msg);
            }
            None => ctx.fault(self.ip(), "no NRF configured"),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) -> bool {
        match action {
            TimerAction::Register => {
                let msg = TlvMessage::new(MsgKind::NfRegisterReq)
                    .with_str(Tag::NfId, &self.profile.nf_id)
                    .with_u8(Tag::NfType, self.profile.nf_type.code())
                    .with_ip(Tag::Addr, self.ip());
                self.to_nrf(ctx, msg);
            }
            TimerAction::Heartbeat => {
                if !self.registered {
                    return true;
                }
                if !self.silent {
                    self.heartbeats_sent += 1;
                    let msg = TlvMessage::new(MsgKind::NfHeartbeatReq)
                        .with_str(Tag::NfId, &self.profile.nf_id);
                    self.to_nrf(ctx, msg);
                }
                let next = ctx.now() + ctx.params.heartbeat_ms;
                ctx.timer(next, self.ip(), TimerAction::Heartbeat);
            }
            TimerAction::Discover => {
                for t in self.needs.clone() {
                    let msg = TlvMessage::new(MsgKind::NfDiscoverReq)
                        .with_str(Tag::NfId, &self.profile.nf_id)
                        .with_u8(Tag::NfType, t.code());
                    self.to_nrf(ctx, msg);
                }
            }
            _ => return false,
        }
        true
    }

    pub fn deregister(&mut self, ctx: &mut Ctx) {
        if !self.registered {
            return;
        }
        self.registered = false;
        self.profile.status = NfStatus::Deregistered;
        let msg = TlvMessage::new(MsgKind::NfDeregisterReq).with_str(Tag::NfId, &self.profile.nf_id);
        self.to_nrf(ctx, msg);
    }

    /// Handles NRF-facing and analytics SBI traffic; returns false for
    /// messages the owning function must handle itself.
    pub fn handle(&mut self, ctx: &mut Ctx, d: &Delivery, msg: &TlvMessage) -> bool {
        let Some(kind) = msg.msg_kind() else {
            return false;
        };
        match kind {
            MsgKind::NfRegisterResp => {
                if msg.get(Tag::Cause).is_some() {
                    ctx.fault(self.ip(), format!("registration refused: {}", msg.get_str(Tag::Cause).unwrap_or("?")));
                    return true;
                }
                self.registered = true;
                self.profile.status = NfStatus::Registered;
                self.profile.last_heartbeat = ctx.now();
                let next = ctx.now() + ctx.params.heartbeat_ms;
                ctx.timer(next, self.ip(), TimerAction::Heartbeat);
                if self.subscribe_status {
                    let msg = TlvMessage::new(MsgKind::NfStatusSubscribeReq)
                        .with_str(Tag::NfId, &self.profile.nf_id);
                    self.to_nrf(ctx, msg);
                }
            }
            MsgKind::NfHeartbeatResp => {
                if msg.get(Tag::Cause).is_none() {
                    self.profile.last_heartbeat = ctx.now();
                }
            }
            MsgKind::NfDiscoverResp => {
                let Some(t) = msg.get_u8(Tag::NfType).and_then(NfType::from_code) else {
                    return true;
                };
                let mut found: Vec<NfProfile> = msg
                    .get_all(Tag::NfEntry)
                    .filter_map(decode_profile)
                    .filter(|p| p.status == NfStatus::Registered)
                    .collect();
                found.sort_by(|a, b| a.nf_id.cmp(&b.nf_id));
                self.peers.insert(t, found);
            }
            MsgKind::NfStatusNotify => {
                if let Some(p) = msg.get(Tag::NfEntry).and_then(decode_profile) {
                    self.notifications.push((p.nf_id.clone(), p.status));
                    if self.needs.contains(&p.nf_type) {
                        let list = self.peers.entry(p.nf_type).or_default();
                        list.retain(|x| x.nf_id != p.nf_id);
                        if p.status == NfStatus::Registered {
                            list.push(p);
                            list.sort_by(|a, b| a.nf_id.cmp(&b.nf_id));
                        }
                    }
                }
                let ack = TlvMessage::new(MsgKind::NfStatusNotifyAck)
                    .with_str(Tag::NfId, &self.profile.nf_id);
                ctx.send_msg(self.ip(), d.packet.src_ip, Protocol::Sbi, &ack);
            }
            MsgKind::NfStatusSubscribeResp | MsgKind::NfDeregisterResp => {}
            MsgKind::AnalyticsNotify => self.analytics_received += 1,
            MsgKind::AnalyticsSubscribeResp => {
                if let Some(id) = msg.get_u32(Tag::SubscriptionId) {
                    self.analytics_subscriptions.push(id);
                }
            }
            _ => return false,
        }
        true
    }
}
