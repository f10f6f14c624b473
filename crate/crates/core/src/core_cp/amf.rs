use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use super::smf::TunnelInfo;
use super::stubs::decode_sbi;
use super::{GnbRegistration, GnbState, NfAgent, NfType};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::Delivery;
use crate::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmfUeState {
    Authenticating,
    FetchingSubscription,
    FetchingPolicy,
    Registered,
    Rejected,
}

#[derive(Debug, Clone)]
struct UeContext {
    state: AmfUeState,
    gnb: Ipv4Addr,
}

/// Access and mobility management: NG setup, NAS registration and the
/// hand-off of session requests to the SMF.
#[derive(Debug, Clone)]
pub struct Amf {
    pub(crate) agent: NfAgent,
    gnbs: BTreeMap<Ipv4Addr, GnbRegistration>,
    ues: BTreeMap<String, UeContext>,
    registrations_accepted: u64,
}

fn nas(kind: MsgKind, ue_id: &str) -> TlvMessage {
    TlvMessage::new(kind).with_str(Tag::UeId, ue_id)
}

impl Amf {
    pub(crate) fn new(mut agent: NfAgent) -> Self {
        agent.needs = vec![NfType::Ausf, NfType::Udm, NfType::Pcf, NfType::Smf];
        agent.subscribe_status = true;
        Amf {
            agent,
            gnbs: BTreeMap::new(),
            ues: BTreeMap::new(),
            registrations_accepted: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.agent.profile.nf_id
    }

    pub fn gnb_registrations(&self) -> impl Iterator<Item = &GnbRegistration> {
        self.gnbs.values()
    }

    pub fn ue_state(&self, ue_id: &str) -> Option<AmfUeState> {
        self.ues.get(ue_id).map(|u| u.state)
    }

    pub fn registrations_accepted(&self) -> u64 {
        self.registrations_accepted
    }

    /// Status notifications received from the NRF, in arrival order.
    pub fn status_notifications(&self) -> &[(String, super::NfStatus)] {
        &self.agent.notifications
    }

    pub(crate) fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        match d.packet.protocol {
            Protocol::Ngap => self.on_ngap(ctx, d),
            Protocol::Sbi => {
                let Some(msg) = decode_sbi(ctx, d) else { return };
                if !self.agent.handle(ctx, d, &msg) {
                    self.on_sbi(ctx, d, &msg);
                }
            }
            _ => ctx.discard(d, "unexpected protocol"),
        }
    }

    fn to_gnb(&self, ctx: &mut Ctx, gnb: Ipv4Addr, msg: &TlvMessage) {
        ctx.send_msg(self.agent.ip(), gnb, Protocol::Ngap, msg);
    }

    fn downlink_nas(&self, ctx: &mut Ctx, gnb: Ipv4Addr, ue_id: &str, inner: &TlvMessage) {
        match TlvMessage::new(MsgKind::DownlinkNasTransport)
            .with_str(Tag::UeId, ue_id)
            .with_msg(Tag::Nas, inner)
        {
            Ok(m) => self.to_gnb(ctx, gnb, &m),
            Err(e) => ctx.fault(self.agent.ip(), e.to_string()),
        }
    }

    fn reject(&mut self, ctx: &mut Ctx, ue_id: &str, cause: &str) {
        let Some(ue) = self.ues.get_mut(ue_id) else { return };
        ue.state = AmfUeState::Rejected;
        let gnb = ue.gnb;
        let msg = nas(MsgKind::RegistrationReject, ue_id).with_str(Tag::Cause, cause);
        self.downlink_nas(ctx, gnb, ue_id, &msg);
    }

    fn send_to_peer(&mut self, ctx: &mut Ctx, t: NfType, msg: &TlvMessage, ue_id: &str) -> bool {
        match self.agent.peer(t).map(|p| p.addr) {
            Some(peer) => ctx.send_msg(self.agent.ip(), peer, Protocol::Sbi, msg),
            None => {
                self.reject(ctx, ue_id, &format!("no {t} available"));
                false
            }
        }
    }

    fn on_ngap(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let gnb = d.packet.src_ip;
        let ue_id = msg.get_str(Tag::UeId).unwrap_or("").to_string();
        match msg.msg_kind() {
            Some(MsgKind::NgSetupReq) => {
                let gnb_id = msg.get_str(Tag::NfId).unwrap_or("").to_string();
                let reliable = ctx
                    .net
                    .link_between(self.agent.ip(), gnb)
                    .and_then(|l| ctx.net.link(l))
                    .is_some_and(|l| l.reliable);
                let reply = if !self.agent.registered {
                    TlvMessage::new(MsgKind::NgSetupFailure).with_str(Tag::Cause, "AMF not registered with NRF")
                } else if !reliable {
                    TlvMessage::new(MsgKind::NgSetupFailure).with_str(Tag::Cause, "NGAP requires a reliable link")
                } else {
                    self.gnbs.insert(
                        gnb,
                        GnbRegistration {
                            gnb_id,
                            amf_id: self.name().to_string(),
                            state: GnbState::Registered,
                        },
                    );
                    TlvMessage::new(MsgKind::NgSetupResp).with_str(Tag::NfId, self.name())
                };
                self.to_gnb(ctx, gnb, &reply);
            }
            Some(MsgKind::NgKeepalive) => {
                self.to_gnb(ctx, gnb, &TlvMessage::new(MsgKind::NgKeepaliveAck));
            }
            Some(MsgKind::InitialUeMessage) => {
                if !self.gnbs.contains_key(&gnb) {
                    let m = nas(MsgKind::RegistrationReject, &ue_id).with_str(Tag::Cause, "gNB not registered");
                    self.downlink_nas(ctx, gnb, &ue_id, &m);
                    return;
                }
                if self.ues.get(&ue_id).is_some_and(|u| u.state == AmfUeState::Registered) {
                    let m = nas(MsgKind::RegistrationAccept, &ue_id);
                    self.downlink_nas(ctx, gnb, &ue_id, &m);
                    return;
                }
                self.ues.insert(
                    ue_id.clone(),
                    UeContext {
                        state: AmfUeState::Authenticating,
                        gnb,
                    },
                );
                let req = TlvMessage::new(MsgKind::UeAuthReq).with_str(Tag::UeId, &ue_id);
                self.send_to_peer(ctx, NfType::Ausf, &req, &ue_id);
            }
            Some(MsgKind::UplinkNasTransport) => {
                let inner = msg.get_msg(Tag::Nas);
                if inner.as_ref().and_then(|m| m.msg_kind()) != Some(MsgKind::PduSessionEstablishmentRequest) {
                    ctx.discard(d, "unsupported NAS message");
                    return;
                }
                let inner = inner.expect("checked");
                let registered = self.ues.get(&ue_id).is_some_and(|u| u.state == AmfUeState::Registered);
                if !registered {
                    let m = nas(MsgKind::PduSessionEstablishmentReject, &ue_id).with_str(Tag::Cause, "UE not registered");
                    self.downlink_nas(ctx, gnb, &ue_id, &m);
                    return;
                }
                let secondary = inner.get_ip(Tag::SecondaryGnb);
                if let Some(u) = self.ues.get_mut(&ue_id) {
                    u.gnb = gnb;
                }
                let mut req = TlvMessage::new(MsgKind::SmContextCreateReq)
                    .with_str(Tag::UeId, &ue_id)
                    .with_u8(Tag::Redundancy, inner.get_u8(Tag::Redundancy).unwrap_or(0))
                    .with_ip(Tag::GnbAddr, gnb);
                if let Some(s) = secondary {
                    req = req.with_ip(Tag::SecondaryGnb, s);
                }
                match self.agent.peer(NfType::Smf).map(|p| p.addr) {
                    Some(smf) => {
                        ctx.send_msg(self.agent.ip(), smf, Protocol::Sbi, &req);
                    }
                    None => {
                        let m = nas(MsgKind::PduSessionEstablishmentReject, &ue_id).with_str(Tag::Cause, "no SMF available");
                        self.downlink_nas(ctx, gnb, &ue_id, &m);
                    }
                }
            }
            Some(MsgKind::PduSessionResourceSetupResp) => {}
            _ => ctx.discard(d, "unsupported message"),
        }
    }

    fn on_sbi(&mut self, ctx: &mut Ctx, d: &Delivery, msg: &TlvMessage) {
        let ue_id = msg.get_str(Tag::UeId).unwrap_or("").to_string();
        let failed = msg.get_str(Tag::Cause).map(str::to_string);
        let state = self.ues.get(&ue_id).map(|u| u.state);
        match (msg.msg_kind(), state) {
            (Some(MsgKind::UeAuthResp), Some(AmfUeState::Authenticating)) => {
                if let Some(c) = failed {
                    self.reject(ctx, &ue_id, &c);
                    return;
                }
                self.ues.get_mut(&ue_id).expect("present").state = AmfUeState::FetchingSubscription;
                let req = TlvMessage::new(MsgKind::SdmGetReq).with_str(Tag::UeId, &ue_id);
                self.send_to_peer(ctx, NfType::Udm, &req, &ue_id);
            }
            (Some(MsgKind::SdmGetResp), Some(AmfUeState::FetchingSubscription)) => {
                if let Some(c) = failed {
                    self.reject(ctx, &ue_id, &c);
                    return;
                }
                self.ues.get_mut(&ue_id).expect("present").state = AmfUeState::FetchingPolicy;
                let req = TlvMessage::new(MsgKind::AmPolicyReq).with_str(Tag::UeId, &ue_id);
                self.send_to_peer(ctx, NfType::Pcf, &req, &ue_id);
            }
            (Some(MsgKind::AmPolicyResp), Some(AmfUeState::FetchingPolicy)) => {
                if let Some(c) = failed {
                    self.reject(ctx, &ue_id, &c);
                    return;
                }
                let ue = self.ues.get_mut(&ue_id).expect("present");
                ue.state = AmfUeState::Registered;
                let gnb = ue.gnb;
                self.registrations_accepted += 1;
                let m = nas(MsgKind::RegistrationAccept, &ue_id);
                self.downlink_nas(ctx, gnb, &ue_id, &m);
            }
            (Some(MsgKind::SmContextCreateResp), Some(AmfUeState::Registered)) => {
                let primary = self.ues[&ue_id].gnb;
                if let Some(c) = failed {
                    let m = nas(MsgKind::PduSessionEstablishmentReject, &ue_id).with_str(Tag::Cause, &c);
                    self.downlink_nas(ctx, primary, &ue_id, &m);
                    return;
                }
                let tunnels: Vec<TunnelInfo> = msg.get_all(Tag::Tunnel).filter_map(TunnelInfo::decode).collect();
                let ue_ip = msg.get_ip(Tag::UeIp).unwrap_or(Ipv4Addr::UNSPECIFIED);
                let redundancy = msg.get_u8(Tag::Redundancy).unwrap_or(0);
                let accept = nas(MsgKind::PduSessionEstablishmentAccept, &ue_id)
                    .with_ip(Tag::UeIp, ue_ip)
                    .with_u8(Tag::Redundancy, redundancy);
                let mut by_gnb: BTreeMap<Ipv4Addr, Vec<&TunnelInfo>> = BTreeMap::new();
                for t in &tunnels {
                    by_gnb.entry(t.gnb).or_default().push(t);
                }
                // primary last: it carries the NAS accept
                let mut order: Vec<Ipv4Addr> = by_gnb.keys().copied().filter(|g| *g != primary).collect();
                order.push(primary);
                for gnb in order {
                    let mut req = TlvMessage::new(MsgKind::PduSessionResourceSetupReq)
                        .with_str(Tag::UeId, &ue_id)
                        .with_ip(Tag::UeIp, ue_ip)
                        .with_u8(Tag::Redundancy, redundancy);
                    for t in by_gnb.get(&gnb).into_iter().flatten() {
                        req.push(Tag::Tunnel, t.encode());
                    }
                    if gnb == primary {
                        req = match req.with_msg(Tag::Nas, &accept) {
                            Ok(r) => r,
                            Err(e) => {
                                ctx.fault(self.agent.ip(), e.to_string());
                                return;
                            }
                        };
                    }
                    self.to_gnb(ctx, gnb, &req);
                }
            }
            _ => ctx.discard(d, "unexpected message"),
        }
    }
}
