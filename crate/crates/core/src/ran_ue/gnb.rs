use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use crate::core_cp::{GnbState, TunnelInfo};
use crate::sim::{Ctx, TimerAction, GTPU_PORT, RLS_PORT};
use crate::simnet::Delivery;
use crate::urllc::DuplicateEliminator;
use crate::wirefmt::{gtpu_decapsulate, gtpu_encapsulate, MsgKind, Protocol, SimPacket, Tag, TlvMessage};

#[derive(Debug, Clone)]
struct UeLeg {
    host: Option<Ipv4Addr>,
    tunnels: Vec<TunnelInfo>,
    ul_seq: u16,
}

/// Base station: NGAP towards the AMF, RLS towards UEs, GTP-U towards UPFs.
#[derive(Debug, Clone)]
pub struct Gnb {
    name: String,
    ip: Ipv4Addr,
    amf: Option<Ipv4Addr>,
    state: Option<GnbState>,
    ues: BTreeMap<String, UeLeg>,
    by_teid: BTreeMap<u32, String>,
    dl_dedup: BTreeMap<String, DuplicateEliminator>,
    keepalives: u64,
}

impl Gnb {
    pub fn new(name: &str, ip: Ipv4Addr, amf: Option<Ipv4Addr>) -> Self {
        Gnb {
            name: name.to_string(),
            ip,
            amf,
            state: None,
            ues: BTreeMap::new(),
            by_teid: BTreeMap::new(),
            dl_dedup: BTreeMap::new(),
            keepalives: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.ip
    }

    pub fn amf(&self) -> Option<Ipv4Addr> {
        self.amf
    }

    /// `None` until an NG setup request has been sent.
    pub fn state(&self) -> Option<GnbState> {
        self.state
    }

    pub fn is_registered(&self) -> bool {
        self.state == Some(GnbState::Registered)
    }

    pub fn attached_ues(&self) -> impl Iterator<Item = &str> {
        self.ues.keys().map(String::as_str)
    }

    /// Tunnel endpoint map: local TEID to UPF address.
    pub fn tunnels(&self) -> BTreeMap<u32, Ipv4Addr> {
        self.ues
            .values()
            .flat_map(|u| u.tunnels.iter().map(|t| (t.gnb_teid, t.upf)))
            .collect()
    }

    pub fn keepalives_sent(&self) -> u64 {
        self.keepalives
    }

    pub(crate) fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        let Some(amf) = self.amf else {
            ctx.fault(self.ip, "no AMF link");
            return;
        };
        match action {
            TimerAction::NgSetup => {
                self.state = Some(GnbState::SetupSent);
                let req = TlvMessage::new(MsgKind::NgSetupReq).with_str(Tag::NfId, &self.name);
                ctx.send_msg(self.ip, amf, Protocol::Ngap, &req);
            }
            TimerAction::NgKeepalive => {
                self.keepalives += 1;
                ctx.send_msg(self.ip, amf, Protocol::Ngap, &TlvMessage::new(MsgKind::NgKeepalive));
                let next = ctx.now() + ctx.params.heartbeat_ms;
                ctx.timer(next, self.ip, TimerAction::NgKeepalive);
            }
            _ => {}
        }
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        match d.packet.protocol {
            Protocol::Rls => self.on_rls(ctx, d),
            Protocol::Ngap => self.on_ngap(ctx, d),
            Protocol::Gtpu => self.on_gtpu(ctx, d),
            _ => ctx.discard(d, "unexpected protocol"),
        }
    }

    fn leg(&mut self, ue_id: &str) -> &mut UeLeg {
        self.ues.entry(ue_id.to_string()).or_insert(UeLeg {
            host: None,
            tunnels: Vec::new(),
            ul_seq: 0,
        })
    }

    fn on_rls(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let Some(ue_id) = msg.get_str(Tag::UeId).map(str::to_string) else {
            ctx.discard(d, "missing UE id");
            return;
        };
        match msg.msg_kind() {
            Some(MsgKind::RlsNas) => {
                let Some(amf) = self.amf.filter(|_| self.is_registered()) else {
                    ctx.discard(d, "gNB not registered");
                    return;
                };
                let Some(nas) = msg.get(Tag::Nas) else {
                    ctx.discard(d, "missing NAS");
                    return;
                };
                self.leg(&ue_id).host = Some(d.packet.src_ip);
                let kind = if TlvMessage::decode(nas).ok().and_then(|m| m.msg_kind())
                    == Some(MsgKind::RegistrationRequest)
                {
                    MsgKind::InitialUeMessage
                } else {
                    MsgKind::UplinkNasTransport
                };
                let out = TlvMessage::new(kind).with_str(Tag::UeId, &ue_id).with(Tag::Nas, nas.to_vec());
                ctx.send_msg(self.ip, amf, Protocol::Ngap, &out);
            }
            Some(MsgKind::RlsData) => {
                let Some(pdu) = msg.get(Tag::Pdu) else {
                    ctx.discard(d, "missing PDU");
                    return;
                };
                let leg = self.leg(&ue_id);
                leg.host = Some(d.packet.src_ip);
                if leg.tunnels.is_empty() {
                    ctx.discard(d, "no session for UE");
                    return;
                }
                let seq = leg.ul_seq;
                leg.ul_seq = leg.ul_seq.wrapping_add(1);
                let tunnels = leg.tunnels.clone();
                for t in tunnels {
                    let s = t.seq.then_some(seq);
                    match gtpu_encapsulate(pdu, t.upf_teid, s) {
                        Ok(payload) => {
                            let p = SimPacket::new(Protocol::Gtpu, (self.ip, GTPU_PORT), (t.upf, GTPU_PORT), payload);
                            ctx.send_packet(self.ip, t.upf, p);
                        }
                        Err(e) => ctx.fault(self.ip, e.to_string()),
                    }
                }
            }
            _ => ctx.discard(d, "unsupported message"),
        }
    }

    fn to_ue(&self, ctx: &mut Ctx, host: Ipv4Addr, msg: &TlvMessage) {
        ctx.send_msg(self.ip, host, Protocol::Rls, msg);
    }

    fn on_ngap(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let ue_id = msg.get_str(Tag::UeId).unwrap_or("").to_string();
        match msg.msg_kind() {
            Some(MsgKind::NgSetupResp) => {
                self.state = Some(GnbState::Registered);
                let next = ctx.now() + ctx.params.heartbeat_ms;
                ctx.timer(next, self.ip, TimerAction::NgKeepalive);
            }
            Some(MsgKind::NgSetupFailure) => {
                let cause = msg.get_str(Tag::Cause).unwrap_or("?").to_string();
                ctx.fault(self.ip, format!("NG setup failed: {cause}"));
            }
            Some(MsgKind::NgKeepaliveAck) => {}
            Some(MsgKind::DownlinkNasTransport) => {
                let (Some(host), Some(nas)) = (self.ues.get(&ue_id).and_then(|u| u.host), msg.get(Tag::Nas)) else {
                    ctx.discard(d, "UE not attached");
                    return;
                };
                let out = TlvMessage::new(MsgKind::RlsNas).with_str(Tag::UeId, &ue_id).with(Tag::Nas, nas.to_vec());
                self.to_ue(ctx, host, &out);
            }
            Some(MsgKind::PduSessionResourceSetupReq) => {
                let tunnels: Vec<TunnelInfo> = msg
                    .get_all(Tag::Tunnel)
                    .filter_map(TunnelInfo::decode)
                    .filter(|t| t.gnb == self.ip)
                    .collect();
                for t in &tunnels {
                    self.by_teid.insert(t.gnb_teid, ue_id.clone());
                }
                let leg = self.leg(&ue_id);
                leg.tunnels = tunnels;
                let host = leg.host;
                let resp = TlvMessage::new(MsgKind::PduSessionResourceSetupResp).with_str(Tag::UeId, &ue_id);
                ctx.send_msg(self.ip, d.packet.src_ip, Protocol::Ngap, &resp);
                if let Some(nas) = msg.get(Tag::Nas) {
                    let Some(host) = host else {
                        ctx.fault(self.ip, format!("no radio link state for {ue_id}"));
                        return;
                    };
                    let out = TlvMessage::new(MsgKind::RlsNas).with_str(Tag::UeId, &ue_id).with(Tag::Nas, nas.to_vec());
                    self.to_ue(ctx, host, &out);
                }
            }
            _ => ctx.discard(d, "unsupported message"),
        }
    }

    fn on_gtpu(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(pdu) = gtpu_decapsulate(&d.packet.payload) else {
            ctx.discard(d, "malformed GTP-U");
            return;
        };
        let Some(ue_id) = self.by_teid.get(&pdu.teid).cloned() else {
            ctx.discard(d, "unknown TEID");
            return;
        };
        let Some(leg) = self.ues.get(&ue_id) else {
            ctx.discard(d, "UE not attached");
            return;
        };
        let eliminate = leg.tunnels.iter().any(|t| t.gnb_teid == pdu.teid && t.eliminate);
        let Some(host) = leg.host else {
            ctx.discard(d, "UE not attached");
            return;
        };
        if let (true, Some(seq)) = (eliminate, pdu.seq) {
            if !self.dl_dedup.entry(ue_id.clone()).or_default().accept(seq) {
                ctx.eliminated(d);
                return;
            }
        }
        let out = TlvMessage::new(MsgKind::RlsData)
            .with_str(Tag::UeId, &ue_id)
            .with(Tag::Pdu, pdu.inner.to_vec());
        match out.encode() {
            Ok(payload) => {
                let p = SimPacket::new(Protocol::Rls, (self.ip, RLS_PORT), (host, RLS_PORT), payload);
                ctx.send_packet(self.ip, host, p);
            }
            Err(e) => ctx.fault(self.ip, e.to_string()),
        }
    }
}
