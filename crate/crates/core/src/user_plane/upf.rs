use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use super::{Direction, ForwardingRule, RuleAction, SeqPolicy};
use crate::core_cp::{decode_sbi, NfAgent};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::Delivery;
use crate::urllc::DuplicateEliminator;
use crate::wirefmt::{
    gtpu_decapsulate, gtpu_encapsulate, gtpu_encapsulate_packet, MsgKind, PacketView, Protocol,
    SimPacket, Tag, TlvMessage,
};

/// Per-session, per-direction packet counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounters {
    /// Packets arriving (GTP-U, or plain for downlink entry).
    pub packets_in: u64,
    /// Copies removed by duplicate elimination.
    pub eliminated: u64,
    /// Packets leaving decapsulated toward the data network.
    pub routed_out: u64,
    /// Packets leaving inside a tunnel.
    pub tunneled_out: u64,
}

/// User plane function: GTP-U termination, relay and data-network routing.
#[derive(Debug, Clone)]
pub struct Upf {
    pub(crate) agent: NfAgent,
    associations: BTreeSet<Ipv4Addr>,
    rules: Vec<ForwardingRule>,
    by_teid: BTreeMap<u32, usize>,
    by_ue: BTreeMap<Ipv4Addr, Vec<usize>>,
    eliminators: BTreeMap<(u32, Direction), DuplicateEliminator>,
    next_seq: BTreeMap<(u32, Direction), u16>,
    counters: BTreeMap<(u32, Direction), FlowCounters>,
    unknown_teid: u64,
    unknown_ue: u64,
}

impl Upf {
    pub(crate) fn new(agent: NfAgent) -> Self {
        Upf {
            agent,
            associations: BTreeSet::new(),
            rules: Vec::new(),
            by_teid: BTreeMap::new(),
            by_ue: BTreeMap::new(),
            eliminators: BTreeMap::new(),
            next_seq: BTreeMap::new(),
            counters: BTreeMap::new(),
            unknown_teid: 0,
            unknown_ue: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.agent.profile.nf_id
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.agent.ip()
    }

    pub fn rules(&self) -> &[ForwardingRule] {
        &self.rules
    }

    pub fn is_associated_with(&self, smf: Ipv4Addr) -> bool {
        self.associations.contains(&smf)
    }

    pub fn counters(&self, session_id: u32, dir: Direction) -> FlowCounters {
        self.counters.get(&(session_id, dir)).copied().unwrap_or_default()
    }

    pub fn unknown_teid_drops(&self) -> u64 {
        self.unknown_teid
    }

    pub fn unknown_ue_drops(&self) -> u64 {
        self.unknown_ue
    }

    /// Installs rules for one session. DL rules matching plain packets make
    /// this UPF the data-network entry for the UE address.
    pub(crate) fn install(&mut self, rules: impl IntoIterator<Item = ForwardingRule>) -> Vec<Ipv4Addr> {
        let mut announced = Vec::new();
        for r in rules {
            let idx = self.rules.len();
            match r.local_teid {
                Some(t) => {
                    self.by_teid.insert(t, idx);
                }
                None => {
                    self.by_ue.entry(r.ue_ip).or_default().push(idx);
                    if !announced.contains(&r.ue_ip) {
                        announced.push(r.ue_ip);
                    }
                }
            }
            self.rules.push(r);
        }
        announced
    }

    fn counter(&mut self, session: u32, dir: Direction) -> &mut FlowCounters {
        self.counters.entry((session, dir)).or_default()
    }

    fn assign_seq(&mut self, session: u32, dir: Direction) -> u16 {
        let s = self.next_seq.entry((session, dir)).or_insert(0);
        let v = *s;
        *s = s.wrapping_add(1);
        v
    }

    pub(crate) fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        match d.packet.protocol {
            Protocol::Gtpu => self.on_gtpu(ctx, d),
            Protocol::Pfcp => self.on_pfcp(ctx, d),
            Protocol::Sbi => {
                let Some(msg) = decode_sbi(ctx, d) else { return };
                if !self.agent.handle(ctx, d, &msg) {
                    ctx.discard(d, "unsupported message");
                }
            }
            _ if ctx.params.ue_pool.contains(d.packet.dst_ip) => self.on_downlink(ctx, d),
            _ => ctx.discard(d, "not addressed to a UE"),
        }
    }

    fn on_gtpu(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(pdu) = gtpu_decapsulate(&d.packet.payload) else {
            ctx.discard(d, "malformed GTP-U");
            return;
        };
        let Some(&idx) = self.by_teid.get(&pdu.teid) else {
            self.unknown_teid += 1;
            ctx.discard(d, "unknown TEID");
            return;
        };
        let rule = self.rules[idx];
        self.counter(rule.session_id, rule.direction).packets_in += 1;
        if rule.eliminate {
            if let Some(seq) = pdu.seq {
                let fresh = self
                    .eliminators
                    .entry((rule.session_id, rule.direction))
                    .or_default()
                    .accept(seq);
                if !fresh {
                    self.counter(rule.session_id, rule.direction).eliminated += 1;
                    ctx.eliminated(d);
                    return;
                }
            }
        }
        let me = self.addr();
        match rule.action {
            RuleAction::Route { next_hop } => {
                let inner = match PacketView::parse(pdu.inner) {
                    Ok(v) => v.to_owned(),
                    Err(_) => {
                        ctx.discard(d, "malformed inner packet");
                        return;
                    }
                };
                if ctx.send_packet(me, next_hop, inner) {
                    self.counter(rule.session_id, rule.direction).routed_out += 1;
                }
            }
            RuleAction::Encapsulate { teid, peer } => {
                let seq = match rule.seq {
                    SeqPolicy::Omit => None,
                    SeqPolicy::Preserve => pdu.seq,
                    SeqPolicy::Assign => Some(self.assign_seq(rule.session_id, rule.direction)),
                };
                let payload = gtpu_encapsulate(pdu.inner, teid, seq).expect("inner already fit a tunnel");
                let port = crate::sim::GTPU_PORT;
                let out = SimPacket::new(Protocol::Gtpu, (me, port), (peer, port), payload);
                if ctx.send_packet(me, peer, out) {
                    self.counter(rule.session_id, rule.direction).tunneled_out += 1;
                }
            }
        }
    }

    fn on_downlink(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(idxs) = self.by_ue.get(&d.packet.dst_ip).cloned() else {
            self.unknown_ue += 1;
            ctx.discard(d, "unknown UE address");
            return;
        };
        let first = self.rules[idxs[0]];
        self.counter(first.session_id, Direction::Downlink).packets_in += 1;
        let seq = idxs
            .iter()
            .any(|&i| self.rules[i].seq == SeqPolicy::Assign)
            .then(|| self.assign_seq(first.session_id, Direction::Downlink));
        let me = self.addr();
        for i in idxs {
            let rule = self.rules[i];
            let RuleAction::Encapsulate { teid, peer } = rule.action else {
                continue;
            };
            let s = if rule.seq == SeqPolicy::Omit { None } else { seq };
            let payload = match gtpu_encapsulate_packet(&d.packet, teid, s) {
                Ok(p) => p,
                Err(e) => {
                    ctx.fault(me, format!("cannot tunnel downlink packet: {e}"));
                    continue;
                }
            };
            let port = crate::sim::GTPU_PORT;
            let out = SimPacket::new(Protocol::Gtpu, (me, port), (peer, port), payload);
            if ctx.send_packet(me, peer, out) {
                self.counter(rule.session_id, Direction::Downlink).tunneled_out += 1;
            }
        }
    }

    fn on_pfcp(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let smf = d.packet.src_ip;
        let me = self.addr();
        match msg.msg_kind() {
            Some(MsgKind::AssociationSetupReq) => {
                self.associations.insert(smf);
                let resp = TlvMessage::new(MsgKind::AssociationSetupResp).with_str(Tag::NfId, self.name());
                ctx.send_msg(me, smf, Protocol::Pfcp, &resp);
            }
            Some(MsgKind::SessionEstablishmentReq) => {
                let session = msg.get_u32(Tag::SessionId).unwrap_or(0);
                let mut resp = TlvMessage::new(MsgKind::SessionEstablishmentResp)
                    .with_u32(Tag::SessionId, session);
                let rules: Result<Vec<_>, _> = msg.get_all(Tag::Rule).map(ForwardingRule::decode).collect();
                match (self.associations.contains(&smf), rules) {
                    (false, _) => resp.push(Tag::Cause, b"no PFCP association".to_vec()),
                    (true, Err(e)) => resp.push(Tag::Cause, e.to_string().into_bytes()),
                    (true, Ok(rules)) => {
                        for ue in self.install(rules) {
                            let routes = ctx.routes.entry(ue).or_default();
                            if !routes.contains(&me) {
                                routes.push(me);
                            }
                        }
                        resp.push(Tag::Status, vec![0]);
                    }
                }
                ctx.send_msg(me, smf, Protocol::Pfcp, &resp);
            }
            _ => ctx.discard(d, "unsupported message"),
        }
    }
}
