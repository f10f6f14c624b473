use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use thiserror::Error;

use super::stubs::decode_sbi;
use super::{AssocState, NfAgent, NfType, PduSession, PfcpAssociation};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::Delivery;
use crate::topology::Ipv4Cidr;
use crate::urllc::{PathDescriptor, RedundancyKind, RedundancyMode, UrllcError};
use crate::user_plane::{Direction, ForwardingRule, RuleAction, SeqPolicy};
use crate::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};

/// gNB index, N3 UPF and anchor UPF of one planned path.
type PlannedPath = (usize, Hop, Hop);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("UE address pool {0} is exhausted")]
    PoolExhausted(Ipv4Cidr),
    #[error("no active PFCP association with {0}")]
    NoAssociation(String),
    #[error(transparent)]
    Redundancy(#[from] UrllcError),
    #[error("no link between {0} and {1}")]
    NoLink(String, String),
    #[error("UE `{0}` already holds a session")]
    AlreadyActive(String),
}

/// Sequential allocator over a prefix; the first host address is kept for
/// the UPF-side gateway.
#[derive(Debug, Clone)]
pub struct UeIpPool {
    cidr: Ipv4Cidr,
    next: u64,
}

impl UeIpPool {
    pub fn new(cidr: Ipv4Cidr) -> Self {
        UeIpPool { cidr, next: 2 }
    }

    pub fn allocate(&mut self) -> Result<Ipv4Addr, SessionError> {
        // skip the network, gateway and broadcast addresses
        if self.cidr.size() < 4 || self.next >= self.cidr.size() - 1 {
            return Err(SessionError::PoolExhausted(self.cidr));
        }
        let ip = Ipv4Addr::from(u32::from(self.cidr.base) + self.next as u32);
        self.next += 1;
        Ok(ip)
    }

    pub fn allocated(&self) -> u64 {
        self.next - 2
    }
}

/// Tunnel handed to a gNB: gnb_ip(4) | gnb_teid(4) | upf_ip(4) |
/// upf_teid(4) | flags(1: bit0 sequence numbers, bit1 eliminate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TunnelInfo {
    pub gnb: Ipv4Addr,
    pub gnb_teid: u32,
    pub upf: Ipv4Addr,
    pub upf_teid: u32,
    pub seq: bool,
    pub eliminate: bool,
}

impl TunnelInfo {
    pub fn encode(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(17);
        v.extend_from_slice(&self.gnb.octets());
        v.extend_from_slice(&self.gnb_teid.to_be_bytes());
        v.extend_from_slice(&self.upf.octets());
        v.extend_from_slice(&self.upf_teid.to_be_bytes());
        v.push(self.seq as u8 | (self.eliminate as u8) << 1);
        v
    }

    pub fn decode(b: &[u8]) -> Option<Self> {
        if b.len() != 17 {
            return None;
        }
        let ip = |i: usize| Ipv4Addr::new(b[i], b[i + 1], b[i + 2], b[i + 3]);
        let word = |i: usize| u32::from_be_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        Some(TunnelInfo {
            gnb: ip(0),
            gnb_teid: word(4),
            upf: ip(8),
            upf_teid: word(12),
            seq: b[16] & 1 != 0,
            eliminate: b[16] & 2 != 0,
        })
    }
}

#[derive(Debug, Clone)]
struct PendingSession {
    amf: Ipv4Addr,
    session: PduSession,
    tunnels: Vec<TunnelInfo>,
    awaiting: BTreeSet<Ipv4Addr>,
    failed: Option<String>,
}

/// Session management: UE addressing, TEID allocation, PFCP associations
/// and rule installation.
#[derive(Debug, Clone)]
pub struct Smf {
    pub(crate) agent: NfAgent,
    pool: UeIpPool,
    associations: BTreeMap<Ipv4Addr, PfcpAssociation>,
    upf_teids: BTreeMap<Ipv4Addr, u32>,
    gnb_teids: BTreeMap<Ipv4Addr, u32>,
    sessions: BTreeMap<u32, PduSession>,
    by_ue: BTreeMap<String, u32>,
    pending: BTreeMap<u32, PendingSession>,
    next_session: u32,
}

struct Hop {
    name: String,
    ip: Ipv4Addr,
}

impl Smf {
    pub(crate) fn new(mut agent: NfAgent, pool: Ipv4Cidr) -> Self {
        agent.needs = vec![NfType::Upf];
        Smf {
            agent,
            pool: UeIpPool::new(pool),
            associations: BTreeMap::new(),
            upf_teids: BTreeMap::new(),
            gnb_teids: BTreeMap::new(),
            sessions: BTreeMap::new(),
            by_ue: BTreeMap::new(),
            pending: BTreeMap::new(),
            next_session: 1,
        }
    }

    pub fn name(&self) -> &str {
        &self.agent.profile.nf_id
    }

    pub fn associations(&self) -> impl Iterator<Item = &PfcpAssociation> {
        self.associations.values()
    }

    pub fn association_with(&self, upf: Ipv4Addr) -> Option<&PfcpAssociation> {
        self.associations.get(&upf)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &PduSession> {
        self.sessions.values()
    }

    pub fn session_for(&self, ue_id: &str) -> Option<&PduSession> {
        self.by_ue.get(ue_id).and_then(|id| self.sessions.get(id))
    }

    /// Sends an association request unless one exists; returns false when
    /// already associated or pending.
    pub(crate) fn associate(&mut self, ctx: &mut Ctx, upf: Ipv4Addr, upf_id: &str) -> bool {
        if self.associations.contains_key(&upf) {
            return false;
        }
        self.associations.insert(
            upf,
            PfcpAssociation {
                smf_id: self.name().to_string(),
                upf_id: upf_id.to_string(),
                established_at: ctx.now(),
                state: AssocState::Pending,
            },
        );
        let req = TlvMessage::new(MsgKind::AssociationSetupReq).with_str(Tag::NfId, self.name());
        ctx.send_msg(self.agent.ip(), upf, Protocol::Pfcp, &req);
        true
    }

    fn next_teid(map: &mut BTreeMap<Ipv4Addr, u32>, at: Ipv4Addr) -> u32 {
        let t = map.entry(at).or_insert(1);
        let v = *t;
        *t += 1;
        v
    }

    fn active_upfs(&self) -> Vec<Hop> {
        self.agent
            .peers
            .get(&NfType::Upf)
            .into_iter()
            .flatten()
            .filter(|p| {
                self.associations
                    .get(&p.addr)
                    .is_some_and(|a| a.state == AssocState::Active)
            })
            .map(|p| Hop {
                name: p.nf_id.clone(),
                ip: p.addr,
            })
            .collect()
    }

    fn link_id(ctx: &Ctx, a: (&str, Ipv4Addr), b: (&str, Ipv4Addr)) -> Result<String, SessionError> {
        ctx.net
            .link_between(a.1, b.1)
            .map(|l| l.to_string())
            .ok_or_else(|| SessionError::NoLink(a.0.to_string(), b.0.to_string()))
    }

    /// Works out the UPFs of each path. Allocates nothing.
    fn plan(
        &self,
        ctx: &Ctx,
        kind: RedundancyKind,
        gnbs: &[Hop],
    ) -> Result<(Vec<PlannedPath>, Option<usize>), SessionError> {
        let upfs = self.active_upfs();
        let need = |what: &str| {
            SessionError::Redundancy(UrllcError::InsufficientEntities {
                kind,
                needed: what.to_string(),
            })
        };
        let clone = |h: &Hop| Hop {
            name: h.name.clone(),
            ip: h.ip,
        };
        let first = upfs
            .first()
            .ok_or_else(|| SessionError::NoAssociation("any UPF".to_string()))?;
        // (gNB index, N3 UPF, anchor UPF)
        let plan = match kind {
            RedundancyKind::None => vec![(0, clone(first), clone(first))],
            RedundancyKind::N3Replication => {
                vec![(0, clone(first), clone(first)), (0, clone(first), clone(first))]
            }
            RedundancyKind::PsaAnchor => {
                let i = upfs.get(1).ok_or_else(|| need("a second associated UPF"))?;
                vec![(0, clone(first), clone(first)), (0, clone(i), clone(first))]
            }
            RedundancyKind::DualConnectivity => {
                if gnbs.len() < 2 {
                    return Err(need("two serving gNBs"));
                }
                let second = upfs.get(1).ok_or_else(|| need("a second associated UPF"))?;
                vec![(0, clone(first), clone(first)), (1, clone(second), clone(second))]
            }
        };
        let server = (crate::sim::APP_SERVER_NAME, ctx.params.app_server_ip);
        for (g, upf, anchor) in &plan {
            let gnb = &gnbs[*g];
            Self::link_id(ctx, (&gnb.name, gnb.ip), (&upf.name, upf.ip))?;
            if upf.ip != anchor.ip {
                Self::link_id(ctx, (&upf.name, upf.ip), (&anchor.name, anchor.ip))?;
            }
            Self::link_id(ctx, (&anchor.name, anchor.ip), server)?;
        }
        let psa = (kind == RedundancyKind::PsaAnchor).then_some(0);
        Ok((plan, psa))
    }

    fn establish(
        &mut self,
        ctx: &mut Ctx,
        ue_id: &str,
        kind: RedundancyKind,
        gnbs: &[Hop],
        amf: Ipv4Addr,
    ) -> Result<(), SessionError> {
        if self.by_ue.contains_key(ue_id) {
            return Err(SessionError::AlreadyActive(ue_id.to_string()));
        }
        let (plan, _) = self.plan(ctx, kind, gnbs)?;
        let ue_ip = self.pool.allocate()?;
        let session_id = self.next_session;
        self.next_session += 1;
        let server = ctx.params.app_server_ip;
        let seq = matches!(kind, RedundancyKind::N3Replication | RedundancyKind::PsaAnchor);
        let eliminate = seq;

        let mut rules: BTreeMap<Ipv4Addr, Vec<ForwardingRule>> = BTreeMap::new();
        let mut tunnels = Vec::new();
        let mut paths = Vec::new();
        let base = |direction, local_teid, action, seq_policy, elim| ForwardingRule {
            session_id,
            direction,
            ue_ip,
            local_teid,
            action,
            seq: seq_policy,
            eliminate: elim,
        };
        for (g, upf, anchor) in &plan {
            let gnb = &gnbs[*g];
            let gnb_teid = Self::next_teid(&mut self.gnb_teids, gnb.ip);
            let upf_teid = Self::next_teid(&mut self.upf_teids, upf.ip);
            let mut links = vec![Self::link_id(ctx, (&gnb.name, gnb.ip), (&upf.name, upf.ip))?];
            let dl_seq = if seq { SeqPolicy::Assign } else { SeqPolicy::Omit };
            if upf.ip == anchor.ip {
                let r = rules.entry(upf.ip).or_default();
                r.push(base(Direction::Uplink, Some(upf_teid), RuleAction::Route { next_hop: server }, SeqPolicy::Omit, eliminate));
                r.push(base(Direction::Downlink, None, RuleAction::Encapsulate { teid: gnb_teid, peer: gnb.ip }, dl_seq, false));
            } else {
                // relay through an intermediate UPF over N9
                links.push(Self::link_id(ctx, (&upf.name, upf.ip), (&anchor.name, anchor.ip))?);
                let anchor_teid = Self::next_teid(&mut self.upf_teids, anchor.ip);
                let relay_dl_teid = Self::next_teid(&mut self.upf_teids, upf.ip);
                let r = rules.entry(upf.ip).or_default();
                r.push(base(Direction::Uplink, Some(upf_teid), RuleAction::Encapsulate { teid: anchor_teid, peer: anchor.ip }, SeqPolicy::Preserve, false));
                r.push(base(Direction::Downlink, Some(relay_dl_teid), RuleAction::Encapsulate { teid: gnb_teid, peer: gnb.ip }, SeqPolicy::Preserve, false));
                let a = rules.entry(anchor.ip).or_default();
                a.push(base(Direction::Uplink, Some(anchor_teid), RuleAction::Route { next_hop: server }, SeqPolicy::Omit, eliminate));
                a.push(base(Direction::Downlink, None, RuleAction::Encapsulate { teid: relay_dl_teid, peer: upf.ip }, dl_seq, false));
            }
            links.push(Self::link_id(ctx, (&anchor.name, anchor.ip), (crate::sim::APP_SERVER_NAME, server))?);
            tunnels.push(TunnelInfo {
                gnb: gnb.ip,
                gnb_teid,
                upf: upf.ip,
                upf_teid,
                seq,
                eliminate,
            });
            paths.push(PathDescriptor {
                gnb: gnb.name.clone(),
                upf: upf.name.clone(),
                anchor: anchor.name.clone(),
                gnb_teid,
                upf_teid,
                links,
            });
        }
        let redundancy = RedundancyMode {
            kind,
            paths,
            psa_upf: (kind == RedundancyKind::PsaAnchor).then(|| plan[0].2.name.clone()),
        };
        redundancy.validate()?;

        let session = PduSession {
            session_id,
            ue_id: ue_id.to_string(),
            ue_ip,
            redundancy,
            established_at: ctx.now(),
        };
        let mut awaiting = BTreeSet::new();
        for (upf, list) in &rules {
            let mut req = TlvMessage::new(MsgKind::SessionEstablishmentReq)
                .with_str(Tag::NfId, self.name())
                .with_u32(Tag::SessionId, session_id)
                .with_ip(Tag::UeIp, ue_ip)
                .with_str(Tag::UeId, ue_id);
            for r in list {
                req.push(Tag::Rule, r.encode().to_vec());
            }
            ctx.send_msg(self.agent.ip(), *upf, Protocol::Pfcp, &req);
            awaiting.insert(*upf);
        }
        self.pending.insert(
            session_id,
            PendingSession {
                amf,
                session,
                tunnels,
                awaiting,
                failed: None,
            },
        );
        Ok(())
    }

    pub(crate) fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        self.agent.on_timer(ctx, action);
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        match d.packet.protocol {
            Protocol::Sbi => self.on_sbi(ctx, d),
            Protocol::Pfcp => self.on_pfcp(ctx, d),
            _ => ctx.discard(d, "unexpected protocol"),
        }
    }

    fn on_sbi(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if self.agent.handle(ctx, d, &msg) {
            return;
        }
        if msg.msg_kind() != Some(MsgKind::SmContextCreateReq) {
            ctx.discard(d, "unsupported message");
            return;
        }
        let ue_id = msg.get_str(Tag::UeId).unwrap_or("").to_string();
        let kind = msg
            .get_u8(Tag::Redundancy)
            .and_then(RedundancyKind::from_code)
            .unwrap_or_default();
        let mut gnbs = Vec::new();
        for ip in [msg.get_ip(Tag::GnbAddr), msg.get_ip(Tag::SecondaryGnb)].into_iter().flatten() {
            let name = ctx.book.name_of(ip).unwrap_or("?").to_string();
            gnbs.push(Hop { name, ip });
        }
        let result = if gnbs.is_empty() {
            Err(SessionError::NoLink(ue_id.clone(), "gNB".into()))
        } else {
            self.establish(ctx, &ue_id, kind, &gnbs, d.packet.src_ip)
        };
        if let Err(e) = result {
            let resp = TlvMessage::new(MsgKind::SmContextCreateResp)
                .with_str(Tag::UeId, &ue_id)
                .with_str(Tag::Cause, &e.to_string());
            ctx.send_msg(self.agent.ip(), d.packet.src_ip, Protocol::Sbi, &resp);
        }
    }

    fn on_pfcp(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let upf = d.packet.src_ip;
        match msg.msg_kind() {
            Some(MsgKind::AssociationSetupResp) => match self.associations.get_mut(&upf) {
                Some(a) if a.state == AssocState::Pending => {
                    a.state = AssocState::Active;
                    a.established_at = ctx.now();
                }
                _ => ctx.discard(d, "no pending association"),
            },
            Some(MsgKind::SessionEstablishmentResp) => {
                let id = msg.get_u32(Tag::SessionId).unwrap_or(0);
                let Some(p) = self.pending.get_mut(&id) else {
                    ctx.discard(d, "unknown session");
                    return;
                };
                p.awaiting.remove(&upf);
                if let Some(c) = msg.get_str(Tag::Cause) {
                    p.failed = Some(c.to_string());
                }
                if p.awaiting.is_empty() {
                    let p = self.pending.remove(&id).expect("present");
                    self.finish(ctx, p);
                }
            }
            _ => ctx.discard(d, "unsupported message"),
        }
    }

    fn finish(&mut self, ctx: &mut Ctx, p: PendingSession) {
        let s = &p.session;
        let mut resp = TlvMessage::new(MsgKind::SmContextCreateResp).with_str(Tag::UeId, &s.ue_id);
        if let Some(cause) = &p.failed {
            resp.push(Tag::Cause, cause.as_bytes().to_vec());
        } else {
            resp = resp
                .with_u32(Tag::SessionId, s.session_id)
                .with_ip(Tag::UeIp, s.ue_ip)
                .with_u8(Tag::Redundancy, s.redundancy.kind.code());
            for t in &p.tunnels {
                resp.push(Tag::Tunnel, t.encode());
            }
            self.by_ue.insert(s.ue_id.clone(), s.session_id);
            let mut session = p.session.clone();
            session.established_at = ctx.now();
            self.sessions.insert(s.session_id, session);
        }
        ctx.send_msg(self.agent.ip(), p.amf, Protocol::Sbi, &resp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_is_sequential_from_dot_two() {
        let mut pool = UeIpPool::new("10.45.0.0/16".parse().unwrap());
        assert_eq!(pool.allocate().unwrap(), Ipv4Addr::new(10, 45, 0, 2));
        assert_eq!(pool.allocate().unwrap(), Ipv4Addr::new(10, 45, 0, 3));
        assert_eq!(pool.allocated(), 2);
    }

    #[test]
    fn small_pool_runs_out() {
        let mut pool = UeIpPool::new("10.45.0.0/29".parse().unwrap());
        let got: Vec<_> = std::iter::from_fn(|| pool.allocate().ok()).collect();
        // .2 through .6; .7 is broadcast
        assert_eq!(got.len(), 5);
        assert!(matches!(pool.allocate(), Err(SessionError::PoolExhausted(_))));
    }

    #[test]
    fn tunnel_info_round_trip() {
        let t = TunnelInfo {
            gnb: Ipv4Addr::new(192, 168, 0, 22),
            gnb_teid: 3,
            upf: Ipv4Addr::new(192, 168, 0, 21),
            upf_teid: 4,
            seq: true,
            eliminate: false,
        };
        assert_eq!(TunnelInfo::decode(&t.encode()), Some(t));
        assert_eq!(TunnelInfo::decode(&[0; 16]), None);
    }
}
