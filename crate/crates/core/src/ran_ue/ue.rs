use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use sha2::{Digest, Sha256};

use super::RanError;
use crate::sim::{Ctx, APP_PORT, RLS_PORT, UE_APP_PORT};
use crate::simnet::{Delivery, Millis};
use crate::urllc::RedundancyKind;
use crate::wirefmt::{encode_packet, MsgKind, PacketView, Protocol, SimPacket, Tag, TlvMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeState {
    Deregistered,
    Registering,
    Registered,
    SessionPending,
    SessionActive,
}

impl UeState {
    pub fn as_str(self) -> &'static str {
        match self {
            UeState::Deregistered => "DEREGISTERED",
            UeState::Registering => "REGISTERING",
            UeState::Registered => "REGISTERED",
            UeState::SessionPending => "SESSION_PENDING",
            UeState::SessionActive => "SESSION_ACTIVE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferStatus {
    InProgress,
    Complete,
    Failed,
}

/// Outcome of one document request as seen by the UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferResult {
    pub ue_id: String,
    pub doc: String,
    pub requested_at: Millis,
    pub completed_at: Option<Millis>,
    pub status: TransferStatus,
    pub acked: bool,
    pub total_size: Option<u64>,
    pub bytes_received: u64,
    pub segments: u32,
    /// SHA-256 of the reassembled body, set on completion.
    pub digest: Option<[u8; 32]>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
struct Transfer {
    result: TransferResult,
    hasher: Sha256,
    /// Segments that arrived ahead of the next expected offset.
    early: BTreeMap<u64, Vec<u8>>,
}

impl Transfer {
    fn segment(&mut self, now: Millis, offset: u64, total: u64, data: &[u8]) {
        let r = &mut self.result;
        r.total_size = Some(total);
        r.segments += 1;
        if offset != r.bytes_received {
            if offset > r.bytes_received {
                self.early.insert(offset, data.to_vec());
            }
            return;
        }
        self.hasher.update(data);
        r.bytes_received += data.len() as u64;
        while let Some(next) = self.early.remove(&r.bytes_received) {
            self.hasher.update(&next);
            r.bytes_received += next.len() as u64;
        }
        if r.bytes_received == total {
            r.status = TransferStatus::Complete;
            r.completed_at = Some(now);
            r.digest = Some(self.hasher.clone().finalize().into());
        }
    }
}

/// One simulated handset.
#[derive(Debug, Clone)]
pub struct UeDevice {
    pub ue_id: String,
    pub state: UeState,
    /// Serving gNBs, primary first.
    pub serving_gnbs: Vec<Ipv4Addr>,
    pub ue_ip: Option<Ipv4Addr>,
    pub redundancy: RedundancyKind,
    pub reject_cause: Option<String>,
    transfers: Vec<Transfer>,
    next_req: u32,
    /// Replicated responses already seen, and those held for reordering.
    seen_rseq: BTreeSet<u32>,
    held: BTreeMap<u32, TlvMessage>,
    next_rseq: u32,
    duplicates: u64,
}

impl UeDevice {
    fn new(ue_id: &str, gnbs: Vec<Ipv4Addr>) -> Self {
        UeDevice {
            ue_id: ue_id.to_string(),
            state: UeState::Deregistered,
            serving_gnbs: gnbs,
            ue_ip: None,
            redundancy: RedundancyKind::None,
            reject_cause: None,
            transfers: Vec::new(),
            next_req: 0,
            seen_rseq: BTreeSet::new(),
            held: BTreeMap::new(),
            next_rseq: 0,
            duplicates: 0,
        }
    }

    pub fn transfers(&self) -> impl Iterator<Item = &TransferResult> {
        self.transfers.iter().map(|t| &t.result)
    }

    pub fn duplicates_eliminated(&self) -> u64 {
        self.duplicates
    }

    fn app_message(&mut self, now: Millis, m: &TlvMessage) {
        let doc = m.get_str(Tag::DocName).unwrap_or("");
        let Some(t) = self
            .transfers
            .iter_mut()
            .find(|t| t.result.status == TransferStatus::InProgress && t.result.doc == doc)
        else {
            return;
        };
        match m.msg_kind() {
            Some(MsgKind::AppAck) => {
                t.result.acked = true;
                t.result.total_size = m.get_u32(Tag::TotalSize).map(u64::from);
            }
            Some(MsgKind::AppSegment) => {
                let offset = m.get_u32(Tag::Offset).unwrap_or(0) as u64;
                let total = m.get_u32(Tag::TotalSize).unwrap_or(0) as u64;
                t.segment(now, offset, total, m.get(Tag::Data).unwrap_or(&[]));
            }
            Some(MsgKind::AppError) => {
                t.result.status = TransferStatus::Failed;
                t.result.completed_at = Some(now);
                t.result.error = Some(m.get_str(Tag::Cause).unwrap_or("error").to_string());
            }
            _ => {}
        }
    }
}

/// The host running every simulated UE; one radio endpoint shared by all.
#[derive(Debug, Clone)]
pub struct UeHost {
    name: String,
    ip: Ipv4Addr,
    /// gNBs reachable over a radio link, in topology order.
    gnbs: Vec<Ipv4Addr>,
    server: Ipv4Addr,
    devices: BTreeMap<String, UeDevice>,
}

impl UeHost {
    pub fn new(name: &str, ip: Ipv4Addr, gnbs: Vec<Ipv4Addr>, server: Ipv4Addr) -> Self {
        UeHost {
            name: name.to_string(),
            ip,
            gnbs,
            server,
            devices: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.ip
    }

    pub fn gnbs(&self) -> &[Ipv4Addr] {
        &self.gnbs
    }

    pub fn device(&self, ue_id: &str) -> Option<&UeDevice> {
        self.devices.get(ue_id)
    }

    pub fn devices(&self) -> impl Iterator<Item = &UeDevice> {
        self.devices.values()
    }

    pub fn add_device(&mut self, ue_id: &str) -> Result<(), RanError> {
        if self.devices.contains_key(ue_id) {
            return Err(RanError::DuplicateUe(ue_id.to_string()));
        }
        let Some(&primary) = self.gnbs.first() else {
            return Err(RanError::NoGnb(self.name.clone()));
        };
        self.devices.insert(ue_id.to_string(), UeDevice::new(ue_id, vec![primary]));
        Ok(())
    }

    fn device_mut(&mut self, ue_id: &str) -> Result<&mut UeDevice, RanError> {
        self.devices
            .get_mut(ue_id)
            .ok_or_else(|| RanError::UnknownUe(ue_id.to_string()))
    }

    /// Sends one RLS message from a UE to one of its serving gNBs.
    pub(crate) fn rls_transmit(&mut self, ctx: &mut Ctx, ue_id: &str, gnb: Ipv4Addr, msg: &TlvMessage) -> Result<(), RanError> {
        let dev = self.device_mut(ue_id)?;
        if !dev.serving_gnbs.contains(&gnb) {
            return Err(RanError::NotAttached {
                ue: ue_id.to_string(),
                gnb,
            });
        }
        let payload = msg.encode().map_err(|e| RanError::Encode(e.to_string()))?;
        let p = SimPacket::new(Protocol::Rls, (self.ip, RLS_PORT), (gnb, RLS_PORT), payload);
        if ctx.send_packet(self.ip, gnb, p) {
            Ok(())
        } else {
            Err(RanError::NotAttached {
                ue: ue_id.to_string(),
                gnb,
            })
        }
    }

    fn nas(&mut self, ctx: &mut Ctx, ue_id: &str, gnb: Ipv4Addr, nas: &TlvMessage) -> Result<(), RanError> {
        let msg = TlvMessage::new(MsgKind::RlsNas)
            .with_str(Tag::UeId, ue_id)
            .with_msg(Tag::Nas, nas)
            .map_err(|e| RanError::Encode(e.to_string()))?;
        self.rls_transmit(ctx, ue_id, gnb, &msg)
    }

    /// Starts registration; a UE that is already registered sends nothing.
    pub(crate) fn register(&mut self, ctx: &mut Ctx, ue_id: &str) -> Result<bool, RanError> {
        let dev = self.device_mut(ue_id)?;
        match dev.state {
            UeState::Deregistered => {}
            UeState::Registering => return Err(RanError::WrongState { ue: ue_id.to_string(), state: dev.state }),
            _ => return Ok(false),
        }
        dev.state = UeState::Registering;
        dev.reject_cause = None;
        let gnb = dev.serving_gnbs[0];
        let req = TlvMessage::new(MsgKind::RegistrationRequest).with_str(Tag::UeId, ue_id);
        self.nas(ctx, ue_id, gnb, &req)?;
        Ok(true)
    }

    pub(crate) fn establish(&mut self, ctx: &mut Ctx, ue_id: &str, kind: RedundancyKind) -> Result<(), RanError> {
        let gnbs = self.gnbs.clone();
        let dev = self.device_mut(ue_id)?;
        if dev.state != UeState::Registered {
            return Err(RanError::WrongState { ue: ue_id.to_string(), state: dev.state });
        }
        let secondary = if kind == RedundancyKind::DualConnectivity {
            let Some(&second) = gnbs.get(1) else {
                return Err(RanError::NoSecondGnb(ue_id.to_string()));
            };
            dev.serving_gnbs = vec![gnbs[0], second];
            Some(second)
        } else {
            dev.serving_gnbs.truncate(1);
            None
        };
        dev.state = UeState::SessionPending;
        dev.redundancy = kind;
        let primary = dev.serving_gnbs[0];
        let mut req = TlvMessage::new(MsgKind::PduSessionEstablishmentRequest)
            .with_str(Tag::UeId, ue_id)
            .with_u8(Tag::Redundancy, kind.code());
        if let Some(s) = secondary {
            req = req.with_ip(Tag::SecondaryGnb, s);
        }
        self.nas(ctx, ue_id, primary, &req)
    }

    pub(crate) fn request_document(&mut self, ctx: &mut Ctx, ue_id: &str, doc: &str) -> Result<(), RanError> {
        let server = self.server;
        let now = ctx.now();
        let dev = self.device_mut(ue_id)?;
        if dev.state != UeState::SessionActive {
            return Err(RanError::WrongState { ue: ue_id.to_string(), state: dev.state });
        }
        let ue_ip = dev.ue_ip.expect("active session has an address");
        let mut get = TlvMessage::new(MsgKind::AppGet).with_str(Tag::DocName, doc);
        let replicated = dev.redundancy == RedundancyKind::DualConnectivity;
        if replicated {
            get = get.with_u32(Tag::Seq, dev.next_req);
            dev.next_req += 1;
        }
        dev.transfers.push(Transfer {
            result: TransferResult {
                ue_id: ue_id.to_string(),
                doc: doc.to_string(),
                requested_at: now,
                completed_at: None,
                status: TransferStatus::InProgress,
                acked: false,
                total_size: None,
                bytes_received: 0,
                segments: 0,
                digest: None,
                error: None,
            },
            hasher: Sha256::new(),
            early: BTreeMap::new(),
        });
        let gnbs = dev.serving_gnbs.clone();
        let body = get.encode().map_err(|e| RanError::Encode(e.to_string()))?;
        let inner = SimPacket::new(Protocol::App, (ue_ip, UE_APP_PORT), (server, APP_PORT), body);
        let pdu = encode_packet(&inner).map_err(|e| RanError::Encode(e.to_string()))?;
        let msg = TlvMessage::new(MsgKind::RlsData).with_str(Tag::UeId, ue_id).with(Tag::Pdu, pdu);
        for gnb in gnbs {
            self.rls_transmit(ctx, ue_id, gnb, &msg)?;
        }
        Ok(())
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        if d.packet.protocol != Protocol::Rls {
            ctx.discard(d, "unexpected protocol");
            return;
        }
        let Ok(msg) = TlvMessage::decode(&d.packet.payload) else {
            ctx.discard(d, "malformed body");
            return;
        };
        let ue_id = msg.get_str(Tag::UeId).unwrap_or("");
        let Some(dev) = self.devices.get_mut(ue_id) else {
            ctx.discard(d, "unknown UE");
            return;
        };
        match msg.msg_kind() {
            Some(MsgKind::RlsNas) => {
                let Some(nas) = msg.get_msg(Tag::Nas) else {
                    ctx.discard(d, "missing NAS");
                    return;
                };
                match nas.msg_kind() {
                    Some(MsgKind::RegistrationAccept) if dev.state == UeState::Registering => {
                        dev.state = UeState::Registered;
                    }
                    Some(MsgKind::RegistrationReject) => {
                        dev.state = UeState::Deregistered;
                        dev.reject_cause = nas.get_str(Tag::Cause).map(str::to_string);
                    }
                    Some(MsgKind::PduSessionEstablishmentAccept) if dev.state == UeState::SessionPending => {
                        dev.state = UeState::SessionActive;
                        dev.ue_ip = nas.get_ip(Tag::UeIp);
                    }
                    Some(MsgKind::PduSessionEstablishmentReject) => {
                        dev.state = UeState::Registered;
                        dev.serving_gnbs.truncate(1);
                        dev.reject_cause = nas.get_str(Tag::Cause).map(str::to_string);
                    }
                    _ => {}
                }
            }
            Some(MsgKind::RlsData) => {
                let Some(inner) = msg.get(Tag::Pdu).and_then(|b| PacketView::parse(b).ok()) else {
                    ctx.discard(d, "malformed PDU");
                    return;
                };
                let Ok(app) = TlvMessage::decode(inner.payload) else {
                    ctx.discard(d, "malformed body");
                    return;
                };
                let now = ctx.now();
                match app.get_u32(Tag::Seq) {
                    Some(rseq) => {
                        if rseq < dev.next_rseq || !dev.seen_rseq.insert(rseq) {
                            dev.duplicates += 1;
                            ctx.eliminated(d);
                            return;
                        }
                        dev.held.insert(rseq, app);
                        while let Some(m) = dev.held.remove(&dev.next_rseq) {
                            dev.seen_rseq.remove(&dev.next_rseq);
                            dev.next_rseq += 1;
                            dev.app_message(now, &m);
                        }
                    }
                    None => dev.app_message(now, &app),
                }
            }
            _ => ctx.discard(d, "unsupported message"),
        }
    }
}
