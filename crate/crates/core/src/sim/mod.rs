//! The assembled network: every topology entity wired onto the simulated
//! fabric, with the analytics tap attached from the first packet.

mod ctx;

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::sync::mpsc::{channel, Receiver};

use thiserror::Error;

pub use ctx::{Fault, Role, APP_PORT, APP_SERVER_NAME, GTPU_PORT, NGAP_PORT, PFCP_PORT, RLS_PORT, UE_APP_PORT};
pub(crate) use ctx::{AddressBook, Ctx, DnRoutes, Net, Timer, TimerAction};

use crate::core_cp::{
    Amf, AssocState, Ausf, GnbRegistration, NfAgent, NfType, Nrf, PduSession, Pcf, PfcpAssociation, PlainNf,
    Smf, Udm, Udr,
};
use crate::nwdaf::{KpiKind, Nwdaf, NwdafNode};
use crate::ran_ue::{Gnb, RanError, TransferResult, TransferStatus, UeDevice, UeHost, UeState};
use crate::simnet::{EntityAddr, Fired, Link, LinkStats, Millis, NetError, TapRecord};
use crate::topology::{EntityKind, TopologyConfig, TopologyError};
use crate::urllc::RedundancyKind;
use crate::user_plane::{AppServer, Upf};
use crate::wirefmt::{MsgKind, Protocol, SimPacket, Tag, TlvMessage};

/// AMF registration time; it must be subscribed before the others register.
pub const AMF_REGISTER_AT: Millis = 0;
pub const NF_REGISTER_AT: Millis = 20;
pub const DISCOVER_AT: Millis = 50;
pub const PFCP_ASSOCIATE_AT: Millis = 70;
pub const NG_SETUP_AT: Millis = 100;
/// Clock value when `boot` returns.
pub const BOOT_DONE_AT: Millis = 200;

/// Upper bound on events processed by one settle call.
const SETTLE_LIMIT: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ran(#[from] RanError),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("`{name}` is not a {expected}")]
    WrongKind { name: String, expected: &'static str },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("registration of `{ue}` rejected: {cause}")]
    Rejected { ue: String, cause: String },
    #[error("session for `{ue}` failed: {cause}")]
    Session { ue: String, cause: String },
    #[error("transfer of `{doc}` failed: {cause}")]
    Transfer { doc: String, cause: String },
    #[error("unknown analytics consumer `{0}`")]
    UnknownConsumer(String),
    #[error("network did not settle")]
    Unsettled,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub(crate) enum Entity {
    Nrf(Nrf),
    Amf(Amf),
    Smf(Smf),
    Ausf(Ausf),
    Udm(Udm),
    Udr(Udr),
    Pcf(Pcf),
    Plain(PlainNf),
    Upf(Upf),
    Nwdaf(NwdafNode),
    Gnb(Gnb),
    UeHost(UeHost),
    App(AppServer),
}

impl Entity {
    fn on_delivery(&mut self, ctx: &mut Ctx, d: &crate::simnet::Delivery) {
        match self {
            Entity::Nrf(x) => x.on_delivery(ctx, d),
            Entity::Amf(x) => x.on_delivery(ctx, d),
            Entity::Smf(x) => x.on_delivery(ctx, d),
            Entity::Ausf(x) => x.on_delivery(ctx, d),
            Entity::Udm(x) => x.on_delivery(ctx, d),
            Entity::Udr(x) => x.on_delivery(ctx, d),
            Entity::Pcf(x) => x.on_delivery(ctx, d),
            Entity::Plain(x) => x.on_delivery(ctx, d),
            Entity::Upf(x) => x.on_delivery(ctx, d),
            Entity::Nwdaf(x) => x.on_delivery(ctx, d),
            Entity::Gnb(x) => x.on_delivery(ctx, d),
            Entity::UeHost(x) => x.on_delivery(ctx, d),
            Entity::App(x) => x.on_delivery(ctx, d),
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        match self {
            Entity::Nrf(x) => x.on_timer(ctx, action),
            Entity::Amf(x) => x.on_timer(ctx, action),
            Entity::Smf(x) => x.on_timer(ctx, action),
            Entity::Ausf(x) => x.on_timer(ctx, action),
            Entity::Udm(x) => x.on_timer(ctx, action),
            Entity::Udr(x) => x.on_timer(ctx, action),
            Entity::Pcf(x) => x.on_timer(ctx, action),
            Entity::Plain(x) => x.on_timer(ctx, action),
            Entity::Upf(x) => x.on_timer(ctx, action),
            Entity::Nwdaf(x) => x.on_timer(ctx, action),
            Entity::Gnb(x) => x.on_timer(ctx, action),
            Entity::UeHost(_) | Entity::App(_) => {}
        }
    }

    fn agent(&self) -> Option<&NfAgent> {
        Some(match self {
            Entity::Amf(x) => &x.agent,
            Entity::Smf(x) => &x.agent,
            Entity::Ausf(x) => &x.agent,
            Entity::Udm(x) => &x.agent,
            Entity::Udr(x) => &x.agent,
            Entity::Pcf(x) => &x.agent,
            Entity::Plain(x) => &x.agent,
            Entity::Upf(x) => &x.agent,
            Entity::Nwdaf(x) => &x.agent,
            _ => return None,
        })
    }

    fn agent_mut(&mut self) -> Option<&mut NfAgent> {
        Some(match self {
            Entity::Amf(x) => &mut x.agent,
            Entity::Smf(x) => &mut x.agent,
            Entity::Ausf(x) => &mut x.agent,
            Entity::Udm(x) => &mut x.agent,
            Entity::Udr(x) => &mut x.agent,
            Entity::Pcf(x) => &mut x.agent,
            Entity::Plain(x) => &mut x.agent,
            Entity::Upf(x) => &mut x.agent,
            Entity::Nwdaf(x) => &mut x.agent,
            _ => return None,
        })
    }
}

#[derive(Debug)]
struct World {
    entities: BTreeMap<Ipv4Addr, Entity>,
    book: AddressBook,
    params: crate::topology::SimParams,
    routes: DnRoutes,
    faults: Vec<Fault>,
}

/// A booted (or bootable) end-to-end network.
pub struct Simulator {
    topology: TopologyConfig,
    net: Net,
    world: World,
    nwdaf: Nwdaf,
    tap: Receiver<TapRecord>,
    booted: bool,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("now", &self.net.now())
            .field("entities", &self.world.entities.len())
            .field("events", &self.nwdaf.store().len())
            .finish()
    }
}

fn first_linked(topo: &TopologyConfig, name: &str, kind: EntityKind) -> Vec<Ipv4Addr> {
    topo.links
        .iter()
        .filter_map(|l| {
            let other = if l.a == name {
                &l.b
            } else if l.b == name {
                &l.a
            } else {
                return None;
            };
            topo.entity(other).filter(|e| e.kind == kind).map(|e| e.ip)
        })
        .collect()
}

impl Simulator {
    /// Builds every entity and link and attaches the analytics tap. Nothing
    /// is sent until [`Simulator::boot`].
    pub fn new(topology: TopologyConfig, seed: u64) -> Result<Self, SimError> {
        topology.validate()?;
        let params = topology.params.clone();
        let mut net = Net::new(seed);
        let (tx, rx) = channel();
        net.register_tap(Box::new(tx));

        let mut book = AddressBook::default();
        for e in &topology.entities {
            book.insert(&e.name, e.ip, Role::Entity(e.kind));
        }
        book.insert(APP_SERVER_NAME, params.app_server_ip, Role::AppServer);

        let nrf_ip = topology.entities_of(EntityKind::Nf(NfType::Nrf)).next().map(|e| e.ip);
        let mut entities = BTreeMap::new();
        for e in &topology.entities {
            let agent = |t| NfAgent::new(&e.name, t, e.ip, nrf_ip);
            let ent = match e.kind {
                EntityKind::Nf(NfType::Nrf) => Entity::Nrf(Nrf::new(&e.name, e.ip, params.heartbeat_ms)),
                EntityKind::Nf(NfType::Amf) => Entity::Amf(Amf::new(agent(NfType::Amf))),
                EntityKind::Nf(NfType::Smf) => Entity::Smf(Smf::new(agent(NfType::Smf), params.ue_pool)),
                EntityKind::Nf(NfType::Ausf) => Entity::Ausf(Ausf::new(agent(NfType::Ausf))),
                EntityKind::Nf(NfType::Udm) => Entity::Udm(Udm::new(agent(NfType::Udm))),
                EntityKind::Nf(NfType::Udr) => {
                    Entity::Udr(Udr::new(agent(NfType::Udr), topology.subscribers.iter().cloned()))
                }
                EntityKind::Nf(NfType::Pcf) => Entity::Pcf(Pcf::new(agent(NfType::Pcf))),
                EntityKind::Nf(NfType::Upf) => Entity::Upf(Upf::new(agent(NfType::Upf))),
                EntityKind::Nf(NfType::Nwdaf) => Entity::Nwdaf(NwdafNode::new(agent(NfType::Nwdaf))),
                EntityKind::Nf(t @ (NfType::Nssf | NfType::Bsf)) => Entity::Plain(PlainNf { agent: agent(t) }),
                EntityKind::Gnb => {
                    let amf = first_linked(&topology, &e.name, EntityKind::Nf(NfType::Amf)).first().copied();
                    Entity::Gnb(Gnb::new(&e.name, e.ip, amf))
                }
                EntityKind::Ue => {
                    let gnbs = first_linked(&topology, &e.name, EntityKind::Gnb);
                    Entity::UeHost(UeHost::new(&e.name, e.ip, gnbs, params.app_server_ip))
                }
            };
            entities.insert(e.ip, ent);
        }
        entities.insert(
            params.app_server_ip,
            Entity::App(AppServer::new(APP_SERVER_NAME, params.app_server_ip, &topology.documents)),
        );

        for l in &topology.links {
            let a = topology.entity(&l.a).expect("validated");
            let b = topology.entity(&l.b).expect("validated");
            net.add_link(Link::new(
                l.id().as_str(),
                EntityAddr::new(&a.name, a.ip),
                EntityAddr::new(&b.name, b.ip),
                l.latency_ms,
                l.loss_prob,
                l.reliable,
            )?)?;
        }
        let server = EntityAddr::new(APP_SERVER_NAME, params.app_server_ip);
        for upf in topology.entities_of(EntityKind::Nf(NfType::Upf)) {
            let id = format!("{}-{}", upf.name, APP_SERVER_NAME);
            net.add_link(Link::lossless(&id, EntityAddr::new(&upf.name, upf.ip), server.clone(), params.n6_latency_ms))?;
        }

        Ok(Simulator {
            topology,
            net,
            world: World {
                entities,
                book,
                params,
                routes: DnRoutes::new(),
                faults: Vec::new(),
            },
            nwdaf: Nwdaf::new(),
            tap: rx,
            booted: false,
        })
    }

    /// Brings the core up: NRF registration, discovery, PFCP associations for
    /// every linked SMF/UPF pair and NG setup for every gNB. Returns with the
    /// clock at [`BOOT_DONE_AT`].
    pub fn boot(&mut self) -> Result<(), SimError> {
        if self.booted {
            return Ok(());
        }
        self.booted = true;
        let hb = self.world.params.heartbeat_ms;
        let mut timers = Vec::new();
        for (ip, e) in &self.world.entities {
            match e {
                Entity::Nrf(_) => timers.push((hb, *ip, TimerAction::NrfSweep)),
                Entity::Amf(_) => timers.push((AMF_REGISTER_AT, *ip, TimerAction::Register)),
                Entity::Gnb(_) => {}
                _ if e.agent().is_some() => timers.push((NF_REGISTER_AT, *ip, TimerAction::Register)),
                _ => {}
            }
            if e.agent().is_some_and(|a| !a.needs.is_empty()) {
                timers.push((DISCOVER_AT, *ip, TimerAction::Discover));
            }
        }
        for (at, owner, action) in timers {
            self.net.schedule_timer(at, Timer { owner, action })?;
        }
        self.run_until(PFCP_ASSOCIATE_AT)?;
        let pairs: Vec<(String, String)> = self
            .topology
            .entities_of(EntityKind::Nf(NfType::Smf))
            .flat_map(|s| {
                self.topology
                    .entities_of(EntityKind::Nf(NfType::Upf))
                    .filter(|u| self.topology.link(&s.name, &u.name).is_some())
                    .map(|u| (s.name.clone(), u.name.clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        for (smf, upf) in &pairs {
            self.send_association(smf, upf)?;
        }
        self.run_until(NG_SETUP_AT)?;
        let gnbs: Vec<Ipv4Addr> = self
            .world
            .entities
            .iter()
            .filter(|(_, e)| matches!(e, Entity::Gnb(g) if g.amf().is_some()))
            .map(|(ip, _)| *ip)
            .collect();
        for ip in &gnbs {
            self.net.schedule_timer(
                NG_SETUP_AT,
                Timer {
                    owner: *ip,
                    action: TimerAction::NgSetup,
                },
            )?;
        }
        self.run_until(BOOT_DONE_AT)?;
        for ip in gnbs {
            let Some(Entity::Gnb(g)) = self.world.entities.get(&ip) else { continue };
            if !g.is_registered() {
                let name = g.name().to_string();
                let cause = self
                    .world
                    .faults
                    .iter()
                    .rev()
                    .find(|f| f.entity == name)
                    .map(|f| f.detail.clone())
                    .unwrap_or_else(|| "no NG setup response".into());
                return Err(SimError::Config(format!("gNB {name}: {cause}")));
            }
        }
        Ok(())
    }

    fn drain(&mut self) {
        while let Ok(r) = self.tap.try_recv() {
            // rejections are counted by the store
            let _ = self.nwdaf.ingest(&r);
        }
    }

    fn step(&mut self, t_end: Millis) -> bool {
        let World {
            entities,
            book,
            params,
            routes,
            faults,
        } = &mut self.world;
        let nwdaf = &self.nwdaf;
        let progressed = self.net.step(t_end, &mut |net, fired| {
            let (ip, fired) = match fired {
                Fired::Delivery(d) => (d.to.ip, Fired::Delivery(d)),
                Fired::Timer(t) => (t.owner, Fired::Timer(t)),
            };
            let mut ctx = Ctx {
                net,
                book,
                params,
                routes,
                analytics: nwdaf,
                faults,
            };
            let Some(ent) = entities.get_mut(&ip) else {
                ctx.fault(ip, "event for an unknown address");
                return;
            };
            match fired {
                Fired::Delivery(d) => ent.on_delivery(&mut ctx, &d),
                Fired::Timer(t) => ent.on_timer(&mut ctx, t.action),
            }
        });
        self.drain();
        progressed
    }

    /// Processes every event up to and including `t`, then sets the clock to `t`.
    pub fn run_until(&mut self, t: Millis) -> Result<(), SimError> {
        if t < self.net.now() {
            return Err(NetError::TimeRegression {
                now: self.net.now(),
                requested: t,
            }
            .into());
        }
        while self.step(t) {}
        self.net.run_until(t, |_, _| {})?;
        Ok(())
    }

    pub fn run_for(&mut self, d: Millis) -> Result<(), SimError> {
        self.run_until(self.now() + d)
    }

    /// Processes events in time order until no packet is in flight. Timers
    /// due before the last delivery fire as usual.
    pub fn settle(&mut self) -> Result<(), SimError> {
        let mut n = 0;
        while self.net.pending_deliveries() > 0 {
            let Some(t) = self.net.next_event_time() else { break };
            if !self.step(t) {
                break;
            }
            n += 1;
            if n > SETTLE_LIMIT {
                return Err(SimError::Unsettled);
            }
        }
        Ok(())
    }

    /// Runs `f` against one entity with a handler context, outside the
    /// event loop.
    fn act<R>(&mut self, ip: Ipv4Addr, f: impl FnOnce(&mut Entity, &mut Ctx) -> R) -> Option<R> {
        let World {
            entities,
            book,
            params,
            routes,
            faults,
        } = &mut self.world;
        let ent = entities.get_mut(&ip)?;
        let mut ctx = Ctx {
            net: &mut self.net,
            book,
            params,
            routes,
            analytics: &self.nwdaf,
            faults,
        };
        let r = f(ent, &mut ctx);
        self.drain();
        Some(r)
    }

    fn ip_of(&self, name: &str) -> Result<Ipv4Addr, SimError> {
        self.world
            .book
            .ip_of(name)
            .ok_or_else(|| SimError::UnknownEntity(name.to_string()))
    }

    fn entity(&self, name: &str) -> Result<&Entity, SimError> {
        let ip = self.ip_of(name)?;
        self.world
            .entities
            .get(&ip)
            .ok_or_else(|| SimError::UnknownEntity(name.to_string()))
    }

    fn send_association(&mut self, smf: &str, upf: &str) -> Result<bool, SimError> {
        let smf_ip = self.ip_of(smf)?;
        let upf_ip = self.ip_of(upf)?;
        if !matches!(self.entity(upf)?, Entity::Upf(_)) {
            return Err(SimError::WrongKind {
                name: upf.to_string(),
                expected: "UPF",
            });
        }
        let upf_name = upf.to_string();
        match self.act(smf_ip, |e, ctx| match e {
            Entity::Smf(s) => Some(s.associate(ctx, upf_ip, &upf_name)),
            _ => None,
        }) {
            Some(Some(sent)) => Ok(sent),
            _ => Err(SimError::WrongKind {
                name: smf.to_string(),
                expected: "SMF",
            }),
        }
    }

    /// Establishes (or returns the existing) PFCP association for a pair.
    pub fn pfcp_associate(&mut self, smf: &str, upf: &str) -> Result<PfcpAssociation, SimError> {
        for name in [smf, upf] {
            let registered = self
                .nrf()
                .is_some_and(|n| n.is_registered(name));
            if !registered {
                return Err(SimError::Setup(format!("`{name}` is not registered with the NRF")));
            }
        }
        if self.send_association(smf, upf)? {
            self.settle()?;
        }
        let upf_ip = self.ip_of(upf)?;
        let a = self
            .smf(smf)?
            .association_with(upf_ip)
            .cloned()
            .ok_or_else(|| SimError::Setup(format!("no association {smf}-{upf}")))?;
        if a.state != AssocState::Active {
            return Err(SimError::Setup(format!("association {smf}-{upf} still pending")));
        }
        Ok(a)
    }

    /// Sends an NG setup request from `gnb` and waits for the answer.
    pub fn ng_setup(&mut self, gnb: &str) -> Result<GnbRegistration, SimError> {
        let ip = self.ip_of(gnb)?;
        let amf = match self.entity(gnb)? {
            Entity::Gnb(g) => g.amf().ok_or_else(|| SimError::Config(format!("gNB {gnb} has no AMF link")))?,
            _ => {
                return Err(SimError::WrongKind {
                    name: gnb.to_string(),
                    expected: "gNB",
                })
            }
        };
        let faults = self.world.faults.len();
        self.act(ip, |e, ctx| e.on_timer(ctx, TimerAction::NgSetup));
        self.settle()?;
        let registered = matches!(self.entity(gnb)?, Entity::Gnb(g) if g.is_registered());
        if !registered {
            let cause = self.world.faults[faults..]
                .iter()
                .find(|f| f.entity == gnb)
                .map(|f| f.detail.clone())
                .unwrap_or_else(|| "no response".into());
            return Err(SimError::Config(format!("gNB {gnb}: {cause}")));
        }
        let Some(Entity::Amf(a)) = self.world.entities.get(&amf) else {
            return Err(SimError::UnknownEntity("AMF".into()));
        };
        a.gnb_registrations()
            .find(|r| r.gnb_id == gnb)
            .cloned()
            .ok_or_else(|| SimError::Setup(format!("AMF holds no registration for {gnb}")))
    }

    fn ue_host_ip(&self) -> Result<Ipv4Addr, SimError> {
        self.world
            .entities
            .iter()
            .find(|(_, e)| matches!(e, Entity::UeHost(_)))
            .map(|(ip, _)| *ip)
            .ok_or_else(|| SimError::Config("topology has no UE host".into()))
    }

    fn host_op<R>(&mut self, f: impl FnOnce(&mut UeHost, &mut Ctx) -> Result<R, RanError>) -> Result<R, SimError> {
        let ip = self.ue_host_ip()?;
        match self.act(ip, |e, ctx| match e {
            Entity::UeHost(h) => Some(f(h, ctx)),
            _ => None,
        }) {
            Some(Some(r)) => Ok(r?),
            _ => Err(SimError::Config("topology has no UE host".into())),
        }
    }

    /// Adds a UE device to the (first) UE host, attached to its first gNB.
    pub fn add_ue(&mut self, ue_id: &str) -> Result<(), SimError> {
        self.host_op(|h, _| h.add_device(ue_id))
    }

    /// Sends the registration request without waiting; returns false when
    /// the UE is already registered.
    pub fn begin_registration(&mut self, ue_id: &str) -> Result<bool, SimError> {
        self.host_op(|h, ctx| h.register(ctx, ue_id))
    }

    pub fn register_ue(&mut self, ue_id: &str) -> Result<UeState, SimError> {
        if self.begin_registration(ue_id)? {
            self.settle()?;
        }
        let dev = self.ue(ue_id)?;
        match dev.state {
            UeState::Deregistered | UeState::Registering => Err(SimError::Rejected {
                ue: ue_id.to_string(),
                cause: dev.reject_cause.clone().unwrap_or_else(|| "no answer".into()),
            }),
            s => Ok(s),
        }
    }

    pub fn begin_session(&mut self, ue_id: &str, kind: RedundancyKind) -> Result<(), SimError> {
        self.host_op(|h, ctx| h.establish(ctx, ue_id, kind))
    }

    pub fn establish_session(&mut self, ue_id: &str, kind: RedundancyKind) -> Result<PduSession, SimError> {
        self.begin_session(ue_id, kind)?;
        self.settle()?;
        let dev = self.ue(ue_id)?;
        if dev.state != UeState::SessionActive {
            return Err(SimError::Session {
                ue: ue_id.to_string(),
                cause: dev.reject_cause.clone().unwrap_or_else(|| "no answer".into()),
            });
        }
        self.session(ue_id)
            .ok_or_else(|| SimError::Session {
                ue: ue_id.to_string(),
                cause: "SMF holds no session".into(),
            })
    }

    pub fn begin_request(&mut self, ue_id: &str, doc: &str) -> Result<(), SimError> {
        self.host_op(|h, ctx| h.request_document(ctx, ue_id, doc))
    }

    /// Issues a GET and waits for the transfer to finish.
    pub fn request_document(&mut self, ue_id: &str, doc: &str) -> Result<TransferResult, SimError> {
        self.begin_request(ue_id, doc)?;
        self.settle()?;
        let t = self
            .ue(ue_id)?
            .transfers()
            .last()
            .cloned()
            .expect("request recorded a transfer");
        match t.status {
            TransferStatus::Failed => Err(SimError::Transfer {
                doc: doc.to_string(),
                cause: t.error.unwrap_or_default(),
            }),
            _ => Ok(t),
        }
    }

    /// Sends one RLS message from a UE to a named gNB.
    pub fn rls_transmit(&mut self, ue_id: &str, gnb: &str, msg: &TlvMessage) -> Result<(), SimError> {
        let gnb_ip = self.ip_of(gnb)?;
        self.host_op(|h, ctx| h.rls_transmit(ctx, ue_id, gnb_ip, msg))
    }

    /// Subscribes a registered NF to periodic KPI notifications from the
    /// analytics function. Returns the subscription id.
    pub fn subscribe_analytics(&mut self, consumer: &str, kind: KpiKind, period_ms: Millis) -> Result<u32, SimError> {
        let registered = self.nrf().is_some_and(|n| n.is_registered(consumer));
        let ip = self.world.book.ip_of(consumer);
        let (Some(ip), true) = (ip, registered) else {
            return Err(SimError::UnknownConsumer(consumer.to_string()));
        };
        let nwdaf = self
            .world
            .entities
            .iter()
            .find(|(_, e)| matches!(e, Entity::Nwdaf(_)))
            .map(|(ip, _)| *ip)
            .ok_or_else(|| SimError::Config("topology has no NWDAF".into()))?;
        let before = self
            .world
            .entities
            .get(&ip)
            .and_then(Entity::agent)
            .map_or(0, |a| a.analytics_subscriptions.len());
        let req = TlvMessage::new(MsgKind::AnalyticsSubscribeReq)
            .with_str(Tag::NfId, consumer)
            .with_u8(Tag::KpiKind, kind.code())
            .with_u32(Tag::Period, period_ms as u32);
        let sent = self.act(ip, |_, ctx| ctx.send_msg(ip, nwdaf, Protocol::Sbi, &req));
        if sent != Some(true) {
            return Err(SimError::Setup(format!("{consumer} cannot reach the NWDAF")));
        }
        self.settle()?;
        let agent = self.world.entities.get(&ip).and_then(Entity::agent);
        match agent.map(|a| &a.analytics_subscriptions) {
            Some(subs) if subs.len() > before => Ok(*subs.last().expect("non-empty")),
            _ => Err(SimError::Setup("subscription refused".into())),
        }
    }

    /// Deregisters an NF from the NRF.
    pub fn deregister_nf(&mut self, name: &str) -> Result<(), SimError> {
        let ip = self.ip_of(name)?;
        self.act(ip, |e, ctx| {
            if let Some(a) = e.agent_mut() {
                a.deregister(ctx);
            }
        });
        self.settle()
    }

    /// Stops an NF's heartbeats without deregistering it.
    pub fn silence_nf(&mut self, name: &str) -> Result<(), SimError> {
        let ip = self.ip_of(name)?;
        match self.world.entities.get_mut(&ip).and_then(Entity::agent_mut) {
            Some(a) => {
                a.silent = true;
                Ok(())
            }
            None => Err(SimError::WrongKind {
                name: name.to_string(),
                expected: "network function",
            }),
        }
    }

    /// Sends a raw packet from one entity over its link to a neighbour.
    pub fn inject(&mut self, from: &str, to: &str, packet: SimPacket) -> Result<(), SimError> {
        let (a, b) = (self.ip_of(from)?, self.ip_of(to)?);
        let link = self
            .net
            .link_between(a, b)
            .cloned()
            .ok_or_else(|| SimError::Config(format!("no link {from}-{to}")))?;
        self.net.send(&link, packet)?;
        self.drain();
        Ok(())
    }

    pub fn now(&self) -> Millis {
        self.net.now()
    }

    pub fn seed(&self) -> u64 {
        self.net.seed()
    }

    pub fn topology(&self) -> &TopologyConfig {
        &self.topology
    }

    pub fn total_sends(&self) -> u64 {
        self.net.total_sends()
    }

    pub fn link_stats(&self, id: &str) -> Option<LinkStats> {
        self.net.link_stats(&id.into())
    }

    pub fn link_ids(&self) -> Vec<String> {
        self.net.links().map(|l| l.id.to_string()).collect()
    }

    pub fn analytics(&self) -> &Nwdaf {
        &self.nwdaf
    }

    pub fn faults(&self) -> &[Fault] {
        &self.world.faults
    }

    pub fn role_of(&self, ip: Ipv4Addr) -> Option<Role> {
        self.world.book.role_of(ip)
    }

    pub fn name_of(&self, ip: Ipv4Addr) -> Option<&str> {
        self.world.book.name_of(ip)
    }

    pub fn nrf(&self) -> Option<&Nrf> {
        self.world.entities.values().find_map(|e| match e {
            Entity::Nrf(n) => Some(n),
            _ => None,
        })
    }

    pub fn amf(&self) -> Option<&Amf> {
        self.world.entities.values().find_map(|e| match e {
            Entity::Amf(a) => Some(a),
            _ => None,
        })
    }

    pub fn smf(&self, name: &str) -> Result<&Smf, SimError> {
        match self.entity(name)? {
            Entity::Smf(s) => Ok(s),
            _ => Err(SimError::WrongKind {
                name: name.to_string(),
                expected: "SMF",
            }),
        }
    }

    pub fn smfs(&self) -> impl Iterator<Item = &Smf> {
        self.world.entities.values().filter_map(|e| match e {
            Entity::Smf(s) => Some(s),
            _ => None,
        })
    }

    pub fn upf(&self, name: &str) -> Result<&Upf, SimError> {
        match self.entity(name)? {
            Entity::Upf(u) => Ok(u),
            _ => Err(SimError::WrongKind {
                name: name.to_string(),
                expected: "UPF",
            }),
        }
    }

    pub fn gnb(&self, name: &str) -> Result<&Gnb, SimError> {
        match self.entity(name)? {
            Entity::Gnb(g) => Ok(g),
            _ => Err(SimError::WrongKind {
                name: name.to_string(),
                expected: "gNB",
            }),
        }
    }

    pub fn ue_host(&self) -> Option<&UeHost> {
        self.world.entities.values().find_map(|e| match e {
            Entity::UeHost(h) => Some(h),
            _ => None,
        })
    }

    pub fn ue(&self, ue_id: &str) -> Result<&UeDevice, SimError> {
        self.ue_host()
            .and_then(|h| h.device(ue_id))
            .ok_or_else(|| SimError::Ran(RanError::UnknownUe(ue_id.to_string())))
    }

    pub fn app_server(&self) -> &AppServer {
        match self.world.entities.get(&self.world.params.app_server_ip) {
            Some(Entity::App(a)) => a,
            _ => unreachable!("app server is always present"),
        }
    }

    pub fn nwdaf_node(&self) -> Option<&NwdafNode> {
        self.world.entities.values().find_map(|e| match e {
            Entity::Nwdaf(n) => Some(n),
            _ => None,
        })
    }

    /// Heartbeats sent and analytics notifications received by an NF.
    pub fn nf_counters(&self, name: &str) -> Result<(u64, u64), SimError> {
        self.entity(name)?
            .agent()
            .map(|a| (a.heartbeats_sent, a.analytics_received))
            .ok_or_else(|| SimError::WrongKind {
                name: name.to_string(),
                expected: "network function",
            })
    }

    /// The SMF session held for a UE, from whichever SMF owns it.
    pub fn session(&self, ue_id: &str) -> Option<PduSession> {
        self.smfs().find_map(|s| s.session_for(ue_id).cloned())
    }

    /// Every transfer recorded by every UE, in UE id then request order.
    pub fn transfers(&self) -> Vec<TransferResult> {
        self.ue_host()
            .map(|h| h.devices().flat_map(|d| d.transfers().cloned()).collect())
            .unwrap_or_default()
    }

    pub fn export_events(&self, path: &std::path::Path) -> Result<(), crate::nwdaf::StoreError> {
        self.nwdaf.store().export(path)
    }

    pub fn events_tsv(&self) -> String {
        let mut out = Vec::new();
        self.nwdaf.store().write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("event lines are UTF-8")
    }
}
