use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use crate::nwdaf::Nwdaf;
use crate::simnet::{Delivery, LinkId, Millis, Network};
use crate::topology::{EntityKind, SimParams};
use crate::wirefmt::{Protocol, SimPacket, TlvMessage};

pub const NGAP_PORT: u16 = 38412;
pub const PFCP_PORT: u16 = 8805;
pub const GTPU_PORT: u16 = 2152;
pub const RLS_PORT: u16 = 4997;
pub const APP_PORT: u16 = 80;
pub const UE_APP_PORT: u16 = 49152;

pub const APP_SERVER_NAME: &str = "AppServer";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TimerAction {
    Register,
    Discover,
    Heartbeat,
    NrfSweep,
    NgSetup,
    NgKeepalive,
    AnalyticsNotify(u32),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Timer {
    pub owner: Ipv4Addr,
    pub action: TimerAction,
}

pub(crate) type Net = Network<Timer>;

/// Something an entity could not do; surfaced in run summaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub at: Millis,
    pub entity: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Entity(EntityKind),
    AppServer,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct AddressBook {
    by_ip: BTreeMap<Ipv4Addr, (String, Role)>,
    by_name: BTreeMap<String, Ipv4Addr>,
}

impl AddressBook {
    pub fn insert(&mut self, name: &str, ip: Ipv4Addr, role: Role) {
        self.by_ip.insert(ip, (name.to_string(), role));
        self.by_name.insert(name.to_string(), ip);
    }

    pub fn ip_of(&self, name: &str) -> Option<Ipv4Addr> {
        self.by_name.get(name).copied()
    }

    pub fn name_of(&self, ip: Ipv4Addr) -> Option<&str> {
        self.by_ip.get(&ip).map(|(n, _)| n.as_str())
    }

    pub fn role_of(&self, ip: Ipv4Addr) -> Option<Role> {
        self.by_ip.get(&ip).map(|(_, r)| *r)
    }
}

/// Data-network routes: UE address to the UPF(s) that announced it.
pub(crate) type DnRoutes = BTreeMap<Ipv4Addr, Vec<Ipv4Addr>>;

/// What an entity handler can reach while it runs.
pub(crate) struct Ctx<'a> {
    pub net: &'a mut Net,
    pub book: &'a AddressBook,
    pub params: &'a SimParams,
    pub routes: &'a mut DnRoutes,
    pub analytics: &'a Nwdaf,
    pub faults: &'a mut Vec<Fault>,
}

pub(crate) fn port_for(proto: Protocol, sbi_port: u16) -> u16 {
    match proto {
        Protocol::Sbi => sbi_port,
        Protocol::Ngap | Protocol::Nas => NGAP_PORT,
        Protocol::Pfcp => PFCP_PORT,
        Protocol::Gtpu => GTPU_PORT,
        Protocol::Rls => RLS_PORT,
        Protocol::App => APP_PORT,
    }
}

impl Ctx<'_> {
    pub fn now(&self) -> Millis {
        self.net.now()
    }

    pub fn fault(&mut self, at_ip: Ipv4Addr, detail: impl Into<String>) {
        let entity = self.book.name_of(at_ip).unwrap_or("?").to_string();
        self.faults.push(Fault {
            at: self.net.now(),
            entity,
            detail: detail.into(),
        });
    }

    pub fn link(&mut self, from: Ipv4Addr, to: Ipv4Addr) -> Option<LinkId> {
        let link = self.net.link_between(from, to).cloned();
        if link.is_none() {
            let to_name = self.book.name_of(to).unwrap_or("?").to_string();
            self.fault(from, format!("no link to {to_name} ({to})"));
        }
        link
    }

    /// Encodes `msg` and sends it directly to a neighbour.
    pub fn send_msg(&mut self, from: Ipv4Addr, to: Ipv4Addr, proto: Protocol, msg: &TlvMessage) -> bool {
        let payload = match msg.encode() {
            Ok(p) => p,
            Err(e) => {
                self.fault(from, format!("cannot encode {:?}: {e}", msg.msg_kind()));
                return false;
            }
        };
        let port = port_for(proto, self.params.sbi_port);
        self.send_packet(from, to, SimPacket::new(proto, (from, port), (to, port), payload))
    }

    /// Sends a packet over the link joining `from` and `next_hop`.
    pub fn send_packet(&mut self, from: Ipv4Addr, next_hop: Ipv4Addr, packet: SimPacket) -> bool {
        let Some(link) = self.link(from, next_hop) else {
            return false;
        };
        match self.net.send(&link, packet) {
            Ok(_) => true,
            Err(e) => {
                self.fault(from, e.to_string());
                false
            }
        }
    }

    pub fn timer(&mut self, at: Millis, owner: Ipv4Addr, action: TimerAction) {
        if let Err(e) = self.net.schedule_timer(at, Timer { owner, action }) {
            self.fault(owner, e.to_string());
        }
    }

    pub fn eliminated(&mut self, d: &Delivery) {
        self.net.report_elimination(d);
    }

    pub fn discard(&mut self, d: &Delivery, reason: &'static str) {
        self.net.report_discard(d, reason);
    }
}
