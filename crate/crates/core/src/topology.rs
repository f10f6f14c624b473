//! Topology configuration: entities, links, subscribers, documents and
//! run parameters, loaded from a sectioned text file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::core_cp::NfType;
use crate::simnet::Millis;

/// Largest segment the application server may emit.
pub const MAX_SEGMENT_BYTES: usize = 65_000;
pub const MAX_ID_LEN: usize = 64;

const DEFAULT_TOPOLOGY: &str = include_str!("../data/sample.topo");
const DUAL_GNB_TOPOLOGY: &str = include_str!("../data/dual_gnb.topo");

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("cannot read topology file")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Nf(NfType),
    Gnb,
    Ue,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Nf(t) => t.as_str(),
            EntityKind::Gnb => "gNB",
            EntityKind::Ue => "UE",
        }
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gnb" => Ok(EntityKind::Gnb),
            "ue" => Ok(EntityKind::Ue),
            other => other.parse().map(EntityKind::Nf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpec {
    pub name: String,
    pub kind: EntityKind,
    pub ip: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub latency_ms: Millis,
    pub loss_prob: f64,
    pub reliable: bool,
}

impl LinkSpec {
    pub fn id(&self) -> String {
        format!("{}-{}", self.a, self.b)
    }

    pub fn joins(&self, x: &str, y: &str) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSpec {
    pub name: String,
    pub size: usize,
}

/// An IPv4 prefix such as `10.45.0.0/16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ipv4Cidr {
    pub base: Ipv4Addr,
    pub prefix: u8,
}

impl Ipv4Cidr {
    pub fn new(base: Ipv4Addr, prefix: u8) -> Result<Self, String> {
        if prefix > 32 {
            return Err(format!("prefix length {prefix} exceeds 32"));
        }
        let net = u32::from(base) & Self::mask_for(prefix);
        Ok(Ipv4Cidr {
            base: Ipv4Addr::from(net),
            prefix,
        })
    }

    fn mask_for(prefix: u8) -> u32 {
        if prefix == 0 {
            0
        } else {
            u32::MAX << (32 - prefix)
        }
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        u32::from(ip) & Self::mask_for(self.prefix) == u32::from(self.base)
    }

    /// Number of addresses in the prefix.
    pub fn size(&self) -> u64 {
        1u64 << (32 - self.prefix as u32)
    }
}

impl fmt::Display for Ipv4Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.prefix)
    }
}

impl FromStr for Ipv4Cidr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ip, len) = s
            .split_once('/')
            .ok_or_else(|| format!("`{s}` is not in a.b.c.d/len form"))?;
        let ip: Ipv4Addr = ip.trim().parse().map_err(|e| format!("`{ip}`: {e}"))?;
        let len: u8 = len.trim().parse().map_err(|e| format!("`{len}`: {e}"))?;
        Ipv4Cidr::new(ip, len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub sbi_port: u16,
    pub heartbeat_ms: Millis,
    pub segment_bytes: usize,
    pub ue_pool: Ipv4Cidr,
    /// Data-network server reached over N6 from every UPF.
    pub app_server_ip: Ipv4Addr,
    pub n6_latency_ms: Millis,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            sbi_port: 7777,
            heartbeat_ms: 3333,
            segment_bytes: 64_000,
            ue_pool: Ipv4Cidr::new(Ipv4Addr::new(10, 45, 0, 0), 16).unwrap(),
            app_server_ip: Ipv4Addr::new(192, 168, 0, 40),
            n6_latency_ms: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub entities: Vec<EntitySpec>,
    pub links: Vec<LinkSpec>,
    pub subscribers: Vec<String>,
    pub documents: Vec<DocumentSpec>,
    pub params: SimParams,
}

impl TopologyConfig {
    pub fn entity(&self, name: &str) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn entity_by_ip(&self, ip: Ipv4Addr) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| e.ip == ip)
    }

    pub fn entities_of(&self, kind: EntityKind) -> impl Iterator<Item = &EntitySpec> {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    pub fn link(&self, a: &str, b: &str) -> Option<&LinkSpec> {
        self.links.iter().find(|l| l.joins(a, b))
    }

    pub fn link_mut(&mut self, a: &str, b: &str) -> Option<&mut LinkSpec> {
        self.links.iter_mut().find(|l| l.joins(a, b))
    }

    pub fn document(&self, name: &str) -> Option<&DocumentSpec> {
        self.documents.iter().find(|d| d.name == name)
    }

    /// Drops an entity together with every link touching it.
    pub fn remove_entity(&mut self, name: &str) -> bool {
        let before = self.entities.len();
        self.entities.retain(|e| e.name != name);
        self.links.retain(|l| l.a != name && l.b != name);
        before != self.entities.len()
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let invalid = |m: String| Err(TopologyError::Invalid(m));
        let mut names = BTreeSet::new();
        let mut ips = BTreeSet::new();
        for e in &self.entities {
            if e.name.is_empty() || e.name.len() > MAX_ID_LEN {
                return invalid(format!("entity name `{}` must be 1..={MAX_ID_LEN} chars", e.name));
            }
            if !names.insert(e.name.as_str()) {
                return invalid(format!("duplicate entity name `{}`", e.name));
            }
            if !ips.insert(e.ip) {
                return invalid(format!("duplicate address {}", e.ip));
            }
            if self.params.ue_pool.contains(e.ip) {
                return invalid(format!("{} address {} lies in the UE pool", e.name, e.ip));
            }
        }
        let app = self.params.app_server_ip;
        if ips.contains(&app) || self.params.ue_pool.contains(app) {
            return invalid(format!("application server address {app} collides"));
        }
        let mut link_ids = BTreeSet::new();
        for l in &self.links {
            for end in [&l.a, &l.b] {
                if !names.contains(end.as_str()) {
                    return invalid(format!("link {} references unknown entity `{end}`", l.id()));
                }
            }
            if l.a == l.b {
                return invalid(format!("link {} joins an entity to itself", l.id()));
            }
            if !(0.0..=1.0).contains(&l.loss_prob) {
                return invalid(format!("link {} loss {} outside [0, 1]", l.id(), l.loss_prob));
            }
            if !link_ids.insert(l.id()) {
                return invalid(format!("duplicate link {}", l.id()));
            }
        }
        if self.params.segment_bytes == 0 || self.params.segment_bytes > MAX_SEGMENT_BYTES {
            return invalid(format!(
                "segment_bytes {} must be in 1..={MAX_SEGMENT_BYTES}",
                self.params.segment_bytes
            ));
        }
        if self.params.heartbeat_ms == 0 {
            return invalid("heartbeat_ms must be positive".into());
        }
        let mut docs = BTreeSet::new();
        for d in &self.documents {
            if d.name.is_empty() || d.name.len() > MAX_ID_LEN {
                return invalid(format!("document name `{}` must be 1..={MAX_ID_LEN} chars", d.name));
            }
            if !docs.insert(d.name.as_str()) {
                return invalid(format!("duplicate document `{}`", d.name));
            }
        }
        let mut subs = BTreeSet::new();
        for s in &self.subscribers {
            if s.is_empty() || s.len() > MAX_ID_LEN {
                return invalid(format!("subscriber id `{s}` must be 1..={MAX_ID_LEN} chars"));
            }
            if !subs.insert(s.as_str()) {
                return invalid(format!("duplicate subscriber `{s}`"));
            }
        }
        if self.entities_of(EntityKind::Nf(NfType::Nrf)).count() != 1 {
            return invalid("exactly one NRF is required".into());
        }
        Ok(())
    }
}

impl FromStr for TopologyConfig {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_topology(s)
    }
}

/// Reads and validates a topology file.
pub fn load_topology(path: impl AsRef<Path>) -> Result<TopologyConfig, TopologyError> {
    let text = std::fs::read_to_string(path)?;
    parse_topology(&text)
}

/// The bundled sample deployment (13 entities).
pub fn default_topology() -> TopologyConfig {
    parse_topology(DEFAULT_TOPOLOGY).expect("bundled topology is valid")
}

/// The sample deployment plus a second gNB reachable from the UE host.
pub fn dual_gnb_topology() -> TopologyConfig {
    parse_topology(DUAL_GNB_TOPOLOGY).expect("bundled topology is valid")
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Entities,
    Links,
    Subscribers,
    Documents,
    Params,
}

pub fn parse_topology(text: &str) -> Result<TopologyConfig, TopologyError> {
    let mut cfg = TopologyConfig {
        entities: Vec::new(),
        links: Vec::new(),
        subscribers: Vec::new(),
        documents: Vec::new(),
        params: SimParams::default(),
    };
    let mut section = None;
    let mut seen_params = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| TopologyError::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(match name.trim() {
                "entities" => Section::Entities,
                "links" => Section::Links,
                "subscribers" => Section::Subscribers,
                "documents" => Section::Documents,
                "params" => Section::Params,
                other => return Err(err(format!("unknown section [{other}]"))),
            });
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let want = |n: usize| {
            if fields.len() == n {
                Ok(())
            } else {
                Err(err(format!("expected {n} fields, found {}", fields.len())))
            }
        };
        match section {
            None => return Err(err("content before the first section".into())),
            Some(Section::Entities) => {
                want(3)?;
                cfg.entities.push(EntitySpec {
                    kind: fields[0].parse().map_err(err)?,
                    name: fields[1].to_string(),
                    ip: fields[2]
                        .parse()
                        .map_err(|e| err(format!("address `{}`: {e}", fields[2])))?,
                });
            }
            Some(Section::Links) => {
                want(5)?;
                cfg.links.push(LinkSpec {
                    a: fields[0].to_string(),
                    b: fields[1].to_string(),
                    latency_ms: fields[2]
                        .parse()
                        .map_err(|e| err(format!("latency `{}`: {e}", fields[2])))?,
                    loss_prob: fields[3]
                        .parse()
                        .map_err(|e| err(format!("loss `{}`: {e}", fields[3])))?,
                    reliable: fields[4]
                        .parse()
                        .map_err(|e| err(format!("reliable `{}`: {e}", fields[4])))?,
                });
            }
            Some(Section::Subscribers) => match fields.len() {
                1 => cfg.subscribers.push(fields[0].to_string()),
                2 => {
                    let count: usize = fields[1]
                        .parse()
                        .map_err(|e| err(format!("count `{}`: {e}", fields[1])))?;
                    cfg.subscribers
                        .extend(expand_range(fields[0], count).map_err(err)?);
                }
                n => return Err(err(format!("expected 1 or 2 fields, found {n}"))),
            },
            Some(Section::Documents) => {
                want(2)?;
                cfg.documents.push(DocumentSpec {
                    name: fields[0].to_string(),
                    size: fields[1]
                        .parse()
                        .map_err(|e| err(format!("size `{}`: {e}", fields[1])))?,
                });
            }
            Some(Section::Params) => {
                want(2)?;
                let (key, value) = (fields[0], fields[1]);
                if seen_params.insert(key.to_string(), line_no).is_some() {
                    return Err(err(format!("parameter `{key}` set twice")));
                }
                let bad = |e: &dyn fmt::Display| err(format!("{key} `{value}`: {e}"));
                let p = &mut cfg.params;
                match key {
                    "sbi_port" => p.sbi_port = value.parse().map_err(|e| bad(&e))?,
                    "heartbeat_ms" => p.heartbeat_ms = value.parse().map_err(|e| bad(&e))?,
                    "segment_bytes" => p.segment_bytes = value.parse().map_err(|e| bad(&e))?,
                    "ue_pool" => p.ue_pool = value.parse().map_err(|e| bad(&e))?,
                    "app_server_ip" => p.app_server_ip = value.parse().map_err(|e| bad(&e))?,
                    "n6_latency_ms" => p.n6_latency_ms = value.parse().map_err(|e| bad(&e))?,
                    other => return Err(err(format!("unknown parameter `{other}`"))),
                }
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Expands `prefix-000123` with a count into sequential ids keeping the
/// digit width.
fn expand_range(first: &str, count: usize) -> Result<Vec<String>, String> {
    let digits = first.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return Err(format!("`{first}` has no trailing number to count from"));
    }
    let (stem, num) = first.split_at(first.len() - digits);
    let start: u128 = num.parse().map_err(|e| format!("`{num}`: {e}"))?;
    (0..count as u128)
        .map(|i| {
            let id = format!("{stem}{:0width$}", start + i, width = digits);
            if id.len() == first.len() {
                Ok(id)
            } else {
                Err(format!("range from `{first}` overflows its digit width"))
            }
        })
        .collect()
}
