use std::fmt;
use std::net::Ipv4Addr;
use std::sync::Arc;

use super::{Millis, NetError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(Arc<str>);

impl LinkId {
    pub fn new(id: &str) -> Self {
        LinkId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LinkId {
    fn from(s: &str) -> Self {
        LinkId::new(s)
    }
}

/// Name and address of a network entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityAddr {
    pub name: Arc<str>,
    pub ip: Ipv4Addr,
}

impl EntityAddr {
    pub fn new(name: &str, ip: Ipv4Addr) -> Self {
        EntityAddr {
            name: Arc::from(name),
            ip,
        }
    }
}

impl fmt::Display for EntityAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.ip)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub endpoint_a: EntityAddr,
    pub endpoint_b: EntityAddr,
    pub latency_ms: Millis,
    pub loss_prob: f64,
    /// Reliable ordered delivery (SCTP-like); `loss_prob` is ignored.
    pub reliable: bool,
}

impl Link {
    pub fn new(
        id: impl Into<LinkId>,
        endpoint_a: EntityAddr,
        endpoint_b: EntityAddr,
        latency_ms: Millis,
        loss_prob: f64,
        reliable: bool,
    ) -> Result<Self, NetError> {
        let id = id.into();
        if !(0.0..=1.0).contains(&loss_prob) {
            return Err(NetError::InvalidLink {
                link: id.to_string(),
                reason: format!("loss probability {loss_prob} outside [0, 1]"),
            });
        }
        if endpoint_a.ip == endpoint_b.ip {
            return Err(NetError::InvalidLink {
                link: id.to_string(),
                reason: "endpoints share an address".into(),
            });
        }
        Ok(Link {
            id,
            endpoint_a,
            endpoint_b,
            latency_ms,
            loss_prob,
            reliable,
        })
    }

    pub fn lossless(id: &str, a: EntityAddr, b: EntityAddr, latency_ms: Millis) -> Self {
        Link::new(id, a, b, latency_ms, 0.0, false).expect("valid lossless link")
    }

    /// Returns the endpoint at `ip`, if any.
    pub fn endpoint(&self, ip: Ipv4Addr) -> Option<&EntityAddr> {
        if self.endpoint_a.ip == ip {
            Some(&self.endpoint_a)
        } else if self.endpoint_b.ip == ip {
            Some(&self.endpoint_b)
        } else {
            None
        }
    }

    pub fn peer_of(&self, ip: Ipv4Addr) -> Option<&EntityAddr> {
        if self.endpoint_a.ip == ip {
            Some(&self.endpoint_b)
        } else if self.endpoint_b.ip == ip {
            Some(&self.endpoint_a)
        } else {
            None
        }
    }

    /// Works out which way a packet travels. A packet must either originate
    /// at the sending endpoint or terminate at the receiving one; routed
    /// traffic (a UE address crossing an N6 hop) satisfies one of the two.
    pub fn direction(
        &self,
        src: Ipv4Addr,
        dst: Ipv4Addr,
    ) -> Option<(&EntityAddr, &EntityAddr)> {
        let (a, b) = (&self.endpoint_a, &self.endpoint_b);
        if src == a.ip {
            Some((a, b))
        } else if src == b.ip {
            Some((b, a))
        } else if dst == b.ip {
            Some((a, b))
        } else if dst == a.ip {
            Some((b, a))
        } else {
            None
        }
    }
}
