use std::net::Ipv4Addr;

use crate::wirefmt::WireError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleAction {
    /// Encapsulate toward a tunnel endpoint.
    Encapsulate { teid: u32, peer: Ipv4Addr },
    /// Decapsulate and route the inner packet to `next_hop`.
    Route { next_hop: Ipv4Addr },
}

/// How the GTP-U sequence number is set on packets leaving by this rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqPolicy {
    Omit,
    /// Number each incoming packet once; replicas share the number.
    Assign,
    /// Copy the number carried by the incoming packet.
    Preserve,
}

/// One packet detection and forwarding rule installed by the SMF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardingRule {
    pub session_id: u32,
    pub direction: Direction,
    /// Inner UE address the rule serves.
    pub ue_ip: Ipv4Addr,
    /// Incoming tunnel matched by the rule; `None` matches plain packets
    /// addressed to `ue_ip`.
    pub local_teid: Option<u32>,
    pub action: RuleAction,
    pub seq: SeqPolicy,
    /// Drop repeated sequence numbers before forwarding.
    pub eliminate: bool,
}

pub const RULE_LEN: usize = 24;

impl ForwardingRule {
    /// Layout: session(4) | dir(1) | ue_ip(4) | local_teid(4, 0 = none) |
    /// action(1) | teid(4) | addr(4) | seq(1) | eliminate(1).
    pub fn encode(&self) -> [u8; RULE_LEN] {
        let mut b = [0u8; RULE_LEN];
        b[0..4].copy_from_slice(&self.session_id.to_be_bytes());
        b[4] = match self.direction {
            Direction::Uplink => 0,
            Direction::Downlink => 1,
        };
        b[5..9].copy_from_slice(&self.ue_ip.octets());
        b[9..13].copy_from_slice(&self.local_teid.unwrap_or(0).to_be_bytes());
        let (action, teid, addr) = match self.action {
            RuleAction::Encapsulate { teid, peer } => (0u8, teid, peer),
            RuleAction::Route { next_hop } => (1u8, 0, next_hop),
        };
        b[13] = action;
        b[14..18].copy_from_slice(&teid.to_be_bytes());
        b[18..22].copy_from_slice(&addr.octets());
        b[22] = match self.seq {
            SeqPolicy::Omit => 0,
            SeqPolicy::Assign => 1,
            SeqPolicy::Preserve => 2,
        };
        b[23] = self.eliminate as u8;
        b
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        if b.len() != RULE_LEN {
            return Err(WireError::LengthMismatch {
                declared: RULE_LEN,
                actual: b.len(),
            });
        }
        let bad = || WireError::BadElement { tag: 0 };
        let u32_at = |i: usize| u32::from_be_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        let ip_at = |i: usize| Ipv4Addr::new(b[i], b[i + 1], b[i + 2], b[i + 3]);
        let direction = match b[4] {
            0 => Direction::Uplink,
            1 => Direction::Downlink,
            _ => return Err(bad()),
        };
        let local_teid = match u32_at(9) {
            0 => None,
            t => Some(t),
        };
        let action = match b[13] {
            0 => RuleAction::Encapsulate {
                teid: u32_at(14),
                peer: ip_at(18),
            },
            1 => RuleAction::Route { next_hop: ip_at(18) },
            _ => return Err(bad()),
        };
        let seq = match b[22] {
            0 => SeqPolicy::Omit,
            1 => SeqPolicy::Assign,
            2 => SeqPolicy::Preserve,
            _ => return Err(bad()),
        };
        Ok(ForwardingRule {
            session_id: u32_at(0),
            direction,
            ue_ip: ip_at(5),
            local_teid,
            action,
            seq,
            eliminate: match b[23] {
                0 => false,
                1 => true,
                _ => return Err(bad()),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_round_trip() {
        let rules = [
            ForwardingRule {
                session_id: 9,
                direction: Direction::Uplink,
                ue_ip: Ipv4Addr::new(10, 45, 0, 2),
                local_teid: Some(1),
                action: RuleAction::Route {
                    next_hop: Ipv4Addr::new(192, 168, 0, 40),
                },
                seq: SeqPolicy::Omit,
                eliminate: true,
            },
            ForwardingRule {
                session_id: 1,
                direction: Direction::Downlink,
                ue_ip: Ipv4Addr::new(10, 45, 0, 3),
                local_teid: None,
                action: RuleAction::Encapsulate {
                    teid: 77,
                    peer: Ipv4Addr::new(192, 168, 0, 22),
                },
                seq: SeqPolicy::Assign,
                eliminate: false,
            },
        ];
        for r in rules {
            assert_eq!(ForwardingRule::decode(&r.encode()).unwrap(), r);
        }
        assert!(ForwardingRule::decode(&[0; 23]).is_err());
        let mut b = rules[0].encode();
        b[22] = 9;
        assert!(ForwardingRule::decode(&b).is_err());
    }
}
