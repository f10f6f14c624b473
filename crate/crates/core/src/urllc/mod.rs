//! Redundant transmission for uRLLC sessions: dual connectivity, duplicated
//! N3 tunnels, and PSA-anchored replication, plus duplicate elimination and
//! a reliability measurement harness.

mod dedup;
mod reliability;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use dedup::{eliminate_duplicates, DuplicateEliminator, DEDUP_WINDOW};
pub use reliability::{measure_delivery_reliability, PathStats, ReliabilityReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrllcError {
    #[error("{kind} needs {needed}")]
    InsufficientEntities { kind: RedundancyKind, needed: String },
    #[error("{kind} path layout violated: {reason}")]
    InvalidLayout { kind: RedundancyKind, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum RedundancyKind {
    #[default]
    None,
    /// (a) two gNBs and two UPFs on disjoint paths.
    DualConnectivity,
    /// (b) two N3 tunnels between one gNB and one UPF.
    N3Replication,
    /// (c) redundant paths converging on a common PSA UPF.
    PsaAnchor,
}

impl RedundancyKind {
    pub const ALL: [RedundancyKind; 4] = [
        RedundancyKind::None,
        RedundancyKind::DualConnectivity,
        RedundancyKind::N3Replication,
        RedundancyKind::PsaAnchor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RedundancyKind::None => "NONE",
            RedundancyKind::DualConnectivity => "DUAL_CONNECTIVITY",
            RedundancyKind::N3Replication => "N3_REPLICATION",
            RedundancyKind::PsaAnchor => "PSA_ANCHOR",
        }
    }

    /// Short name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            RedundancyKind::None => "none",
            RedundancyKind::DualConnectivity => "dual",
            RedundancyKind::N3Replication => "n3",
            RedundancyKind::PsaAnchor => "psa",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            RedundancyKind::None => 0,
            RedundancyKind::DualConnectivity => 1,
            RedundancyKind::N3Replication => 2,
            RedundancyKind::PsaAnchor => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        RedundancyKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn is_redundant(self) -> bool {
        self != RedundancyKind::None
    }

    pub fn path_count(self) -> usize {
        if self.is_redundant() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for RedundancyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RedundancyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RedundancyKind::ALL
            .into_iter()
            .find(|k| k.short_name().eq_ignore_ascii_case(s) || k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown redundancy mode `{s}` (none, dual, n3, psa)"))
    }
}

/// One user-plane path of a session, from the gNB to the anchoring UPF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathDescriptor {
    pub gnb: String,
    /// UPF terminating the N3 tunnel.
    pub upf: String,
    /// UPF routing to the data network; differs from `upf` when an
    /// intermediate UPF relays over N9.
    pub anchor: String,
    /// Downlink tunnel endpoint at the gNB.
    pub gnb_teid: u32,
    /// Uplink tunnel endpoint at `upf`.
    pub upf_teid: u32,
    /// Link ids traversed, gNB side first.
    pub links: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedundancyMode {
    pub kind: RedundancyKind,
    pub paths: Vec<PathDescriptor>,
    pub psa_upf: Option<String>,
}

impl RedundancyMode {
    /// Checks the path layout required by the mode.
    pub fn validate(&self) -> Result<(), UrllcError> {
        let kind = self.kind;
        let bad = |reason: &str| {
            Err(UrllcError::InvalidLayout {
                kind,
                reason: reason.to_string(),
            })
        };
        if self.paths.len() != kind.path_count() {
            return bad(&format!(
                "expected {} path(s), found {}",
                kind.path_count(),
                self.paths.len()
            ));
        }
        let teids: BTreeSet<_> = self
            .paths
            .iter()
            .map(|p| (p.gnb.as_str(), p.gnb_teid, p.upf.as_str(), p.upf_teid))
            .collect();
        if teids.len() != self.paths.len() {
            return bad("paths reuse a tunnel endpoint pair");
        }
        match kind {
            RedundancyKind::None => Ok(()),
            RedundancyKind::DualConnectivity => {
                let (p, q) = (&self.paths[0], &self.paths[1]);
                if p.gnb == q.gnb {
                    return bad("both paths use the same gNB");
                }
                if p.upf == q.upf || p.anchor == q.anchor {
                    return bad("both paths use the same UPF");
                }
                if !self.paths_disjoint() {
                    return bad("paths share a link");
                }
                Ok(())
            }
            RedundancyKind::N3Replication => {
                let (p, q) = (&self.paths[0], &self.paths[1]);
                if p.gnb != q.gnb || p.upf != q.upf {
                    return bad("tunnels must join one gNB and one UPF");
                }
                if p.gnb_teid == q.gnb_teid || p.upf_teid == q.upf_teid {
                    return bad("tunnels must use distinct TEIDs");
                }
                Ok(())
            }
            RedundancyKind::PsaAnchor => {
                let Some(psa) = &self.psa_upf else {
                    return bad("no PSA UPF");
                };
                if self.paths.iter().any(|p| &p.anchor != psa) {
                    return bad("a path bypasses the PSA UPF");
                }
                if self.paths[0].upf == self.paths[1].upf {
                    return bad("paths must reach the PSA through different UPFs");
                }
                Ok(())
            }
        }
    }

    /// True when no two paths share a link id.
    pub fn paths_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.paths
            .iter()
            .flat_map(|p| p.links.iter())
            .all(|l| seen.insert(l.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(gnb: &str, upf: &str, anchor: &str, teids: (u32, u32), links: &[&str]) -> PathDescriptor {
        PathDescriptor {
            gnb: gnb.into(),
            upf: upf.into(),
            anchor: anchor.into(),
            gnb_teid: teids.0,
            upf_teid: teids.1,
            links: links.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn dual_connectivity_layout() {
        let mut m = RedundancyMode {
            kind: RedundancyKind::DualConnectivity,
            paths: vec![
                path("gNB", "UPF1", "UPF1", (1, 1), &["gNB-UPF1", "UPF1-AppServer"]),
                path("gNB2", "UPF2", "UPF2", (1, 1), &["gNB2-UPF2", "UPF2-AppServer"]),
            ],
            psa_upf: None,
        };
        assert!(m.validate().is_ok());
        assert!(m.paths_disjoint());
        m.paths[1].links.push("gNB-UPF1".into());
        assert!(m.validate().is_err());
        m.paths[1].gnb = "gNB".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn n3_and_psa_layouts() {
        let n3 = RedundancyMode {
            kind: RedundancyKind::N3Replication,
            paths: vec![
                path("gNB", "UPF1", "UPF1", (1, 1), &["gNB-UPF1"]),
                path("gNB", "UPF1", "UPF1", (2, 2), &["gNB-UPF1"]),
            ],
            psa_upf: None,
        };
        assert!(n3.validate().is_ok());
        let psa = RedundancyMode {
            kind: RedundancyKind::PsaAnchor,
            paths: vec![
                path("gNB", "UPF1", "UPF1", (1, 1), &["gNB-UPF1"]),
                path("gNB", "UPF2", "UPF1", (2, 1), &["gNB-UPF2", "UPF1-UPF2"]),
            ],
            psa_upf: Some("UPF1".into()),
        };
        assert!(psa.validate().is_ok());
        let mut off = psa.clone();
        off.paths[1].anchor = "UPF2".into();
        assert!(off.validate().is_err());
        let single = RedundancyMode {
            kind: RedundancyKind::None,
            paths: n3.paths.clone(),
            psa_upf: None,
        };
        assert!(single.validate().is_err());
    }

    #[test]
    fn names_parse() {
        assert_eq!("psa".parse::<RedundancyKind>().unwrap(), RedundancyKind::PsaAnchor);
        assert_eq!(
            "N3_REPLICATION".parse::<RedundancyKind>().unwrap(),
            RedundancyKind::N3Replication
        );
        assert!("x".parse::<RedundancyKind>().is_err());
        for k in RedundancyKind::ALL {
            assert_eq!(RedundancyKind::from_code(k.code()), Some(k));
        }
    }
}
