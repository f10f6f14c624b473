//! End-to-end validation checklist over an exported event log.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;

use crate::nwdaf::NwdafEvent;
use crate::simnet::Millis;
use crate::topology::{Ipv4Cidr, SimParams};
use crate::wirefmt::Protocol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    SbiPort,
    PfcpAssociation,
    NgSetupOrder,
    HeartbeatCadence,
    UeRegistration,
    GtpRouting,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::SbiPort,
        Check::PfcpAssociation,
        Check::NgSetupOrder,
        Check::HeartbeatCadence,
        Check::UeRegistration,
        Check::GtpRouting,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::SbiPort => "sbi_port_and_status_notify",
            Check::PfcpAssociation => "pfcp_association_per_pair",
            Check::NgSetupOrder => "ng_setup_before_ue_registration",
            Check::HeartbeatCadence => "heartbeat_cadence",
            Check::UeRegistration => "ue_registration_sequence",
            Check::GtpRouting => "gtp_encapsulated_app_routing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    /// First counterexample.
    Fail { event_id: u64, detail: String },
    /// The log holds nothing this check could judge.
    NoEvidence,
}

impl CheckStatus {
    pub fn passed(&self) -> bool {
        matches!(self, CheckStatus::Pass)
    }
}

fn fail(e: &NwdafEvent, detail: impl Into<String>) -> CheckStatus {
    CheckStatus::Fail {
        event_id: e.event_id,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub check: Check,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checklist {
    pub results: Vec<CheckResult>,
}

impl Checklist {
    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.status.passed()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.results.len()
    }

    pub fn status(&self, check: Check) -> &CheckStatus {
        &self
            .results
            .iter()
            .find(|r| r.check == check)
            .expect("every check has a result")
            .status
    }

    /// Checks that did not pass.
    pub fn failed(&self) -> Vec<Check> {
        self.results
            .iter()
            .filter(|r| !r.status.passed())
            .map(|r| r.check)
            .collect()
    }
}

impl fmt::Display for Checklist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            write!(f, "check {} {}: ", r.check.number(), r.check.name())?;
            match &r.status {
                CheckStatus::Pass => writeln!(f, "PASS")?,
                CheckStatus::NoEvidence => writeln!(f, "FAIL (no evidence)")?,
                CheckStatus::Fail { event_id, detail } => writeln!(f, "FAIL at event {event_id}: {detail}")?,
            }
        }
        write!(f, "{}/{} checks passed", self.passed(), self.results.len())
    }
}

/// Deployment parameters the checks depend on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidateConfig {
    pub sbi_port: u16,
    pub heartbeat_ms: Millis,
    pub ue_pool: Ipv4Cidr,
}

impl ValidateConfig {
    pub fn from_params(p: &SimParams) -> Self {
        ValidateConfig {
            sbi_port: p.sbi_port,
            heartbeat_ms: p.heartbeat_ms,
            ue_pool: p.ue_pool,
        }
    }
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            sbi_port: 7777,
            heartbeat_ms: 3333,
            ue_pool: Ipv4Cidr::new(Ipv4Addr::new(10, 45, 0, 0), 16).expect("valid prefix"),
        }
    }
}

/// Runs the six checks in order.
pub fn validate_sequences(events: &[NwdafEvent], cfg: &ValidateConfig) -> Checklist {
    let results = Check::ALL
        .iter()
        .map(|&check| CheckResult {
            check,
            status: match check {
                Check::SbiPort => check_sbi(events, cfg),
                Check::PfcpAssociation => check_pfcp(events),
                Check::NgSetupOrder => check_ng_setup(events),
                Check::HeartbeatCadence => check_heartbeats(events, cfg),
                Check::UeRegistration => check_registration(events),
                Check::GtpRouting => check_gtp(events, cfg),
            },
        })
        .collect();
    Checklist { results }
}

fn delivered(events: &[NwdafEvent]) -> impl Iterator<Item = &NwdafEvent> {
    events.iter().filter(|e| e.is_delivered())
}

fn check_sbi(events: &[NwdafEvent], cfg: &ValidateConfig) -> CheckStatus {
    let mut sbi = 0;
    for e in events.iter().filter(|e| e.protocol == Protocol::Sbi) {
        sbi += 1;
        let port = e.attr("dport").and_then(|p| p.parse::<u16>().ok());
        if port != Some(cfg.sbi_port) {
            return fail(e, format!("SBI packet to port {}", e.attr("dport").unwrap_or("?")));
        }
    }
    let notified = delivered(events).any(|e| e.protocol == Protocol::Sbi && e.msg() == Some("NF_STATUS_NOTIFY"));
    match (sbi, notified) {
        (0, _) => CheckStatus::NoEvidence,
        (_, true) => CheckStatus::Pass,
        (_, false) => CheckStatus::NoEvidence,
    }
}

fn check_pfcp(events: &[NwdafEvent]) -> CheckStatus {
    // (smf, upf) -> (requests, responses)
    let mut pairs: BTreeMap<(&str, &str), (u32, u32)> = BTreeMap::new();
    let mut evidence = false;
    for e in delivered(events).filter(|e| e.protocol == Protocol::Pfcp) {
        evidence = true;
        match e.msg() {
            Some("PFCP_ASSOCIATION_SETUP_REQ") => {
                let c = pairs.entry((&e.src, &e.dst)).or_default();
                c.0 += 1;
                if c.0 > 1 {
                    return fail(e, format!("second association request {}-{}", e.src, e.dst));
                }
            }
            Some("PFCP_ASSOCIATION_SETUP_RESP") => {
                let Some(c) = pairs.get_mut(&(e.dst.as_str(), e.src.as_str())) else {
                    return fail(e, format!("association response {}-{} without request", e.dst, e.src));
                };
                c.1 += 1;
                if c.1 > 1 {
                    return fail(e, format!("second association response {}-{}", e.dst, e.src));
                }
            }
            Some("PFCP_SESSION_ESTABLISHMENT_REQ")
                if pairs.get(&(e.src.as_str(), e.dst.as_str())).is_none_or(|c| c.1 == 0) =>
            {
                return fail(e, format!("session request {}-{} before association", e.src, e.dst));
            }
            _ => {}
        }
    }
    if !evidence {
        return CheckStatus::NoEvidence;
    }
    if let Some(((smf, upf), _)) = pairs.iter().find(|(_, c)| c.1 == 0) {
        let req = delivered(events)
            .find(|e| e.msg() == Some("PFCP_ASSOCIATION_SETUP_REQ") && e.src == *smf && e.dst == *upf)
            .expect("pair came from a request");
        return fail(req, format!("association {smf}-{upf} never answered"));
    }
    if pairs.is_empty() {
        return CheckStatus::NoEvidence;
    }
    CheckStatus::Pass
}

fn check_ng_setup(events: &[NwdafEvent]) -> CheckStatus {
    let mut requested: BTreeMap<&str, bool> = BTreeMap::new();
    let mut ready: BTreeMap<&str, bool> = BTreeMap::new();
    let mut evidence = false;
    for e in delivered(events).filter(|e| e.protocol == Protocol::Ngap) {
        match e.msg() {
            Some("NG_SETUP_REQ") => {
                requested.insert(&e.src, true);
            }
            Some("NG_SETUP_RESP") => {
                evidence = true;
                if !requested.contains_key(e.dst.as_str()) {
                    return fail(e, format!("NG setup response to {} without request", e.dst));
                }
                ready.insert(&e.dst, true);
            }
            Some("INITIAL_UE_MESSAGE") => {
                evidence = true;
                if !ready.contains_key(e.src.as_str()) {
                    return fail(e, format!("UE registration via {} before NG setup", e.src));
                }
            }
            _ => {}
        }
    }
    if evidence {
        CheckStatus::Pass
    } else {
        CheckStatus::NoEvidence
    }
}

fn check_heartbeats(events: &[NwdafEvent], cfg: &ValidateConfig) -> CheckStatus {
    let mut last: BTreeMap<&str, Millis> = BTreeMap::new();
    let mut outstanding: BTreeMap<&str, VecDeque<&NwdafEvent>> = BTreeMap::new();
    let mut evidence = false;
    for e in events.iter().filter(|e| e.is_send() && e.protocol == Protocol::Sbi) {
        match e.msg() {
            Some("NF_HEARTBEAT_REQ") => {
                evidence = true;
                if let Some(prev) = last.insert(&e.src, e.ts) {
                    if e.ts - prev != cfg.heartbeat_ms {
                        return fail(e, format!("{} heartbeat gap {} ms", e.src, e.ts - prev));
                    }
                }
                let q = outstanding.entry(&e.src).or_default();
                // the NF moved on without an answer to the previous request
                if let Some(unanswered) = q.pop_front() {
                    return fail(unanswered, format!("{} heartbeat not answered", e.src));
                }
                if e.is_delivered() {
                    q.push_back(e);
                }
            }
            Some("NF_HEARTBEAT_RESP") => {
                let q = outstanding.entry(&e.dst).or_default();
                if q.pop_front().is_none() {
                    return fail(e, format!("heartbeat response to {} without request", e.dst));
                }
            }
            _ => {}
        }
    }
    if evidence {
        CheckStatus::Pass
    } else {
        CheckStatus::NoEvidence
    }
}

/// Hops of a successful registration, in order: (protocol, msg, nas).
const REGISTRATION_STAGES: [(Protocol, &str, Option<&str>); 8] = [
    (Protocol::Rls, "RLS_NAS", Some("REGISTRATION_REQUEST")),
    (Protocol::Ngap, "INITIAL_UE_MESSAGE", None),
    (Protocol::Sbi, "UE_AUTH_REQ", None),
    (Protocol::Sbi, "UE_AUTH_RESP", None),
    (Protocol::Sbi, "SDM_GET_REQ", None),
    (Protocol::Sbi, "AM_POLICY_REQ", None),
    (Protocol::Ngap, "DOWNLINK_NAS_TRANSPORT", Some("REGISTRATION_ACCEPT")),
    (Protocol::Rls, "RLS_NAS", Some("REGISTRATION_ACCEPT")),
];

fn check_registration(events: &[NwdafEvent]) -> CheckStatus {
    let mut per_ue: BTreeMap<&str, Vec<&NwdafEvent>> = BTreeMap::new();
    for e in delivered(events) {
        if let Some(ue) = e.attr("ue") {
            per_ue.entry(ue).or_default().push(e);
        }
    }
    let mut evidence = false;
    let mut first_fail: Option<CheckStatus> = None;
    let mut fail_id = u64::MAX;
    for (ue, evs) in &per_ue {
        if evs.iter().any(|e| e.attr("nas") == Some("REGISTRATION_REJECT")) {
            continue;
        }
        let stage_matches = |e: &NwdafEvent, (proto, msg, nas): (Protocol, &str, Option<&str>)| {
            e.protocol == proto && e.msg() == Some(msg) && nas.is_none_or(|n| e.attr("nas") == Some(n))
        };
        let Some(start) = evs.iter().position(|e| stage_matches(e, REGISTRATION_STAGES[0])) else {
            continue;
        };
        evidence = true;
        let mut at = start;
        for &stage in &REGISTRATION_STAGES[1..] {
            match evs[at + 1..].iter().position(|e| stage_matches(e, stage)) {
                Some(off) => at += 1 + off,
                None => {
                    let e = evs[at];
                    if e.event_id < fail_id {
                        fail_id = e.event_id;
                        first_fail = Some(fail(e, format!("{ue}: no {} after this event", stage.1)));
                    }
                    break;
                }
            }
        }
    }
    match (evidence, first_fail) {
        (_, Some(f)) => f,
        (true, None) => CheckStatus::Pass,
        (false, None) => CheckStatus::NoEvidence,
    }
}

fn check_gtp(events: &[NwdafEvent], cfg: &ValidateConfig) -> CheckStatus {
    let mut tunneled: BTreeMap<Ipv4Addr, u64> = BTreeMap::new();
    let mut evidence = false;
    for e in delivered(events) {
        match e.protocol {
            Protocol::Gtpu => {
                if let Some(ip) = e.attr("inner_src").and_then(|s| s.parse().ok()) {
                    tunneled.entry(ip).or_insert(e.event_id);
                }
            }
            Protocol::App => {
                let Some(src) = e.attr("src_ip").and_then(|s| s.parse::<Ipv4Addr>().ok()) else {
                    continue;
                };
                if !cfg.ue_pool.contains(src) {
                    continue;
                }
                evidence = true;
                if !tunneled.contains_key(&src) {
                    return fail(e, format!("app traffic from {src} never seen inside GTP-U"));
                }
            }
            _ => {}
        }
    }
    if evidence {
        CheckStatus::Pass
    } else {
        CheckStatus::NoEvidence
    }
}
