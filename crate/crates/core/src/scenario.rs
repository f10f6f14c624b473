//! Scripted runs: boot, attach UEs, issue requests, and collect the event
//! log, KPI tables, checklist and invariant results.

use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::core_cp::NfType;
use crate::nwdaf::{EventStore, PacketCounts, ThroughputMatrix, Window, COUNTING_SEMANTICS};
use crate::sim::{SimError, Simulator, APP_SERVER_NAME};
use crate::simnet::Millis;
use crate::topology::{EntityKind, TopologyConfig};
use crate::urllc::{measure_delivery_reliability, RedundancyKind, ReliabilityReport};
use crate::user_plane::document_digest;
use crate::validate::{validate_sequences, Checklist, ValidateConfig};
use crate::wirefmt::Protocol;

/// UEs register here, after the core and RAN are up.
pub const UE_REGISTER_AT: Millis = 300;
pub const SESSION_SETUP_AT: Millis = 600;
/// Requests go out here; the measurement window starts here too.
pub const WARMUP_MS: Millis = 1000;
pub const DEFAULT_DURATION_MS: Millis = 10_000;

/// Loss probabilities visited by the reliability sweep.
pub const SWEEP_LOSS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Idle,
    SingleRequest,
    ManyRequests,
    UrllcSweep,
    Validate,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Idle,
        ScenarioKind::SingleRequest,
        ScenarioKind::ManyRequests,
        ScenarioKind::UrllcSweep,
        ScenarioKind::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Idle => "idle",
            ScenarioKind::SingleRequest => "single_request",
            ScenarioKind::ManyRequests => "many_requests",
            ScenarioKind::UrllcSweep => "urllc_sweep",
            ScenarioKind::Validate => "validate",
        }
    }

    fn issues_requests(self) -> bool {
        !matches!(self, ScenarioKind::Idle)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub ue_count: usize,
    pub doc: String,
    pub duration_ms: Millis,
    pub redundancy: RedundancyKind,
    pub seed: u64,
    /// Packets per point of the reliability sweep.
    pub sweep_packets: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioSpec {
            kind,
            ue_count: 1,
            doc: "document".into(),
            duration_ms: DEFAULT_DURATION_MS,
            redundancy: RedundancyKind::None,
            seed: 42,
            sweep_packets: 10_000,
        }
    }

    pub fn ues(mut self, n: usize) -> Self {
        self.ue_count = n;
        self
    }

    pub fn doc(mut self, doc: &str) -> Self {
        self.doc = doc.to_string();
        self
    }

    pub fn duration(mut self, ms: Millis) -> Self {
        self.duration_ms = ms;
        self
    }

    pub fn redundancy(mut self, kind: RedundancyKind) -> Self {
        self.redundancy = kind;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn window(&self) -> Window {
        Window::new(WARMUP_MS, WARMUP_MS + self.duration_ms)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.duration_ms == 0 {
            return Err(SimError::Config("duration must be positive".into()));
        }
        if self.kind == ScenarioKind::SingleRequest && self.ue_count != 1 {
            return Err(SimError::Config("single_request runs exactly one UE".into()));
        }
        if self.kind.issues_requests() && self.ue_count == 0 {
            return Err(SimError::Config(format!("{} needs at least one UE", self.kind)));
        }
        if self.kind == ScenarioKind::UrllcSweep && self.sweep_packets == 0 {
            return Err(SimError::Config("sweep needs at least one packet".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub spec: ScenarioSpec,
    pub window: Window,
    pub events: EventStore,
    pub counts: PacketCounts,
    pub throughput: ThroughputMatrix,
    pub transfers: Vec<crate::ran_ue::TransferResult>,
    pub checklist: Checklist,
    pub invariants: Vec<InvariantResult>,
    pub reliability: Vec<ReliabilityReport>,
    pub total_sends: u64,
}

impl RunArtifacts {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }

    pub fn events_tsv(&self) -> String {
        let mut out = Vec::new();
        self.events.write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("event lines are UTF-8")
    }

    pub fn reliability_csv(&self) -> String {
        let mut s = String::from("mode,loss_prob,packets,delivered,observed_loss,expected_loss\n");
        for r in &self.reliability {
            let expected = if r.kind.is_redundant() {
                r.loss_prob * r.loss_prob
            } else {
                r.loss_prob
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6}",
                r.kind.short_name(),
                r.loss_prob,
                r.packets,
                r.delivered,
                r.loss_ratio(),
                expected
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", s.kind);
        let _ = writeln!(out, "seed: {}", s.seed);
        let _ = writeln!(out, "ues: {}", s.ue_count);
        let _ = writeln!(out, "document: {}", s.doc);
        let _ = writeln!(out, "redundancy: {}", s.redundancy.short_name());
        let _ = writeln!(out, "window_ms: [{}, {})", self.window.start, self.window.end);
        let _ = writeln!(out, "counting: {COUNTING_SEMANTICS}");
        let _ = writeln!(out, "events: {}", self.events.len());
        let _ = writeln!(out, "sends: {}", self.total_sends);
        let complete = self
            .transfers
            .iter()
            .filter(|t| t.status == crate::ran_ue::TransferStatus::Complete)
            .count();
        let _ = writeln!(out, "transfers: {complete}/{} complete", self.transfers.len());
        let _ = writeln!(out, "\n[checklist]\n{}", self.checklist);
        let _ = writeln!(out, "\n[invariants]");
        for i in &self.invariants {
            let mark = if i.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{mark} {}: {}", i.name, i.detail);
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "\nresult: {verdict}");
        out
    }

    /// Writes every artifact into `dir` (created if missing) and returns the
    /// paths written.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = vec![
            ("events.tsv", self.events_tsv()),
            ("packet_counts.csv", self.counts.to_csv()),
            ("throughput.csv", self.throughput.to_csv()),
            ("summary.txt", self.summary()),
        ];
        if !self.reliability.is_empty() {
            files.push(("reliability.csv", self.reliability_csv()));
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Fails before any traffic when the topology cannot carry `kind`.
pub fn check_redundancy_support(topo: &TopologyConfig, kind: RedundancyKind) -> Result<(), SimError> {
    let upfs: Vec<_> = topo.entities_of(EntityKind::Nf(NfType::Upf)).collect();
    let linked = |a: &str, b: &str| topo.link(a, b).is_some();
    let ue = topo.entities_of(EntityKind::Ue).next();
    let gnbs: Vec<_> = topo
        .entities_of(EntityKind::Gnb)
        .filter(|g| ue.is_some_and(|u| linked(&u.name, &g.name)))
        .collect();
    let need = |what: &str| {
        Err(SimError::Setup(format!(
            "{} needs {what}",
            kind.short_name()
        )))
    };
    if gnbs.is_empty() || upfs.is_empty() {
        return need("a UE host linked to a gNB and at least one UPF");
    }
    match kind {
        RedundancyKind::None | RedundancyKind::N3Replication => {
            if !upfs.iter().any(|u| linked(&gnbs[0].name, &u.name)) {
                return need("a gNB-UPF link");
            }
        }
        RedundancyKind::PsaAnchor => {
            let ok = upfs.len() >= 2
                && linked(&upfs[0].name, &upfs[1].name)
                && linked(&gnbs[0].name, &upfs[0].name)
                && linked(&gnbs[0].name, &upfs[1].name);
            if !ok {
                return need("two UPFs linked to each other and to the gNB");
            }
        }
        RedundancyKind::DualConnectivity => {
            let ok = gnbs.len() >= 2
                && upfs.len() >= 2
                && linked(&gnbs[0].name, &upfs[0].name)
                && linked(&gnbs[1].name, &upfs[1].name);
            if !ok {
                return need("two gNBs serving the UE, each linked to its own UPF");
            }
        }
    }
    Ok(())
}

fn invariant(name: &'static str, passed: bool, detail: impl Into<String>) -> InvariantResult {
    InvariantResult {
        name,
        passed,
        detail: detail.into(),
    }
}

/// Runs one scenario end to end. Setup problems are errors; everything the
/// run itself gets wrong shows up as failed invariants.
pub fn run_scenario(topology: &TopologyConfig, spec: &ScenarioSpec) -> Result<RunArtifacts, SimError> {
    spec.validate()?;
    topology.validate()?;
    check_redundancy_support(topology, spec.redundancy)?;
    if spec.kind.issues_requests() && topology.document(&spec.doc).is_none() {
        return Err(SimError::Config(format!("unknown document `{}`", spec.doc)));
    }
    if spec.ue_count > topology.subscribers.len() {
        return Err(SimError::Config(format!(
            "{} UEs requested but only {} subscribers provisioned",
            spec.ue_count,
            topology.subscribers.len()
        )));
    }

    let mut sim = Simulator::new(topology.clone(), spec.seed)?;
    sim.boot()?;
    let ues: Vec<String> = topology.subscribers.iter().take(spec.ue_count).cloned().collect();
    for ue in &ues {
        sim.add_ue(ue)?;
    }
    sim.run_until(UE_REGISTER_AT)?;
    for ue in &ues {
        sim.begin_registration(ue)?;
    }
    sim.settle()?;
    sim.run_until(SESSION_SETUP_AT)?;
    for ue in &ues {
        sim.begin_session(ue, spec.redundancy)?;
    }
    sim.settle()?;
    let window = spec.window();
    sim.run_until(window.start)?;
    if spec.kind.issues_requests() {
        for ue in &ues {
            sim.begin_request(ue, &spec.doc)?;
        }
    }
    sim.run_until(window.end)?;

    let reliability = if spec.kind == ScenarioKind::UrllcSweep {
        SWEEP_LOSS
            .iter()
            .flat_map(|&p| {
                RedundancyKind::ALL
                    .map(|k| measure_delivery_reliability(k, p, spec.sweep_packets, spec.seed))
            })
            .collect()
    } else {
        Vec::new()
    };

    let nwdaf = sim.analytics();
    let events = nwdaf.store().clone();
    let counts = nwdaf.packet_counts(window);
    let throughput = nwdaf.throughput(window);
    let checklist = validate_sequences(events.events(), &ValidateConfig::from_params(&topology.params));
    let mut artifacts = RunArtifacts {
        spec: spec.clone(),
        window,
        counts,
        throughput,
        transfers: sim.transfers(),
        checklist,
        invariants: Vec::new(),
        reliability,
        total_sends: sim.total_sends(),
        events,
    };
    artifacts.invariants = check_invariants(&sim, topology, &artifacts, &ues);
    Ok(artifacts)
}

fn check_invariants(
    sim: &Simulator,
    topo: &TopologyConfig,
    run: &RunArtifacts,
    ues: &[String],
) -> Vec<InvariantResult> {
    let spec = &run.spec;
    let events = run.events.events();
    let mut out = Vec::new();

    let sends = events.iter().filter(|e| e.is_send()).count() as u64;
    let link_ok = sim.link_ids().iter().all(|id| {
        sim.link_stats(id)
            .is_some_and(|s| s.delivered + s.dropped == s.sent)
    });
    out.push(invariant(
        "conservation",
        sends == run.total_sends && link_ok,
        format!("{sends} send events, {} sends", run.total_sends),
    ));

    let rejected = sim.analytics().rejections();
    out.push(invariant("schema", rejected == 0, format!("{rejected} rejected records")));

    let bad_port = events
        .iter()
        .find(|e| e.protocol == Protocol::Sbi && e.attr("dport") != Some(&topo.params.sbi_port.to_string()));
    out.push(invariant(
        "sbi_port",
        bad_port.is_none(),
        match bad_port {
            Some(e) => format!("event {} on port {}", e.event_id, e.attr("dport").unwrap_or("?")),
            None => format!("all SBI traffic on {}", topo.params.sbi_port),
        },
    ));

    let stray = events.iter().find(|e| {
        e.protocol == Protocol::App && e.src != APP_SERVER_NAME && e.dst != APP_SERVER_NAME
    });
    out.push(invariant(
        "ue_traffic_encapsulated",
        stray.is_none(),
        match stray {
            Some(e) => format!("bare UE packet on {} (event {})", e.link, e.event_id),
            None => "UE-pool packets leave the N6 side only inside GTP-U or RLS".into(),
        },
    ));

    let faults = sim.faults();
    out.push(invariant(
        "no_faults",
        faults.is_empty(),
        match faults.first() {
            Some(f) => format!("{} fault(s), first at {} on {}: {}", faults.len(), f.at, f.entity, f.detail),
            None => "none".into(),
        },
    ));

    let sessions = ues.iter().filter(|u| sim.session(u).is_some()).count();
    out.push(invariant(
        "sessions",
        sessions == ues.len(),
        format!("{sessions}/{} UEs hold a PDU session", ues.len()),
    ));

    if spec.kind.issues_requests() {
        let lossless = topo.links.iter().all(|l| l.loss_prob == 0.0);
        let size = topo.document(&spec.doc).map_or(0, |d| d.size);
        let digest = document_digest(&spec.doc, size);
        let good = run
            .transfers
            .iter()
            .filter(|t| {
                t.status == crate::ran_ue::TransferStatus::Complete
                    && t.bytes_received == size as u64
                    && t.digest == Some(digest)
            })
            .count();
        let expected = ues.len();
        out.push(invariant(
            "transfers_complete",
            !lossless || (good == expected && run.transfers.len() == expected),
            format!(
                "{good}/{expected} transfers complete and intact{}",
                if lossless { "" } else { " (lossy topology, not enforced)" }
            ),
        ));
        out.push(invariant(
            "validation_checklist",
            run.checklist.all_passed(),
            format!("{}/{} checks", run.checklist.passed(), run.checklist.results.len()),
        ));
    } else {
        let ue_name = topo.entities_of(EntityKind::Ue).next().map(|e| e.name.clone());
        let ue_packets = ue_name.as_deref().map_or(0, |n| run.counts.get(n).packets);
        let gnb_packets: u64 = topo
            .entities_of(EntityKind::Gnb)
            .map(|g| run.counts.get(&g.name).packets)
            .sum();
        out.push(invariant(
            "idle_ue_silent",
            ue_packets == 0 && gnb_packets > 0,
            format!("UE {ue_packets} packets, gNB {gnb_packets} packets in window"),
        ));
    }

    if spec.redundancy == RedundancyKind::DualConnectivity {
        let disjoint = ues
            .iter()
            .filter_map(|u| sim.session(u))
            .all(|s| s.redundancy.paths_disjoint());
        out.push(invariant("dual_paths_disjoint", disjoint, "every session's two paths share no link"));
    }

    if !run.reliability.is_empty() {
        let mut ok = true;
        let mut detail = String::from("redundant modes deliver every packet the single path delivers");
        for p in SWEEP_LOSS {
            let at: Vec<_> = run.reliability.iter().filter(|r| r.loss_prob == p).collect();
            let Some(single) = at.iter().find(|r| r.kind == RedundancyKind::None) else { continue };
            for r in at.iter().filter(|r| r.kind.is_redundant()) {
                let dominated = single
                    .delivered_mask
                    .iter()
                    .zip(&r.delivered_mask)
                    .all(|(a, b)| !a || *b);
                if !dominated {
                    ok = false;
                    detail = format!("{} at p={p} lost a packet the single path delivered", r.kind.short_name());
                }
            }
        }
        out.push(invariant("redundancy_dominates", ok, detail));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.as_str().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!("bogus".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn spec_rejects_zero_duration() {
        let s = ScenarioSpec::new(ScenarioKind::Idle).duration(0);
        assert!(matches!(s.validate(), Err(SimError::Config(_))));
    }

    #[test]
    fn dual_needs_second_gnb() {
        let topo = crate::topology::default_topology();
        let err = check_redundancy_support(&topo, RedundancyKind::DualConnectivity).unwrap_err();
        assert!(matches!(err, SimError::Setup(_)));
        check_redundancy_support(&crate::topology::dual_gnb_topology(), RedundancyKind::DualConnectivity)
            .unwrap();
        for k in [RedundancyKind::None, RedundancyKind::N3Replication, RedundancyKind::PsaAnchor] {
            check_redundancy_support(&topo, k).unwrap();
        }
    }
}
