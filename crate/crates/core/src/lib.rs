//! Deterministic, single-process 5G network simulator: control plane, user
//! plane, RAN and UE emulation, redundant URLLC paths and a packet-level
//! analytics function, all on a virtual-time packet fabric.

pub mod core_cp;
pub mod nwdaf;
pub mod ran_ue;
pub mod scenario;
pub mod sim;
pub mod simnet;
pub mod topology;
pub mod urllc;
pub mod user_plane;
pub mod validate;
pub mod wirefmt;

pub use nwdaf::{EventStore, KpiKind, NwdafEvent, Outcome, Window};
pub use sim::{SimError, Simulator};
pub use simnet::Millis;
pub use topology::{default_topology, dual_gnb_topology, load_topology, parse_topology, TopologyConfig};
pub use urllc::{RedundancyKind, RedundancyMode};
pub use scenario::{run_scenario, RunArtifacts, ScenarioKind, ScenarioSpec};
pub use validate::{validate_sequences, Check, CheckStatus, Checklist, ValidateConfig};
