//! 5G core control plane: NRF registry, AMF access management, SMF session
//! management over PFCP, and the AUSF/UDM/UDR/PCF/NSSF/BSF participants.

mod agent;
mod amf;
mod nrf;
mod smf;
mod stubs;

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

pub(crate) use agent::NfAgent;
pub use amf::{Amf, AmfUeState};
pub use nrf::{Nrf, NrfError, RegistrationAck};
pub use smf::{SessionError, Smf, UeIpPool};
pub(crate) use smf::TunnelInfo;
pub(crate) use stubs::{decode_sbi, Ausf, Pcf, PlainNf, Udm, Udr};

use crate::simnet::Millis;
use crate::urllc::RedundancyMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NfType {
    Nrf,
    Amf,
    Smf,
    Ausf,
    Udm,
    Udr,
    Pcf,
    Nssf,
    Bsf,
    Upf,
    Nwdaf,
}

impl NfType {
    pub const ALL: [NfType; 11] = [
        NfType::Nrf,
        NfType::Amf,
        NfType::Smf,
        NfType::Ausf,
        NfType::Udm,
        NfType::Udr,
        NfType::Pcf,
        NfType::Nssf,
        NfType::Bsf,
        NfType::Upf,
        NfType::Nwdaf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NfType::Nrf => "NRF",
            NfType::Amf => "AMF",
            NfType::Smf => "SMF",
            NfType::Ausf => "AUSF",
            NfType::Udm => "UDM",
            NfType::Udr => "UDR",
            NfType::Pcf => "PCF",
            NfType::Nssf => "NSSF",
            NfType::Bsf => "BSF",
            NfType::Upf => "UPF",
            NfType::Nwdaf => "NWDAF",
        }
    }

    pub fn code(self) -> u8 {
        NfType::ALL.iter().position(|t| *t == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        NfType::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for NfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NfType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NfType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown NF type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NfStatus {
    Registered,
    Suspended,
    Deregistered,
}

impl NfStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NfStatus::Registered => "REGISTERED",
            NfStatus::Suspended => "SUSPENDED",
            NfStatus::Deregistered => "DEREGISTERED",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            NfStatus::Registered => 0,
            NfStatus::Suspended => 1,
            NfStatus::Deregistered => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NfProfile {
    pub nf_id: String,
    pub nf_type: NfType,
    pub addr: Ipv4Addr,
    pub status: NfStatus,
    pub last_heartbeat: Millis,
}

impl NfProfile {
    pub fn new(nf_id: &str, nf_type: NfType, addr: Ipv4Addr) -> Self {
        NfProfile {
            nf_id: nf_id.to_string(),
            nf_type,
            addr,
            status: NfStatus::Registered,
            last_heartbeat: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssocState {
    Pending,
    Active,
}

/// PFCP association between one SMF and one UPF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PfcpAssociation {
    pub smf_id: String,
    pub upf_id: String,
    pub established_at: Millis,
    pub state: AssocState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnbState {
    SetupSent,
    Registered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GnbRegistration {
    pub gnb_id: String,
    pub amf_id: String,
    pub state: GnbState,
}

/// A UE's data connectivity context as held by the SMF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PduSession {
    pub session_id: u32,
    pub ue_id: String,
    pub ue_ip: Ipv4Addr,
    pub redundancy: RedundancyMode,
    pub established_at: Millis,
}

impl PduSession {
    /// gNB-side (downlink) TEID of the first path.
    pub fn gnb_teid(&self) -> u32 {
        self.redundancy.paths[0].gnb_teid
    }

    /// UPF-side (uplink) TEID of the first path.
    pub fn upf_teid(&self) -> u32 {
        self.redundancy.paths[0].upf_teid
    }
}
