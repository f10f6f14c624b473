//! Radio access side: gNB nodes and the UE host with its devices.

mod gnb;
mod ue;

use std::net::Ipv4Addr;

use thiserror::Error;

pub use gnb::Gnb;
pub use ue::{TransferResult, TransferStatus, UeDevice, UeHost, UeState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RanError {
    #[error("unknown UE `{0}`")]
    UnknownUe(String),
    #[error("UE `{0}` already exists")]
    DuplicateUe(String),
    #[error("UE `{ue}` is not attached to gNB {gnb}")]
    NotAttached { ue: String, gnb: Ipv4Addr },
    #[error("UE `{ue}` is {}", state.as_str())]
    WrongState { ue: String, state: UeState },
    #[error("UE host `{0}` has no radio link to any gNB")]
    NoGnb(String),
    #[error("UE `{0}` needs a second gNB for dual connectivity")]
    NoSecondGnb(String),
    #[error("cannot encode: {0}")]
    Encode(String),
}
