//! Byte-level formats carried on the simulated network.
//!
//! Every hop carries a [`SimPacket`] envelope. User-plane tunnels use the
//! GTPv1-U header layout, and every control protocol (SBI, NGAP, NAS, PFCP,
//! RLS) plus the application exchange share one TLV body format.
//!
//! All multi-byte integers are big-endian.

mod gtpu;
pub mod msg;
mod packet;
mod tlv;

pub use gtpu::{
    gtpu_decapsulate, gtpu_encapsulate, gtpu_encapsulate_packet, GtpuHeader, GtpuPdu, GTPU_FLAGS_NO_SEQ, GTPU_FLAGS_SEQ,
    GTPU_MANDATORY_LEN, GTPU_MSG_GPDU,
};
pub use msg::{MsgKind, Tag};
pub use packet::{
    decode_packet, encode_packet, PacketView, Protocol, SimPacket, ENVELOPE_HEADER_LEN,
    MAX_PAYLOAD, WIRE_VERSION,
};
pub use tlv::{TlvElement, TlvMessage, TlvView};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    Oversized { len: usize, max: usize },
    #[error("buffer truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unsupported envelope version {0}")]
    BadVersion(u8),
    #[error("unknown protocol code {0:#04x}")]
    UnknownProtocol(u8),
    #[error("declared length {declared} does not match actual {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("bad GTP-U flags {0:#04x}")]
    BadGtpuFlags(u8),
    #[error("GTP-U message type {0:#04x} is not a G-PDU")]
    NotGpdu(u8),
    #[error("GTP-U inner payload is empty")]
    EmptyInner,
    #[error("TLV element {tag:#06x} is malformed")]
    BadElement { tag: u16 },
}
