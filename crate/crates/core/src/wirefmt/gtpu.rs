//! GTPv1-U header (3GPP TS 29.281), G-PDU only.
//!
//! ```text
//!  0        1        2        3
//! +--------+--------+--------+--------+
//! | flags  |  type  |     length      |
//! +--------+--------+--------+--------+
//! |               TEID                |
//! +--------+--------+--------+--------+
//! |    sequence     | N-PDU  | nextext|   (present when S=1)
//! +--------+--------+--------+--------+
//! ```

use super::packet::{encode_packet_into, SimPacket};
use super::WireError;

pub const GTPU_MANDATORY_LEN: usize = 8;
pub const GTPU_MSG_GPDU: u8 = 0xFF;
/// Version 1, protocol type GTP, no optional fields.
pub const GTPU_FLAGS_NO_SEQ: u8 = 0x30;
/// Version 1, protocol type GTP, S flag.
pub const GTPU_FLAGS_SEQ: u8 = 0x32;

const FLAG_E: u8 = 0x04;
const FLAG_S: u8 = 0x02;
const FLAG_PN: u8 = 0x01;
const OPTIONAL_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GtpuHeader {
    pub flags: u8,
    pub msg_type: u8,
    /// Bytes following the mandatory header, optional fields included.
    pub length: u16,
    pub teid: u32,
    pub seq: Option<u16>,
}

impl GtpuHeader {
    pub fn gpdu(teid: u32, seq: Option<u16>, inner_len: usize) -> Result<Self, WireError> {
        let optional = if seq.is_some() { OPTIONAL_LEN } else { 0 };
        let length = inner_len + optional;
        if length > u16::MAX as usize {
            return Err(WireError::Oversized {
                len: inner_len,
                max: u16::MAX as usize - optional,
            });
        }
        Ok(GtpuHeader {
            flags: if seq.is_some() {
                GTPU_FLAGS_SEQ
            } else {
                GTPU_FLAGS_NO_SEQ
            },
            msg_type: GTPU_MSG_GPDU,
            length: length as u16,
            teid,
            seq,
        })
    }

    pub fn encoded_len(&self) -> usize {
        GTPU_MANDATORY_LEN + if self.seq.is_some() { OPTIONAL_LEN } else { 0 }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.flags);
        out.push(self.msg_type);
        out.extend_from_slice(&self.length.to_be_bytes());
        out.extend_from_slice(&self.teid.to_be_bytes());
        if let Some(seq) = self.seq {
            out.extend_from_slice(&seq.to_be_bytes());
            out.push(0); // N-PDU number
            out.push(0); // no extension header
        }
    }

    /// Decodes a header and returns it with its encoded length.
    pub fn decode(b: &[u8]) -> Result<(Self, usize), WireError> {
        if b.len() < GTPU_MANDATORY_LEN {
            return Err(WireError::Truncated {
                needed: GTPU_MANDATORY_LEN,
                have: b.len(),
            });
        }
        let flags = b[0];
        // version 1, PT=1, reserved bit clear
        if flags & 0xF8 != 0x30 || flags & (FLAG_E | FLAG_PN) != 0 {
            return Err(WireError::BadGtpuFlags(flags));
        }
        let msg_type = b[1];
        let length = u16::from_be_bytes([b[2], b[3]]);
        let teid = u32::from_be_bytes([b[4], b[5], b[6], b[7]]);
        let seq = if flags & FLAG_S != 0 {
            let needed = GTPU_MANDATORY_LEN + OPTIONAL_LEN;
            if b.len() < needed {
                return Err(WireError::Truncated {
                    needed,
                    have: b.len(),
                });
            }
            if (length as usize) < OPTIONAL_LEN {
                return Err(WireError::LengthMismatch {
                    declared: length as usize,
                    actual: b.len() - GTPU_MANDATORY_LEN,
                });
            }
            Some(u16::from_be_bytes([b[8], b[9]]))
        } else {
            None
        };
        let header = GtpuHeader {
            flags,
            msg_type,
            length,
            teid,
            seq,
        };
        let consumed = header.encoded_len();
        Ok((header, consumed))
    }
}

/// A decapsulated G-PDU; `inner` borrows from the input buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtpuPdu<'a> {
    pub teid: u32,
    pub seq: Option<u16>,
    pub inner: &'a [u8],
}

pub fn gtpu_encapsulate(inner: &[u8], teid: u32, seq: Option<u16>) -> Result<Vec<u8>, WireError> {
    if inner.is_empty() {
        return Err(WireError::EmptyInner);
    }
    let header = GtpuHeader::gpdu(teid, seq, inner.len())?;
    let mut out = Vec::with_capacity(header.encoded_len() + inner.len());
    header.encode_into(&mut out);
    out.extend_from_slice(inner);
    Ok(out)
}

/// Encapsulates an envelope without an intermediate encoded copy.
pub fn gtpu_encapsulate_packet(inner: &SimPacket, teid: u32, seq: Option<u16>) -> Result<Vec<u8>, WireError> {
    let header = GtpuHeader::gpdu(teid, seq, inner.wire_len())?;
    let mut out = Vec::with_capacity(header.encoded_len() + inner.wire_len());
    header.encode_into(&mut out);
    encode_packet_into(inner, &mut out)?;
    Ok(out)
}

pub fn gtpu_decapsulate(b: &[u8]) -> Result<GtpuPdu<'_>, WireError> {
    let (header, consumed) = GtpuHeader::decode(b)?;
    if header.msg_type != GTPU_MSG_GPDU {
        return Err(WireError::NotGpdu(header.msg_type));
    }
    let actual = b.len() - GTPU_MANDATORY_LEN;
    if header.length as usize != actual {
        return Err(WireError::LengthMismatch {
            declared: header.length as usize,
            actual,
        });
    }
    let inner = &b[consumed..];
    if inner.is_empty() {
        return Err(WireError::EmptyInner);
    }
    Ok(GtpuPdu {
        teid: header.teid,
        seq: header.seq,
        inner,
    })
}
