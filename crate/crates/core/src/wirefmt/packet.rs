use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use super::WireError;

pub const WIRE_VERSION: u8 = 1;
pub const ENVELOPE_HEADER_LEN: usize = 18;
pub const MAX_PAYLOAD: usize = 65_535;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Sbi,
    Ngap,
    Nas,
    Pfcp,
    Gtpu,
    Rls,
    App,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::Sbi,
        Protocol::Ngap,
        Protocol::Nas,
        Protocol::Pfcp,
        Protocol::Gtpu,
        Protocol::Rls,
        Protocol::App,
    ];

    pub fn code(self) -> u8 {
        match self {
            Protocol::Sbi => 1,
            Protocol::Ngap => 2,
            Protocol::Nas => 3,
            Protocol::Pfcp => 4,
            Protocol::Gtpu => 5,
            Protocol::Rls => 6,
            Protocol::App => 7,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.code() == code)
            .ok_or(WireError::UnknownProtocol(code))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Sbi => "SBI",
            Protocol::Ngap => "NGAP",
            Protocol::Nas => "NAS",
            Protocol::Pfcp => "PFCP",
            Protocol::Gtpu => "GTPU",
            Protocol::Rls => "RLS",
            Protocol::App => "APP",
        }
    }

    /// Data-path protocols: radio link, tunnel and application traffic.
    pub fn is_data_path(self) -> bool {
        matches!(self, Protocol::Rls | Protocol::Gtpu | Protocol::App)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown protocol `{s}`"))
    }
}

/// The envelope carried on every simulated link.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimPacket {
    pub protocol: Protocol,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Vec<u8>,
}

impl SimPacket {
    pub fn new(
        protocol: Protocol,
        src: (Ipv4Addr, u16),
        dst: (Ipv4Addr, u16),
        payload: Vec<u8>,
    ) -> Self {
        SimPacket {
            protocol,
            src_ip: src.0,
            dst_ip: dst.0,
            src_port: src.1,
            dst_port: dst.1,
            payload,
        }
    }

    /// Size of the encoded envelope in bytes.
    pub fn wire_len(&self) -> usize {
        ENVELOPE_HEADER_LEN + self.payload.len()
    }
}

/// Layout: version | protocol | src_ip | dst_ip | src_port | dst_port |
/// payload_len (u32) | payload.
pub fn encode_packet(p: &SimPacket) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(p.wire_len());
    encode_packet_into(p, &mut out)?;
    Ok(out)
}

pub(crate) fn encode_packet_into(p: &SimPacket, out: &mut Vec<u8>) -> Result<(), WireError> {
    if p.payload.len() > MAX_PAYLOAD {
        return Err(WireError::Oversized {
            len: p.payload.len(),
            max: MAX_PAYLOAD,
        });
    }
    out.push(WIRE_VERSION);
    out.push(p.protocol.code());
    out.extend_from_slice(&p.src_ip.octets());
    out.extend_from_slice(&p.dst_ip.octets());
    out.extend_from_slice(&p.src_port.to_be_bytes());
    out.extend_from_slice(&p.dst_port.to_be_bytes());
    out.extend_from_slice(&(p.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&p.payload);
    Ok(())
}

pub fn decode_packet(b: &[u8]) -> Result<SimPacket, WireError> {
    PacketView::parse(b).map(|v| v.to_owned())
}

/// Borrowed decode of an envelope; the payload is a slice of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketView<'a> {
    pub protocol: Protocol,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: &'a [u8],
}

impl<'a> PacketView<'a> {
    pub fn parse(b: &'a [u8]) -> Result<Self, WireError> {
        if b.len() < ENVELOPE_HEADER_LEN {
            return Err(WireError::Truncated {
                needed: ENVELOPE_HEADER_LEN,
                have: b.len(),
            });
        }
        if b[0] != WIRE_VERSION {
            return Err(WireError::BadVersion(b[0]));
        }
        let protocol = Protocol::from_code(b[1])?;
        let ip = |i: usize| Ipv4Addr::new(b[i], b[i + 1], b[i + 2], b[i + 3]);
        let declared = u32::from_be_bytes([b[14], b[15], b[16], b[17]]) as usize;
        let actual = b.len() - ENVELOPE_HEADER_LEN;
        if declared != actual {
            return Err(WireError::LengthMismatch { declared, actual });
        }
        if declared > MAX_PAYLOAD {
            return Err(WireError::Oversized {
                len: declared,
                max: MAX_PAYLOAD,
            });
        }
        Ok(PacketView {
            protocol,
            src_ip: ip(2),
            dst_ip: ip(6),
            src_port: u16::from_be_bytes([b[10], b[11]]),
            dst_port: u16::from_be_bytes([b[12], b[13]]),
            payload: &b[ENVELOPE_HEADER_LEN..],
        })
    }

    pub fn to_owned(&self) -> SimPacket {
        SimPacket {
            protocol: self.protocol,
            src_ip: self.src_ip,
            dst_ip: self.dst_ip,
            src_port: self.src_port,
            dst_port: self.dst_port,
            payload: self.payload.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sbi(payload: Vec<u8>) -> SimPacket {
        SimPacket::new(
            Protocol::Sbi,
            (Ipv4Addr::new(192, 168, 0, 12), 7777),
            (Ipv4Addr::new(192, 168, 0, 13), 7777),
            payload,
        )
    }

    #[test]
    fn empty_payload_encodes_to_header_only() {
        let bytes = encode_packet(&sbi(Vec::new())).unwrap();
        assert_eq!(bytes.len(), 18);
        assert_eq!(&bytes[14..18], &[0, 0, 0, 0]);
        assert_eq!(bytes[0], 1);
        assert_eq!(bytes[1], Protocol::Sbi.code());
        assert_eq!(&bytes[2..6], &[192, 168, 0, 12]);
        assert_eq!(&bytes[10..14], &[0x1e, 0x61, 0x1e, 0x61]);
    }

    #[test]
    fn document_sized_payload_is_rejected() {
        let err = encode_packet(&sbi(vec![0; 487_659])).unwrap_err();
        assert_eq!(
            err,
            WireError::Oversized {
                len: 487_659,
                max: MAX_PAYLOAD
            }
        );
        assert!(encode_packet(&sbi(vec![0; MAX_PAYLOAD])).is_ok());
    }

    #[test]
    fn short_buffer_is_truncated() {
        assert!(matches!(
            decode_packet(&[1u8; 17]),
            Err(WireError::Truncated { needed: 18, have: 17 })
        ));
    }

    #[test]
    fn structural_errors() {
        let mut bytes = encode_packet(&sbi(vec![1, 2, 3])).unwrap();
        bytes[0] = 2;
        assert_eq!(decode_packet(&bytes), Err(WireError::BadVersion(2)));
        bytes[0] = 1;
        bytes[1] = 0x42;
        assert_eq!(decode_packet(&bytes), Err(WireError::UnknownProtocol(0x42)));
        bytes[1] = 1;
        bytes.push(9);
        assert_eq!(
            decode_packet(&bytes),
            Err(WireError::LengthMismatch {
                declared: 3,
                actual: 4
            })
        );
    }
}
