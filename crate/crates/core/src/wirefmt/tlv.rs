use std::net::Ipv4Addr;

use super::msg::{MsgKind, Tag};
use super::WireError;

const KIND_LEN: usize = 2;
const ELEMENT_HEADER_LEN: usize = 4;
const MAX_VALUE: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TlvElement {
    pub tag: u16,
    pub value: Vec<u8>,
}

/// Control-message body: `kind(2)` followed by `tag(2) | len(2) | value`
/// elements in list order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TlvMessage {
    pub kind: u16,
    pub elements: Vec<TlvElement>,
}

impl TlvMessage {
    pub fn new(kind: MsgKind) -> Self {
        TlvMessage {
            kind: kind.code(),
            elements: Vec::new(),
        }
    }

    pub fn msg_kind(&self) -> Option<MsgKind> {
        MsgKind::from_code(self.kind)
    }

    pub fn with(mut self, tag: Tag, value: impl Into<Vec<u8>>) -> Self {
        self.push(tag, value);
        self
    }

    pub fn push(&mut self, tag: Tag, value: impl Into<Vec<u8>>) {
        self.elements.push(TlvElement {
            tag: tag as u16,
            value: value.into(),
        });
    }

    pub fn with_str(self, tag: Tag, s: &str) -> Self {
        self.with(tag, s.as_bytes())
    }

    pub fn with_u32(self, tag: Tag, v: u32) -> Self {
        self.with(tag, v.to_be_bytes())
    }

    pub fn with_u16(self, tag: Tag, v: u16) -> Self {
        self.with(tag, v.to_be_bytes())
    }

    pub fn with_u8(self, tag: Tag, v: u8) -> Self {
        self.with(tag, [v])
    }

    pub fn with_ip(self, tag: Tag, ip: Ipv4Addr) -> Self {
        self.with(tag, ip.octets())
    }

    pub fn with_msg(self, tag: Tag, inner: &TlvMessage) -> Result<Self, WireError> {
        let bytes = inner.encode()?;
        Ok(self.with(tag, bytes))
    }

    pub fn get(&self, tag: Tag) -> Option<&[u8]> {
        self.elements
            .iter()
            .find(|e| e.tag == tag as u16)
            .map(|e| e.value.as_slice())
    }

    pub fn get_all(&self, tag: Tag) -> impl Iterator<Item = &[u8]> + '_ {
        self.elements
            .iter()
            .filter(move |e| e.tag == tag as u16)
            .map(|e| e.value.as_slice())
    }

    pub fn get_str(&self, tag: Tag) -> Option<&str> {
        self.get(tag).and_then(|v| std::str::from_utf8(v).ok())
    }

    pub fn get_u32(&self, tag: Tag) -> Option<u32> {
        self.get(tag).and_then(as_u32)
    }

    pub fn get_u16(&self, tag: Tag) -> Option<u16> {
        self.get(tag).and_then(as_u16)
    }

    pub fn get_u8(&self, tag: Tag) -> Option<u8> {
        self.get(tag).and_then(|v| (v.len() == 1).then(|| v[0]))
    }

    pub fn get_ip(&self, tag: Tag) -> Option<Ipv4Addr> {
        self.get(tag).and_then(as_ip)
    }

    pub fn get_msg(&self, tag: Tag) -> Option<TlvMessage> {
        self.get(tag).and_then(|v| TlvMessage::decode(v).ok())
    }

    pub fn encoded_len(&self) -> usize {
        KIND_LEN
            + self
                .elements
                .iter()
                .map(|e| ELEMENT_HEADER_LEN + e.value.len())
                .sum::<usize>()
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.kind.to_be_bytes());
        for e in &self.elements {
            if e.value.len() > MAX_VALUE {
                return Err(WireError::Oversized {
                    len: e.value.len(),
                    max: MAX_VALUE,
                });
            }
            out.extend_from_slice(&e.tag.to_be_bytes());
            out.extend_from_slice(&(e.value.len() as u16).to_be_bytes());
            out.extend_from_slice(&e.value);
        }
        Ok(out)
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        let view = TlvView::parse(b)?;
        Ok(TlvMessage {
            kind: view.kind,
            elements: view
                .elements()
                .map(|(tag, value)| TlvElement {
                    tag,
                    value: value.to_vec(),
                })
                .collect(),
        })
    }
}

pub(crate) fn as_u32(v: &[u8]) -> Option<u32> {
    <[u8; 4]>::try_from(v).ok().map(u32::from_be_bytes)
}

pub(crate) fn as_u16(v: &[u8]) -> Option<u16> {
    <[u8; 2]>::try_from(v).ok().map(u16::from_be_bytes)
}

pub(crate) fn as_ip(v: &[u8]) -> Option<Ipv4Addr> {
    <[u8; 4]>::try_from(v).ok().map(Ipv4Addr::from)
}

/// Borrowed, validated view of an encoded [`TlvMessage`].
#[derive(Debug, Clone, Copy)]
pub struct TlvView<'a> {
    pub kind: u16,
    body: &'a [u8],
}

impl<'a> TlvView<'a> {
    /// Validates the whole element chain up front, so iteration never fails.
    pub fn parse(b: &'a [u8]) -> Result<Self, WireError> {
        if b.len() < KIND_LEN {
            return Err(WireError::Truncated {
                needed: KIND_LEN,
                have: b.len(),
            });
        }
        let body = &b[KIND_LEN..];
        let mut rest = body;
        while !rest.is_empty() {
            if rest.len() < ELEMENT_HEADER_LEN {
                return Err(WireError::Truncated {
                    needed: ELEMENT_HEADER_LEN,
                    have: rest.len(),
                });
            }
            let tag = u16::from_be_bytes([rest[0], rest[1]]);
            let len = u16::from_be_bytes([rest[2], rest[3]]) as usize;
            if rest.len() < ELEMENT_HEADER_LEN + len {
                return Err(WireError::BadElement { tag });
            }
            rest = &rest[ELEMENT_HEADER_LEN + len..];
        }
        Ok(TlvView {
            kind: u16::from_be_bytes([b[0], b[1]]),
            body,
        })
    }

    pub fn msg_kind(&self) -> Option<MsgKind> {
        MsgKind::from_code(self.kind)
    }

    pub fn elements(&self) -> impl Iterator<Item = (u16, &'a [u8])> {
        let mut rest = self.body;
        std::iter::from_fn(move || {
            if rest.len() < ELEMENT_HEADER_LEN {
                return None;
            }
            let tag = u16::from_be_bytes([rest[0], rest[1]]);
            let len = u16::from_be_bytes([rest[2], rest[3]]) as usize;
            let value = rest.get(ELEMENT_HEADER_LEN..ELEMENT_HEADER_LEN + len)?;
            rest = &rest[ELEMENT_HEADER_LEN + len..];
            Some((tag, value))
        })
    }

    pub fn get(&self, tag: Tag) -> Option<&'a [u8]> {
        self.elements()
            .find(|(t, _)| *t == tag as u16)
            .map(|(_, v)| v)
    }

    pub fn get_str(&self, tag: Tag) -> Option<&'a str> {
        self.get(tag).and_then(|v| std::str::from_utf8(v).ok())
    }

    pub fn get_u32(&self, tag: Tag) -> Option<u32> {
        self.get(tag).and_then(as_u32)
    }

    pub fn get_u16(&self, tag: Tag) -> Option<u16> {
        self.get(tag).and_then(as_u16)
    }

    pub fn get_ip(&self, tag: Tag) -> Option<Ipv4Addr> {
        self.get(tag).and_then(as_ip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_layout() {
        let m = TlvMessage {
            kind: 0x0103,
            elements: vec![
                TlvElement {
                    tag: 0x0001,
                    value: b"AMF".to_vec(),
                },
                TlvElement {
                    tag: 0x0002,
                    value: vec![],
                },
            ],
        };
        let bytes = m.encode().unwrap();
        assert_eq!(
            bytes,
            vec![0x01, 0x03, 0x00, 0x01, 0x00, 0x03, b'A', b'M', b'F', 0x00, 0x02, 0x00, 0x00]
        );
        assert_eq!(TlvMessage::decode(&bytes).unwrap(), m);
    }

    #[test]
    fn truncated_element_is_rejected() {
        assert!(TlvMessage::decode(&[0x01]).is_err());
        assert!(TlvMessage::decode(&[0x01, 0x03, 0x00]).is_err());
        assert_eq!(
            TlvMessage::decode(&[0x01, 0x03, 0x00, 0x07, 0x00, 0x05, 1, 2]),
            Err(WireError::BadElement { tag: 7 })
        );
    }

    #[test]
    fn oversized_value_is_rejected() {
        let m = TlvMessage {
            kind: 1,
            elements: vec![TlvElement {
                tag: 1,
                value: vec![0; 65_536],
            }],
        };
        assert!(matches!(m.encode(), Err(WireError::Oversized { .. })));
    }

    #[test]
    fn typed_accessors() {
        let m = TlvMessage::new(MsgKind::NfHeartbeatReq)
            .with_str(Tag::NfId, "AUSF")
            .with_u32(Tag::Teid, 7)
            .with_ip(Tag::UeIp, Ipv4Addr::new(10, 45, 0, 2));
        let bytes = m.encode().unwrap();
        let v = TlvView::parse(&bytes).unwrap();
        assert_eq!(v.msg_kind(), Some(MsgKind::NfHeartbeatReq));
        assert_eq!(v.get_str(Tag::NfId), Some("AUSF"));
        assert_eq!(v.get_u32(Tag::Teid), Some(7));
        assert_eq!(v.get_ip(Tag::UeIp), Some(Ipv4Addr::new(10, 45, 0, 2)));
        assert_eq!(v.get(Tag::Seq), None);
    }
}
