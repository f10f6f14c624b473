use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::simnet::Millis;
use crate::wirefmt::Protocol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error("field `{field}` has invalid value `{value}`")]
    Invalid { field: &'static str, value: String },
    #[error("event id {id} does not follow {last}")]
    IdOrder { id: u64, last: u64 },
    #[error("timestamp {ts} precedes {last}")]
    TimeOrder { ts: Millis, last: Millis },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<SchemaError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Delivered,
    Dropped,
    EliminatedDuplicate,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Delivered => "DELIVERED",
            Outcome::Dropped => "DROPPED",
            Outcome::EliminatedDuplicate => "ELIMINATED_DUPLICATE",
        }
    }
}

impl FromStr for Outcome {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DELIVERED" => Ok(Outcome::Delivered),
            "DROPPED" => Ok(Outcome::Dropped),
            "ELIMINATED_DUPLICATE" => Ok(Outcome::EliminatedDuplicate),
            _ => Err(SchemaError::Invalid {
                field: "outcome",
                value: s.to_string(),
            }),
        }
    }
}

pub(crate) fn parse_protocol(s: &str) -> Result<Protocol, SchemaError> {
    Protocol::ALL
        .iter()
        .copied()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| SchemaError::Invalid {
            field: "protocol",
            value: s.to_string(),
        })
}

/// One tapped packet, normalised for analytics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NwdafEvent {
    pub event_id: u64,
    pub ts: Millis,
    pub link: String,
    pub src: String,
    pub dst: String,
    pub protocol: Protocol,
    pub bytes: u64,
    pub outcome: Outcome,
    pub attrs: BTreeMap<String, String>,
}

fn clean(field: &'static str, v: &str, allow_empty: bool) -> Result<(), SchemaError> {
    if v.is_empty() && !allow_empty {
        return Err(SchemaError::Missing(field));
    }
    if v.contains(['\t', '\n', '\r']) {
        return Err(SchemaError::Invalid {
            field,
            value: v.escape_debug().to_string(),
        });
    }
    Ok(())
}

impl NwdafEvent {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }

    pub fn is_delivered(&self) -> bool {
        self.outcome == Outcome::Delivered
    }

    /// True for the record of a transmission. Receiver-side eliminations and
    /// discards are extra records about a packet already counted as sent.
    pub fn is_send(&self) -> bool {
        match self.outcome {
            Outcome::Delivered => true,
            Outcome::Dropped => !self.attrs.contains_key("reason"),
            Outcome::EliminatedDuplicate => false,
        }
    }

    /// Message name of the TLV body, if any.
    pub fn msg(&self) -> Option<&str> {
        self.attr("msg")
    }

    /// Checks every field for presence and for characters the line format
    /// cannot carry.
    pub fn validate(&self) -> Result<(), SchemaError> {
        clean("link_id", &self.link, false)?;
        clean("src", &self.src, false)?;
        clean("dst", &self.dst, false)?;
        for (k, v) in &self.attrs {
            if k.is_empty() || k.contains('=') {
                return Err(SchemaError::Invalid {
                    field: "attrs",
                    value: k.clone(),
                });
            }
            clean("attrs", k, false)?;
            clean("attrs", v, true)?;
        }
        Ok(())
    }

    pub fn write_line(&self, out: &mut String) {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.event_id,
            self.ts,
            self.link,
            self.src,
            self.dst,
            self.protocol.as_str(),
            self.bytes,
            self.outcome.as_str()
        );
        for (k, v) in &self.attrs {
            let _ = write!(out, "\t{k}={v}");
        }
        out.push('\n');
    }

    pub fn to_line(&self) -> String {
        let mut s = String::new();
        self.write_line(&mut s);
        s
    }

    /// Parses one line (without its terminator).
    pub fn parse_line(line: &str) -> Result<Self, SchemaError> {
        let mut f = line.split('\t');
        let mut next = |name: &'static str| f.next().ok_or(SchemaError::Missing(name));
        let num = |name: &'static str, v: &str| {
            v.parse::<u64>().map_err(|_| SchemaError::Invalid {
                field: name,
                value: v.to_string(),
            })
        };
        let event_id = num("event_id", next("event_id")?)?;
        let ts = num("ts_ms", next("ts_ms")?)?;
        let link = next("link_id")?.to_string();
        let src = next("src")?.to_string();
        let dst = next("dst")?.to_string();
        let protocol = parse_protocol(next("protocol")?)?;
        let bytes = num("bytes", next("bytes")?)?;
        let outcome = next("outcome")?.parse()?;
        let mut attrs = BTreeMap::new();
        for kv in f {
            let (k, v) = kv.split_once('=').ok_or_else(|| SchemaError::Invalid {
                field: "attrs",
                value: kv.to_string(),
            })?;
            attrs.insert(k.to_string(), v.to_string());
        }
        let e = NwdafEvent {
            event_id,
            ts,
            link,
            src,
            dst,
            protocol,
            bytes,
            outcome,
            attrs,
        };
        e.validate()?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> NwdafEvent {
        NwdafEvent {
            event_id: 4,
            ts: 3355,
            link: "AUSF-NRF".into(),
            src: "AUSF".into(),
            dst: "NRF".into(),
            protocol: Protocol::Sbi,
            bytes: 30,
            outcome: Outcome::Delivered,
            attrs: [("msg", "NF_HEARTBEAT_REQ"), ("dport", "7777")]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    #[test]
    fn line_format() {
        assert_eq!(
            sample().to_line(),
            "4\t3355\tAUSF-NRF\tAUSF\tNRF\tSBI\t30\tDELIVERED\tdport=7777\tmsg=NF_HEARTBEAT_REQ\n"
        );
    }

    #[test]
    fn line_round_trip() {
        let e = sample();
        let line = e.to_line();
        assert_eq!(NwdafEvent::parse_line(line.trim_end_matches('\n')).unwrap(), e);
    }

    #[test]
    fn schema_rejections() {
        let mut e = sample();
        e.dst.clear();
        assert_eq!(e.validate(), Err(SchemaError::Missing("dst")));
        assert!(NwdafEvent::parse_line("1\t2\tL\tA\tB\tSBI\t3").is_err());
        assert!(NwdafEvent::parse_line("1\t2\tL\tA\tB\tXYZ\t3\tDELIVERED").is_err());
        assert!(NwdafEvent::parse_line("1\t2\tL\tA\tB\tSBI\t3\tDELIVERED\tnoequals").is_err());
    }
}
