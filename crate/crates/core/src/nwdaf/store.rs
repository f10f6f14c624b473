use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{NwdafEvent, SchemaError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("event file I/O")]
    Io(#[from] io::Error),
}

/// Append-only event log. Ids are assigned on append and strictly increase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventStore {
    events: Vec<NwdafEvent>,
}

impl EventStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[NwdafEvent] {
        &self.events
    }

    pub fn next_id(&self) -> u64 {
        self.events.last().map_or(1, |e| e.event_id + 1)
    }

    /// Validates and appends, assigning the next id.
    pub fn append(&mut self, mut event: NwdafEvent) -> Result<u64, SchemaError> {
        event.event_id = self.next_id();
        self.push(event)
    }

    /// Appends an event that already carries its id.
    pub fn push(&mut self, event: NwdafEvent) -> Result<u64, SchemaError> {
        event.validate()?;
        if let Some(last) = self.events.last() {
            if event.event_id <= last.event_id {
                return Err(SchemaError::IdOrder {
                    id: event.event_id,
                    last: last.event_id,
                });
            }
            if event.ts < last.ts {
                return Err(SchemaError::TimeOrder {
                    ts: event.ts,
                    last: last.ts,
                });
            }
        }
        let id = event.event_id;
        self.events.push(event);
        Ok(id)
    }

    pub fn write_to(&self, out: &mut impl Write) -> io::Result<()> {
        let mut line = String::new();
        for e in &self.events {
            line.clear();
            e.write_line(&mut line);
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<(), StoreError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self, StoreError> {
        let mut store = EventStore::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let wrap = |e: SchemaError| SchemaError::Line {
                line: i + 1,
                source: Box::new(e),
            };
            let e = NwdafEvent::parse_line(&line).map_err(wrap)?;
            store.push(e).map_err(wrap)?;
        }
        Ok(store)
    }

    pub fn import(path: &Path) -> Result<Self, StoreError> {
        Self::read_from(io::BufReader::new(fs::File::open(path)?))
    }
}
