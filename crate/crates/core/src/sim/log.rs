//! Replayable event trace. One event per line:
//!
//! ```text
//! <seconds, 6 decimals>\t<EVENT>\t<payload>
//! ```
//!
//! | EVENT             | payload                              |
//! |-------------------|--------------------------------------|
//! | `FrameEmitted`    | 16 uppercase hex digits (8 bytes)    |
//! | `LocationChanged` | tag id, 10 uppercase hex digits      |
//! | `LocationLost`    | empty                                |
//! | `Located`         | location name                        |

use std::fmt::Write as _;

use thiserror::Error;

use crate::link::FRAME_LEN;
use crate::tag::{parse_tag_id, TagId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    FrameEmitted([u8; FRAME_LEN]),
    LocationChanged(TagId),
    LocationLost,
    Located(String),
}

impl SimEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SimEvent::FrameEmitted(_) => "FrameEmitted",
            SimEvent::LocationChanged(_) => "LocationChanged",
            SimEvent::LocationLost => "LocationLost",
            SimEvent::Located(_) => "Located",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub at: f64,
    pub event: SimEvent,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("event log line {line}: {reason}")]
pub struct LogParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = LogEntry>) -> Self {
        let mut log = EventLog::new();
        for e in entries {
            log.push(e.at, e.event);
        }
        log
    }

    pub fn push(&mut self, at: f64, event: SimEvent) {
        debug_assert!(
            self.entries.last().is_none_or(|e| e.at <= at),
            "log times must not decrease"
        );
        self.entries.push(LogEntry { at, event });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let payload = match &e.event {
                SimEvent::FrameEmitted(bytes) => hex::encode_upper(bytes),
                SimEvent::LocationChanged(tag) => tag.to_string(),
                SimEvent::LocationLost => String::new(),
                SimEvent::Located(name) => name.clone(),
            };
            writeln!(out, "{:.6}\t{}\t{}", e.at, e.event.name(), payload).expect("write to string");
        }
        out
    }
}

pub fn parse_event_log(text: &str) -> Result<EventLog, LogParseError> {
    let mut log = EventLog::new();
    let mut last = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        let err = |reason: &str| LogParseError {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.splitn(3, '\t');
        let (Some(at), Some(name), Some(payload)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(err("expected three tab-separated fields"));
        };
        let at: f64 = at.parse().map_err(|_| err("bad timestamp"))?;
        if !at.is_finite() || at < last {
            return Err(err("timestamps must be finite and nondecreasing"));
        }
        last = at;
        let event = match name {
            "FrameEmitted" => {
                let bytes = hex::decode(payload).map_err(|_| err("frame payload is not hex"))?;
                SimEvent::FrameEmitted(bytes.try_into().map_err(|_| err("frame must be 8 bytes"))?)
            }
            "LocationChanged" => {
                SimEvent::LocationChanged(parse_tag_id(payload).map_err(|e| err(&e.to_string()))?)
            }
            "LocationLost" if payload.is_empty() => SimEvent::LocationLost,
            "LocationLost" => return Err(err("LocationLost takes no payload")),
            "Located" => SimEvent::Located(payload.to_string()),
            _ => return Err(err("unknown event")),
        };
        log.entries.push(LogEntry { at, event });
    }
    Ok(log)
}
