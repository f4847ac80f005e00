//! Turns raw tag reports into location events for the client application.

use crate::link::TagReportFrame;
use crate::tag::TagId;

pub const DEFAULT_DEDUP_WINDOW: f64 = 1.0;
pub const DEFAULT_LOST_TIMEOUT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationEventKind {
    Changed(TagId),
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationEvent {
    pub kind: LocationEventKind,
    pub at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sighting {
    pub tag: TagId,
    pub last_seen: f64,
}

/// Middleware state. Reports of the current tag never produce a second
/// `Changed`; a new `Changed` for the same tag requires an intervening `Lost`.
#[derive(Debug, Clone, PartialEq)]
pub struct Middleware {
    current: Option<Sighting>,
    dedup_window: f64,
    lost_timeout: f64,
    clock: f64,
}

impl Default for Middleware {
    fn default() -> Self {
        Middleware::new(DEFAULT_DEDUP_WINDOW, DEFAULT_LOST_TIMEOUT)
    }
}

impl Middleware {
    pub fn new(dedup_window: f64, lost_timeout: f64) -> Self {
        Middleware {
            current: None,
            dedup_window,
            lost_timeout,
            clock: f64::NEG_INFINITY,
        }
    }

    pub fn current(&self) -> Option<Sighting> {
        self.current
    }

    pub fn current_tag(&self) -> Option<TagId> {
        self.current.map(|s| s.tag)
    }

    pub fn dedup_window(&self) -> f64 {
        self.dedup_window
    }

    pub fn lost_timeout(&self) -> f64 {
        self.lost_timeout
    }

    // Out-of-order timestamps are clamped so last_seen and event times
    // never go backwards.
    fn observe(&mut self, now: f64) -> f64 {
        self.clock = self.clock.max(now);
        self.clock
    }

    pub fn ingest(&mut self, report: &TagReportFrame, now: f64) -> Option<LocationEvent> {
        let now = self.observe(now);
        let tag = report.tag_id;
        match &mut self.current {
            Some(current) if current.tag == tag => {
                current.last_seen = now;
                None
            }
            _ => {
                self.current = Some(Sighting {
                    tag,
                    last_seen: now,
                });
                Some(LocationEvent {
                    kind: LocationEventKind::Changed(tag),
                    at: now,
                })
            }
        }
    }

    pub fn poll_lost(&mut self, now: f64) -> Option<LocationEvent> {
        let now = self.observe(now);
        match self.current {
            Some(current) if now - current.last_seen > self.lost_timeout => {
                self.current = None;
                Some(LocationEvent {
                    kind: LocationEventKind::Lost,
                    at: now,
                })
            }
            _ => None,
        }
    }
}
