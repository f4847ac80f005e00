//! Simulated air interface: which tags the reader's field powers, and how
//! the reader singulates them with framed slotted ALOHA.
//!
//! Time is kept on an integer slot grid. Slot `k` (counted from the start of
//! an inventory) ends at `(k + 1) / slot_rate` seconds and a singulation is
//! timestamped at the end of its slot, so the reader can never exceed
//! `slot_rate` reads per second.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tag::{Tag, TagId, TagPower};

/// Range of a battery-powered tag, independent of the reader preset.
pub const ACTIVE_TAG_RANGE_M: f64 = 100.0;

/// Default frame size for the adaptive anti-collision policy.
pub const DEFAULT_SLOT_COUNT: u32 = 16;

/// Upper bound on the adaptive frame size.
pub const MAX_SLOT_COUNT: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirError {
    #[error("tag {0} has a position but no tag record")]
    UnknownTag(TagId),
    #[error("tag {0} placed twice")]
    DuplicateTag(TagId),
    #[error("non-finite position ({x}, {y})")]
    NonFinitePosition { x: f64, y: f64 },
    #[error("unknown reader preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReaderPreset {
    /// 135 kHz low-frequency reader with a 15 cm field.
    Lf135,
    /// 13.56 MHz HF reader, 20 cm field, 50 slots/s.
    Hf1356,
    /// 915 MHz UHF reader, 3 m field, 400 slots/s.
    Uhf900,
}

impl ReaderPreset {
    pub const ALL: [ReaderPreset; 3] = [
        ReaderPreset::Lf135,
        ReaderPreset::Hf1356,
        ReaderPreset::Uhf900,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReaderPreset::Lf135 => "LF135",
            ReaderPreset::Hf1356 => "HF1356",
            ReaderPreset::Uhf900 => "UHF900",
        }
    }

    pub fn frequency_hz(self) -> f64 {
        match self {
            ReaderPreset::Lf135 => 135e3,
            ReaderPreset::Hf1356 => 13.56e6,
            ReaderPreset::Uhf900 => 915e6,
        }
    }

    /// Passive read range in meters.
    pub fn read_range(self) -> f64 {
        match self {
            ReaderPreset::Lf135 => 0.15,
            ReaderPreset::Hf1356 => 0.20,
            ReaderPreset::Uhf900 => 3.0,
        }
    }

    pub fn slot_rate(self) -> u32 {
        match self {
            ReaderPreset::Lf135 | ReaderPreset::Hf1356 => 50,
            ReaderPreset::Uhf900 => 400,
        }
    }
}

impl fmt::Display for ReaderPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReaderPreset {
    type Err = AirError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReaderPreset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| AirError::UnknownPreset(s.to_string()))
    }
}

/// Geometry seen by one reader: its position and where each tag sits.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldView {
    pub reader: Point,
    pub preset: ReaderPreset,
    tags: BTreeMap<TagId, Point>,
}

impl FieldView {
    pub fn new(reader: Point, preset: ReaderPreset) -> Self {
        FieldView {
            reader,
            preset,
            tags: BTreeMap::new(),
        }
    }

    pub fn place(&mut self, id: TagId, at: Point) -> Result<(), AirError> {
        if !at.is_finite() {
            return Err(AirError::NonFinitePosition { x: at.x, y: at.y });
        }
        if self.tags.contains_key(&id) {
            return Err(AirError::DuplicateTag(id));
        }
        self.tags.insert(id, at);
        Ok(())
    }

    pub fn position(&self, id: TagId) -> Option<Point> {
        self.tags.get(&id).copied()
    }

    pub fn positions(&self) -> impl Iterator<Item = (TagId, Point)> + '_ {
        self.tags.iter().map(|(id, p)| (*id, *p))
    }
}

/// Tags energised by the field: live passive tags within the preset's read
/// range (closed disk) and live active tags within [`ACTIVE_TAG_RANGE_M`].
pub fn powered_tags(
    field: &FieldView,
    tags: &BTreeMap<TagId, Tag>,
) -> Result<BTreeSet<TagId>, AirError> {
    let mut powered = BTreeSet::new();
    for (id, at) in field.positions() {
        let tag = tags.get(&id).ok_or(AirError::UnknownTag(id))?;
        if tag.is_killed() {
            continue;
        }
        let range = match tag.power() {
            TagPower::Passive => field.preset.read_range(),
            TagPower::Active => ACTIVE_TAG_RANGE_M,
        };
        if field.reader.distance(at) <= range {
            powered.insert(id);
        }
    }
    Ok(powered)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singulation {
    /// Slot index within the round.
    pub slot: u32,
    pub tag: TagId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub slot_count: u32,
    /// Singulations in slot order.
    pub singulated: Vec<Singulation>,
    pub collision_slots: u32,
    pub empty_slots: u32,
    pub elapsed: f64,
}

impl RoundResult {
    pub fn tag_ids(&self) -> Vec<TagId> {
        self.singulated.iter().map(|s| s.tag).collect()
    }
}

/// One drawn ALOHA frame: the responders in every slot.
#[derive(Debug, Clone)]
struct Frame {
    slots: Vec<Vec<TagId>>,
}

impl Frame {
    /// Every responder, in id order, draws one slot uniformly from `0..slot_count`.
    fn draw<R: Rng + ?Sized>(
        responders: impl IntoIterator<Item = TagId>,
        slot_count: u32,
        rng: &mut R,
    ) -> Self {
        assert!(slot_count >= 1, "slot count must be positive");
        let mut slots = vec![Vec::new(); slot_count as usize];
        for id in responders {
            let slot = rng.random_range(0..slot_count) as usize;
            slots[slot].push(id);
        }
        Frame { slots }
    }

    fn summarize(&self, slot_rate: u32) -> RoundResult {
        let mut result = RoundResult {
            slot_count: self.slots.len() as u32,
            singulated: Vec::new(),
            collision_slots: 0,
            empty_slots: 0,
            elapsed: self.slots.len() as f64 / f64::from(slot_rate),
        };
        for (i, slot) in self.slots.iter().enumerate() {
            match slot.as_slice() {
                [] => result.empty_slots += 1,
                [tag] => result.singulated.push(Singulation {
                    slot: i as u32,
                    tag: *tag,
                }),
                _ => result.collision_slots += 1,
            }
        }
        result
    }
}

/// One framed slotted-ALOHA round over the powered tags that have not been
/// acknowledged yet. `elapsed` is measured with `slot_rate` slots per second.
pub fn inventory_round<R: Rng + ?Sized>(
    powered: &BTreeSet<TagId>,
    acknowledged: &BTreeSet<TagId>,
    slot_count: u32,
    slot_rate: u32,
    rng: &mut R,
) -> RoundResult {
    Frame::draw(powered.difference(acknowledged).copied(), slot_count, rng).summarize(slot_rate)
}

/// Mean number of singulations in one round with `tags` responders and
/// `slot_count` slots: `n * (1 - 1/N)^(n - 1)`.
pub fn expected_singulations(tags: u32, slot_count: u32) -> f64 {
    if tags == 0 {
        return 0.0;
    }
    let n = f64::from(tags);
    let miss = 1.0 - 1.0 / f64::from(slot_count);
    n * miss.powi(tags as i32 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotCountPolicy {
    Fixed(u32),
    /// Doubles the frame when more than half its slots collided, halves it
    /// when more than three quarters were empty.
    Adaptive {
        initial: u32,
    },
}

impl Default for SlotCountPolicy {
    fn default() -> Self {
        SlotCountPolicy::Adaptive {
            initial: DEFAULT_SLOT_COUNT,
        }
    }
}

impl SlotCountPolicy {
    pub fn initial(self) -> u32 {
        match self {
            SlotCountPolicy::Fixed(n) | SlotCountPolicy::Adaptive { initial: n } => {
                n.clamp(1, MAX_SLOT_COUNT)
            }
        }
    }

    pub fn next(self, round: &RoundResult) -> u32 {
        match self {
            SlotCountPolicy::Fixed(n) => n.max(1),
            SlotCountPolicy::Adaptive { .. } => {
                let n = round.slot_count;
                if 2 * round.collision_slots > n {
                    (n * 2).min(MAX_SLOT_COUNT)
                } else if 4 * round.empty_slots > 3 * n {
                    (n / 2).max(1)
                } else {
                    n
                }
            }
        }
    }
}

/// A tag read with the time its slot ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedRead {
    pub at: f64,
    pub tag: TagId,
}

#[derive(Debug, Clone)]
struct ActiveRound {
    frame: Frame,
    cursor: usize,
}

/// Continuous inventory driven one slot at a time.
///
/// Acknowledged tags stay silent until the powered set changes; the change
/// is applied at the next round boundary. With `refresh_after` set, the
/// acknowledged set is also cleared at the first round boundary at least
/// that many seconds after it was last cleared, so stationary tags keep
/// being reported.
#[derive(Debug, Clone)]
pub struct Inventory {
    slot_rate: u32,
    policy: SlotCountPolicy,
    slot_count: u32,
    slots_run: u64,
    refresh_after_slots: Option<u64>,
    last_clear_slot: u64,
    round: Option<ActiveRound>,
    acknowledged: BTreeSet<TagId>,
    last_powered: BTreeSet<TagId>,
    field_changed: bool,
}

impl Inventory {
    pub fn new(slot_rate: u32, policy: SlotCountPolicy) -> Self {
        assert!(slot_rate > 0, "slot rate must be positive");
        Inventory {
            slot_rate,
            policy,
            slot_count: policy.initial(),
            slots_run: 0,
            refresh_after_slots: None,
            last_clear_slot: 0,
            round: None,
            acknowledged: BTreeSet::new(),
            last_powered: BTreeSet::new(),
            field_changed: false,
        }
    }

    pub fn with_refresh(mut self, seconds: Option<f64>) -> Self {
        self.refresh_after_slots = seconds
            .filter(|s| *s > 0.0)
            .map(|s| (s * f64::from(self.slot_rate)).ceil() as u64);
        self
    }

    pub fn slot_rate(&self) -> u32 {
        self.slot_rate
    }

    pub fn slots_run(&self) -> u64 {
        self.slots_run
    }

    pub fn current_slot_count(&self) -> u32 {
        self.slot_count
    }

    pub fn acknowledged(&self) -> &BTreeSet<TagId> {
        &self.acknowledged
    }

    /// End time of the next slot to run.
    pub fn next_slot_end(&self) -> f64 {
        (self.slots_run + 1) as f64 / f64::from(self.slot_rate)
    }

    /// Number of whole slots that end at or before `t`.
    pub fn slots_ending_by(&self, t: f64) -> u64 {
        (t * f64::from(self.slot_rate) + 1e-9).floor().max(0.0) as u64
    }

    /// Runs one slot against the tags powered right now. A tag whose slot
    /// comes up after it has left the field is not read.
    pub fn run_slot<R: Rng + ?Sized>(
        &mut self,
        powered: &BTreeSet<TagId>,
        rng: &mut R,
    ) -> Option<TimedRead> {
        if *powered != self.last_powered {
            self.field_changed = true;
            self.last_powered.clone_from(powered);
        }
        if self.round.is_none() {
            let refresh_due = self
                .refresh_after_slots
                .is_some_and(|n| self.slots_run - self.last_clear_slot >= n);
            if self.field_changed || refresh_due {
                self.acknowledged.clear();
                self.field_changed = false;
                self.last_clear_slot = self.slots_run;
            }
            let frame = Frame::draw(
                powered.difference(&self.acknowledged).copied(),
                self.slot_count,
                rng,
            );
            self.round = Some(ActiveRound { frame, cursor: 0 });
        }

        let round = self.round.as_mut().expect("round started above");
        let read = match round.frame.slots[round.cursor].as_slice() {
            [tag] if powered.contains(tag) => {
                self.acknowledged.insert(*tag);
                Some(TimedRead {
                    at: (self.slots_run + 1) as f64 / f64::from(self.slot_rate),
                    tag: *tag,
                })
            }
            _ => None,
        };
        round.cursor += 1;
        self.slots_run += 1;

        if round.cursor == round.frame.slots.len() {
            let summary = round.frame.summarize(self.slot_rate);
            self.slot_count = self.policy.next(&summary);
            self.round = None;
        }
        read
    }
}

/// Inventories a static field for `duration` seconds and returns every read.
/// Only whole slots that end within the duration are run.
pub fn run_inventory<R: Rng + ?Sized>(
    field: &FieldView,
    tags: &BTreeMap<TagId, Tag>,
    duration: f64,
    policy: SlotCountPolicy,
    rng: &mut R,
) -> Result<Vec<TimedRead>, AirError> {
    let powered = powered_tags(field, tags)?;
    let mut inventory = Inventory::new(field.preset.slot_rate(), policy);
    let total = inventory.slots_ending_by(duration);
    let mut reads = Vec::new();
    for _ in 0..total {
        if let Some(read) = inventory.run_slot(&powered, rng) {
            reads.push(read);
        }
    }
    Ok(reads)
}
