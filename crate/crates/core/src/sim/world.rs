use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::air::{powered_tags, FieldView, Inventory, Point, SlotCountPolicy};
use crate::link::{encode_frame, FRAME_LEN};
use crate::sim::scenario::Scenario;
use crate::tag::{Tag, TagId};

/// Interactive steering. Commands queue up and take effect at the next tick
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum SteerCommand {
    #[serde(rename = "vel")]
    SetVelocity {
        vx: f64,
        vy: f64,
    },
    #[serde(rename = "goto")]
    GoTo {
        x: f64,
        y: f64,
    },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Motion {
    /// Walking the scenario path; index of the next waypoint.
    Path(usize),
    Velocity(Point),
    GoTo(Point),
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmittedFrame {
    pub at: f64,
    pub bytes: [u8; FRAME_LEN],
}

/// The simulated building: fixed tags and one user carrying the reader.
#[derive(Debug, Clone)]
pub struct WorldState {
    ticks: u64,
    dt: f64,
    walk_speed: f64,
    path: Vec<crate::sim::scenario::Waypoint>,
    motion: Motion,
    last_velocity: Point,
    pending: VecDeque<SteerCommand>,
    tags: BTreeMap<TagId, Tag>,
    field: FieldView,
    inventory: Inventory,
    powered: BTreeSet<TagId>,
    rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(scenario: &Scenario) -> Self {
        let start = scenario
            .path
            .first()
            .map(|w| w.position)
            .unwrap_or_default();
        let mut field = FieldView::new(start, scenario.preset);
        let mut tags = BTreeMap::new();
        for spec in &scenario.tags {
            field
                .place(spec.id, spec.position)
                .expect("validated scenario has unique, finite tag positions");
            tags.insert(
                spec.id,
                Tag::new(spec.id, spec.class, spec.power).with_kill_code(spec.kill_code),
            );
        }
        let inventory = Inventory::new(scenario.preset.slot_rate(), SlotCountPolicy::default())
            .with_refresh(scenario.presence_refresh);
        WorldState {
            ticks: 0,
            dt: scenario.dt,
            walk_speed: scenario.walk_speed,
            path: scenario.path.clone(),
            motion: Motion::Path(1),
            last_velocity: Point::default(),
            pending: VecDeque::new(),
            tags,
            field,
            inventory,
            powered: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        }
    }

    pub fn clock(&self) -> f64 {
        self.ticks as f64 * self.dt
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn user_position(&self) -> Point {
        self.field.reader
    }

    /// Displacement per second during the last tick.
    pub fn user_velocity(&self) -> Point {
        self.last_velocity
    }

    pub fn tags(&self) -> &BTreeMap<TagId, Tag> {
        &self.tags
    }

    pub fn field(&self) -> &FieldView {
        &self.field
    }

    /// Tags powered at the end of the last tick.
    pub fn powered(&self) -> &BTreeSet<TagId> {
        &self.powered
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn steer(&mut self, command: SteerCommand) {
        self.pending.push_back(command);
    }

    pub fn tag_mut(&mut self, id: TagId) -> Option<&mut Tag> {
        self.tags.get_mut(&id)
    }

    fn apply_commands(&mut self) {
        while let Some(cmd) = self.pending.pop_front() {
            self.motion = match cmd {
                SteerCommand::SetVelocity { vx, vy } if vx.is_finite() && vy.is_finite() => {
                    Motion::Velocity(Point::new(vx, vy))
                }
                SteerCommand::GoTo { x, y } if x.is_finite() && y.is_finite() => {
                    Motion::GoTo(Point::new(x, y))
                }
                SteerCommand::Stop => Motion::Hold,
                _ => self.motion,
            };
        }
    }

    /// Moves towards `target` by at most `speed * dt`; returns true on arrival.
    fn walk_towards(&mut self, target: Point, speed: f64) -> bool {
        let here = self.field.reader;
        let remaining = here.distance(target);
        let step = speed * self.dt;
        if remaining <= step {
            self.field.reader = target;
            true
        } else {
            let f = step / remaining;
            self.field.reader = Point::new(
                here.x + (target.x - here.x) * f,
                here.y + (target.y - here.y) * f,
            );
            false
        }
    }

    fn move_user(&mut self) {
        let before = self.field.reader;
        match self.motion {
            Motion::Path(next) => {
                if let Some(wp) = self.path.get(next).copied() {
                    if self.walk_towards(wp.position, wp.speed) {
                        self.motion = Motion::Path(next + 1);
                    }
                }
            }
            Motion::Velocity(v) => {
                let p = self.field.reader;
                self.field.reader = Point::new(p.x + v.x * self.dt, p.y + v.y * self.dt);
            }
            Motion::GoTo(target) => {
                if self.walk_towards(target, self.walk_speed) {
                    self.motion = Motion::Hold;
                }
            }
            Motion::Hold => {}
        }
        let after = self.field.reader;
        self.last_velocity = Point::new(
            (after.x - before.x) / self.dt,
            (after.y - before.y) / self.dt,
        );
    }

    /// One fixed step: apply steering, move the user, recompute the powered
    /// set and run every inventory slot ending within this step.
    pub fn advance(&mut self) -> Vec<EmittedFrame> {
        self.apply_commands();
        self.move_user();
        self.powered =
            powered_tags(&self.field, &self.tags).expect("every placed tag has a record");

        let end = (self.ticks + 1) as f64 * self.dt;
        let due = self.inventory.slots_ending_by(end);
        let mut frames = Vec::new();
        while self.inventory.slots_run() < due {
            if let Some(read) = self.inventory.run_slot(&self.powered, &mut self.rng) {
                frames.push(EmittedFrame {
                    at: read.at,
                    bytes: encode_frame(read.tag),
                });
            }
        }
        self.ticks += 1;
        frames
    }
}
