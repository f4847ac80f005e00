//! Discrete-event building simulation wired through the whole pipeline:
//! world → serial frames → middleware → client → in-process location server.

pub mod log;
pub mod scenario;
pub mod world;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::air::Point;
use crate::client::{ClientState, Input, Phase};
use crate::link::StreamDecoder;
use crate::middleware::{LocationEventKind, Middleware};
use crate::server::auth::CredentialStore;
use crate::server::{
    load_registry, AssetStore, LocationRecord, LocationServer, Registry, RegistryError,
};
use crate::tag::TagId;

pub use log::{parse_event_log, EventLog, LogEntry, SimEvent};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
pub use world::{EmittedFrame, SteerCommand, WorldState};

/// Credentials the simulated client logs in with.
pub const SIM_USER: &str = "sim";
pub const SIM_PASSWORD: &str = "sim";
const SIM_SERVER: &str = "in-process";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone, Serialize)]
pub struct TagSnapshot {
    pub id: TagId,
    pub x: f64,
    pub y: f64,
    pub powered: bool,
    pub killed: bool,
}

/// Serializable view of the simulation for the interactive API.
#[derive(Debug, Clone, Serialize)]
pub struct SimSnapshot {
    pub t: f64,
    pub user: Point,
    pub tags: Vec<TagSnapshot>,
    pub client_phase: &'static str,
    pub location: Option<LocationRecord>,
}

pub struct Simulation {
    scenario: Scenario,
    registry: Registry,
    world: WorldState,
    decoder: StreamDecoder,
    middleware: Middleware,
    client: ClientState,
    server: Arc<LocationServer>,
    log: EventLog,
}

impl Simulation {
    pub fn new(scenario: Scenario, registry: Registry) -> Self {
        Self::with_assets(scenario, registry, AssetStore::None)
    }

    pub fn with_assets(scenario: Scenario, registry: Registry, assets: AssetStore) -> Self {
        let mut credentials = CredentialStore::new();
        credentials
            .add_user(
                SIM_USER,
                SIM_PASSWORD,
                &mut ChaCha8Rng::seed_from_u64(scenario.seed),
            )
            .expect("fresh store accepts the simulation user");
        let server = Arc::new(LocationServer::with_seed(
            registry.clone(),
            credentials,
            assets,
            scenario.seed,
        ));
        Simulation::with_server(scenario, registry, server)
    }

    /// Uses an existing server, which must accept the simulation user.
    pub fn with_server(
        scenario: Scenario,
        registry: Registry,
        server: Arc<LocationServer>,
    ) -> Self {
        let mut sim = Simulation {
            world: WorldState::new(&scenario),
            scenario,
            registry,
            decoder: StreamDecoder::new(),
            middleware: Middleware::default(),
            client: ClientState::default(),
            server,
            log: EventLog::new(),
        };
        sim.login();
        sim
    }

    /// Loads the scenario's registry file, if any.
    pub fn from_scenario(scenario: Scenario) -> Result<Self, SimError> {
        let registry = match &scenario.registry {
            Some(path) => load_registry(path)?,
            None => Registry::new(),
        };
        Ok(Simulation::new(scenario, registry))
    }

    fn login(&mut self) {
        let out = self
            .client
            .begin_login(SIM_USER, SIM_PASSWORD, SIM_SERVER)
            .expect("fresh client is logged out");
        let now = self.world.clock();
        let response = self.server.handle_request(&out.request, now);
        self.client.step(Input::Response {
            id: out.id,
            now,
            response,
        });
    }

    /// Restarts from t = 0 with the same scenario. The log is cleared; the
    /// location server and its sessions are kept.
    pub fn reset(&mut self) {
        *self = Simulation::with_server(
            self.scenario.clone(),
            self.registry.clone(),
            Arc::clone(&self.server),
        );
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn client(&self) -> &ClientState {
        &self.client
    }

    pub fn middleware(&self) -> &Middleware {
        &self.middleware
    }

    pub fn server(&self) -> Arc<LocationServer> {
        Arc::clone(&self.server)
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Removes and returns everything logged so far.
    pub fn take_log(&mut self) -> EventLog {
        std::mem::take(&mut self.log)
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn clock(&self) -> f64 {
        self.world.clock()
    }

    pub fn is_finished(&self) -> bool {
        self.world.ticks() >= self.scenario.steps()
    }

    pub fn steer(&mut self, command: SteerCommand) {
        self.world.steer(command);
    }

    /// Advances one fixed step through the whole pipeline.
    pub fn tick(&mut self) {
        for frame in self.world.advance() {
            self.log.push(frame.at, SimEvent::FrameEmitted(frame.bytes));
            for report in self.decoder.push(&frame.bytes) {
                let report = report.received_at(frame.at);
                if let Some(event) = self.middleware.ingest(&report, frame.at) {
                    if let LocationEventKind::Changed(tag) = event.kind {
                        self.log.push(event.at, SimEvent::LocationChanged(tag));
                    }
                    self.client.step(Input::Middleware(event));
                }
            }
        }

        let now = self.world.clock();
        if let Some(event) = self.middleware.poll_lost(now) {
            self.log.push(event.at, SimEvent::LocationLost);
            self.client.step(Input::Middleware(event));
        }

        let outbound = self.client.step(Input::Tick {
            now,
            current: self.middleware.current_tag(),
        });
        for out in outbound {
            let before = self.located_tag();
            let response = self.server.handle_request(&out.request, now);
            self.client.step(Input::Response {
                id: out.id,
                now,
                response,
            });
            if let Phase::Located(tag, record) = self.client.phase() {
                if before != Some(*tag) {
                    self.log.push(now, SimEvent::Located(record.name.clone()));
                }
            }
        }
    }

    fn located_tag(&self) -> Option<TagId> {
        match self.client.phase() {
            Phase::Located(tag, _) => Some(*tag),
            _ => None,
        }
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.tick();
        }
    }

    pub fn snapshot(&self) -> SimSnapshot {
        let powered = self.world.powered();
        SimSnapshot {
            t: self.world.clock(),
            user: self.world.user_position(),
            tags: self
                .world
                .field()
                .positions()
                .map(|(id, p)| TagSnapshot {
                    id,
                    x: p.x,
                    y: p.y,
                    powered: powered.contains(&id),
                    killed: self.world.tags().get(&id).is_some_and(|t| t.is_killed()),
                })
                .collect(),
            client_phase: self.client.phase().name(),
            location: self.client.location().cloned(),
        }
    }
}

/// Runs a scenario to completion and returns its event log.
pub fn run(scenario: &Scenario) -> Result<EventLog, SimError> {
    let mut sim = Simulation::from_scenario(scenario.clone())?;
    sim.run_to_end();
    Ok(sim.into_log())
}

/// Like [`run`] with an explicit registry instead of the scenario's file.
pub fn run_with_registry(scenario: &Scenario, registry: Registry) -> EventLog {
    let mut sim = Simulation::new(scenario.clone(), registry);
    sim.run_to_end();
    sim.into_log()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::ReaderPreset;
    use crate::server::parse_registry;
    use crate::tag::{TagClass, TagPower};

    const LAB: u64 = 0x110055B53A;

    fn lab() -> TagId {
        TagId::new(LAB).unwrap()
    }

    fn registry() -> Registry {
        parse_registry("110055B53A\tRoom 101\tComputer Lab\tlab.png\n").unwrap()
    }

    /// User walks along x at 1 m/s from x = 0; LF range 0.15 m, so a tag at
    /// x = 3.15 enters range at t = 3.0 s.
    fn walk_past(tag: TagId) -> Scenario {
        Scenario::new(17, ReaderPreset::Lf135, 8.0)
            .with_tag(
                tag,
                Point::new(3.15, 0.0),
                TagClass::Class0,
                TagPower::Passive,
            )
            .with_waypoint(Point::new(0.0, 0.0), 1.0)
            .with_waypoint(Point::new(3.2, 0.0), 1.0)
    }

    fn first(log: &EventLog, pred: impl Fn(&SimEvent) -> bool) -> Option<f64> {
        log.entries().iter().find(|e| pred(&e.event)).map(|e| e.at)
    }

    #[test]
    fn located_within_poll_period_of_entry() {
        let log = run_with_registry(&walk_past(lab()), registry());
        let located = first(&log, |e| *e == SimEvent::Located("Room 101".into())).expect("located");
        assert!(located <= 3.0 + 2.0 + 0.1, "located at {located}");
        let frame = first(&log, |e| matches!(e, SimEvent::FrameEmitted(_))).unwrap();
        assert!(frame >= 3.0 - 1e-9);
        assert!(located - frame <= 2.0 + 0.1);
    }

    #[test]
    fn no_tags_no_location_events() {
        let s =
            Scenario::new(1, ReaderPreset::Uhf900, 5.0).with_waypoint(Point::new(0.0, 0.0), 1.0);
        let log = run_with_registry(&s, registry());
        assert!(log.is_empty());
    }

    #[test]
    fn unregistered_tag_changes_but_never_locates() {
        let log = run_with_registry(&walk_past(TagId::new(0x42).unwrap()), registry());
        assert!(first(&log, |e| matches!(e, SimEvent::LocationChanged(_))).is_some());
        assert!(first(&log, |e| matches!(e, SimEvent::Located(_))).is_none());
    }

    #[test]
    fn lost_after_walking_away() {
        let s = Scenario::new(3, ReaderPreset::Lf135, 12.0)
            .with_tag(
                lab(),
                Point::new(1.0, 0.0),
                TagClass::Class0,
                TagPower::Passive,
            )
            .with_waypoint(Point::new(0.0, 0.0), 1.0)
            .with_waypoint(Point::new(4.0, 0.0), 1.0);
        let log = run_with_registry(&s, registry());
        let located = first(&log, |e| matches!(e, SimEvent::Located(_))).unwrap();
        let lost = first(&log, |e| *e == SimEvent::LocationLost).unwrap();
        assert!(lost > located);
        let last_read = log
            .entries()
            .iter()
            .filter(|e| matches!(e.event, SimEvent::FrameEmitted(_)))
            .map(|e| e.at)
            .fold(0.0, f64::max);
        assert!(last_read <= 1.15 + 1e-9);
        assert!(
            lost >= last_read + 5.0 && lost <= last_read + 5.0 + 0.01 + 1e-9,
            "lost at {lost}"
        );
    }

    #[test]
    fn stationary_user_stays_located() {
        let s = Scenario::new(3, ReaderPreset::Lf135, 20.0).with_tag(
            lab(),
            Point::new(0.1, 0.0),
            TagClass::Class0,
            TagPower::Passive,
        );
        let log = run_with_registry(&s, registry());
        assert!(first(&log, |e| *e == SimEvent::LocationLost).is_none());
        assert_eq!(
            log.entries()
                .iter()
                .filter(|e| matches!(e.event, SimEvent::Located(_)))
                .count(),
            1
        );
    }

    #[test]
    fn interactive_snapshot() {
        let mut sim = Simulation::new(walk_past(lab()), registry());
        assert_eq!(sim.snapshot().client_phase, "Unknown");
        while sim.clock() < 6.0 {
            sim.tick();
        }
        let snap = sim.snapshot();
        assert_eq!(snap.client_phase, "Located");
        assert_eq!(snap.location.unwrap().name, "Room 101");
        assert_eq!(snap.tags.len(), 1);
        let json = serde_json::to_value(sim.snapshot()).unwrap();
        assert!(json["user"]["x"].is_number());
        assert_eq!(json["tags"][0]["id"], "110055B53A");

        sim.reset();
        assert_eq!(sim.clock(), 0.0);
        assert!(sim.log().is_empty());
    }
}
