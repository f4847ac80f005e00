//! Real-time simulation host for the web console.
//!
//! | method | path          | body / result                               |
//! |--------|---------------|---------------------------------------------|
//! | GET    | `/sim/state`  | snapshot JSON                               |
//! | POST   | `/sim/steer`  | `{"cmd":"vel","vx","vy"}`, `{"cmd":"goto","x","y"}`, `{"cmd":"stop"}` |
//! | POST   | `/sim/reset`  | restarts the scenario                       |
//! | GET    | `/sim/events` | server-sent `state` events at 10 Hz         |
//!
//! Everything else is answered by the simulation's location server, whose
//! session clock is simulated time.

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use lbs_core::sim::{EventLog, SimEvent, SimSnapshot, Simulation, SteerCommand};
use tower_http::services::ServeDir;

use crate::web::{location_router, LocationService};

pub const EVENT_INTERVAL: Duration = Duration::from_millis(100);
const WALL_STEP: Duration = Duration::from_millis(10);

#[derive(Clone)]
pub struct SimHandle {
    sim: Arc<Mutex<Simulation>>,
}

impl SimHandle {
    pub fn new(sim: Simulation) -> Self {
        SimHandle {
            sim: Arc::new(Mutex::new(sim)),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Simulation> {
        self.sim.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn snapshot(&self) -> SimSnapshot {
        self.lock().snapshot()
    }

    /// Advances by `sim_seconds`, rounded down to whole steps, and returns
    /// what was logged.
    pub fn advance(&self, sim_seconds: f64) -> EventLog {
        let mut sim = self.lock();
        let target = sim.clock() + sim_seconds;
        while sim.clock() + sim.world().dt() <= target + 1e-9 {
            sim.tick();
        }
        sim.take_log()
    }
}

/// Drives the simulation at `speed` simulated seconds per wall second and
/// prints location events to stdout. Runs until the task is dropped.
pub async fn run_clock(handle: SimHandle, speed: f64) {
    let mut ticker = tokio::time::interval(WALL_STEP);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut last = Instant::now();
    let mut owed = 0.0;
    loop {
        ticker.tick().await;
        let now = Instant::now();
        owed += now.duration_since(last).as_secs_f64() * speed;
        last = now;
        let dt = handle.lock().world().dt();
        let steps = (owed / dt).floor();
        if steps < 1.0 {
            continue;
        }
        owed -= steps * dt;
        let log = {
            let mut sim = handle.lock();
            for _ in 0..steps as u64 {
                sim.tick();
            }
            sim.take_log()
        };
        let text: String = EventLog::from_entries(
            log.entries()
                .iter()
                .filter(|e| !matches!(e.event, SimEvent::FrameEmitted(_)))
                .cloned(),
        )
        .to_text();
        if !text.is_empty() {
            print!("{text}");
        }
    }
}

async fn state(State(h): State<SimHandle>) -> Json<SimSnapshot> {
    Json(h.snapshot())
}

async fn steer(State(h): State<SimHandle>, Json(cmd): Json<SteerCommand>) -> impl IntoResponse {
    h.lock().steer(cmd);
    (StatusCode::OK, Json(serde_json::json!({ "ok": true })))
}

async fn reset(State(h): State<SimHandle>) -> impl IntoResponse {
    h.lock().reset();
    (StatusCode::OK, Json(serde_json::json!({ "ok": true })))
}

fn snapshot_stream(h: SimHandle) -> impl Stream<Item = Result<Event, Infallible>> {
    futures::stream::unfold(
        (h, tokio::time::interval(EVENT_INTERVAL)),
        |(h, mut interval)| async move {
            interval.tick().await;
            let event = Event::default()
                .event("state")
                .json_data(h.snapshot())
                .expect("snapshot serializes");
            Some((Ok(event), (h, interval)))
        },
    )
}

async fn events(State(h): State<SimHandle>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    Sse::new(snapshot_stream(h)).keep_alive(KeepAlive::default())
}

/// `/sim/*`, optional static UI under `/ui`, and the location API.
pub fn router(handle: SimHandle, ui_dir: Option<PathBuf>) -> Router {
    let clock_handle = handle.clone();
    let location = LocationService {
        server: handle.lock().server(),
        clock: Arc::new(move || clock_handle.lock().clock()),
    };
    let mut app = Router::new()
        .route("/sim/state", get(state))
        .route("/sim/steer", post(steer))
        .route("/sim/reset", post(reset))
        .route("/sim/events", get(events))
        .with_state(handle);
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.merge(location_router(location))
}
