//! Sans-IO mobile client. All network traffic leaves as [`Outbound`]
//! requests and comes back as [`Input::Response`]; the caller owns the
//! transport and the clock.
//!
//! The client polls the middleware every `poll_period` seconds and only
//! talks to the server when the polled tag differs from the one it is
//! showing or resolving.

use crate::middleware::{LocationEvent, LocationEventKind};
use crate::server::{
    ApiRequest, ApiResponse, LocationRecord, LoginBody, TokenBody, SESSION_HEADER,
};
use crate::tag::TagId;
use thiserror::Error;

pub const DEFAULT_POLL_PERIOD: f64 = 2.0;
/// A `/locate` without a response for this many poll periods is retried
/// once, then abandoned.
pub const LOCATE_TIMEOUT_PERIODS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("operation not valid in phase {0}")]
    InvalidPhase(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    LoggedOut,
    Authenticating,
    Unknown,
    Resolving(TagId),
    Located(TagId, LocationRecord),
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::LoggedOut => "LoggedOut",
            Phase::Authenticating => "Authenticating",
            Phase::Unknown => "Unknown",
            Phase::Resolving(_) => "Resolving",
            Phase::Located(..) => "Located",
        }
    }
}

pub type RequestId = u64;

/// A request for the transport to deliver to `server`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub id: RequestId,
    pub server: String,
    pub request: ApiRequest,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// Clock tick carrying a snapshot of the middleware's current tag.
    Tick {
        now: f64,
        current: Option<TagId>,
    },
    Middleware(LocationEvent),
    /// Reply to the outbound request with the same id.
    Response {
        id: RequestId,
        now: f64,
        response: ApiResponse,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct InFlight {
    id: RequestId,
    tag: TagId,
    sent_at: f64,
    retried: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    phase: Phase,
    session: Option<String>,
    server: Option<String>,
    poll_period: f64,
    next_poll_at: f64,
    login_request: Option<RequestId>,
    in_flight: Option<InFlight>,
    /// Tag the server did not know; not queried again until the tag changes.
    unresolvable: Option<TagId>,
    note: Option<String>,
    next_id: RequestId,
}

impl Default for ClientState {
    fn default() -> Self {
        ClientState::new(DEFAULT_POLL_PERIOD)
    }
}

impl ClientState {
    pub fn new(poll_period: f64) -> Self {
        assert!(poll_period > 0.0, "poll period must be positive");
        ClientState {
            phase: Phase::LoggedOut,
            session: None,
            server: None,
            poll_period,
            next_poll_at: 0.0,
            login_request: None,
            in_flight: None,
            unresolvable: None,
            note: None,
            next_id: 1,
        }
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn session(&self) -> Option<&str> {
        self.session.as_deref()
    }

    pub fn poll_period(&self) -> f64 {
        self.poll_period
    }

    pub fn next_poll_at(&self) -> f64 {
        self.next_poll_at
    }

    /// Last error or status note, e.g. after a failed login.
    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    pub fn location(&self) -> Option<&LocationRecord> {
        match &self.phase {
            Phase::Located(_, record) => Some(record),
            _ => None,
        }
    }

    fn outbound(&mut self, request: ApiRequest) -> Outbound {
        let id = self.next_id;
        self.next_id += 1;
        Outbound {
            id,
            server: self.server.clone().unwrap_or_default(),
            request,
        }
    }

    pub fn begin_login(
        &mut self,
        username: &str,
        password: &str,
        server: &str,
    ) -> Result<Outbound, ClientError> {
        if self.phase != Phase::LoggedOut {
            return Err(ClientError::InvalidPhase(self.phase.name()));
        }
        self.server = Some(server.to_string());
        self.phase = Phase::Authenticating;
        self.note = None;
        let out = self.outbound(ApiRequest::post_json(
            "/login",
            &LoginBody {
                username: username.to_string(),
                password: password.to_string(),
            },
        ));
        self.login_request = Some(out.id);
        Ok(out)
    }

    fn locate_request(&mut self, tag: TagId, now: f64, retried: bool) -> Outbound {
        let token = self.session.clone().unwrap_or_default();
        let out = self.outbound(
            ApiRequest::get(&format!("/locate?tag={tag}")).with_header(SESSION_HEADER, &token),
        );
        self.in_flight = Some(InFlight {
            id: out.id,
            tag,
            sent_at: now,
            retried,
        });
        out
    }

    fn logged_in(&self) -> bool {
        !matches!(self.phase, Phase::LoggedOut | Phase::Authenticating)
    }

    fn drop_session(&mut self, note: &str) {
        self.phase = Phase::LoggedOut;
        self.session = None;
        self.in_flight = None;
        self.unresolvable = None;
        self.note = Some(note.to_string());
    }

    pub fn step(&mut self, input: Input) -> Vec<Outbound> {
        match input {
            Input::Tick { now, current } => self.on_tick(now, current),
            Input::Middleware(event) => {
                if event.kind == LocationEventKind::Lost && self.logged_in() {
                    self.phase = Phase::Unknown;
                    self.in_flight = None;
                    self.unresolvable = None;
                }
                Vec::new()
            }
            Input::Response { id, now, response } => {
                self.on_response(id, now, response);
                Vec::new()
            }
        }
    }

    fn on_tick(&mut self, now: f64, current: Option<TagId>) -> Vec<Outbound> {
        if !self.logged_in() {
            return Vec::new();
        }
        let mut out = Vec::new();

        if let Some(flight) = self.in_flight.clone() {
            if now - flight.sent_at >= LOCATE_TIMEOUT_PERIODS * self.poll_period {
                if flight.retried {
                    self.in_flight = None;
                    self.phase = Phase::Unknown;
                    self.note = Some(format!("no response resolving {}", flight.tag));
                } else {
                    out.push(self.locate_request(flight.tag, now, true));
                }
            }
        }

        if now < self.next_poll_at {
            return out;
        }
        self.next_poll_at += self.poll_period;

        let Some(tag) = current else {
            if matches!(self.phase, Phase::Located(..) | Phase::Resolving(_)) {
                self.phase = Phase::Unknown;
                self.in_flight = None;
            }
            self.unresolvable = None;
            return out;
        };
        let showing = match &self.phase {
            Phase::Located(t, _) | Phase::Resolving(t) => Some(*t),
            _ => None,
        };
        if showing == Some(tag) {
            return out;
        }
        if self.unresolvable == Some(tag) && self.phase == Phase::Unknown {
            return out;
        }
        self.unresolvable = None;
        self.phase = Phase::Resolving(tag);
        out.push(self.locate_request(tag, now, false));
        out
    }

    fn on_response(&mut self, id: RequestId, now: f64, response: ApiResponse) {
        if self.phase == Phase::Authenticating && self.login_request == Some(id) {
            self.login_request = None;
            match response
                .json_body::<TokenBody>()
                .filter(|_| response.status == 200)
            {
                Some(body) => {
                    self.session = Some(body.token);
                    self.phase = Phase::Unknown;
                    self.next_poll_at = now;
                }
                None => {
                    self.phase = Phase::LoggedOut;
                    self.note = Some(format!("login failed ({})", response.status));
                }
            }
            return;
        }

        let Some(flight) = self.in_flight.clone().filter(|f| f.id == id) else {
            return;
        };
        self.in_flight = None;
        match response.status {
            200 => match response.json_body::<LocationRecord>() {
                Some(record) if record.tag == flight.tag => {
                    self.phase = Phase::Located(flight.tag, record);
                    self.note = None;
                }
                _ => {
                    self.phase = Phase::Unknown;
                    self.note = Some("malformed location record".into());
                }
            },
            404 => {
                self.phase = Phase::Unknown;
                self.unresolvable = Some(flight.tag);
                self.note = Some(format!("tag {} is not registered", flight.tag));
            }
            401 => self.drop_session("session expired"),
            status => {
                self.phase = Phase::Unknown;
                self.note = Some(format!("server error {status}"));
            }
        }
    }
}
