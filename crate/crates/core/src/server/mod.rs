//! The location server: authenticates users, resolves tag ids against the
//! registry and serves descriptions, topic info and images.
//!
//! | method | path              | auth | success                       |
//! |--------|-------------------|------|-------------------------------|
//! | POST   | `/login`          | no   | `{"token"}`                   |
//! | GET    | `/locate?tag=`    | yes  | location record JSON          |
//! | GET    | `/info?tag=&topic=` | yes | `{"topic","text"}`           |
//! | GET    | `/image/{asset}`  | yes  | asset bytes                   |
//! | GET    | `/healthz`        | no   | `ok`                          |
//!
//! The session token travels in the `X-Session` header, or in a `session`
//! query parameter for clients that cannot set headers (image tags,
//! event streams).

pub mod auth;
pub mod http;
pub mod registry;

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tag::{parse_tag_id, TagId};
use auth::{CredentialStore, Session, SessionTable};
pub use http::{ApiRequest, ApiResponse, Method};
pub use registry::{load_registry, parse_registry, LocationRecord, Registry, RegistryError};

pub const SESSION_HEADER: &str = "x-session";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServerError {
    /// Unknown user and wrong password are deliberately the same error.
    #[error("authentication failed")]
    AuthFailed,
    #[error("tag {0} is not registered")]
    NotFound(TagId),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoginBody {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBody {
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoBody {
    pub topic: String,
    pub text: String,
}

/// Where `/image/{asset}` bytes come from.
#[derive(Debug, Clone, Default)]
pub enum AssetStore {
    #[default]
    None,
    Dir(PathBuf),
    Memory(BTreeMap<String, Vec<u8>>),
}

impl AssetStore {
    fn load(&self, asset: &str) -> Option<Vec<u8>> {
        match self {
            AssetStore::None => None,
            AssetStore::Memory(map) => map.get(asset).cloned(),
            AssetStore::Dir(root) => {
                let rel = Path::new(asset);
                if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
                    return None;
                }
                std::fs::read(root.join(rel)).ok()
            }
        }
    }
}

pub fn content_type_for(asset: &str) -> &'static str {
    let ext = asset.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("svg") => "image/svg+xml",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

/// Shared server state. The registry is replaced atomically on reload and
/// read concurrently; the session table is behind a mutex.
pub struct LocationServer {
    registry: RwLock<Arc<Registry>>,
    credentials: CredentialStore,
    sessions: Mutex<SessionTable>,
    assets: AssetStore,
    rng: Mutex<ChaCha20Rng>,
}

impl LocationServer {
    pub fn new(registry: Registry, credentials: CredentialStore, assets: AssetStore) -> Self {
        Self::with_rng(registry, credentials, assets, ChaCha20Rng::from_os_rng())
    }

    /// Deterministic token generation, for simulations and tests.
    pub fn with_seed(
        registry: Registry,
        credentials: CredentialStore,
        assets: AssetStore,
        seed: u64,
    ) -> Self {
        Self::with_rng(
            registry,
            credentials,
            assets,
            ChaCha20Rng::seed_from_u64(seed),
        )
    }

    fn with_rng(
        registry: Registry,
        credentials: CredentialStore,
        assets: AssetStore,
        rng: ChaCha20Rng,
    ) -> Self {
        LocationServer {
            registry: RwLock::new(Arc::new(registry)),
            credentials,
            sessions: Mutex::new(SessionTable::default()),
            assets,
            rng: Mutex::new(rng),
        }
    }

    pub fn registry(&self) -> Arc<Registry> {
        Arc::clone(&self.registry.read().expect("registry lock"))
    }

    /// Swaps in a new registry with the next version number.
    pub fn reload(&self, registry: Registry) -> u64 {
        let mut guard = self.registry.write().expect("registry lock");
        let version = guard.version() + 1;
        *guard = Arc::new(registry.with_version(version));
        version
    }

    pub fn login(&self, username: &str, password: &str, now: f64) -> Result<Session, ServerError> {
        if !self.credentials.verify(username, password) {
            return Err(ServerError::AuthFailed);
        }
        let mut rng = self.rng.lock().expect("rng lock");
        let mut sessions = self.sessions.lock().expect("session lock");
        Ok(sessions.issue(username, now, &mut *rng as &mut dyn RngCore))
    }

    pub fn resolve(&self, tag: TagId) -> Result<LocationRecord, ServerError> {
        self.registry()
            .resolve(tag)
            .cloned()
            .ok_or(ServerError::NotFound(tag))
    }

    fn authenticate(&self, req: &ApiRequest, now: f64) -> Option<String> {
        let token = req
            .header(SESSION_HEADER)
            .or_else(|| req.query_param("session"))?;
        self.sessions
            .lock()
            .expect("session lock")
            .touch(token, now)
    }

    /// Routes one request. `now` is the server clock in seconds, used for
    /// session expiry.
    pub fn handle_request(&self, req: &ApiRequest, now: f64) -> ApiResponse {
        let path = req.path.as_str();
        let route = match path {
            "/healthz" | "/login" | "/locate" | "/info" => path,
            p if p.starts_with("/image/") => "/image/",
            _ => return ApiResponse::error(404, "no such endpoint"),
        };
        let expected = if route == "/login" {
            Method::Post
        } else {
            Method::Get
        };
        if req.method != expected {
            return ApiResponse::error(405, "method not allowed");
        }
        match route {
            "/healthz" => ApiResponse::text(200, "ok"),
            "/login" => self.handle_login(req, now),
            _ => {
                if self.authenticate(req, now).is_none() {
                    return ApiResponse::error(401, "missing or invalid session");
                }
                match route {
                    "/locate" => self.handle_locate(req),
                    "/info" => self.handle_info(req),
                    _ => self.handle_image(&path["/image/".len()..]),
                }
            }
        }
    }

    fn handle_login(&self, req: &ApiRequest, now: f64) -> ApiResponse {
        let Ok(body) = serde_json::from_slice::<LoginBody>(&req.body) else {
            return ApiResponse::error(400, "expected {\"username\",\"password\"}");
        };
        match self.login(&body.username, &body.password, now) {
            Ok(session) => ApiResponse::json(
                200,
                &TokenBody {
                    token: session.token,
                },
            ),
            Err(e) => ApiResponse::error(401, &e.to_string()),
        }
    }

    fn tag_param(req: &ApiRequest) -> Result<TagId, ApiResponse> {
        let text = req
            .query_param("tag")
            .ok_or_else(|| ApiResponse::error(400, "missing tag parameter"))?;
        parse_tag_id(text).map_err(|e| ApiResponse::error(400, &e.to_string()))
    }

    fn handle_locate(&self, req: &ApiRequest) -> ApiResponse {
        let tag = match Self::tag_param(req) {
            Ok(tag) => tag,
            Err(resp) => return resp,
        };
        match self.resolve(tag) {
            Ok(record) => ApiResponse::json(200, &record),
            Err(e) => ApiResponse::error(404, &e.to_string()),
        }
    }

    fn handle_info(&self, req: &ApiRequest) -> ApiResponse {
        let tag = match Self::tag_param(req) {
            Ok(tag) => tag,
            Err(resp) => return resp,
        };
        let Some(topic) = req.query_param("topic") else {
            return ApiResponse::error(400, "missing topic parameter");
        };
        let record = match self.resolve(tag) {
            Ok(record) => record,
            Err(e) => return ApiResponse::error(404, &e.to_string()),
        };
        match record.extras.get(topic) {
            Some(text) => ApiResponse::json(
                200,
                &InfoBody {
                    topic: topic.to_string(),
                    text: text.clone(),
                },
            ),
            None => ApiResponse::error(404, "no such topic"),
        }
    }

    fn handle_image(&self, asset: &str) -> ApiResponse {
        match self.assets.load(asset) {
            Some(bytes) => ApiResponse::bytes(200, content_type_for(asset), bytes),
            None => ApiResponse::error(404, "no such asset"),
        }
    }
}
