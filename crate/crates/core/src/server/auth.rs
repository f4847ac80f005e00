//! Salted-hash credential store and the session table.
//!
//! Credential file: one `username:salt_hex:hash_hex` line per user, where
//! `hash = SHA-256(salt || password)`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Idle time after which a session is dropped.
pub const SESSION_IDLE_TIMEOUT: f64 = 30.0 * 60.0;

#[derive(Debug, Error)]
pub enum CredentialError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate user {0:?}")]
    DuplicateUser(String),
    #[error("invalid username {0:?}")]
    InvalidUsername(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Credential {
    salt: Vec<u8>,
    hash: [u8; 32],
}

fn salted_hash(salt: &[u8], password: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    h.finalize().into()
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CredentialStore {
    users: BTreeMap<String, Credential>,
}

impl CredentialStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn usernames(&self) -> impl Iterator<Item = &str> {
        self.users.keys().map(String::as_str)
    }

    pub fn add_user<R: RngCore + ?Sized>(
        &mut self,
        username: &str,
        password: &str,
        rng: &mut R,
    ) -> Result<(), CredentialError> {
        let mut salt = vec![0u8; 16];
        rng.fill_bytes(&mut salt);
        let hash = salted_hash(&salt, password);
        self.insert(username, Credential { salt, hash })
    }

    fn insert(&mut self, username: &str, credential: Credential) -> Result<(), CredentialError> {
        if username.is_empty() || username.contains([':', '\n', '\r']) {
            return Err(CredentialError::InvalidUsername(username.to_string()));
        }
        if self.users.contains_key(username) {
            return Err(CredentialError::DuplicateUser(username.to_string()));
        }
        self.users.insert(username.to_string(), credential);
        Ok(())
    }

    /// Checks a password. Unknown users cost the same hash computation as
    /// known ones.
    pub fn verify(&self, username: &str, password: &str) -> bool {
        const DUMMY_SALT: [u8; 16] = [0; 16];
        match self.users.get(username) {
            Some(cred) => constant_time_eq(&salted_hash(&cred.salt, password), &cred.hash),
            None => {
                let _ = salted_hash(&DUMMY_SALT, password);
                false
            }
        }
    }

    pub fn to_text(&self) -> String {
        self.users
            .iter()
            .map(|(user, c)| format!("{user}:{}:{}\n", hex::encode(&c.salt), hex::encode(c.hash)))
            .collect()
    }
}

pub fn parse_credentials(text: &str) -> Result<CredentialStore, CredentialError> {
    let mut store = CredentialStore::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| CredentialError::Parse {
            line: line_no,
            reason: reason.to_string(),
        };
        let mut parts = line.split(':');
        let (Some(user), Some(salt), Some(hash), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(err("expected username:salt_hex:hash_hex"));
        };
        let salt = hex::decode(salt).map_err(|_| err("salt is not hex"))?;
        let hash: [u8; 32] = hex::decode(hash)
            .ok()
            .and_then(|h| h.try_into().ok())
            .ok_or_else(|| err("hash is not 32 hex-encoded bytes"))?;
        store.insert(user, Credential { salt, hash })?;
    }
    Ok(store)
}

pub fn load_credentials(path: impl AsRef<Path>) -> Result<CredentialStore, CredentialError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CredentialError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_credentials(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    /// 128 random bits as 32 lowercase hex characters.
    pub token: String,
    pub user: String,
    pub created: f64,
    pub last_used: f64,
}

const PRUNE_FLOOR: usize = 64;

/// Expired sessions are rejected on use and swept in bulk once the table
/// doubles in size.
#[derive(Debug, Clone)]
pub struct SessionTable {
    sessions: HashMap<String, Session>,
    idle_timeout: f64,
    prune_at: usize,
}

impl Default for SessionTable {
    fn default() -> Self {
        SessionTable::new(SESSION_IDLE_TIMEOUT)
    }
}

impl SessionTable {
    pub fn new(idle_timeout: f64) -> Self {
        SessionTable {
            sessions: HashMap::new(),
            idle_timeout,
            prune_at: PRUNE_FLOOR,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn issue<R: Rng + ?Sized>(&mut self, user: &str, now: f64, rng: &mut R) -> Session {
        if self.sessions.len() >= self.prune_at {
            self.prune(now);
            self.prune_at = (2 * self.sessions.len()).max(PRUNE_FLOOR);
        }
        let token = loop {
            let candidate = hex::encode(rng.random::<u128>().to_be_bytes());
            if !self.sessions.contains_key(&candidate) {
                break candidate;
            }
        };
        let session = Session {
            token: token.clone(),
            user: user.to_string(),
            created: now,
            last_used: now,
        };
        self.sessions.insert(token, session.clone());
        session
    }

    /// Returns the session's user and refreshes its idle timer, or drops an
    /// expired session.
    pub fn touch(&mut self, token: &str, now: f64) -> Option<String> {
        let session = self.sessions.get_mut(token)?;
        if now - session.last_used > self.idle_timeout {
            self.sessions.remove(token);
            return None;
        }
        session.last_used = session.last_used.max(now);
        Some(session.user.clone())
    }

    pub fn prune(&mut self, now: f64) {
        let timeout = self.idle_timeout;
        self.sessions.retain(|_, s| now - s.last_used <= timeout);
    }
}
