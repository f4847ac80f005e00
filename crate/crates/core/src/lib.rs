//! Indoor location-based services over simulated passive RFID.
//!
//! The pipeline, from the building outwards:
//!
//! - [`tag`]: tag identities, classes and memory semantics
//! - [`air`]: reader presets, the powered set and framed slotted ALOHA
//! - [`link`]: the 8-byte serial frame carrying a tag report
//! - [`middleware`]: turns raw reads into location-change events
//! - [`server`]: registry, authentication and the HTTP-shaped API
//! - [`client`]: the handheld client's state machine
//! - [`sim`]: a deterministic building simulation driving all of the above

pub mod air;
pub mod client;
pub mod link;
pub mod middleware;
pub mod server;
pub mod sim;
pub mod tag;

pub use air::{Point, ReaderPreset};
pub use link::{decode_frame, encode_frame, TagReportFrame};
pub use tag::{parse_tag_id, Tag, TagClass, TagId, TagPower};
