//! Value-level model of RFID tags: identifiers, classes, memory and the
//! write/kill lifecycle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Memory capacity of a passive tag, in bytes.
pub const PASSIVE_CAPACITY: usize = 128;
/// Memory capacity of an active tag, in bytes (128 KiB).
pub const ACTIVE_CAPACITY: usize = 128 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("malformed tag id {0:?}: expected exactly 10 hex characters")]
    MalformedId(String),
    #[error("tag id {0:#x} does not fit in 40 bits")]
    IdOutOfRange(u64),
    #[error("class 0 tags are read-only")]
    ReadOnlyTag,
    #[error("class 1 tag has already been written")]
    AlreadyWritten,
    #[error("access of {len} bytes at offset {offset} exceeds capacity {capacity}")]
    OutOfBounds {
        offset: usize,
        len: usize,
        capacity: usize,
    },
    #[error("tag has been killed")]
    TagKilled,
    #[error("wrong kill code")]
    BadKillCode,
    #[error("capacity {requested} exceeds the {max} byte limit for {power:?} tags")]
    CapacityTooLarge {
        requested: usize,
        max: usize,
        power: TagPower,
    },
    #[error("{0} is not supported by this tag model")]
    Unsupported(&'static str),
}

/// 40-bit tag identifier. Text form is exactly 10 uppercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagId(u64);

impl TagId {
    pub const BITS: u32 = 40;
    pub const MAX: u64 = (1 << Self::BITS) - 1;

    pub fn new(value: u64) -> Result<Self, TagError> {
        if value > Self::MAX {
            return Err(TagError::IdOutOfRange(value));
        }
        Ok(TagId(value))
    }

    /// Keeps the low 40 bits of `value`.
    pub fn from_truncated(value: u64) -> Self {
        TagId(value & Self::MAX)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Big-endian wire bytes, most significant first.
    pub fn to_bytes(self) -> [u8; 5] {
        let b = self.0.to_be_bytes();
        [b[3], b[4], b[5], b[6], b[7]]
    }

    pub fn from_bytes(bytes: [u8; 5]) -> Self {
        let mut b = [0u8; 8];
        b[3..].copy_from_slice(&bytes);
        TagId(u64::from_be_bytes(b))
    }
}

/// Accepts exactly 10 hex characters in either case.
pub fn parse_tag_id(text: &str) -> Result<TagId, TagError> {
    let bytes = text.as_bytes();
    if bytes.len() != 10 {
        return Err(TagError::MalformedId(text.to_string()));
    }
    let mut value = 0u64;
    for &c in bytes {
        let digit = match c {
            b'0'..=b'9' => c - b'0',
            b'a'..=b'f' => c - b'a' + 10,
            b'A'..=b'F' => c - b'A' + 10,
            _ => return Err(TagError::MalformedId(text.to_string())),
        };
        value = (value << 4) | u64::from(digit);
    }
    Ok(TagId(value))
}

impl FromStr for TagId {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tag_id(s)
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:010X}", self.0)
    }
}

impl Serialize for TagId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TagId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_tag_id(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagClass {
    /// Read-only, identity burned in at manufacture.
    Class0,
    /// Write-once, read-many.
    Class1,
    /// Read-write.
    Class2,
    /// Read-write with on-board sensors.
    Class3,
    /// Read-write with an integrated transmitter.
    Class4,
}

impl TagClass {
    pub const ALL: [TagClass; 5] = [
        TagClass::Class0,
        TagClass::Class1,
        TagClass::Class2,
        TagClass::Class3,
        TagClass::Class4,
    ];

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n)).copied()
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagPower {
    Passive,
    Active,
}

impl TagPower {
    pub fn max_capacity(self) -> usize {
        match self {
            TagPower::Passive => PASSIVE_CAPACITY,
            TagPower::Active => ACTIVE_CAPACITY,
        }
    }
}

/// A single tag. Mutating operations either succeed completely or leave the
/// tag untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tag {
    id: TagId,
    class: TagClass,
    power: TagPower,
    memory: Vec<u8>,
    write_count: u32,
    killed: bool,
    kill_code: u16,
}

impl Tag {
    /// A factory-fresh tag with zeroed memory at the default capacity for
    /// its power type and a kill code of zero.
    pub fn new(id: TagId, class: TagClass, power: TagPower) -> Self {
        Tag {
            id,
            class,
            power,
            memory: vec![0; power.max_capacity()],
            write_count: 0,
            killed: false,
            kill_code: 0,
        }
    }

    pub fn with_capacity(
        id: TagId,
        class: TagClass,
        power: TagPower,
        capacity: usize,
    ) -> Result<Self, TagError> {
        if capacity > power.max_capacity() {
            return Err(TagError::CapacityTooLarge {
                requested: capacity,
                max: power.max_capacity(),
                power,
            });
        }
        let mut tag = Tag::new(id, class, power);
        tag.memory = vec![0; capacity];
        Ok(tag)
    }

    pub fn with_kill_code(mut self, code: u16) -> Self {
        self.kill_code = code;
        self
    }

    pub fn id(&self) -> TagId {
        self.id
    }

    pub fn class(&self) -> TagClass {
        self.class
    }

    pub fn power(&self) -> TagPower {
        self.power
    }

    pub fn capacity(&self) -> usize {
        self.memory.len()
    }

    pub fn write_count(&self) -> u32 {
        self.write_count
    }

    pub fn is_killed(&self) -> bool {
        self.killed
    }

    fn check_range(&self, offset: usize, len: usize) -> Result<(), TagError> {
        match offset.checked_add(len) {
            Some(end) if end <= self.memory.len() => Ok(()),
            _ => Err(TagError::OutOfBounds {
                offset,
                len,
                capacity: self.memory.len(),
            }),
        }
    }

    pub fn write_memory(&mut self, offset: usize, data: &[u8]) -> Result<(), TagError> {
        if self.killed {
            return Err(TagError::TagKilled);
        }
        match self.class {
            TagClass::Class0 => return Err(TagError::ReadOnlyTag),
            TagClass::Class1 if self.write_count > 0 => return Err(TagError::AlreadyWritten),
            _ => {}
        }
        self.check_range(offset, data.len())?;
        self.memory[offset..offset + data.len()].copy_from_slice(data);
        self.write_count += 1;
        Ok(())
    }

    pub fn read_memory(&self, offset: usize, len: usize) -> Result<&[u8], TagError> {
        if self.killed {
            return Err(TagError::TagKilled);
        }
        self.check_range(offset, len)?;
        Ok(&self.memory[offset..offset + len])
    }

    /// Permanently disables the tag. Killing an already-killed tag with the
    /// right code succeeds again.
    pub fn kill(&mut self, code: u16) -> Result<(), TagError> {
        if code != self.kill_code {
            return Err(TagError::BadKillCode);
        }
        self.killed = true;
        Ok(())
    }

    /// Sensor logging is only representable, not simulated.
    pub fn record_sensor(&mut self, _reading: &[u8]) -> Result<(), TagError> {
        Err(TagError::Unsupported("sensor recording"))
    }

    /// Tag-to-tag transmission is only representable, not simulated.
    pub fn transmit(&mut self, _peer: TagId, _payload: &[u8]) -> Result<(), TagError> {
        Err(TagError::Unsupported("tag-to-tag transmission"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(v: u64) -> TagId {
        TagId::new(v).unwrap()
    }

    #[test]
    fn parses_reference_id() {
        assert_eq!(parse_tag_id("110055B53A").unwrap().value(), 0x110055B53A);
        assert_eq!(parse_tag_id("110055b53a").unwrap().value(), 0x110055B53A);
        assert_eq!(parse_tag_id("0000000000").unwrap().value(), 0);
        assert_eq!(id(0x110055B53A).to_string(), "110055B53A");
    }

    #[test]
    fn rejects_malformed_ids() {
        for bad in [
            "110055B53",
            "110055B53A0",
            "",
            "110055B53G",
            "+110055B53",
            "11 055B53A",
        ] {
            assert!(
                matches!(parse_tag_id(bad), Err(TagError::MalformedId(_))),
                "{bad:?}"
            );
        }
        // multi-byte utf-8 with 10 bytes total
        assert!(parse_tag_id("ééééé").is_err());
        assert!(TagId::new(1 << 40).is_err());
    }

    #[test]
    fn class0_rejects_writes() {
        let mut tag = Tag::new(id(1), TagClass::Class0, TagPower::Passive);
        assert_eq!(tag.write_memory(0, &[1]), Err(TagError::ReadOnlyTag));
        assert_eq!(tag.write_count(), 0);
    }

    #[test]
    fn class1_is_write_once() {
        let mut tag = Tag::new(id(1), TagClass::Class1, TagPower::Passive);
        tag.write_memory(0, &[1, 2]).unwrap();
        assert_eq!(tag.write_memory(0, &[3]), Err(TagError::AlreadyWritten));
        assert_eq!(tag.read_memory(0, 2).unwrap(), &[1, 2]);
    }

    #[test]
    fn class2_rewrites() {
        let mut tag = Tag::new(id(1), TagClass::Class2, TagPower::Passive);
        tag.write_memory(0, &[1, 2, 3]).unwrap();
        tag.write_memory(0, &[9, 8]).unwrap();
        assert_eq!(tag.read_memory(0, 3).unwrap(), &[9, 8, 3]);
        assert_eq!(tag.write_count(), 2);
    }

    #[test]
    fn fresh_memory_is_zeroed_and_bounded() {
        let mut tag = Tag::new(id(1), TagClass::Class2, TagPower::Passive);
        assert_eq!(tag.capacity(), PASSIVE_CAPACITY);
        assert_eq!(tag.read_memory(0, 4).unwrap(), &[0; 4]);
        tag.write_memory(0, &[0xDE, 0xAD]).unwrap();
        assert_eq!(tag.read_memory(0, 2).unwrap(), &[0xDE, 0xAD]);
        assert!(matches!(
            tag.read_memory(PASSIVE_CAPACITY - 1, 2),
            Err(TagError::OutOfBounds { .. })
        ));
        assert!(matches!(
            tag.read_memory(usize::MAX, 2),
            Err(TagError::OutOfBounds { .. })
        ));
        assert!(matches!(
            tag.write_memory(PASSIVE_CAPACITY, &[1]),
            Err(TagError::OutOfBounds { .. })
        ));
        let active = Tag::new(id(2), TagClass::Class2, TagPower::Active);
        assert_eq!(active.capacity(), 131_072);
    }

    #[test]
    fn capacity_limits_follow_power_type() {
        assert!(Tag::with_capacity(id(1), TagClass::Class2, TagPower::Passive, 129).is_err());
        assert!(Tag::with_capacity(id(1), TagClass::Class2, TagPower::Passive, 64).is_ok());
        assert!(Tag::with_capacity(id(1), TagClass::Class2, TagPower::Active, 131_073).is_err());
    }

    #[test]
    fn kill_semantics() {
        let mut tag = Tag::new(id(7), TagClass::Class2, TagPower::Passive).with_kill_code(0xBEEF);
        assert_eq!(tag.kill(0x0001), Err(TagError::BadKillCode));
        assert!(!tag.is_killed());
        tag.kill(0xBEEF).unwrap();
        assert!(tag.is_killed());
        tag.kill(0xBEEF).unwrap();
        assert!(tag.is_killed());
        assert_eq!(tag.read_memory(0, 1), Err(TagError::TagKilled));
        assert_eq!(tag.write_memory(0, &[1]), Err(TagError::TagKilled));
    }

    #[test]
    fn extended_class_behaviours_are_unsupported() {
        let mut tag = Tag::new(id(3), TagClass::Class3, TagPower::Active);
        assert!(matches!(
            tag.record_sensor(&[1]),
            Err(TagError::Unsupported(_))
        ));
        let mut tag = Tag::new(id(4), TagClass::Class4, TagPower::Active);
        assert!(matches!(
            tag.transmit(id(3), &[1]),
            Err(TagError::Unsupported(_))
        ));
        assert_eq!(TagClass::ALL.len(), 5);
        assert_eq!(TagClass::from_number(4), Some(TagClass::Class4));
        assert_eq!(TagClass::from_number(5), None);
    }

    proptest! {
        #[test]
        fn text_round_trip(v in 0u64..=TagId::MAX) {
            let id = id(v);
            let text = id.to_string();
            prop_assert_eq!(text.len(), 10);
            prop_assert!(text.chars().all(|c| c.is_ascii_digit() || c.is_ascii_uppercase()));
            prop_assert_eq!(parse_tag_id(&text).unwrap(), id);
            prop_assert_eq!(TagId::from_bytes(id.to_bytes()), id);
        }

        #[test]
        fn read_back_for_writable_classes(
            class in 2u8..=4,
            offset in 0usize..PASSIVE_CAPACITY,
            data in proptest::collection::vec(any::<u8>(), 0..32),
        ) {
            let mut tag = Tag::new(id(5), TagClass::from_number(class).unwrap(), TagPower::Passive);
            if offset + data.len() <= PASSIVE_CAPACITY {
                tag.write_memory(offset, &data).unwrap();
                prop_assert_eq!(tag.read_memory(offset, data.len()).unwrap(), &data[..]);
            } else {
                let before = tag.clone();
                prop_assert!(tag.write_memory(offset, &data).is_err());
                prop_assert_eq!(tag, before);
            }
        }
    }
}
