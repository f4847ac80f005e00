//! Reader to middleware serial framing.
//!
//! Every tag read travels as one fixed 8-byte frame:
//!
//! ```text
//! offset  0     1..=5                     6          7
//!         0xAA  tag id, big-endian (40b)  checksum   0x55
//! ```
//!
//! The checksum is the XOR of the five id bytes. Receivers resynchronise on
//! a corrupt or partial frame by dropping one byte and searching for the next
//! `0xAA`.

use thiserror::Error;

use crate::tag::TagId;

pub const FRAME_LEN: usize = 8;
pub const START: u8 = 0xAA;
pub const END: u8 = 0x55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame must be {FRAME_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("bad frame delimiter")]
    BadDelimiter,
    #[error("checksum mismatch: expected {expected:#04x}, found {found:#04x}")]
    ChecksumMismatch { expected: u8, found: u8 },
}

/// A tag read as carried on the link. The timestamp is not on the wire; the
/// receiver assigns it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagReportFrame {
    pub tag_id: TagId,
    pub timestamp: Option<f64>,
}

impl TagReportFrame {
    pub fn new(tag_id: TagId) -> Self {
        TagReportFrame {
            tag_id,
            timestamp: None,
        }
    }

    pub fn received_at(mut self, t: f64) -> Self {
        self.timestamp = Some(t);
        self
    }
}

fn checksum(id_bytes: &[u8]) -> u8 {
    id_bytes.iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_frame(tag_id: TagId) -> [u8; FRAME_LEN] {
    let id = tag_id.to_bytes();
    let mut out = [0u8; FRAME_LEN];
    out[0] = START;
    out[1..6].copy_from_slice(&id);
    out[6] = checksum(&id);
    out[7] = END;
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<TagReportFrame, FrameError> {
    if bytes.len() != FRAME_LEN {
        return Err(FrameError::BadLength(bytes.len()));
    }
    if bytes[0] != START || bytes[7] != END {
        return Err(FrameError::BadDelimiter);
    }
    let id: [u8; 5] = bytes[1..6].try_into().expect("five id bytes");
    let expected = checksum(&id);
    if bytes[6] != expected {
        return Err(FrameError::ChecksumMismatch {
            expected,
            found: bytes[6],
        });
    }
    Ok(TagReportFrame::new(TagId::from_bytes(id)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanDiagnostics {
    /// Bytes that were not part of any valid frame.
    pub skipped: usize,
    /// Candidate frames starting with `0xAA` that failed to decode.
    pub rejected: usize,
}

/// Restartable frame scanner for a single consumer. Bytes of an incomplete
/// trailing candidate are carried over to the next [`push`](Self::push).
#[derive(Debug, Clone, Default)]
pub struct StreamDecoder {
    pending: Vec<u8>,
    diagnostics: ScanDiagnostics,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diagnostics(&self) -> ScanDiagnostics {
        self.diagnostics
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<TagReportFrame> {
        self.pending.extend_from_slice(bytes);
        let mut frames = Vec::new();
        let mut pos = 0;
        while pos < self.pending.len() {
            if self.pending[pos] != START {
                self.diagnostics.skipped += 1;
                pos += 1;
                continue;
            }
            if self.pending.len() - pos < FRAME_LEN {
                break;
            }
            match decode_frame(&self.pending[pos..pos + FRAME_LEN]) {
                Ok(frame) => {
                    frames.push(frame);
                    pos += FRAME_LEN;
                }
                Err(_) => {
                    self.diagnostics.rejected += 1;
                    self.diagnostics.skipped += 1;
                    pos += 1;
                }
            }
        }
        self.pending.drain(..pos);
        frames
    }

    /// Ends the stream; a trailing partial candidate is counted as skipped.
    pub fn finish(mut self) -> ScanDiagnostics {
        if !self.pending.is_empty() {
            self.diagnostics.rejected += 1;
            self.diagnostics.skipped += self.pending.len();
        }
        self.pending.clear();
        self.diagnostics
    }
}

/// Decodes every valid frame in a complete byte stream.
pub fn scan_stream(bytes: &[u8]) -> (Vec<TagReportFrame>, ScanDiagnostics) {
    let mut decoder = StreamDecoder::new();
    let frames = decoder.push(bytes);
    (frames, decoder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(v: u64) -> TagId {
        TagId::new(v).unwrap()
    }

    #[test]
    fn encodes_reference_frames() {
        assert_eq!(
            encode_frame(id(0x110055B53A)),
            [0xAA, 0x11, 0x00, 0x55, 0xB5, 0x3A, 0xCB, 0x55]
        );
        assert_eq!(encode_frame(id(0)), [0xAA, 0, 0, 0, 0, 0, 0, 0x55]);
        assert_eq!(
            encode_frame(id(TagId::MAX)),
            [0xAA, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0x55]
        );
    }

    #[test]
    fn decode_errors() {
        let good = [0xAA, 0x11, 0x00, 0x55, 0xB5, 0x3A, 0xCB, 0x55];
        assert_eq!(decode_frame(&good).unwrap().tag_id, id(0x110055B53A));
        let mut bad = good;
        bad[6] = 0xCC;
        assert!(matches!(
            decode_frame(&bad),
            Err(FrameError::ChecksumMismatch { .. })
        ));
        let mut bad = good;
        bad[0] = 0xAB;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadDelimiter));
        let mut bad = good;
        bad[7] = 0x54;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadDelimiter));
        assert_eq!(decode_frame(&good[..7]), Err(FrameError::BadLength(7)));
    }

    #[test]
    fn scan_edge_cases() {
        let (frames, diag) = scan_stream(&[]);
        assert!(frames.is_empty());
        assert_eq!(diag, ScanDiagnostics::default());

        let mut stream = vec![0x01, 0x02, 0x03];
        stream.extend_from_slice(&encode_frame(id(0x110055B53A)));
        let (frames, diag) = scan_stream(&stream);
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].tag_id, id(0x110055B53A));
        assert_eq!(diag.skipped, 3);

        let mut stream = encode_frame(id(1)).to_vec();
        stream.extend_from_slice(&encode_frame(id(2)));
        let (frames, diag) = scan_stream(&stream);
        assert_eq!(
            frames.iter().map(|f| f.tag_id).collect::<Vec<_>>(),
            vec![id(1), id(2)]
        );
        assert_eq!(diag.skipped, 0);
    }

    #[test]
    fn resyncs_after_truncated_frame() {
        let mut stream = encode_frame(id(7))[..5].to_vec();
        stream.extend_from_slice(&encode_frame(id(8)));
        let (frames, diag) = scan_stream(&stream);
        assert_eq!(
            frames.iter().map(|f| f.tag_id).collect::<Vec<_>>(),
            vec![id(8)]
        );
        assert_eq!(diag.skipped, 5);
        assert!(diag.rejected >= 1);
    }

    #[test]
    fn streaming_across_chunks() {
        let frame = encode_frame(id(0x110055B53A));
        let mut decoder = StreamDecoder::new();
        assert!(decoder.push(&frame[..3]).is_empty());
        let frames = decoder.push(&frame[3..]);
        assert_eq!(frames.len(), 1);
        assert_eq!(decoder.finish(), ScanDiagnostics::default());
    }

    proptest! {
        #[test]
        fn round_trip(v in 0u64..=TagId::MAX) {
            prop_assert_eq!(decode_frame(&encode_frame(id(v))).unwrap().tag_id, id(v));
        }

        #[test]
        fn single_bit_corruption_is_detected(v in 0u64..=TagId::MAX, byte in 1usize..7, bit in 0u8..8) {
            let mut frame = encode_frame(id(v));
            frame[byte] ^= 1 << bit;
            prop_assert!(decode_frame(&frame).is_err());
        }

        #[test]
        fn resync_recovers_embedded_frames(
            chunks in proptest::collection::vec(
                (proptest::collection::vec(any::<u8>().prop_filter("no start byte", |b| *b != START), 0..12),
                 0u64..=TagId::MAX),
                0..8),
            tail in proptest::collection::vec(any::<u8>().prop_filter("no start byte", |b| *b != START), 0..12),
            split in any::<prop::sample::Index>(),
        ) {
            let mut stream = Vec::new();
            let mut expected = Vec::new();
            let mut garbage = 0;
            for (junk, v) in &chunks {
                stream.extend_from_slice(junk);
                garbage += junk.len();
                stream.extend_from_slice(&encode_frame(id(*v)));
                expected.push(id(*v));
            }
            stream.extend_from_slice(&tail);
            garbage += tail.len();

            let (frames, diag) = scan_stream(&stream);
            prop_assert_eq!(frames.iter().map(|f| f.tag_id).collect::<Vec<_>>(), expected.clone());
            prop_assert_eq!(diag.skipped, garbage);

            // Same result when the stream arrives in two pieces.
            let at = split.index(stream.len() + 1);
            let mut decoder = StreamDecoder::new();
            let mut got = decoder.push(&stream[..at]);
            got.extend(decoder.push(&stream[at..]));
            prop_assert_eq!(got.iter().map(|f| f.tag_id).collect::<Vec<_>>(), expected);
            prop_assert_eq!(decoder.finish().skipped, garbage);
        }
    }
}
