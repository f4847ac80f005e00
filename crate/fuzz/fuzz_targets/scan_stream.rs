#![no_main]
use lbs_core::link::{encode_frame, scan_stream, StreamDecoder};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let (frames, _) = scan_stream(data);
    for f in &frames {
        let bytes = encode_frame(f.tag_id);
        assert!(data.windows(bytes.len()).any(|w| w == bytes));
    }
    // chunked input decodes the same frames
    let split = data.first().map_or(1, |b| usize::from(*b).max(1));
    let mut decoder = StreamDecoder::new();
    let chunked: Vec<_> = data.chunks(split).flat_map(|c| decoder.push(c)).collect();
    assert_eq!(chunked.len(), frames.len());
});
