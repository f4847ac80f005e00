#![no_main]
use lbs_core::tag::parse_tag_id;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(id) = parse_tag_id(s) {
            assert_eq!(parse_tag_id(&id.to_string()), Ok(id));
            assert!(s.eq_ignore_ascii_case(&id.to_string()));
        }
    }
});
