#![no_main]
use lbs_core::sim::parse_event_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(log) = parse_event_log(s) {
            let text = log.to_text();
            assert_eq!(
                parse_event_log(&text)
                    .expect("serialized log reparses")
                    .to_text(),
                text
            );
        }
    }
});
