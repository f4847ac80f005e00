#![no_main]
use lbs_core::sim::parse_scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(scenario) = parse_scenario(s, None) {
            scenario.validate().expect("parsed scenarios are valid");
        }
    }
});
