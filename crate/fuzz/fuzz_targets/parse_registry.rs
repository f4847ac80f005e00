#![no_main]
use lbs_core::server::parse_registry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(reg) = parse_registry(s) {
            let again = parse_registry(&reg.to_tsv()).expect("serialized registry reparses");
            assert_eq!(again.len(), reg.len());
        }
    }
});
