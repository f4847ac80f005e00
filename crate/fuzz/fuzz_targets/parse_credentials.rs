#![no_main]
use lbs_core::server::auth::parse_credentials;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(store) = parse_credentials(s) {
            let again = parse_credentials(&store.to_text()).expect("serialized store reparses");
            assert_eq!(again, store);
        }
    }
});
