#![no_main]
use lbs_core::server::auth::CredentialStore;
use lbs_core::server::{parse_registry, ApiRequest, AssetStore, LocationServer, Method};
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

fn server() -> &'static LocationServer {
    static SERVER: OnceLock<LocationServer> = OnceLock::new();
    SERVER.get_or_init(|| {
        let registry =
            parse_registry("110055B53A\tRoom 101\tComputer Lab\tlab.png\thours=9-5\n").unwrap();
        LocationServer::with_seed(registry, CredentialStore::new(), AssetStore::None, 0)
    })
}

// First byte picks the method, the next line is the request target and the
// rest is the body.
fuzz_target!(|data: &[u8]| {
    let Some((&m, rest)) = data.split_first() else {
        return;
    };
    let method = [Method::Get, Method::Post, Method::Put, Method::Other][usize::from(m % 4)];
    let (target, body) = match rest.iter().position(|b| *b == b'\n') {
        Some(i) => (&rest[..i], &rest[i + 1..]),
        None => (rest, &[][..]),
    };
    let Ok(target) = std::str::from_utf8(target) else {
        return;
    };
    let mut req = ApiRequest::new(method, target);
    req.body = body.to_vec();
    let resp = server().handle_request(&req, 0.0);
    assert!(
        matches!(resp.status, 200 | 400 | 401 | 404 | 405),
        "{}",
        resp.status
    );
    if resp.status == 200 {
        assert_eq!(
            req.path, "/healthz",
            "without credentials only the health check succeeds"
        );
    }
});
