//! Network front end for the location server.

use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method as HttpMethod, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use lbs_core::server::{ApiRequest, ApiResponse, LocationServer, Method};

/// Seconds on the server's session clock.
pub type Clock = Arc<dyn Fn() -> f64 + Send + Sync>;

/// Seconds elapsed since the call.
pub fn wall_clock() -> Clock {
    let start = Instant::now();
    Arc::new(move || start.elapsed().as_secs_f64())
}

#[derive(Clone)]
pub struct LocationService {
    pub server: Arc<LocationServer>,
    pub clock: Clock,
}

pub fn to_api_request(
    method: &HttpMethod,
    uri: &Uri,
    headers: &HeaderMap,
    body: Bytes,
) -> ApiRequest {
    let target = uri.path_and_query().map_or("/", |pq| pq.as_str());
    let mut req = ApiRequest::new(Method::parse(method.as_str()), target);
    for (name, value) in headers {
        if let Ok(value) = value.to_str() {
            req = req.with_header(name.as_str(), value);
        }
    }
    req.body = body.to_vec();
    req
}

pub fn to_http_response(resp: ApiResponse) -> Response {
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let content_type = HeaderValue::from_str(&resp.content_type)
        .unwrap_or(HeaderValue::from_static("application/octet-stream"));
    (status, [(header::CONTENT_TYPE, content_type)], resp.body).into_response()
}

async fn dispatch(
    State(svc): State<LocationService>,
    method: HttpMethod,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let req = to_api_request(&method, &uri, &headers, body);
    let now = (svc.clock)();
    to_http_response(svc.server.handle_request(&req, now))
}

/// Every path not matched by the caller's own routes goes to the location
/// server, which answers 404/405 itself.
pub fn location_router(svc: LocationService) -> Router {
    Router::new().fallback(dispatch).with_state(svc)
}
