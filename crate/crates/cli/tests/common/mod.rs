#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{DateTime, TimeZone, Utc};
use fieldlog::app::{App, AppOptions};
use fieldlog::config::Config;
use fieldlog::http::router;
use fieldlog_core::model::clock::ManualClock;
use fieldlog_core::model::IdGenerator;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2010, 6, 1, 8, 0, 0).unwrap()
}

pub fn config(dir: &Path) -> Config {
    Config {
        data_dir: dir.to_owned(),
        author: Some("ana".into()),
        ..Config::default()
    }
}

/// An app with a pinned clock and seeded ids, so two instances given the
/// same calls produce byte-identical output.
pub fn app_with(config: Config, clock: Arc<ManualClock>, seed: u64) -> Arc<App> {
    let mut options = AppOptions::new(config);
    options.clock = clock;
    options.ids = Arc::new(IdGenerator::seeded(seed));
    Arc::new(App::open(options).unwrap())
}

pub fn app(dir: &Path) -> (Arc<App>, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(epoch()));
    (app_with(config(dir), clock.clone(), 1), clock)
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.body))
    }
}

pub async fn call(app: &Arc<App>, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    raw(app, req.body(body).unwrap()).await
}

pub async fn raw(app: &Arc<App>, req: Request<Body>) -> Reply {
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_owned());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        content_type,
        body: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}
