#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

use shala_core::demo::{DemoModels, Recipes};
use shala_server::api;
use shala_server::store::SessionStore;
use shala_server::Service;

pub const SENTENCE: &str = "aham pīta-ambaram dharāmi";
pub const ALL_TASKS: [&str; 4] = ["SEGMENT", "MORPH", "PARSE", "COMPOUND"];

pub fn models() -> &'static DemoModels {
    static M: OnceLock<DemoModels> = OnceLock::new();
    M.get_or_init(|| DemoModels::train(&Recipes::quick(7)).expect("demo models train"))
}

/// A service over the demo models with its own session directory.
pub fn service() -> (Arc<Service>, TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::new(dir.path()).unwrap();
    (Arc::new(Service::with_demo_models(models().clone(), store)), dir)
}

pub struct App {
    pub svc: Arc<Service>,
    pub router: Router,
    _dir: TempDir,
}

pub fn app() -> App {
    let (svc, dir) = service();
    App {
        router: api::router(svc.clone()),
        svc,
        _dir: dir,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

impl App {
    pub async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            content_type,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    pub async fn analyze(&self, text: &str, tasks: &[&str]) -> Value {
        let r = self
            .call("POST", "/api/analyze", Some(serde_json::json!({"text": text, "tasks": tasks})))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        r.json()
    }

    pub async fn correct(&self, id: &str, correction: Value) -> Reply {
        self.call("POST", &format!("/api/session/{id}/correction"), Some(correction)).await
    }
}

impl App {
    pub fn from_service(svc: Service) -> App {
        let svc = Arc::new(svc);
        App {
            router: api::router(svc.clone()),
            svc,
            _dir: tempfile::tempdir().unwrap(),
        }
    }
}
