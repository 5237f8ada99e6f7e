#![allow(dead_code)]

use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use sonotab::{AppState, Config};
use tower::ServiceExt;

pub const BOUNDARY: &str = "sonotab-test-boundary";

pub fn app_state(root: &std::path::Path, workers: usize) -> AppState {
    let mut config = Config::new(root.join("data"), root.join("spool"));
    config.workers = workers;
    AppState::from_config(&config).expect("state")
}

pub fn multipart(files: &[(String, Vec<u8>)], schema_id: Option<&str>) -> Vec<u8> {
    let mut body = Vec::new();
    if let Some(id) = schema_id {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"schema_id\"\r\n\r\n{id}\r\n").as_bytes(),
        );
    }
    for (name, bytes) in files {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"files\"; filename=\"{name}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Bytes) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

pub async fn send_raw(app: &Router, method: Method, uri: &str, content_type: &str, body: Vec<u8>) -> (StatusCode, Bytes) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", content_type)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

pub async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, Method::GET, uri, None).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

pub async fn upload(app: &Router, files: &[(String, Vec<u8>)]) -> (StatusCode, Value) {
    let (s, b) = send_raw(
        app,
        Method::POST,
        "/v1/jobs",
        &format!("multipart/form-data; boundary={BOUNDARY}"),
        multipart(files, Some("endometriosis_tvus")),
    )
    .await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

pub async fn wait_job(app: &Router, job_id: &str, timeout: Duration) -> Value {
    let start = Instant::now();
    loop {
        let (s, p) = get_json(app, &format!("/v1/jobs/{job_id}")).await;
        assert_eq!(s, StatusCode::OK, "{p}");
        if ["completed", "failed", "cancelled"].contains(&p["state"].as_str().unwrap()) {
            return p;
        }
        assert!(start.elapsed() < timeout, "job did not finish: {p}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// Recursively collects every object key in a JSON value.
pub fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                out.push(k.clone());
                keys(v, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|v| keys(v, out)),
        _ => {}
    }
}

pub fn parse_csv(bytes: &[u8]) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes)
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}
