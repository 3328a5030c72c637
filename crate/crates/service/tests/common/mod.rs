#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use propmatch_service::config::Config;
use propmatch_service::ops::App;
use propmatch_service::server::{router, AppState};
use propmatch_service::store::ProjectStore;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

pub const VECTORS: &str = "\
storm 1.0 0.0 0.0
hit 0.6 0.2 0.1
coast 0.7 0.1 0.3
rain 0.8 0.6 0.0
flood 0.9 0.3 0.2
market 0.0 1.0 0.0
stocks 0.1 0.9 0.2
fell 0.2 0.7 0.5
vote 0.0 0.1 1.0
council 0.1 0.2 0.9
";

/// Three dated documents, two in the first quarter of 2015 and one in the third.
pub fn documents() -> Value {
    json!([
        {"id": "d1", "date": "2015-01-10", "source": "wire",
         "sentences": ["The storm hit the coast.", "Markets fell.", "The council held a vote."]},
        {"id": "d2", "date": "2015-02-20",
         "sentences": ["Stocks fell again.", "A storm and rain hit.", "Flood on the coast."]},
        {"id": "d3", "date": "2015-07-05",
         "sentences": ["The council vote failed.", "Rain and flood followed the storm."]}
    ])
}

/// Words become tokens; the first is the root and the rest hang off it.
pub const FAKE_PARSER: &str = r#"awk '{ for (i = 1; i <= NF; i++) { w = $i; gsub(/[.,]/, "", w); printf "%d\t%s\t%s\t%s\t_\t_\t%d\t%s\t_\t_\n", i, w, tolower(w), (i == 1 ? "VERB" : "NOUN"), (i == 1 ? 0 : 1), (i == 1 ? "root" : "obj") } print "" }'"#;

pub struct Fixture {
    pub dir: TempDir,
    pub app: Arc<App>,
}

impl Fixture {
    pub fn new(config: Config) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let vectors = dir.path().join("vectors.txt");
        std::fs::write(&vectors, VECTORS).unwrap();
        let config = Config {
            embeddings: Some(vectors),
            ..config
        };
        let store = ProjectStore::open(dir.path().join("store")).unwrap();
        Fixture {
            app: Arc::new(App::new(store, config)),
            dir,
        }
    }

    pub fn store_path(&self) -> PathBuf {
        self.dir.path().join("store")
    }

    pub fn vectors_path(&self) -> PathBuf {
        self.dir.path().join("vectors.txt")
    }

    pub fn router(&self) -> Router {
        router(AppState::new(self.app.clone()))
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    let v = if b.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&b).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&b)))
    };
    (s, v)
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// The fake parser's output for one sentence, with a `sent_id`.
pub fn conllu(key: &str, text: &str) -> String {
    let mut out = format!("# sent_id = {key}\n");
    for (i, w) in text.split_whitespace().enumerate() {
        let w = w.trim_matches(['.', ',']);
        let (pos, head, rel) = if i == 0 {
            ("VERB", 0, "root")
        } else {
            ("NOUN", 1, "obj")
        };
        out += &format!(
            "{}\t{w}\t{}\t{pos}\t_\t_\t{head}\t{rel}\t_\t_\n",
            i + 1,
            w.to_lowercase()
        );
    }
    out + "\n"
}

/// A small entailment training set with parses for both sides.
pub fn snli_files(dir: &Path) -> (PathBuf, PathBuf) {
    let pairs = [
        ("p1", "entailment", "storm hit coast", "storm hit"),
        ("p2", "contradiction", "market fell", "storm hit coast"),
        ("p3", "entailment", "rain flood coast", "rain flood"),
        ("p4", "neutral", "council vote", "stocks fell"),
        ("p5", "-", "vote", "vote"),
    ];
    let mut jsonl = String::new();
    let mut parses = String::new();
    for (id, label, premise, hypothesis) in pairs {
        jsonl += &json!({"gold_label": label, "sentence1": premise, "sentence2": hypothesis, "pairID": id}).to_string();
        jsonl += "\n";
        parses += &conllu(&format!("{id}:premise"), premise);
        parses += &conllu(&format!("{id}:hypothesis"), hypothesis);
    }
    (write(dir, "pairs.jsonl", &jsonl), write(dir, "pairs.conllu", &parses))
}
