mod common;

use std::time::Duration;

use axum::http::StatusCode;
use common::*;
use propmatch_core::models::{LRModel, ModelFile, RerankerModel};
use propmatch_core::tree_edit::SearchConfig;
use propmatch_service::config::{Config, ServerConfig};
use propmatch_service::ops::{MatchParams, MatchResponse};
use propmatch_service::parser::ParserHook;
use serde_json::{json, Value};

async fn with_corpus(fx: &Fixture) -> axum::Router {
    let app = fx.router();
    let (s, body) = call_json(
        &app,
        "POST",
        "/corpora",
        Some(json!({"id": "news", "documents": documents()})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    assert_eq!(body["sentences"], 8);
    assert_eq!(body["parsed"], 0);
    app
}

#[tokio::test]
async fn matches_are_byte_identical_across_calls() {
    let fx = Fixture::new(Config::default());
    let app = with_corpus(&fx).await;
    let (s, q) = call_json(&app, "POST", "/queries", Some(json!({"text": "storm hit the coast"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(q["id"], "q1");

    let uri = "/queries/q1/matches?k=8&n=8";
    let (s1, a) = call(&app, "GET", uri, None).await;
    let (s2, b) = call(&app, "GET", uri, None).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);

    let resp: MatchResponse = serde_json::from_slice(&a).unwrap();
    assert_eq!(resp.matches.len(), 8);
    assert_eq!(resp.matches[0].doc, "d1");
    assert_eq!(resp.matches[0].position, 0);
    assert_eq!(resp.matches[0].before, None);
    assert_eq!(resp.matches[0].after.as_deref(), Some("Markets fell."));
    assert_eq!(resp.matches[0].source.as_deref(), Some("wire"));
    let ranks: Vec<usize> = resp.matches.iter().map(|m| m.rank).collect();
    assert_eq!(ranks, (1..=8).collect::<Vec<_>>());
    assert!(resp.matches.windows(2).all(|w| w[0].fast_score >= w[1].fast_score));

    // the library call the command line makes gives the same body
    let query = fx.app.store.query("q1").unwrap();
    let params = MatchParams {
        k: Some(8),
        n: Some(8),
        ..MatchParams::default()
    };
    let direct = serde_json::to_vec(&fx.app.run_match(&query, &params, false).unwrap()).unwrap();
    assert_eq!(direct, a);
}

#[tokio::test]
async fn measurement_bins_by_quarter() {
    let fx = Fixture::new(Config::default());
    let app = fx.router();
    let docs = json!([
        {"id": "a", "date": "2015-01-10", "sentences": ["storm"]},
        {"id": "b", "date": "2015-03-31", "sentences": ["storm rain"]},
        {"id": "c", "date": "2015-07-01", "sentences": ["rain storm flood"]}
    ]);
    let (s, _) = call_json(&app, "POST", "/corpora", Some(json!({"documents": docs}))).await;
    assert_eq!(s, StatusCode::CREATED);
    call_json(&app, "POST", "/queries", Some(json!({"id": "Q1", "text": "storm"}))).await;
    let (s, v) = call_json(&app, "GET", "/queries/Q1/measurement?n=3", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["counts"], json!([2, 0, 1]));
    assert_eq!(v["bin_start"], json!(["2015-01-01", "2015-04-01", "2015-07-01"]));
    assert_eq!(v["undated_matches"], 0);
    assert_eq!(v["corpus"], "c1");
}

#[tokio::test]
async fn perfect_agreement_gives_alpha_one() {
    let fx = Fixture::new(Config::default());
    let app = with_corpus(&fx).await;
    call_json(&app, "POST", "/queries", Some(json!({"id": "q", "text": "storm"}))).await;
    for rater in ["r1", "r2"] {
        for (doc, pos, score) in [("d1", 0, 5), ("d2", 0, 1), ("d2", 1, 4)] {
            let body = json!({"rater": rater, "query": "q", "doc": doc, "position": pos, "score": score});
            let (s, v) = call_json(&app, "POST", "/ratings", Some(body)).await;
            assert_eq!(s, StatusCode::CREATED, "{v}");
            assert!(v["recorded_at"].is_string());
        }
    }
    let (s, body) = call(&app, "GET", "/ratings/alpha", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(String::from_utf8(body).unwrap(), r#"{"alpha":1.0}"#);

    let (_, list) = call_json(&app, "GET", "/ratings", None).await;
    assert_eq!(list.as_array().unwrap().len(), 6);
    assert_eq!(list[0]["rater"], "r1");
    assert_eq!(list[0]["score"], 5);
}

#[tokio::test]
async fn error_statuses() {
    let fx = Fixture::new(Config::default());
    let app = with_corpus(&fx).await;

    // malformed bodies
    let (s, v) = call_json(&app, "POST", "/queries", Some(json!({"txt": "storm"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());
    let (s, _) = call_json(&app, "POST", "/corpora", Some(json!({"documents": [{"id": "x"}]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, "POST", "/queries", Some(json!({"id": "a/b", "text": "storm"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let rating = json!({"rater": "r", "query": "nope", "doc": "d1", "position": 0, "score": 9});
    let (s, _) = call_json(&app, "POST", "/ratings", Some(rating)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    // unknown ids
    let (s, _) = call_json(&app, "GET", "/queries/nope/matches", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    call_json(&app, "POST", "/queries", Some(json!({"id": "q", "text": "storm"}))).await;
    let (s, _) = call_json(&app, "GET", "/queries/q/matches?corpus=nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call_json(&app, "GET", "/jobs/j9", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // duplicates
    let (s, _) = call_json(
        &app,
        "POST",
        "/corpora",
        Some(json!({"id": "news", "documents": documents()})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call_json(&app, "POST", "/queries", Some(json!({"id": "q", "text": "rain"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    // bad parameters
    let (s, _) = call_json(&app, "GET", "/queries/q/matches?k=2&n=5", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, "GET", "/queries/q/matches?filter=bm25", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    // a reranker with no trained model
    let (s, _) = call_json(&app, "GET", "/queries/q/matches?rerank=lr", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

fn add_zero_lr(fx: &Fixture) {
    let file = ModelFile::new(RerankerModel::Lr(LRModel::zeros()), SearchConfig::default());
    fx.app.store.add_model("zero", file).unwrap();
}

#[tokio::test]
async fn strict_mode_refuses_unparsed_reranking() {
    let lenient = Fixture::new(Config::default());
    add_zero_lr(&lenient);
    let app = with_corpus(&lenient).await;
    call_json(&app, "POST", "/queries", Some(json!({"id": "q", "text": "storm"}))).await;
    let (s, v) = call_json(&app, "GET", "/queries/q/matches?rerank=lr&k=8&n=3", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["model"], "zero");
    assert!(v["matches"].as_array().unwrap().iter().all(|m| m["unparsed"] == true));
    // unparsed candidates keep their fast score
    for m in v["matches"].as_array().unwrap() {
        assert_eq!(m["rerank_score"], m["fast_score"]);
    }

    let strict = Fixture::new(Config {
        server: ServerConfig {
            strict: true,
            ..ServerConfig::default()
        },
        ..Config::default()
    });
    add_zero_lr(&strict);
    let app = with_corpus(&strict).await;
    call_json(&app, "POST", "/queries", Some(json!({"id": "q", "text": "storm"}))).await;
    let (s, v) = call_json(&app, "GET", "/queries/q/matches?rerank=lr", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    // the fast filter alone still works
    let (s, _) = call_json(&app, "GET", "/queries/q/matches", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn command_parser_hook_enables_reranking() {
    let fx = Fixture::new(Config {
        parser: ParserHook::command(FAKE_PARSER),
        server: ServerConfig {
            strict: true,
            ..ServerConfig::default()
        },
        ..Config::default()
    });
    add_zero_lr(&fx);
    let app = fx.router();
    let (s, v) = call_json(&app, "POST", "/corpora", Some(json!({"documents": documents()}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["parsed"], 8);
    let (_, q) = call_json(&app, "POST", "/queries", Some(json!({"text": "Storm hit coast."}))).await;
    assert!(q["tree"].is_object());
    assert_eq!(q["tokens"][0]["deprel"], "root");
    let (s, v) = call_json(&app, "GET", "/queries/q1/matches?rerank=lr&k=8&n=8", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let m = v["matches"].as_array().unwrap();
    assert!(m.iter().all(|m| m["unparsed"] == false));
    // a zero model scores everything 0.5; ties keep corpus order
    assert!(m.iter().all(|m| m["rerank_score"] == 0.5));
    let order: Vec<(String, u64)> = m
        .iter()
        .map(|m| (m["doc"].as_str().unwrap().to_string(), m["position"].as_u64().unwrap()))
        .collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
}

#[tokio::test]
async fn failing_parser_hook_is_reported() {
    let fx = Fixture::new(Config {
        parser: ParserHook::command("echo broken >&2; exit 3"),
        ..Config::default()
    });
    let app = fx.router();
    let (s, v) = call_json(&app, "POST", "/queries", Some(json!({"text": "storm"}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert!(v["error"].as_str().unwrap().contains("broken"), "{v}");
}

#[tokio::test(flavor = "multi_thread")]
async fn http_parser_hook() {
    use axum::routing::post;
    let parser = axum::Router::new().route(
        "/parse",
        post(|body: String| async move {
            body.lines()
                .enumerate()
                .map(|(i, l)| conllu(&format!("x:{i}"), l))
                .collect::<String>()
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, parser).await.unwrap() });

    let fx = Fixture::new(Config {
        parser: ParserHook::http(format!("http://{addr}/parse")),
        ..Config::default()
    });
    let app = fx.router();
    let (s, v) = call_json(&app, "POST", "/corpora", Some(json!({"documents": documents()}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["parsed"], 8);
    let corpus = fx.app.store.corpus("c1").unwrap();
    let (_, s) = corpus.sentence_at(4).unwrap();
    assert_eq!(
        s.tokens.iter().map(|t| t.lemma.as_str()).collect::<Vec<_>>(),
        ["a", "storm", "and", "rain", "hit"]
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn training_job_registers_a_model() {
    let fx = Fixture::new(Config::default());
    let (pairs, parses) = snli_files(fx.dir.path());
    let app = fx.router();
    let body = json!({"kind": "lr", "name": "lr1", "pairs": pairs, "parses": parses, "train": {"epochs": 20}});
    let (s, job) = call_json(&app, "POST", "/jobs/train", Some(body)).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{job}");
    assert_eq!(job["state"], "running");
    let mut status = Value::Null;
    for _ in 0..200 {
        (_, status) = call_json(&app, "GET", "/jobs/j1", None).await;
        if status["state"] != "running" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    assert_eq!(status["state"], "done", "{status}");
    assert_eq!(status["outcome"]["examples"], 4);
    assert_eq!(status["outcome"]["epoch_losses"].as_array().unwrap().len(), 20);
    let (_, models) = call_json(&app, "GET", "/models", None).await;
    assert_eq!(models[0]["name"], "lr1");
    assert_eq!(models[0]["kind"], "lr");

    // a second job under the same name fails
    let body = json!({"kind": "lr", "name": "lr1", "pairs": pairs, "parses": parses});
    let (s, _) = call_json(&app, "POST", "/jobs/train", Some(body)).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    for _ in 0..200 {
        (_, status) = call_json(&app, "GET", "/jobs/j2", None).await;
        if status["state"] != "running" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    assert_eq!(status["state"], "failed");
}

#[tokio::test]
async fn store_round_trips_rankings() {
    let fx = Fixture::new(Config {
        parser: ParserHook::command(FAKE_PARSER),
        ..Config::default()
    });
    let (pairs, parses) = snli_files(fx.dir.path());
    let app = fx.router();
    call_json(&app, "POST", "/corpora", Some(json!({"documents": documents()}))).await;
    call_json(&app, "POST", "/queries", Some(json!({"text": "rain flood coast"}))).await;
    fx.app.store.fit_tfidf("c1").unwrap();
    let req = serde_json::from_value(json!({"kind": "lr", "name": "m", "pairs": pairs, "parses": parses})).unwrap();
    fx.app.train(&req).unwrap();

    let uris = [
        "/queries/q1/matches?k=8&n=5&rerank=lr",
        "/queries/q1/matches?k=4&n=4&filter=tfidf&rerank=lr",
    ];
    let mut before = Vec::new();
    for u in uris {
        let (s, b) = call(&app, "GET", u, None).await;
        assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
        before.push(b);
    }

    let reopened = Fixture {
        app: std::sync::Arc::new(propmatch_service::ops::App::new(
            propmatch_service::store::ProjectStore::open(fx.store_path()).unwrap(),
            fx.app.config.clone(),
        )),
        dir: tempfile::tempdir().unwrap(),
    };
    let app2 = reopened.router();
    for (u, b) in uris.iter().zip(&before) {
        let (_, again) = call(&app2, "GET", u, None).await;
        assert_eq!(&again, b);
    }
    let (_, corpora) = call_json(&app2, "GET", "/corpora", None).await;
    assert_eq!(corpora[0]["id"], "c1");
    let (_, queries) = call_json(&app2, "GET", "/queries", None).await;
    assert_eq!(queries[0]["text"], "rain flood coast");
}
