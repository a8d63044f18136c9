use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rankpromo::bot::{FeatureBounds, PairModel, PAIR_FEATURE_COUNT};
use rankpromo::text::{EmbeddingStore, OovFallback};
use rankpromo_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

const ADMIN: &str = "admin-secret";

// distinctive values so that a leak is easy to spot in response bodies
const WEIGHTS: [f64; PAIR_FEATURE_COUNT] = [
    0.7316492, -0.2281937, 0.4419283, 0.9182736, -0.3364519, 0.5527364, 0.1298374, 0.6671829,
    -0.8812734, 0.2238471, 0.3349281, -0.4451928, 0.5561829, 0.6672918, -0.7781923,
];

fn model() -> Arc<PairModel> {
    let mut m = PairModel::zero();
    m.weights = WEIGHTS;
    m.bounds = FeatureBounds {
        min: [0.0; PAIR_FEATURE_COUNT],
        max: [1.0; PAIR_FEATURE_COUNT],
    };
    Arc::new(m)
}

struct Client {
    app: Router,
    bodies: Arc<Mutex<Vec<String>>>,
}

impl Client {
    fn open(dir: &Path, static_dir: Option<&Path>) -> Client {
        let state = AppState::open(ServiceConfig {
            data_dir: dir.to_path_buf(),
            admin_token: ADMIN.into(),
            model: Some(model()),
            store: EmbeddingStore::new(16, OovFallback::Hashed).unwrap(),
            static_dir: static_dir.map(Path::to_path_buf),
        })
        .unwrap();
        Client {
            app: router(state),
            bodies: Arc::default(),
        }
    }

    async fn call(
        &self,
        method: &str,
        uri: &str,
        auth: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = auth {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let text = String::from_utf8_lossy(&bytes).to_string();
        self.bodies.lock().unwrap().push(text.clone());
        (
            status,
            serde_json::from_str(&text).unwrap_or(Value::String(text)),
        )
    }

    async fn create(&self, spec: Value) -> (String, Value, Value) {
        let (s, v) = self
            .call("POST", "/competitions", Some(ADMIN), Some(spec))
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        (
            v["id"].as_str().unwrap().to_string(),
            v["tokens"].clone(),
            v["pseudonyms"].clone(),
        )
    }

    async fn submit(&self, id: &str, token: &str, text: &str) -> (StatusCode, Value) {
        self.call(
            "POST",
            &format!("/competitions/{id}/submissions"),
            None,
            Some(json!({"token": token, "text": text})),
        )
        .await
    }

    async fn advance(&self, id: &str, force: bool) -> (StatusCode, Value) {
        self.call(
            "POST",
            &format!("/competitions/{id}/advance?force={force}"),
            Some(ADMIN),
            None,
        )
        .await
    }
}

const HOOF: &str = "Hoof care matters for every horse. A farrier trims the hoof wall. Shoes protect a working horse. \
                    Clean the hoof daily to prevent thrush.";
const STABLE: &str =
    "Stable routines keep a horse calm. Feed hay twice a day. Turn out in the paddock. \
                      Check the hoof after riding.";
const TACK: &str =
    "Saddles should fit the horse well. Clean tack often. Leather needs oil. Bridles wear out.";

fn spec(rounds: usize) -> Value {
    json!({
        "query": {"id": "q1", "text": "horse hoof care"},
        "rounds": rounds,
        "seed": 3,
        "players": [
            {"id": "alice", "strategy": "human"},
            {"id": "bob", "strategy": "human", "initial_text": TACK},
            {"id": "bot", "initial_text": STABLE, "strategy": "bot"},
            {"id": "still", "initial_text": TACK, "strategy": "static"},
            {"id": "ghost", "strategy": {"planted": [HOOF, STABLE]}}
        ]
    })
}

fn texts(ranking: &Value) -> Vec<String> {
    ranking["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["text"].as_str().unwrap().to_string())
        .collect()
}

fn text_of(ranking: &Value, author: &str) -> String {
    ranking["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["author"] == author)
        .map(|e| e["text"].as_str().unwrap().to_string())
        .unwrap()
}

fn rank_of(ranking: &Value, author: &str) -> u64 {
    ranking["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["author"] == author)
        .map(|e| e["rank"].as_u64().unwrap())
        .unwrap()
}

#[tokio::test]
async fn creation_issues_one_token_per_human() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path(), None);
    let (id, tokens, pseudonyms) = c.create(spec(3)).await;
    let tokens = tokens.as_object().unwrap();
    assert_eq!(tokens.len(), 2);
    for t in tokens.values() {
        assert_eq!(t.as_str().unwrap().len(), 32);
    }
    assert_eq!(pseudonyms.as_object().unwrap().len(), 5);

    let (s, v) = c
        .call("GET", &format!("/competitions/{id}"), None, None)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["round"], 0);
    assert_eq!(v["human_players"], 2);
    assert_eq!(v["status"], "open");
    let (s, _) = c.call("GET", "/competitions/nope", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path(), None);
    let mut dup = spec(2);
    dup["players"][1]["id"] = json!("alice");
    let (s, v) = c
        .call("POST", "/competitions", Some(ADMIN), Some(dup))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["details"][0].as_str().unwrap().contains("alice"));

    let (s, _) = c
        .call(
            "POST",
            "/competitions",
            Some(ADMIN),
            Some(json!({"query": 3})),
        )
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = c.call("POST", "/competitions", None, Some(spec(2))).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = c
        .call("POST", "/competitions", Some("wrong"), Some(spec(2)))
        .await;
    assert_eq!(s, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn submissions_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path(), None);
    let (id, tokens, _) = c.create(spec(1)).await;
    let alice = tokens["alice"].as_str().unwrap();

    let (s, v) = c.submit(&id, alice, HOOF).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["round"], 1);
    assert_eq!(v["passages"].as_array().unwrap().len(), 4);
    assert_eq!(v["passages"][1], "A farrier trims the hoof wall.");

    let long = "horse ".repeat(151);
    let (s, v) = c.submit(&id, alice, &long).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "length cap exceeded");
    let (s, _) = c.submit(&id, alice, "  ").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, _) = c
        .submit(&id, "0123456789abcdef0123456789abcdef", HOOF)
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    // a token is scoped to its own competition
    let (other, _, _) = c.create(spec(1)).await;
    let (s, _) = c.submit(&other, alice, HOOF).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    let (s, _) = c.advance(&id, true).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = c.submit(&id, alice, HOOF).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = c.advance(&id, true).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn rounds_rank_submissions_and_carry_over_on_force() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path(), None);
    let (id, tokens, names) = c.create(spec(3)).await;
    let (alice, bob) = (
        tokens["alice"].as_str().unwrap(),
        tokens["bob"].as_str().unwrap(),
    );
    let (alice_name, bob_name, bot_name) = (
        names["alice"].as_str().unwrap(),
        names["bob"].as_str().unwrap(),
        names["bot"].as_str().unwrap(),
    );
    let ranking_uri = format!("/competitions/{id}/ranking");

    let (s, _) = c.call("GET", &ranking_uri, None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // alice has no starting document, so even a forced advance must wait
    let (s, v) = c.advance(&id, false).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["details"].as_array().unwrap().len(), 2);
    let (s, _) = c.advance(&id, true).await;
    assert_eq!(s, StatusCode::CONFLICT);

    c.submit(&id, alice, "A first draft about hoof care.").await;
    // resubmission replaces the pending version
    c.submit(&id, alice, HOOF).await;
    let (s, r1) = c.advance(&id, true).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r1["round"], 1);
    assert_eq!(text_of(&r1, alice_name), HOOF);
    assert_eq!(text_of(&r1, bob_name), TACK);

    let (_, v) = c.call("GET", &ranking_uri, Some(alice), None).await;
    assert_eq!(v["you"], alice_name);
    let (s, _) = c.call("GET", &ranking_uri, Some("bogus"), None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    let bob_v2 = "Bob now writes about horse hoof care. The hoof needs a farrier.";
    c.submit(&id, bob, bob_v2).await;
    let (s, _) = c.advance(&id, false).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, r2) = c.advance(&id, true).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(text_of(&r2, bob_name), bob_v2);
    assert_eq!(text_of(&r2, alice_name), HOOF);
    let bot_changed = text_of(&r1, bot_name) != text_of(&r2, bot_name);
    assert_eq!(bot_changed, rank_of(&r1, bot_name) != 1);

    let (_, r2_again) = c.call("GET", &ranking_uri, None, None).await;
    let history = r2_again["history"].as_array().unwrap();
    assert_eq!(history.len(), 2);
    // pseudonyms are stable across rounds
    for h in history {
        let mut a: Vec<&str> = h["authors"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_str().unwrap())
            .collect();
        a.sort();
        let mut b: Vec<&str> = names
            .as_object()
            .unwrap()
            .values()
            .map(|x| x.as_str().unwrap())
            .collect();
        b.sort();
        assert_eq!(a, b);
    }

    let (_, report) = c
        .call("GET", &format!("/competitions/{id}/report"), None, None)
        .await;
    let rounds = report["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 2);
    assert!(rounds[0]["players"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["raw_promotion"].is_null()));
    let defined = rounds[1]["players"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| !p["raw_promotion"].is_null())
        .count();
    assert_eq!(defined, 4);
}

#[tokio::test]
async fn advancing_needs_the_admin_credential() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path(), None);
    let (id, tokens, _) = c.create(spec(2)).await;
    let uri = format!("/competitions/{id}/advance?force=true");
    let (s, _) = c.call("POST", &uri, None, None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = c
        .call("POST", &uri, Some(tokens["alice"].as_str().unwrap()), None)
        .await;
    assert_eq!(s, StatusCode::FORBIDDEN);
}

async fn play(c: &Client, id: &str, tokens: &Value, round: usize) -> Value {
    let text = format!("Round {round} notes on horse hoof care. {HOOF}");
    c.submit(id, tokens["alice"].as_str().unwrap(), &text).await;
    if round % 2 == 0 {
        c.submit(id, tokens["bob"].as_str().unwrap(), STABLE).await;
    }
    let (s, r) = c.advance(id, true).await;
    assert_eq!(s, StatusCode::OK, "{r}");
    r
}

#[tokio::test]
async fn restart_replays_the_log() {
    let spec_v = spec(4);
    let (a_dir, b_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());

    let straight = Client::open(a_dir.path(), None);
    let (id, tokens, _) = straight.create(spec_v.clone()).await;
    let mut expected = Vec::new();
    for round in 1..=4 {
        expected.push(texts(&play(&straight, &id, &tokens, round).await));
    }

    let first = Client::open(b_dir.path(), None);
    let (id, tokens, _) = first.create(spec_v).await;
    let mut got = Vec::new();
    for round in 1..=2 {
        got.push(texts(&play(&first, &id, &tokens, round).await));
    }
    // a pending submission survives the restart too
    first
        .submit(&id, tokens["bob"].as_str().unwrap(), TACK)
        .await;
    drop(first);

    let second = Client::open(b_dir.path(), None);
    let (_, summary) = second
        .call("GET", &format!("/competitions/{id}"), None, None)
        .await;
    assert_eq!(summary["round"], 2);
    assert_eq!(summary["pending_submissions"], 1);
    for round in 3..=4 {
        got.push(texts(&play(&second, &id, &tokens, round).await));
    }
    assert_eq!(got[..2], expected[..2]);
    // round 3 differs only through bob's extra submission
    assert_ne!(got[2], expected[2]);

    // same inputs from a restart give the same rounds
    let third_dir = tempfile::tempdir().unwrap();
    let c = Client::open(third_dir.path(), None);
    let (id3, tokens3, _) = c.create(spec(4)).await;
    for round in 1..=2 {
        play(&c, &id3, &tokens3, round).await;
    }
    c.submit(&id3, tokens3["bob"].as_str().unwrap(), TACK).await;
    let mut third = Vec::new();
    for round in 3..=4 {
        third.push(texts(&play(&c, &id3, &tokens3, round).await));
    }
    assert_eq!(got[2..], third[..]);
}

#[tokio::test]
async fn no_response_contains_model_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path(), None);
    let (id, tokens, _) = c.create(spec(3)).await;
    for round in 1..=3 {
        play(&c, &id, &tokens, round).await;
        c.call("GET", &format!("/competitions/{id}"), None, None)
            .await;
        c.call("GET", &format!("/competitions/{id}/ranking"), None, None)
            .await;
        c.call("GET", &format!("/competitions/{id}/report"), None, None)
            .await;
    }
    let bodies = c.bodies.lock().unwrap();
    assert!(bodies.len() > 10);
    for b in bodies.iter() {
        for needle in ["weights", "bounds", "\"mu\"", "engine", "lm_dirichlet"] {
            assert!(!b.contains(needle), "`{needle}` leaked in {b}");
        }
        for w in WEIGHTS {
            assert!(
                !b.contains(&format!("{}", w.abs())),
                "weight {w} leaked in {b}"
            );
        }
    }
}

#[tokio::test]
async fn concurrent_submissions_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let c = Arc::new(Client::open(dir.path(), None));
    let (id, tokens, _) = c.create(spec(2)).await;
    let mut handles = Vec::new();
    for k in 0..20 {
        let (c, id) = (c.clone(), id.clone());
        let token = tokens[if k % 2 == 0 { "alice" } else { "bob" }]
            .as_str()
            .unwrap()
            .to_string();
        handles.push(tokio::spawn(async move {
            c.submit(&id, &token, &format!("Version {k} about the horse hoof."))
                .await
                .0
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let (_, v) = c
        .call("GET", &format!("/competitions/{id}"), None, None)
        .await;
    assert_eq!(v["pending_submissions"], 2);
    let log = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(log.lines().count(), 21);
}

#[tokio::test]
async fn static_files_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let www = tempfile::tempdir().unwrap();
    std::fs::write(
        www.path().join("index.html"),
        "<!doctype html><title>arena</title>",
    )
    .unwrap();
    let c = Client::open(dir.path(), Some(www.path()));
    let (s, v) = c.call("GET", "/index.html", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v.as_str().unwrap().contains("arena"));
    let (s, _) = c.call("GET", "/", None, None).await;
    assert_eq!(s, StatusCode::OK);
}
