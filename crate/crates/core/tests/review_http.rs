use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use kompet::corpus::parse_corpus_file;
use kompet::review::{spawn, ReviewContext, ReviewStore, ServerHandle};
use kompet::supervise::{read_label_file, read_label_records, silver_quality, LabelRecord};
use kompet::taxonomy::load_taxonomy_file;
use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn start(log: &Path) -> ServerHandle {
    let silver = read_label_file(fixture("silver.jsonl")).unwrap();
    let corpus = parse_corpus_file(fixture("corpus.jsonl")).unwrap();
    let index = load_taxonomy_file(fixture("taxonomy.jsonl"), "da").unwrap();
    let store = ReviewStore::open(
        silver,
        ReviewContext {
            corpus: Some(&corpus),
            index: Some(&index),
            alternatives: 3,
        },
        log,
    )
    .unwrap();
    spawn(store, SocketAddr::from(([127, 0, 0, 1], 0)), None).unwrap()
}

struct Client {
    agent: ureq::Agent,
    base: String,
}

impl Client {
    fn new(server: &ServerHandle) -> Client {
        Client {
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .build()
                .into(),
            base: server.url(),
        }
    }

    fn get(&self, path: &str) -> (u16, String) {
        let mut r = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    }

    fn get_json(&self, path: &str) -> Value {
        let (status, body) = self.get(path);
        assert_eq!(status, 200, "GET {path}: {body}");
        serde_json::from_str(&body).unwrap()
    }

    fn decide(&self, span_id: &str, body: Value) -> (u16, Value) {
        let mut r = self
            .agent
            .post(&format!("{}/api/items/{span_id}/decision", self.base))
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .unwrap();
        let status = r.status().as_u16();
        let text = r.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    fn export(&self) -> Vec<LabelRecord> {
        let (status, body) = self.get("/api/export");
        assert_eq!(status, 200);
        read_label_records(body.as_bytes()).unwrap()
    }
}

fn statuses(client: &Client) -> Vec<(String, String)> {
    let page = client.get_json("/api/items?limit=1000");
    page["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| (i["span_id"].as_str().unwrap().to_string(), i["status"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn accept_all_but_one_then_correct_it() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("decisions.jsonl");
    let silver = read_label_file(fixture("silver.jsonl")).unwrap();
    let target = "dk-005-5";

    let server = start(&log);
    let client = Client::new(&server);
    let progress = client.get_json("/api/progress");
    assert_eq!(progress["total"], 34);
    assert_eq!(progress["decided"], 0);

    let item = client.get_json(&format!("/api/items/{target}"));
    assert_eq!(item["surface"], "ledelse");
    assert_eq!(item["silver_label"], "L1");
    assert_eq!(item["context"]["tokens"][5], "ledelse");
    assert!(!item["alternatives"].as_array().unwrap().is_empty());

    // half the session, then a restart
    let half = silver.len() / 2;
    for r in &silver[..half] {
        if r.span_id != target {
            let (status, body) = client.decide(&r.span_id, json!({"action": "accept", "reviewer_id": "rev1"}));
            assert_eq!(status, 200, "{body}");
            assert_eq!(body["status"], "accepted");
        }
    }
    let before = statuses(&client);
    server.stop();

    let server = start(&log);
    let client = Client::new(&server);
    assert_eq!(statuses(&client), before, "log replay must reproduce statuses");
    for r in &silver[half..] {
        if r.span_id != target {
            let (status, _) = client.decide(&r.span_id, json!({"action": "accept", "reviewer_id": "rev1"}));
            assert_eq!(status, 200);
        }
    }
    let (status, body) = client.decide(target, json!({"action": "correct", "label": "K04", "reviewer_id": "rev1"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["status"], "corrected");
    assert_eq!(body["decision"]["label"], "K04");

    let progress = client.get_json("/api/progress");
    assert_eq!(progress["decided"], 34);
    assert_eq!(progress["by_status"]["accepted"], 33);
    assert_eq!(progress["by_status"]["corrected"], 1);

    let exported = client.export();
    assert_eq!(exported.len(), silver.len());
    let differing: Vec<&str> = exported
        .iter()
        .zip(&silver)
        .filter(|(e, s)| e.label != s.label)
        .map(|(e, _)| e.span_id.as_str())
        .collect();
    assert_eq!(differing, vec![target]);
    assert!(exported.iter().all(|r| r.provenance == kompet::supervise::Provenance::Gold));

    // no pending items: silver accuracy against the export equals the accept rate
    let audit = silver_quality(&silver, &exported).unwrap();
    assert!((audit.accuracy - 33.0 / 34.0).abs() < 1e-12);

    let final_statuses = statuses(&client);
    server.stop();
    let server = start(&log);
    let client = Client::new(&server);
    assert_eq!(statuses(&client), final_statuses);
    assert_eq!(client.export(), exported);
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 34);
}

#[test]
fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(&dir.path().join("log.jsonl"));
    let client = Client::new(&server);

    assert_eq!(client.get("/api/items/nope").0, 404);
    assert_eq!(client.decide("nope", json!({"action": "accept"})).0, 404);
    assert_eq!(client.decide("dk-001-0", json!({"action": "correct"})).0, 400);
    assert_eq!(client.decide("dk-001-0", json!({"action": "correct", "label": "X9"})).0, 400);
    assert_eq!(client.decide("dk-001-0", json!({"action": "accept", "label": "K06"})).0, 400);
    assert_eq!(client.decide("dk-001-0", json!({"action": "shrug"})).0, 400);
    assert_eq!(client.get("/api/items?status=bogus").0, 400);
    assert_eq!(client.get_json("/api/progress")["decided"], 0);
}

#[test]
fn flag_missing_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let server = start(&log);
    let client = Client::new(&server);

    let (status, body) = client.decide("dk-003-4", json!({"action": "flag-missing"}));
    assert_eq!(status, 200);
    assert_eq!(body["status"], "flagged-missing");
    assert_eq!(body["decision"]["label"], "K99");
    // repeating the same decision is idempotent and not logged twice
    client.decide("dk-003-4", json!({"action": "flag-missing"}));
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 1);

    let flagged = client.get_json("/api/items?status=flagged-missing");
    assert_eq!(flagged["total"], 1);
    let pending = client.get_json("/api/items?status=pending&offset=30&limit=10");
    assert_eq!(pending["total"], 33);
    assert_eq!(pending["items"].as_array().unwrap().len(), 3);

    // latest decision wins
    client.decide("dk-003-4", json!({"action": "correct", "label": "K09"}));
    assert_eq!(client.get_json("/api/items/dk-003-4")["status"], "corrected");
    let exported = client.export();
    let rec = exported.iter().find(|r| r.span_id == "dk-003-4").unwrap();
    assert_eq!(rec.label.tag(), "K09");
    assert!(!rec.missing);
    let undecided = exported.iter().find(|r| r.span_id == "dk-001-0").unwrap();
    assert_eq!(undecided.provenance, kompet::supervise::Provenance::Silver);
}

#[test]
fn labels_and_static_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(&dir.path().join("log.jsonl"));
    let client = Client::new(&server);

    let labels = client.get_json("/api/labels");
    let tags: Vec<&str> = labels.as_array().unwrap().iter().map(|l| l["tag"].as_str().unwrap()).collect();
    assert_eq!(tags.len(), 23);
    assert!(tags.contains(&"K99") && tags.contains(&"L1") && !tags.contains(&"S?") && !tags.contains(&"0000"));

    let (status, body) = client.get("/");
    assert_eq!(status, 200);
    assert!(body.contains("--assets"));
}

#[test]
fn serves_assets_with_spa_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("dist");
    fs::create_dir_all(assets.join("js")).unwrap();
    fs::write(assets.join("index.html"), "<html>review ui</html>").unwrap();
    fs::write(assets.join("js/app.js"), "console.log(1)").unwrap();

    let silver = read_label_file(fixture("silver.jsonl")).unwrap();
    let store = ReviewStore::open(silver, ReviewContext::default(), dir.path().join("log.jsonl")).unwrap();
    let server = spawn(store, SocketAddr::from(([127, 0, 0, 1], 0)), Some(assets)).unwrap();
    let client = Client::new(&server);

    assert_eq!(client.get("/").1, "<html>review ui</html>");
    assert_eq!(client.get("/js/app.js").1, "console.log(1)");
    assert_eq!(client.get("/review/dk-001-0").1, "<html>review ui</html>");
    assert_eq!(client.get("/../secret").0, 404);
}
