#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

pub fn stance(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stance")).args(args).output().expect("binary runs")
}

pub fn stance_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stance"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Per-target (code, full name, train, test, AGAINST, FAVOR, NONE), typed in
/// from the published dataset statistics.
pub const PUBLISHED_STATS: [(&str, &str, usize, usize, usize, usize, usize); 5] = [
    ("HC", "Hillary Clinton", 689, 295, 565, 163, 256),
    ("FM", "Feminist Movement", 664, 285, 511, 268, 170),
    ("LA", "Legalization of Abortion", 653, 280, 544, 167, 222),
    ("A", "Atheism", 513, 220, 464, 124, 145),
    ("CC", "Climate Change is a Real Concern", 395, 169, 335, 26, 203),
];

/// Splits `total` over `weights` in proportion, remainders to the largest
/// fractional parts (earlier index first on ties).
fn proportional(total: usize, weights: [usize; 3]) -> [usize; 3] {
    let sum: usize = weights.iter().sum();
    let mut out = [0; 3];
    let mut rem = Vec::new();
    for i in 0..3 {
        out[i] = total * weights[i] / sum;
        rem.push((total * weights[i] % sum, i));
    }
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = total - out.iter().sum::<usize>();
    for (_, i) in rem.into_iter().take(missing) {
        out[i] += 1;
    }
    out
}

/// Writes `train.tsv` and `test.tsv` whose statistics equal the published
/// table cell for cell. Train labels follow the overall label proportions.
pub fn write_published_shape_dataset(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let mut train = String::from("ID\tTarget\tTweet\tStance\n");
    let mut test = String::from("ID\tTarget\tTweet\tStance\n");
    let mut n = 0;
    for (code, name, tr, te, against, favor, none) in PUBLISHED_STATS {
        assert_eq!(tr + te, against + favor + none, "{code}");
        let in_train = proportional(tr, [against, favor, none]);
        let labels = ["AGAINST", "FAVOR", "NONE"];
        let totals = [against, favor, none];
        for i in 0..3 {
            for j in 0..totals[i] {
                n += 1;
                let text = format!("Synthetic {code} post number {j} leaning {} #SemST", labels[i].to_lowercase());
                let line = format!("{n}\t{name}\t{text}\t{}\n", labels[i]);
                if j < in_train[i] {
                    train.push_str(&line);
                } else {
                    test.push_str(&line);
                }
            }
        }
    }
    std::fs::write(dir.join("train.tsv"), train).unwrap();
    std::fs::write(dir.join("test.tsv"), test).unwrap();
}

pub struct MockServer {
    pub addr: SocketAddr,
    pub requests: Arc<AtomicU64>,
    _runtime: tokio::runtime::Runtime,
}

impl MockServer {
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Backend config pointing at this server, written into `dir`.
    pub fn backend_file(&self, dir: &Path, key_env: &str) -> PathBuf {
        let path = dir.join("backend.toml");
        std::fs::write(
            &path,
            format!(
                "kind = \"http\"\nbase_url = \"{}\"\nmodel = \"mock-7b\"\napi_key_env = \"{key_env}\"\ntimeout_secs = 10\nmax_in_flight = 16\n",
                self.base_url()
            ),
        )
        .unwrap();
        path
    }
}

#[derive(Clone)]
struct MockState {
    key: String,
    requests: Arc<AtomicU64>,
}

fn fnv(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The query text line of a prompt, so replies depend on the tweet only.
fn query_text(prompt: &str) -> &str {
    prompt.lines().rev().find(|l| l.starts_with("Text S: ")).unwrap_or(prompt)
}

/// A crude stand-in for a model: usually reads the leaning word planted in
/// synthetic tweets, sometimes guesses, and now and then ignores the format.
fn reply_for(user: &str) -> String {
    let text = query_text(user);
    let h = fnv(text);
    let planted = ["against", "favor", "none"].into_iter().find(|w| text.contains(&format!("leaning {w}")));
    let label = match (planted, h % 10) {
        (Some(w), 0..=6) => w.to_uppercase(),
        _ => ["FAVOR", "AGAINST", "NONE"][(h / 10 % 3) as usize].to_string(),
    };
    let reask = user.contains("did not follow the required output format");
    if user.contains("Compare similarities and contrasts") {
        let (f, a, n) = match label.as_str() {
            "FAVOR" => (0.6, 0.3, 0.1),
            "AGAINST" => (0.2, 0.7, 0.1),
            _ => (0.2, 0.2, 0.6),
        };
        return format!("favor: {f}\nagainst: {a}\nnone: {n}");
    }
    if user.contains("determine the stance polarity towards") || user.contains("what is the stance polarity towards") {
        if h.is_multiple_of(53) && !reask {
            return "The post is hard to read either way.".into();
        }
        if h % 97 == 1 {
            return "No clear call.".into();
        }
        return format!("Taking everything into account.\nStance: {label}");
    }
    format!("An observation about the post ({}).", h % 1000)
}

async fn chat(State(state): State<MockState>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    state.requests.fetch_add(1, Ordering::SeqCst);
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).unwrap_or("");
    if auth != format!("Bearer {}", state.key) {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": {"message": "bad key"}})));
    }
    let user = body["messages"]
        .as_array()
        .and_then(|m| m.iter().find(|x| x["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
        .to_string();
    let content = reply_for(&user);
    (
        StatusCode::OK,
        Json(json!({
            "id": "cmpl-mock",
            "object": "chat.completion",
            "model": body["model"],
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": user.len() / 4, "completion_tokens": content.len() / 4}
        })),
    )
}

/// Starts a local OpenAI-compatible chat completions server that demands
/// `Bearer <key>`.
pub fn start_mock(key: &str) -> MockServer {
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    let requests = Arc::new(AtomicU64::new(0));
    let state = MockState { key: key.to_string(), requests: requests.clone() };
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = Router::new().route("/v1/chat/completions", post(chat)).with_state(state);
    runtime.spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    MockServer { addr, requests, _runtime: runtime }
}
