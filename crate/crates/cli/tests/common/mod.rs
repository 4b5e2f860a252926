#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use profile_gender::classifier::{Calibration, GenderModel, Hyperparams, LinearModel, TrainingMeta};
use profile_gender::dataset::{synthetic_profiles, write_profiles, UserProfile};
use profile_gender::features::{FeatureExtractor, FeatureSet, TweetMode, DEFAULT_NGRAM_RANGE};
use profile_gender::normalize_text;

pub const BIN: &str = env!("CARGO_BIN_EXE_profile-gender");

pub fn run_bin(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn write_jsonl(dir: &Path, name: &str, profiles: &[UserProfile]) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_profiles(&mut buf, profiles).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

pub fn fixture_file(dir: &Path) -> PathBuf {
    write_jsonl(dir, "fixture.jsonl", &synthetic_profiles())
}

/// Model over a few masculine/feminine profession pairs where n-grams seen
/// only in the feminine forms carry negative weight.
pub fn crafted_model() -> GenderModel {
    let words = ["مهندس", "مهندسة", "طبيب", "طبيبة", "معلم", "معلمة"];
    let profiles: Vec<UserProfile> =
        words.iter().map(|w| UserProfile { display_name: (*w).into(), ..Default::default() }).collect();
    let extractor =
        FeatureExtractor::fit(&profiles, FeatureSet::Usernames, TweetMode::Aggregate, DEFAULT_NGRAM_RANGE, None).unwrap();
    let masculine: String = words.iter().step_by(2).map(|w| format!(" {} ", normalize_text(w))).collect();
    let weights = extractor.vocabularies()[0]
        .grams()
        .iter()
        .map(|g| if masculine.contains(g.as_str()) { 1.0 } else { -3.0 })
        .collect();
    GenderModel {
        extractor,
        linear: LinearModel { weights, bias: 0.0 },
        calibration: Calibration { slope: 2.0, intercept: 0.0, fitted: true },
        hyperparams: Hyperparams::default(),
        meta: TrainingMeta { objective: 0.0, n_examples: 6 },
    }
}

/// Starts the service on an ephemeral port in a background thread.
pub fn start_server(model: GenderModel) -> SocketAddr {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    listener.set_nonblocking(true).unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            profile_gender_cli::service::serve_on(listener, model).await.unwrap();
        });
    });
    addr
}

/// Sends one HTTP/1.1 request and returns (status, body).
pub fn http(addr: SocketAddr, method: &str, path: &str, body: &[u8]) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).unwrap();
    // the server may answer (and close) before reading an oversized body
    let _ = stream.write_all(body);
    let mut raw = Vec::new();
    let _ = stream.read_to_end(&mut raw);
    let text = String::from_utf8_lossy(&raw).into_owned();
    let status = text.split(' ').nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let body = text.split_once("\r\n\r\n").map(|(_, b)| b.to_owned()).unwrap_or_default();
    (status, body)
}

pub fn predict_json(name: &str) -> Vec<u8> {
    serde_json::to_vec(&serde_json::json!({ "name": name })).unwrap()
}
