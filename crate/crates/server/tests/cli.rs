use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

use shala_core::demo::{train_segmenter, Recipes};
use shala_core::pipeline::Pipeline;
use shala_server::store::SessionStore;
use shala_server::Service;

fn shala(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_shala")).args(args).output().unwrap();
    assert!(out.status.success(), "shala {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_all_then_eval_and_serve() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    let r = report(&shala(&["train", "all", "--quick", "--seed", "3", "--out", p(&models)]));
    assert_eq!(r["report"]["tables"].as_array().unwrap().len(), 4);
    for f in ["segmenter.model", "tagger.model", "parser.model", "compound.model", "leaderboard.json", "shala.toml"] {
        assert!(models.join(f).exists(), "{f}");
    }

    let r = report(&shala(&["eval", "parser", "--model", p(&models.join("parser.model"))]));
    assert!(r["report"]["uas"].as_f64().unwrap() > 0.5);
    let r = report(&shala(&["eval", "segmenter", "--model", p(&models.join("segmenter.model"))]));
    assert!(r["report"]["pm"].as_f64().unwrap() > 0.5);

    let mut child = Command::new(env!("CARGO_BIN_EXE_shala"))
        .args(["serve", "--config", p(&models.join("shala.toml")), "--listen", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("{line}")).to_string();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (health, board) = rt.block_on(async {
        let h: Value = reqwest::get(format!("{url}/api/health")).await.unwrap().json().await.unwrap();
        let b: Value = reqwest::get(format!("{url}/api/leaderboard")).await.unwrap().json().await.unwrap();
        (h, b)
    });
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(health["models"], json!(["SEGMENT", "MORPH", "PARSE", "COMPOUND"]));
    assert_eq!(board["tables"][0]["entries"][0]["seed"], 3);
}

#[test]
fn aux_encoder_gates_into_parser() {
    let dir = tempfile::tempdir().unwrap();
    let aux = dir.path().join("ct.model");
    let r = report(&shala(&["train", "aux", "--aux-task", "ct", "--epochs", "2", "--out", p(&aux)]));
    assert_eq!(r["report"]["aux_task"], "CT");
    let parser = dir.path().join("parser.model");
    let r = report(&shala(&["train", "parser", "--epochs", "1", "--aux-model", p(&aux), "--out", p(&parser)]));
    assert_eq!(r["report"]["attached"], json!(["CT"]));
    let r = report(&shala(&["eval", "aux", "--model", p(&aux)]));
    assert!(r["report"]["accuracy"].as_f64().is_some());
}

#[test]
fn export_session_reads_the_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let req = serde_json::from_value(json!({"text": "rāmaḥ", "tasks": ["SEGMENT"]})).unwrap();
    let mut pipeline = Pipeline::empty();
    pipeline.segmenter = Some(train_segmenter(&Recipes::quick(0).segmenter).unwrap());
    let svc = Service::new(pipeline, SessionStore::new(dir.path()).unwrap());
    let id = svc.analyze(&req).unwrap().id;

    let out = shala(&["export-session", &id, "--data-dir", p(dir.path())]);
    let doc = String::from_utf8(out.stdout).unwrap();
    assert!(doc.starts_with(&format!("# sent_id = {id}\n")), "{doc}");
    let file = dir.path().join("out.json");
    shala(&["export-session", &id, "--data-dir", p(dir.path()), "--format", "json", "--out", p(&file)]);
    let j: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(j["id"], id.as_str());

    let bad = Command::new(env!("CARGO_BIN_EXE_shala"))
        .args(["export-session", &id, "--data-dir", p(dir.path()), "--format", "xml"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
