//! Acceptance suite for the service: one PASS/FAIL line per criterion.

use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use shala_core::conllu;
use shala_core::demo::{DemoModels, Recipes};
use shala_server::api;
use shala_server::session::Session;
use shala_server::store::{read_log, SessionStore};
use shala_server::Service;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

async fn send(req: reqwest::RequestBuilder) -> Result<(u16, String), String> {
    let resp = req.send().await.map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    Ok((status, resp.text().await.map_err(|e| e.to_string())?))
}

fn parse(text: &str) -> Result<Value, String> {
    serde_json::from_str(text).map_err(|e| format!("{e}: {text}"))
}

/// analyze, correct, finalize, export over real HTTP.
async fn flow(base: &str) -> Result<String, String> {
    let http = reqwest::Client::new();
    let (st, body) = send(http.post(format!("{base}/api/analyze")).json(&json!({
        "text": "aham pīta-ambaram dharāmi",
        "tasks": ["SEGMENT", "MORPH", "PARSE", "COMPOUND"],
    })))
    .await?;
    if st != 201 {
        return Err(format!("analyze {st}: {body}"));
    }
    let v = parse(&body)?;
    let id = v["id"].as_str().ok_or("no id")?.to_string();
    let heads: Vec<u64> = v["predictions"]["tree"]["heads"].as_array().ok_or("no tree")?.iter().filter_map(Value::as_u64).collect();
    let root = heads.iter().position(|h| *h == 0).ok_or("no root")?;
    let dep = (0..heads.len()).find(|i| *i != root).ok_or("one token")?;
    let label = if v["predictions"]["tree"]["labels"][dep] == "karma" { "karta" } else { "karma" };
    let compound = if v["predictions"]["compounds"][0]["label"] == "DVANDVA" { "TATPURUSHA" } else { "DVANDVA" };

    for c in [
        json!({"task": "PARSE", "token": dep, "label": label}),
        json!({"task": "COMPOUND", "token": 1, "label": compound}),
        json!({"task": "MORPH", "token": 0, "tag": "NOUN,VOC,DU,F"}),
    ] {
        let (st, body) = send(http.post(format!("{base}/api/session/{id}/correction")).json(&c)).await?;
        if st != 200 {
            return Err(format!("correction {st}: {body}"));
        }
    }
    let (st, body) = send(http.post(format!("{base}/api/session/{id}/finalize"))).await?;
    if st != 200 || parse(&body)?["status"] != "FINALIZED" {
        return Err(format!("finalize {st}: {body}"));
    }
    let (st, _) = send(http.post(format!("{base}/api/session/{id}/correction")).json(&json!({"task": "COMPOUND", "token": 1, "label": "BAHUVRIHI"}))).await?;
    if st != 409 {
        return Err(format!("correction after finalize gave {st}"));
    }
    let (st, doc) = send(http.get(format!("{base}/api/session/{id}/export?format=conllu"))).await?;
    if st != 200 {
        return Err(format!("export {st}: {doc}"));
    }
    let sents = conllu::parse(&doc).map_err(|e| e.to_string())?;
    let tok = &sents[0].tokens;
    let visible = tok[dep].cols[7] == label
        && tok[1].cols[9].starts_with(&format!("Compound={compound}|"))
        && tok[0].cols[4] == "NOUN,VOC,DU,F";
    if !visible {
        return Err(format!("corrections missing from export:\n{doc}"));
    }
    if conllu::write(&sents) != doc {
        return Err("export does not re-write byte-identically".into());
    }
    Ok(id)
}

fn api_contract(models: &DemoModels) -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(Service::with_demo_models(models.clone(), SessionStore::new(dir.path()).unwrap()));
    let rt = tokio::runtime::Runtime::new().unwrap();
    let result = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        tokio::spawn(async move { axum::serve(listener, api::router(svc)).await });
        flow(&base).await
    });
    let e = t.elapsed();
    match result {
        Ok(_) => outcome(
            e.as_secs_f64() < 10.0,
            format!("analyze, 3 corrections, finalize, export over HTTP; corrections visible in CoNLL-U; {e:.2?} (limit < 10 s)"),
        ),
        Err(msg) => outcome(false, msg),
    }
}

fn replay(models: &DemoModels) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_demo_models(models.clone(), SessionStore::new(dir.path()).unwrap());
    let mut checked = 0;
    let mut mismatches = 0;
    for (k, text) in ["aham pīta-ambaram dharāmi", "dāsobhava", "rāmaḥ vanam gacchati"].iter().enumerate() {
        let req = serde_json::from_value(json!({"text": text, "tasks": ["SEGMENT", "MORPH", "PARSE"]})).unwrap();
        let id = svc.analyze(&req).unwrap().id;
        for t in 0..3 {
            let label = ["karta", "karma", "karana"][(t + k) % 3];
            let c = json!({"task": "PARSE", "token": t % 2, "label": label});
            let _ = svc.correct(&id, serde_json::from_value(c).unwrap());
        }
        if k != 1 {
            svc.finalize(&id).unwrap();
        }
        let live = svc.store.get(&id).unwrap().lock().unwrap().clone();
        let events = read_log(&svc.store.log_path(&id)).unwrap();
        let replayed = Session::replay(&events).unwrap();
        let reopened = SessionStore::new(dir.path()).unwrap().get(&id).unwrap().lock().unwrap().clone();
        checked += 1;
        mismatches += usize::from(replayed != live || reopened != live);
    }
    outcome(mismatches == 0, format!("{checked} sessions, event-log replay equals live state in {} (limit 0 mismatches)", checked - mismatches))
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let models = DemoModels::train(&Recipes::quick(7)).expect("demo models train");
    let rows: Vec<(&str, Check)> = vec![
        ("api contract", Box::new(|| api_contract(&models))),
        ("session event-log replay", Box::new(|| replay(&models))),
    ];
    let mut failed = 0;
    for (name, check) in rows {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
