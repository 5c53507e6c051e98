mod common;

use std::sync::Arc;
use std::thread;

use proptest::prelude::*;
use proptest::strategy::ValueTree;

use common::{service, ALL_TASKS, SENTENCE};
use shala_core::pipeline::TaskKind;
use shala_core::text::Script;
use shala_server::service::{AnalyzeRequest, CorrectionRequest};
use shala_server::session::{Correction, Session, Status};
use shala_server::store::{read_log, SessionStore};
use shala_server::{Service, ServiceError};

const LABELS: [&str; 4] = ["karta", "karma", "karana", "adhikarana"];
const TAGS: [&str; 4] = ["NOUN,NOM,SG,M", "NOUN,ACC,SG,N", "VERB,SG,1,PRES", "ADJ,LOC,PL,F"];
const CLASSES: [&str; 4] = ["TATPURUSHA", "BAHUVRIHI", "DVANDVA", "AVYAYIBHAVA"];

fn request() -> AnalyzeRequest {
    AnalyzeRequest {
        text: SENTENCE.into(),
        script: Script::Iast,
        tasks: ALL_TASKS.iter().map(|t| t.parse::<TaskKind>().unwrap()).collect(),
    }
}

/// Corrections that are always valid on the three-token sentence.
fn correction() -> impl Strategy<Value = Correction> {
    prop_oneof![
        (0..3usize, 0..4usize).prop_map(|(token, t)| Correction::Morph {
            token,
            tag: TAGS[t].parse().unwrap(),
            lemma: None,
        }),
        (0..3usize, 0..4usize).prop_map(|(token, l)| Correction::Parse {
            token,
            head: None,
            label: Some(LABELS[l].into()),
        }),
        (0..4usize).prop_map(|c| Correction::Compound {
            token: 1,
            label: CLASSES[c].into(),
        }),
    ]
}

fn req(c: Correction, note: Option<String>) -> CorrectionRequest {
    CorrectionRequest { correction: c, note }
}

fn reload(svc: &Service, id: &str) -> Session {
    let store = SessionStore::new(svc.store.dir()).unwrap();
    let handle = store.get(id).unwrap();
    let s = handle.lock().unwrap().clone();
    s
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn session_round_trip(cs in prop::collection::vec((correction(), prop::option::of("[a-z ]{0,12}")), 0..6)) {
        let (svc, _dir) = service();
        let created = svc.analyze(&request()).unwrap();
        for (c, note) in &cs {
            svc.correct(&created.id, req(c.clone(), note.clone())).unwrap();
        }
        let view = svc.session(&created.id).unwrap();
        prop_assert_eq!(&view.predictions, &created.predictions);
        prop_assert_eq!(view.corrections.len(), cs.len());
        for (rec, (c, note)) in view.corrections.iter().zip(&cs) {
            prop_assert_eq!(&rec.correction, c);
            prop_assert_eq!(&rec.note, note);
        }
        let live = svc.store.get(&created.id).unwrap().lock().unwrap().clone();
        prop_assert_eq!(reload(&svc, &created.id), live);
    }

    #[test]
    fn finalized_sessions_refuse_mutation(before in prop::collection::vec(correction(), 0..3), after in correction()) {
        let (svc, _dir) = service();
        let id = svc.analyze(&request()).unwrap().id;
        for c in before {
            svc.correct(&id, req(c, None)).unwrap();
        }
        svc.finalize(&id).unwrap();
        let log = std::fs::read_to_string(svc.store.log_path(&id)).unwrap();
        let frozen = svc.session(&id).unwrap();
        prop_assert!(matches!(svc.correct(&id, req(after, None)), Err(ServiceError::SessionFinalized(_))));
        prop_assert!(matches!(svc.finalize(&id), Err(ServiceError::SessionFinalized(_))));
        prop_assert_eq!(std::fs::read_to_string(svc.store.log_path(&id)).unwrap(), log);
        let now = svc.session(&id).unwrap();
        prop_assert_eq!(now.status, Status::Finalized);
        prop_assert_eq!(now.corrections, frozen.corrections);
    }
}

#[test]
fn concurrent_corrections_are_serialized() {
    let (svc, _dir) = service();
    let id = svc.analyze(&request()).unwrap().id;
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let batches: Vec<Vec<Correction>> = (0..8)
        .map(|_| (0..5).map(|_| correction().new_tree(&mut runner).unwrap().current()).collect())
        .collect();

    let handles: Vec<_> = batches
        .iter()
        .cloned()
        .enumerate()
        .map(|(t, batch)| {
            let svc = Arc::clone(&svc);
            let id = id.clone();
            thread::spawn(move || {
                for (k, c) in batch.into_iter().enumerate() {
                    svc.correct(&id, req(c, Some(format!("{t}/{k}")))).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }

    let live = svc.store.get(&id).unwrap().lock().unwrap().clone();
    assert_eq!(live.corrections.len(), 40, "no lost updates");
    let log = read_log(&svc.store.log_path(&id)).unwrap();
    assert_eq!(log.len(), 41);
    assert_eq!(reload(&svc, &id), live);

    // Each thread's corrections keep their order in the log.
    for t in 0..8 {
        let order: Vec<String> = live
            .corrections
            .iter()
            .filter_map(|r| r.note.clone())
            .filter(|n| n.starts_with(&format!("{t}/")))
            .collect();
        let expected: Vec<String> = (0..5).map(|k| format!("{t}/{k}")).collect();
        assert_eq!(order, expected);
    }

    // Replaying that interleaving one request at a time gives the same state.
    let (seq, _dir2) = service();
    let sid = seq.analyze(&request()).unwrap().id;
    for r in &live.corrections {
        seq.correct(&sid, req(r.correction.clone(), r.note.clone())).unwrap();
    }
    let a = seq.session(&sid).unwrap().current;
    let b = svc.session(&id).unwrap().current;
    assert_eq!(a, b);
}
