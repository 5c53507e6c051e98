use std::path::PathBuf;

use shala_core::demo;
use shala_core::embeddings::{evaluate, train_skipgram, EmbeddingTable, Inventory, SkipGramConfig, Task};

fn inventory(name: &str) -> Inventory {
    Inventory::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/eval").join(name)).unwrap()
}

fn table() -> EmbeddingTable {
    let config = SkipGramConfig {
        epochs: 10,
        ..SkipGramConfig::default()
    };
    train_skipgram(&demo::embedding_corpus(), &config).unwrap().0
}

#[test]
fn bundled_inventories_cover_the_corpus_vocabulary() {
    let t = table();
    for (file, task) in [
        ("analogy.tsv", Task::Analogy),
        ("synonym.tsv", Task::Synonym),
        ("relatedness.tsv", Task::Relatedness),
        ("categorization.tsv", Task::Categorization),
    ] {
        let inv = inventory(file);
        assert_eq!(inv.task, task);
        let r = evaluate(&t, &inv).unwrap();
        assert_eq!(r.task, task);
        assert_eq!(r.items, inv.items.len());
        assert_eq!(r.oov, 0, "{file}");
        assert_eq!(r.evaluated, r.items);
        let score = r.score.expect("something evaluated");
        let (lo, hi) = if task == Task::Relatedness { (-1.0, 1.0) } else { (0.0, 1.0) };
        assert!((lo..=hi).contains(&score), "{file}: {score}");
    }
}

#[test]
fn vector_file_round_trip_keeps_scores() {
    let t = table();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    t.save(&path).unwrap();
    let back = EmbeddingTable::load(&path).unwrap();
    assert_eq!(back, t);
    for file in ["analogy.tsv", "synonym.tsv", "relatedness.tsv", "categorization.tsv"] {
        let inv = inventory(file);
        assert_eq!(evaluate(&t, &inv).unwrap(), evaluate(&back, &inv).unwrap());
    }
}

#[test]
fn missing_words_count_as_oov() {
    let t = EmbeddingTable::from_rows(vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![0.0, 1.0])]).unwrap();
    let inv = Inventory::parse("ANALOGY\ta\tb\ta\tzzz\nANALOGY\ta\tb\tqqq\tb\n").unwrap();
    let r = evaluate(&t, &inv).unwrap();
    assert_eq!((r.items, r.oov), (2, 2));
    assert_eq!(r.score, None);
}
