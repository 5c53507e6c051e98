//! `train` and `eval` subcommands. Every command returns a JSON report;
//! corpora default to the bundled toy data.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use shala_core::compound::{self, CompoundConfig, CompoundModel, LabeledCompound};
use shala_core::conllu::{self, TaggedSentence, TreeSentence};
use shala_core::demo::{self, DemoModels, Recipes};
use shala_core::embeddings::{self, EmbeddingTable, Inventory, SkipGramConfig};
use shala_core::encoder::EncoderConfig;
use shala_core::lexicon::Lexicon;
use shala_core::ml::TrainConfig;
use shala_core::parser::{self, pretrain_aux, AuxEncoder, AuxTask, LabelSet, ParseConfig, ParseModel};
use shala_core::sandhi::RuleTable;
use shala_core::segmenter::{self, SegConfig, SegModel, SegSentence};
use shala_core::tagger::{self, TagConfig, TagModel};
use shala_core::text::PhonemeString;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Segmenter,
    Tagger,
    Parser,
    Aux,
    Compound,
    Embeddings,
    All,
}

impl Task {
    const NAMES: [(&'static str, Task); 7] = [
        ("segmenter", Task::Segmenter),
        ("tagger", Task::Tagger),
        ("parser", Task::Parser),
        ("aux", Task::Aux),
        ("compound", Task::Compound),
        ("embeddings", Task::Embeddings),
        ("all", Task::All),
    ];
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Task::NAMES
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(s))
            .map(|(_, t)| *t)
            .ok_or_else(|| format!("unknown task {s:?}; expected one of segmenter, tagger, parser, aux, compound, embeddings, all"))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Task::NAMES.iter().find(|(_, t)| t == self).map(|(n, _)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub corpus: Option<PathBuf>,
    /// Model file, or a directory for `all`.
    pub out: PathBuf,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub quick: bool,
    pub aux_task: Option<AuxTask>,
    /// Pretrained auxiliary encoders to gate into a parser.
    pub aux_models: Vec<PathBuf>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub model: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub inventories: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn seg_corpus(path: Option<&Path>) -> Result<Vec<SegSentence>> {
    match path {
        Some(p) => Ok(segmenter::load_corpus(&read(p)?, RuleTable::builtin())?),
        None => Ok(demo::seg_corpus()),
    }
}

fn tagged_corpus(path: Option<&Path>) -> Result<Vec<TaggedSentence>> {
    match path {
        Some(p) => Ok(conllu::tagged(&conllu::parse(&read(p)?)?)?),
        None => Ok(demo::tagger_corpus()),
    }
}

fn treebank(path: Option<&Path>) -> Result<Vec<TreeSentence>> {
    match path {
        Some(p) => Ok(conllu::trees(&conllu::parse(&read(p)?)?)?),
        None => Ok(demo::treebank()),
    }
}

fn compound_corpus(path: Option<&Path>) -> Result<Vec<LabeledCompound>> {
    match path {
        Some(p) => Ok(compound::load_corpus(p, RuleTable::builtin())?),
        None => Ok(demo::compound_corpus()),
    }
}

fn text_corpus(path: Option<&Path>) -> Result<Vec<Vec<String>>> {
    match path {
        Some(p) => Ok(read(p)?
            .lines()
            .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect()),
        None => Ok(demo::embedding_corpus()),
    }
}

fn recipe(task: Task, opts: &TrainOptions) -> TrainConfig {
    let r = if opts.quick { Recipes::quick(opts.seed) } else { Recipes::new(opts.seed) };
    let mut c = match task {
        Task::Segmenter => r.segmenter,
        Task::Tagger => r.tagger,
        Task::Parser | Task::Aux => r.parser,
        _ => r.compound,
    };
    if let Some(e) = opts.epochs {
        c.epochs = e;
    }
    if let Some(lr) = opts.learning_rate {
        c.learning_rate = lr;
    }
    c
}

pub fn train(task: Task, opts: &TrainOptions) -> Result<Value> {
    let lex = Lexicon::builtin();
    let rules = RuleTable::builtin();
    let corpus = opts.corpus.as_deref();
    let report = match task {
        Task::Segmenter => {
            let data = seg_corpus(corpus)?;
            let config = recipe(task, opts);
            let vocab: Vec<PhonemeString> = data.iter().flat_map(|s| s.words.iter().cloned()).collect();
            let mut model = SegModel::new(SegConfig::default(), rules, &vocab, config.seed);
            let tr = model.train(&data, lex, rules, &config)?;
            model.save(&opts.out)?;
            let ev = segmenter::evaluate(&model, &data, lex, rules);
            json!({"sentences": data.len(), "skipped": tr.skipped, "train_pm": ev.pm})
        }
        Task::Tagger => {
            let data = tagged_corpus(corpus)?;
            let config = recipe(task, opts);
            let mut model = TagModel::for_corpus(&data, lex, TagConfig::default(), config.seed)?;
            tagger::train_tagger(&mut model, &data, lex, &config)?;
            model.save(&opts.out)?;
            json!({"train": tagger::evaluate(&model, &data, lex)?})
        }
        Task::Parser => {
            let data = treebank(corpus)?;
            let config = recipe(task, opts);
            let mut model = ParseModel::for_corpus(&data, LabelSet::builtin(), ParseConfig::default(), config.seed)?;
            if !opts.aux_models.is_empty() {
                let enc = opts.aux_models.iter().map(AuxEncoder::load).collect::<Result<Vec<_>, _>>()?;
                model.attach_aux(&enc.iter().collect::<Vec<_>>(), config.seed)?;
            }
            parser::train_parser(&mut model, &data, &config)?;
            model.save(&opts.out)?;
            json!({"attached": model.attached(), "train": parser::evaluate(&model, &data)?})
        }
        Task::Aux => {
            let Some(aux) = opts.aux_task else { bail!("train aux needs --aux-task LT|MT|CT") };
            let data = treebank(corpus)?;
            let config = recipe(task, opts);
            let (model, acc) = pretrain_aux(aux, &data, &LabelSet::builtin(), EncoderConfig::default(), &config)?;
            model.save(&opts.out)?;
            json!({"aux_task": aux, "train_accuracy": acc})
        }
        Task::Compound => {
            let data = compound_corpus(corpus)?;
            let config = recipe(task, opts);
            let mut model =
                CompoundModel::for_corpus(&data, compound::builtin_classes(), &[], &[], CompoundConfig::default(), config.seed)?;
            compound::train_compound(&mut model, &data, rules, &config)?;
            model.save(&opts.out)?;
            json!({"train": compound::evaluate(&model, &data, rules)?})
        }
        Task::Embeddings => {
            let data = text_corpus(corpus)?;
            let d = SkipGramConfig::default();
            let config = SkipGramConfig {
                dim: opts.dim.unwrap_or(d.dim),
                window: opts.window.unwrap_or(d.window),
                negatives: opts.negatives.unwrap_or(d.negatives),
                epochs: opts.epochs.unwrap_or(d.epochs),
                learning_rate: opts.learning_rate.unwrap_or(d.learning_rate),
                seed: opts.seed,
                extra_vocab: Vec::new(),
            };
            let (table, _) = embeddings::train_skipgram(&data, &config)?;
            table.save(&opts.out)?;
            json!({"vocabulary": table.len(), "dim": table.dim(), "config": config})
        }
        Task::All => return train_all(opts),
    };
    Ok(json!({"task": task.to_string(), "out": opts.out, "report": report}))
}

/// The four pipeline models into `opts.out`, plus a leaderboard of their
/// training-set scores.
fn train_all(opts: &TrainOptions) -> Result<Value> {
    if opts.corpus.is_some() {
        bail!("train all uses the bundled corpora; train tasks one by one to use your own");
    }
    let mut recipes = if opts.quick { Recipes::quick(opts.seed) } else { Recipes::new(opts.seed) };
    for c in [&mut recipes.segmenter, &mut recipes.tagger, &mut recipes.parser, &mut recipes.compound] {
        if let Some(e) = opts.epochs {
            c.epochs = e;
        }
        if let Some(lr) = opts.learning_rate {
            c.learning_rate = lr;
        }
    }
    let models = DemoModels::train(&recipes)?;
    models.save(&opts.out)?;
    let (lex, rules) = (Lexicon::builtin(), RuleTable::builtin());
    let seg = segmenter::evaluate(&models.segmenter, &demo::seg_corpus(), lex, rules);
    let tag = tagger::evaluate(&models.tagger, &demo::tagger_corpus(), lex)?;
    let par = parser::evaluate(&models.parser, &demo::treebank())?;
    let com = compound::evaluate(&models.compound, &demo::compound_corpus(), rules)?;
    let entry = |scores: Value| json!([{"system": "shala demo", "seed": opts.seed, "scores": scores}]);
    let board = json!({
        "note": "Training-set scores of models trained on the bundled toy corpora.",
        "tables": [
            {"task": "SEGMENT", "dataset": "bundled seg_train", "metric": "PM", "entries": entry(json!({"pm": seg.pm}))},
            {"task": "MORPH", "dataset": "bundled tagger_train", "metric": "token accuracy",
             "entries": entry(json!({"accuracy": tag.token_accuracy, "macro_f1": tag.macro_f1}))},
            {"task": "PARSE", "dataset": "bundled treebank_train", "metric": "UAS / LAS",
             "entries": entry(json!({"uas": par.uas, "las": par.las}))},
            {"task": "COMPOUND", "dataset": "bundled compounds_train", "metric": "accuracy / macro F1",
             "entries": entry(json!({"accuracy": com.accuracy, "macro_f1": com.macro_f1}))},
        ],
    });
    let board_path = opts.out.join("leaderboard.json");
    std::fs::write(&board_path, serde_json::to_string_pretty(&board)? + "\n")?;
    let config = format!(
        "listen = \"{}\"\ndata_dir = \"sessions\"\nleaderboard = \"leaderboard.json\"\n\n[models]\nsegmenter = \"{}\"\ntagger = \"{}\"\nparser = \"{}\"\ncompound = \"{}\"\n",
        crate::config::DEFAULT_LISTEN,
        demo::SEGMENTER_FILE,
        demo::TAGGER_FILE,
        demo::PARSER_FILE,
        demo::COMPOUND_FILE,
    );
    std::fs::write(opts.out.join("shala.toml"), config)?;
    Ok(json!({"task": "all", "out": opts.out, "report": board}))
}

fn need_model(opts: &EvalOptions) -> Result<&Path> {
    opts.model.as_deref().context("--model is required")
}

pub fn eval(task: Task, opts: &EvalOptions) -> Result<Value> {
    let lex = Lexicon::builtin();
    let rules = RuleTable::builtin();
    let corpus = opts.corpus.as_deref();
    let report = match task {
        Task::Segmenter => {
            let model = SegModel::load(need_model(opts)?)?;
            let r = segmenter::evaluate(&model, &seg_corpus(corpus)?, lex, rules);
            json!({"sentences": r.sentences.len(), "pm": r.pm, "details": r.sentences})
        }
        Task::Tagger => json!(tagger::evaluate(&TagModel::load(need_model(opts)?)?, &tagged_corpus(corpus)?, lex)?),
        Task::Parser => json!(parser::evaluate(&ParseModel::load(need_model(opts)?)?, &treebank(corpus)?)?),
        Task::Aux => {
            let model = AuxEncoder::load(need_model(opts)?)?;
            let acc = model.accuracy(&treebank(corpus)?, &LabelSet::builtin())?;
            json!({"aux_task": model.task, "accuracy": acc})
        }
        Task::Compound => json!(compound::evaluate(&CompoundModel::load(need_model(opts)?)?, &compound_corpus(corpus)?, rules)?),
        Task::Embeddings => {
            let path = opts.vectors.as_deref().or(opts.model.as_deref()).context("--vectors is required")?;
            let table = EmbeddingTable::load(path)?;
            let inventories: Vec<(String, Inventory)> = if opts.inventories.is_empty() {
                demo::EVAL_INVENTORIES
                    .iter()
                    .map(|(name, text)| Ok((name.to_string(), Inventory::parse(text)?)))
                    .collect::<Result<_>>()?
            } else {
                opts.inventories
                    .iter()
                    .map(|p| Ok((p.display().to_string(), Inventory::load(p)?)))
                    .collect::<Result<_>>()?
            };
            let reports = inventories
                .iter()
                .map(|(name, inv)| {
                    let r = embeddings::evaluate(&table, inv);
                    match r {
                        Ok(r) => json!({"inventory": name, "report": r}),
                        Err(e) => json!({"inventory": name, "error": e.to_string()}),
                    }
                })
                .collect::<Vec<_>>();
            json!({"vectors": path, "tasks": reports})
        }
        Task::All => bail!("eval takes one task at a time"),
    };
    Ok(json!({"task": task.to_string(), "report": report}))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for (name, t) in Task::NAMES {
            assert_eq!(name.parse::<Task>().unwrap(), t);
            assert_eq!(t.to_string(), name);
        }
        assert!("tokenizer".parse::<Task>().is_err());
    }

    #[test]
    fn compound_train_then_eval() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("c.model");
        let opts = TrainOptions {
            out: out.clone(),
            epochs: Some(2),
            ..TrainOptions::default()
        };
        let r = train(Task::Compound, &opts).unwrap();
        assert_eq!(r["task"], "compound");
        let e = eval(
            Task::Compound,
            &EvalOptions {
                model: Some(out),
                ..EvalOptions::default()
            },
        )
        .unwrap();
        assert_eq!(e["report"]["instances"], 30);
    }

    #[test]
    fn embeddings_train_then_eval_bundled_inventories() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("vectors.txt");
        let opts = TrainOptions {
            out: out.clone(),
            epochs: Some(1),
            ..TrainOptions::default()
        };
        train(Task::Embeddings, &opts).unwrap();
        let e = eval(
            Task::Embeddings,
            &EvalOptions {
                vectors: Some(out),
                ..EvalOptions::default()
            },
        )
        .unwrap();
        assert_eq!(e["report"]["tasks"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn aux_needs_a_task() {
        let opts = TrainOptions {
            out: PathBuf::from("unused"),
            ..TrainOptions::default()
        };
        assert!(train(Task::Aux, &opts).is_err());
    }
}
