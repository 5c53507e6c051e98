//! Bundled toy corpora and the training recipes for the demo models.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compound::{self, CompoundConfig, CompoundError, CompoundModel, LabeledCompound};
use crate::conllu::{self, ConlluError, TaggedSentence, TreeSentence};
use crate::lexicon::Lexicon;
use crate::ml::TrainConfig;
use crate::parser::{self, LabelSet, ParseConfig, ParseError, ParseModel};
use crate::sandhi::RuleTable;
use crate::segmenter::{self, SegConfig, SegError, SegModel, SegSentence};
use crate::tagger::{self, TagConfig, TagError, TagModel};
use crate::text::PhonemeString;

pub const SEG_CORPUS: &str = include_str!("../data/seg_train.txt");
pub const TAGGER_CORPUS: &str = include_str!("../data/tagger_train.conllu");
pub const TREEBANK: &str = include_str!("../data/treebank_train.conllu");
pub const COMPOUND_CORPUS: &str = include_str!("../data/compounds_train.tsv");
pub const EMBEDDING_CORPUS: &str = include_str!("../data/embedding_corpus.txt");

/// Intrinsic-evaluation inventories keyed by file stem.
pub const EVAL_INVENTORIES: [(&str, &str); 4] = [
    ("analogy", include_str!("../data/eval/analogy.tsv")),
    ("synonym", include_str!("../data/eval/synonym.tsv")),
    ("relatedness", include_str!("../data/eval/relatedness.tsv")),
    ("categorization", include_str!("../data/eval/categorization.tsv")),
];

pub const SEGMENTER_FILE: &str = "segmenter.model";
pub const TAGGER_FILE: &str = "tagger.model";
pub const PARSER_FILE: &str = "parser.model";
pub const COMPOUND_FILE: &str = "compound.model";

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Seg(#[from] SegError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Compound(#[from] CompoundError),
    #[error(transparent)]
    Conllu(#[from] ConlluError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn seg_corpus() -> Vec<SegSentence> {
    segmenter::load_corpus(SEG_CORPUS, RuleTable::builtin()).expect("bundled corpus is valid")
}

pub fn tagger_corpus() -> Vec<TaggedSentence> {
    conllu::tagged(&conllu::parse(TAGGER_CORPUS).expect("bundled corpus is valid")).expect("bundled corpus is tagged")
}

pub fn treebank() -> Vec<TreeSentence> {
    conllu::trees(&conllu::parse(TREEBANK).expect("bundled treebank is valid")).expect("bundled treebank has trees")
}

pub fn compound_corpus() -> Vec<LabeledCompound> {
    compound::parse_corpus(COMPOUND_CORPUS, RuleTable::builtin()).expect("bundled corpus is valid")
}

pub fn embedding_corpus() -> Vec<Vec<String>> {
    EMBEDDING_CORPUS
        .lines()
        .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Optimizer settings per task, tuned on the bundled corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipes {
    pub segmenter: TrainConfig,
    pub tagger: TrainConfig,
    pub parser: TrainConfig,
    pub compound: TrainConfig,
}

fn sgd(learning_rate: f64, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate,
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

impl Recipes {
    pub fn new(seed: u64) -> Self {
        Recipes {
            segmenter: sgd(0.1, 10, seed),
            tagger: sgd(0.05, 20, seed),
            parser: sgd(0.05, 30, seed),
            compound: sgd(0.1, 60, seed),
        }
    }

    /// Fewer epochs; enough for the service to produce sensible output.
    pub fn quick(seed: u64) -> Self {
        let mut r = Self::new(seed);
        r.tagger.epochs = 6;
        r.parser.epochs = 15;
        r
    }
}

pub fn train_segmenter(config: &TrainConfig) -> Result<SegModel, DemoError> {
    let corpus = seg_corpus();
    let rules = RuleTable::builtin();
    let vocab: Vec<PhonemeString> = corpus.iter().flat_map(|s| s.words.iter().cloned()).collect();
    let mut model = SegModel::new(SegConfig::default(), rules, &vocab, config.seed);
    model.train(&corpus, Lexicon::builtin(), rules, config)?;
    Ok(model)
}

pub fn train_tagger(config: &TrainConfig) -> Result<TagModel, DemoError> {
    let corpus = tagger_corpus();
    let mut model = TagModel::for_corpus(&corpus, Lexicon::builtin(), TagConfig::default(), config.seed)?;
    tagger::train_tagger(&mut model, &corpus, Lexicon::builtin(), config)?;
    Ok(model)
}

pub fn train_parser(config: &TrainConfig) -> Result<ParseModel, DemoError> {
    let corpus = treebank();
    let mut model = ParseModel::for_corpus(&corpus, LabelSet::builtin(), ParseConfig::default(), config.seed)?;
    parser::train_parser(&mut model, &corpus, config)?;
    Ok(model)
}

pub fn train_compound(config: &TrainConfig) -> Result<CompoundModel, DemoError> {
    let corpus = compound_corpus();
    let mut model =
        CompoundModel::for_corpus(&corpus, compound::builtin_classes(), &[], &[], CompoundConfig::default(), config.seed)?;
    compound::train_compound(&mut model, &corpus, RuleTable::builtin(), config)?;
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct DemoModels {
    pub segmenter: SegModel,
    pub tagger: TagModel,
    pub parser: ParseModel,
    pub compound: CompoundModel,
}

impl DemoModels {
    pub fn train(recipes: &Recipes) -> Result<Self, DemoError> {
        Ok(DemoModels {
            segmenter: train_segmenter(&recipes.segmenter)?,
            tagger: train_tagger(&recipes.tagger)?,
            parser: train_parser(&recipes.parser)?,
            compound: train_compound(&recipes.compound)?,
        })
    }

    /// Writes the four model files into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), DemoError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.segmenter.save(dir.join(SEGMENTER_FILE))?;
        self.tagger.save(dir.join(TAGGER_FILE))?;
        self.parser.save(dir.join(PARSER_FILE))?;
        self.compound.save(dir.join(COMPOUND_FILE))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, DemoError> {
        let dir = dir.as_ref();
        Ok(DemoModels {
            segmenter: SegModel::load(dir.join(SEGMENTER_FILE))?,
            tagger: TagModel::load(dir.join(TAGGER_FILE))?,
            parser: ParseModel::load(dir.join(PARSER_FILE))?,
            compound: CompoundModel::load(dir.join(COMPOUND_FILE))?,
        })
    }
}
