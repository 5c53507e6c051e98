//! Sanskrit text processing: transliteration, sandhi, segmentation,
//! morphological tagging, dependency parsing and compound classification.

pub mod compound;
pub mod conllu;
pub mod demo;
pub mod embeddings;
pub mod encoder;
pub mod lexicon;
pub mod metrics;
pub mod ml;
pub mod parser;
pub mod pipeline;
pub mod sandhi;
pub mod segmenter;
pub mod tagger;
pub mod text;
