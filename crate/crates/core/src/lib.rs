//! Sequence tagging toolkit: column-format POS corpora, stacked embeddings,
//! a BiLSTM-CRF tagger trained with plain SGD, evaluation reports and a
//! bootstrap annotation workflow.

pub mod bootstrap;
pub mod cli;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod eval;
pub mod neural;
pub mod synthetic;
pub mod training;
