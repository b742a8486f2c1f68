//! Word embedding engine: corpus preprocessing, skip-gram / CBOW training
//! with subsampling and negative sampling, and word-analogy evaluation.
//!
//! The pipeline is split into small modules:
//!
//! - [`corpus`]: raw text to cleaned token sentences
//! - [`vocab`]: frequency-filtered vocabulary, keep-probabilities and the
//!   negative-sampling table
//! - [`model`]: the two parameter matrices and their persistence formats
//! - [`trainer`]: pair generation and (optionally parallel) SGD training
//! - [`eval`]: analogy test sets, 3COSADD / 3COSMUL solvers and accuracy
//!   reports

pub mod corpus;
pub mod eval;
pub mod model;
pub mod trainer;
pub mod vocab;

pub use corpus::{PreprocessConfig, Sentence};
pub use eval::{AnalogyQuery, AnalogyTestSet, EvalConfig, EvalReport, MacroArea};
pub use model::EmbeddingModel;
pub use trainer::{TrainingConfig, TrainingMode};
pub use vocab::{NegativeTable, SubsamplingConfig, Vocabulary};
