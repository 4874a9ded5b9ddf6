//! Stance classifier: tokenizer, three-tensor encoder, hashed features,
//! softmax model with SGD training, evaluation, class-collapse diagnostics
//! and a remote inference adapter.

pub mod collapse;
pub mod encode;
pub mod features;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod remote;
pub mod tokenize;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::labels::InvalidLabel;

pub use collapse::{detect_class_collapse, CollapseWarning};
pub use encode::{encode, EncodedInput, HashedVocabulary, ServedVocabulary, Vocabulary};
pub use features::{FeatureHasher, FeatureVector, DEFAULT_DIM, DEFAULT_SALT};
pub use metrics::{evaluate, Metrics};
pub use model::{argmax, softmax, EpochStats, Model, Prediction};
pub use predict::{predict_corpus, read_predictions, write_predictions, PredictionRow, PredictionSummary, StancePredictor};
pub use remote::RemoteClassifier;
pub use tokenize::{tokenize, TokenSequence};
pub use train::{split_holdout, train, Split, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    InvalidLabel(#[from] InvalidLabel),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training diverged to non-finite parameters")]
    Diverged,
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Storage(#[from] CorpusError),
    #[error("remote inference timed out: {0}")]
    RemoteTimeout(String),
    #[error("remote inference failed (status {status:?}): {detail}")]
    RemoteFailure { status: Option<u16>, detail: String },
    #[error("remote protocol error: {detail}; payload: {excerpt}")]
    Protocol { detail: String, excerpt: String },
}
