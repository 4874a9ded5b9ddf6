//! Human stance annotation: sampling, the session service behind the
//! labeling UI, and project stage tracking.

pub mod sampling;
pub mod server;
pub mod session;
pub mod stage;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::labels::InvalidLabel;

pub use sampling::{sample_for_annotation, ClusterWarning, Sample, DEFAULT_MAX_PER_VIDEO_FRACTION};
pub use session::{
    read_training_csv, AnnotationRecord, AnnotationSession, BalanceReport, LabelProgress, LogEntry,
    QuotaProgress, QuotaTarget, Task, TrainingSet,
};
pub use stage::{PipelineStage, Stage, StageState};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("requested a sample of {requested} from a corpus of {available}")]
    InsufficientCorpus { requested: usize, available: usize },
    #[error("comment {0} is not in the annotation sample")]
    NotInSample(String),
    #[error(transparent)]
    InvalidLabel(#[from] InvalidLabel),
    #[error("annotator name is required")]
    MissingAnnotator,
    #[error("{0} has no label to undo")]
    NothingToUndo(String),
    #[error("illegal stage transition {from} -> {to}")]
    IllegalTransition { from: Stage, to: Stage },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed session data: {0}")]
    Csv(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl AnnotationError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AnnotationError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
