//! Full-corpus prediction and the predictions file.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Model, Prediction};
use super::ClassifierError;
use crate::corpus::Comment;
use crate::labels::NUM_LABELS;

/// Anything that maps texts to stance predictions, in input order.
pub trait StancePredictor: Send + Sync {
    fn predict_batch(&self, texts: &[String]) -> Result<Vec<Prediction>, ClassifierError>;
}

impl StancePredictor for Model {
    fn predict_batch(&self, texts: &[String]) -> Result<Vec<Prediction>, ClassifierError> {
        Ok(texts.par_iter().map(|t| self.predict(t)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub comment_id: String,
    pub code: u8,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub counts: [u64; NUM_LABELS],
    pub total: u64,
}

/// Predicts every comment, keeping store order.
pub fn predict_corpus(
    predictor: &dyn StancePredictor,
    comments: &[Comment],
    batch_size: usize,
) -> Result<(Vec<PredictionRow>, PredictionSummary), ClassifierError> {
    let mut rows = Vec::with_capacity(comments.len());
    let mut counts = [0u64; NUM_LABELS];
    for chunk in comments.chunks(batch_size.max(1)) {
        let texts: Vec<String> = chunk.iter().map(|c| c.text.clone()).collect();
        let preds = predictor.predict_batch(&texts)?;
        if preds.len() != chunk.len() {
            return Err(ClassifierError::Protocol {
                detail: format!("expected {} predictions, got {}", chunk.len(), preds.len()),
                excerpt: String::new(),
            });
        }
        for (c, p) in chunk.iter().zip(preds) {
            counts[p.code as usize] += 1;
            rows.push(PredictionRow {
                comment_id: c.comment_id.clone(),
                code: p.code,
                confidence: p.confidence(),
            });
        }
    }
    let total = rows.len() as u64;
    Ok((rows, PredictionSummary { counts, total }))
}

/// `comment_id,code,confidence` CSV, written atomically.
pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<(), ClassifierError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["comment_id", "code", "confidence"]).unwrap();
    for r in rows {
        w.write_record([r.comment_id.as_str(), &r.code.to_string(), &r.confidence.to_string()])
            .unwrap();
    }
    let bytes = w.into_inner().expect("in-memory csv");
    crate::corpus::write_atomically(path, |f| std::io::Write::write_all(f, &bytes))?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, ClassifierError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
    let mut out = Vec::new();
    for rec in reader.deserialize::<PredictionRow>() {
        let row = rec.map_err(|e| ClassifierError::ModelFile(format!("{}: {e}", path.display())))?;
        crate::labels::StanceLabel::try_from(row.code)?;
        out.push(row);
    }
    Ok(out)
}
