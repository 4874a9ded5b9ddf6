//! Adapter for an external inference service.
//!
//! Wire protocol: `POST {endpoint}/predict` with `{"texts": [...]}`, answered
//! by `{"results": [{"code": int, "probs": [7 floats]}, ...]}`.

use std::sync::Arc;
use std::time::Duration;

use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::model::Prediction;
use super::predict::StancePredictor;
use super::ClassifierError;
use crate::labels::NUM_LABELS;

pub const PROB_SUM_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_BATCH_SIZE: usize = 32;
const EXCERPT_LEN: usize = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteResult {
    pub code: i64,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictResponse {
    pub results: Vec<RemoteResult>,
}

fn excerpt(body: &str) -> String {
    body.chars().take(EXCERPT_LEN).collect()
}

#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    endpoint: String,
    batch_size: usize,
    http: reqwest::blocking::Client,
}

impl RemoteClassifier {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, ClassifierError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClassifierError::RemoteFailure {
                status: None,
                detail: e.to_string(),
            })?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            batch_size: DEFAULT_BATCH_SIZE,
            http,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    /// Sends `texts` in sequential batches and validates every result.
    pub fn remote_predict(&self, texts: &[String]) -> Result<Vec<Prediction>, ClassifierError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.post_batch(batch)?);
        }
        Ok(out)
    }

    fn post_batch(&self, batch: &[String]) -> Result<Vec<Prediction>, ClassifierError> {
        let url = format!("{}/predict", self.endpoint);
        let resp = self
            .http
            .post(&url)
            .json(&PredictRequest { texts: batch.to_vec() })
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ClassifierError::RemoteTimeout(url.clone())
                } else {
                    ClassifierError::RemoteFailure {
                        status: None,
                        detail: e.to_string(),
                    }
                }
            })?;
        let status = resp.status();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                ClassifierError::RemoteTimeout(url.clone())
            } else {
                ClassifierError::RemoteFailure {
                    status: Some(status.as_u16()),
                    detail: e.to_string(),
                }
            }
        })?;
        if !status.is_success() {
            return Err(ClassifierError::RemoteFailure {
                status: Some(status.as_u16()),
                detail: excerpt(&body),
            });
        }
        let parsed: PredictResponse = serde_json::from_str(&body).map_err(|e| ClassifierError::Protocol {
            detail: e.to_string(),
            excerpt: excerpt(&body),
        })?;
        validate_results(parsed.results, batch.len(), &body)
    }
}

fn validate_results(
    results: Vec<RemoteResult>,
    expected: usize,
    body: &str,
) -> Result<Vec<Prediction>, ClassifierError> {
    let fail = |detail: String| ClassifierError::Protocol {
        detail,
        excerpt: excerpt(body),
    };
    if results.len() != expected {
        return Err(fail(format!("expected {expected} results, got {}", results.len())));
    }
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if !(0..NUM_LABELS as i64).contains(&r.code) {
                return Err(fail(format!("result {i}: code {} outside 0..=6", r.code)));
            }
            let probs: [f64; NUM_LABELS] = r
                .probs
                .as_slice()
                .try_into()
                .map_err(|_| fail(format!("result {i}: {} probabilities, expected 7", r.probs.len())))?;
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(fail(format!("result {i}: probabilities must be finite and non-negative")));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(fail(format!("result {i}: probabilities sum to {sum}")));
            }
            Ok(Prediction { code: r.code as u8, probs })
        })
        .collect()
}

impl StancePredictor for RemoteClassifier {
    fn predict_batch(&self, texts: &[String]) -> Result<Vec<Prediction>, ClassifierError> {
        self.remote_predict(texts)
    }
}

/// Serves any predictor over the same wire protocol, e.g. the in-repo
/// reference model. Predictor failures become a 500 with a text body.
pub fn inference_router(predictor: Arc<dyn StancePredictor>) -> Router {
    Router::new().route(
        "/predict",
        post(move |Json(req): Json<PredictRequest>| {
            let predictor = predictor.clone();
            async move {
                let outcome = tokio::task::spawn_blocking(move || predictor.predict_batch(&req.texts)).await;
                match outcome {
                    Ok(Ok(preds)) => {
                        let results = preds
                            .into_iter()
                            .map(|p| RemoteResult {
                                code: p.code as i64,
                                probs: p.probs.to_vec(),
                            })
                            .collect();
                        Json(PredictResponse { results }).into_response()
                    }
                    Ok(Err(e)) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
                    Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
                }
            }
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(code: i64, probs: Vec<f64>) -> RemoteResult {
        RemoteResult { code, probs }
    }

    #[test]
    fn validation() {
        let ok = vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.4];
        assert!(validate_results(vec![result(6, ok.clone())], 1, "").is_ok());
        let half = vec![0.05, 0.05, 0.05, 0.05, 0.1, 0.1, 0.1];
        assert!(matches!(
            validate_results(vec![result(6, half)], 1, "{}"),
            Err(ClassifierError::Protocol { .. })
        ));
        assert!(validate_results(vec![result(7, ok.clone())], 1, "").is_err());
        assert!(validate_results(vec![result(1, vec![0.5, 0.5])], 1, "").is_err());
        assert!(validate_results(vec![result(1, ok)], 2, "").is_err());
    }

    #[test]
    fn empty_input_sends_nothing() {
        // nothing listens here; any request would fail
        let c = RemoteClassifier::new("http://127.0.0.1:9", Duration::from_millis(50)).unwrap();
        assert!(c.remote_predict(&[]).unwrap().is_empty());
    }
}
