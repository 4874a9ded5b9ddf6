//! Multinomial softmax model over hashed features.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureHasher, FeatureVector};
use super::tokenize::tokenize;
use super::ClassifierError;
use crate::labels::NUM_LABELS;

pub const MODEL_FORMAT: &str = "polemos-softmax";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub code: u8,
    pub probs: [f64; NUM_LABELS],
}

impl Prediction {
    pub fn from_probs(probs: [f64; NUM_LABELS]) -> Self {
        Self {
            code: argmax(&probs) as u8,
            probs,
        }
    }

    pub fn confidence(&self) -> f64 {
        self.probs[self.code as usize]
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64; NUM_LABELS]) -> [f64; NUM_LABELS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_LABELS];
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Weights are stored feature-major: the 7 class weights of feature `j` sit
/// at `weights[j * 7 .. j * 7 + 7]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    hasher: FeatureHasher,
    weights: Vec<f64>,
    bias: [f64; NUM_LABELS],
    pub history: Vec<EpochStats>,
    /// Examples per label seen in training.
    pub trained_label_counts: [u64; NUM_LABELS],
}

impl Model {
    pub fn zeros(hasher: FeatureHasher) -> Self {
        Self {
            weights: vec![0.0; hasher.dim * NUM_LABELS],
            hasher,
            bias: [0.0; NUM_LABELS],
            history: Vec::new(),
            trained_label_counts: [0; NUM_LABELS],
        }
    }

    pub fn hasher(&self) -> FeatureHasher {
        self.hasher
    }

    pub fn dim(&self) -> usize {
        self.hasher.dim
    }

    pub fn salt(&self) -> u64 {
        self.hasher.salt
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64; NUM_LABELS] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64; NUM_LABELS] {
        &mut self.bias
    }

    pub fn weight(&self, feature: usize, class: usize) -> f64 {
        self.weights[feature * NUM_LABELS + class]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn features(&self, text: &str) -> FeatureVector {
        self.hasher.featurize(tokenize(text).as_slice())
    }

    pub fn logits(&self, x: &FeatureVector) -> [f64; NUM_LABELS] {
        let mut z = self.bias;
        for &(j, v) in x.entries() {
            let row = &self.weights[j as usize * NUM_LABELS..(j as usize + 1) * NUM_LABELS];
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += w * v;
            }
        }
        z
    }

    pub fn probabilities(&self, x: &FeatureVector) -> [f64; NUM_LABELS] {
        softmax(&self.logits(x))
    }

    pub fn predict_features(&self, x: &FeatureVector) -> Prediction {
        Prediction::from_probs(self.probabilities(x))
    }

    pub fn predict(&self, text: &str) -> Prediction {
        self.predict_features(&self.features(text))
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let bytes = serde_json::to_vec(&ModelFile::from(self)).expect("model serializes");
        crate::corpus::write_atomically(path, |w| std::io::Write::write_all(w, &bytes))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let bytes = std::fs::read(path).map_err(|e| ClassifierError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let file: ModelFile =
            serde_json::from_slice(&bytes).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
        file.try_into()
    }
}

/// Cross-entropy of one example plus nothing else.
pub fn example_loss(model: &Model, x: &FeatureVector, label: usize) -> f64 {
    let z = model.logits(x);
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    log_sum - z[label]
}

/// Mean cross-entropy plus `l2 / 2 * ||W||^2` (bias not penalized).
pub fn objective(model: &Model, examples: &[(FeatureVector, usize)], l2: f64) -> f64 {
    if examples.is_empty() {
        return 0.5 * l2 * model.l2_norm_sq();
    }
    let ce: f64 = examples.iter().map(|(x, y)| example_loss(model, x, *y)).sum();
    ce / examples.len() as f64 + 0.5 * l2 * model.l2_norm_sq()
}

/// Analytic gradient of [`objective`] as (weights, bias), weights laid out
/// like [`Model::weights`].
pub fn gradient(
    model: &Model,
    examples: &[(FeatureVector, usize)],
    l2: f64,
) -> (Vec<f64>, [f64; NUM_LABELS]) {
    let mut gw: Vec<f64> = model.weights.iter().map(|w| l2 * w).collect();
    let mut gb = [0.0; NUM_LABELS];
    let n = examples.len().max(1) as f64;
    for (x, y) in examples {
        let mut residual = model.probabilities(x);
        residual[*y] -= 1.0;
        for k in 0..NUM_LABELS {
            gb[k] += residual[k] / n;
        }
        for &(j, v) in x.entries() {
            for k in 0..NUM_LABELS {
                gw[j as usize * NUM_LABELS + k] += residual[k] * v / n;
            }
        }
    }
    (gw, gb)
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightRow {
    feature: u32,
    values: [f64; NUM_LABELS],
}

/// On-disk form: only rows with a nonzero weight are written.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    dim: usize,
    salt: u64,
    bias: [f64; NUM_LABELS],
    weights: Vec<WeightRow>,
    history: Vec<EpochStats>,
    trained_label_counts: [u64; NUM_LABELS],
}

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        let weights = m
            .weights
            .chunks_exact(NUM_LABELS)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&w| w != 0.0 || w.is_sign_negative()))
            .map(|(j, row)| WeightRow {
                feature: j as u32,
                values: row.try_into().unwrap(),
            })
            .collect();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            dim: m.hasher.dim,
            salt: m.hasher.salt,
            bias: m.bias,
            weights,
            history: m.history.clone(),
            trained_label_counts: m.trained_label_counts,
        }
    }
}

impl TryFrom<ModelFile> for Model {
    type Error = ClassifierError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(ClassifierError::ModelFile(format!(
                "unsupported model format {} v{}",
                f.format, f.version
            )));
        }
        if f.dim == 0 {
            return Err(ClassifierError::ModelFile("zero feature dimension".into()));
        }
        let mut model = Model::zeros(FeatureHasher::new(f.dim, f.salt));
        model.bias = f.bias;
        model.history = f.history;
        model.trained_label_counts = f.trained_label_counts;
        for row in f.weights {
            let j = row.feature as usize;
            if j >= f.dim {
                return Err(ClassifierError::ModelFile(format!("feature {j} out of range")));
            }
            model.weights[j * NUM_LABELS..(j + 1) * NUM_LABELS].copy_from_slice(&row.values);
        }
        if !model.is_finite() {
            return Err(ClassifierError::ModelFile("non-finite parameter".into()));
        }
        Ok(model)
    }
}
