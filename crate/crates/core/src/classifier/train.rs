//! Seeded holdout split and stochastic gradient descent on softmax
//! cross-entropy with L2.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::features::{FeatureHasher, FeatureVector, DEFAULT_DIM, DEFAULT_SALT};
use super::model::{argmax, objective, softmax, EpochStats, Model};
use super::tokenize::tokenize;
use super::ClassifierError;
use crate::labels::{StanceLabel, NUM_LABELS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Base step size; epoch `e` (from 1) uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub dim: usize,
    pub salt: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            learning_rate: 0.1,
            l2: 1e-6,
            seed: 0,
            holdout_fraction: 0.2,
            dim: DEFAULT_DIM,
            salt: DEFAULT_SALT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout_fraction must lie in (0, 1)");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        Ok(())
    }

    pub fn hasher(&self) -> FeatureHasher {
        FeatureHasher::new(self.dim, self.salt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and moves `floor(n * fraction)` indices (never
/// all of them) into the holdout. Both halves come back sorted.
pub fn split_holdout(n: usize, fraction: f64, seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let k = ((n as f64 * fraction).floor() as usize).min(n.saturating_sub(1));
    let mut holdout = order[..k].to_vec();
    let mut train = order[k..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    Split { train, holdout }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub split: Split,
    pub warnings: Vec<String>,
}

/// Trains on the non-holdout part of `dataset`. Deterministic for a given
/// dataset and config.
pub fn train(dataset: &[(String, u8)], config: &TrainConfig) -> Result<TrainOutcome, ClassifierError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    for (_, code) in dataset {
        StanceLabel::try_from(*code)?;
    }
    let split = split_holdout(dataset.len(), config.holdout_fraction, config.seed);
    let hasher = config.hasher();
    let examples: Vec<(FeatureVector, usize)> = split
        .train
        .iter()
        .map(|&i| {
            let (text, code) = &dataset[i];
            (hasher.featurize(tokenize(text).as_slice()), *code as usize)
        })
        .collect();

    let mut counts = [0u64; NUM_LABELS];
    for (_, y) in &examples {
        counts[*y] += 1;
    }
    let mut warnings = Vec::new();
    for l in StanceLabel::ALL {
        if counts[l.index()] == 0 {
            let msg = format!("label {} ({}) has no training examples", l.code(), l.name());
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut model = Model::zeros(hasher);
    model.trained_label_counts = counts;
    let mut sgd = Sgd::new(&mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let lr = config.learning_rate / (epoch as f64).sqrt();
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &examples[i];
            sgd.step(x, *y, lr, config.l2);
        }
        sgd.fold();
        let m = sgd.model();
        let correct = examples
            .iter()
            .filter(|(x, y)| argmax(&m.probabilities(x)) == *y)
            .count();
        history.push(EpochStats {
            epoch,
            loss: objective(m, &examples, config.l2),
            train_accuracy: correct as f64 / examples.len() as f64,
        });
    }
    model.history = history;
    if !model.is_finite() {
        return Err(ClassifierError::Diverged);
    }
    Ok(TrainOutcome { model, split, warnings })
}

/// Sparse SGD. Weights are held as `scale * stored` so the L2 shrink of
/// every weight is one multiplication per step.
struct Sgd<'a> {
    model: &'a mut Model,
    scale: f64,
}

impl<'a> Sgd<'a> {
    fn new(model: &'a mut Model) -> Self {
        Self { model, scale: 1.0 }
    }

    fn step(&mut self, x: &FeatureVector, y: usize, lr: f64, l2: f64) {
        let mut z = *self.model.bias();
        {
            let w = self.model.weights();
            for &(j, v) in x.entries() {
                for (k, zk) in z.iter_mut().enumerate() {
                    *zk += self.scale * w[j as usize * NUM_LABELS + k] * v;
                }
            }
        }
        let mut residual = softmax(&z);
        residual[y] -= 1.0;

        self.scale *= 1.0 - lr * l2;
        if self.scale < 1e-9 {
            self.fold();
        }
        let step = lr / self.scale;
        let w = self.model.weights_mut();
        for &(j, v) in x.entries() {
            for (k, r) in residual.iter().enumerate() {
                w[j as usize * NUM_LABELS + k] -= step * r * v;
            }
        }
        for (b, r) in self.model.bias_mut().iter_mut().zip(&residual) {
            *b -= lr * r;
        }
    }

    /// Multiplies the pending scale into the stored weights.
    fn fold(&mut self) {
        if self.scale != 1.0 {
            let s = self.scale;
            for w in self.model.weights_mut() {
                *w *= s;
            }
            self.scale = 1.0;
        }
    }

    fn model(&self) -> &Model {
        debug_assert_eq!(self.scale, 1.0);
        self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let a = split_holdout(100, 0.2, 5);
        assert_eq!(a, split_holdout(100, 0.2, 5));
        assert_eq!(a.holdout.len(), 20);
        assert_eq!(a.train.len(), 80);
        let mut all: Vec<_> = a.train.iter().chain(&a.holdout).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_holdout(1, 0.2, 0).train, vec![0]);
        assert_eq!(split_holdout(3, 0.99, 0).train.len(), 1);
    }

    #[test]
    fn single_example_is_fit_after_one_epoch() {
        let data = vec![("hola mundo".to_string(), 4u8)];
        let cfg = TrainConfig { epochs: 1, dim: 1024, ..Default::default() };
        let out = train(&data, &cfg).unwrap();
        assert_eq!(out.model.history.len(), 1);
        assert_eq!(out.model.history[0].train_accuracy, 1.0);
        assert_eq!(out.warnings.len(), 6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(train(&[], &TrainConfig::default()), Err(ClassifierError::EmptyDataset)));
        let bad = vec![("x".to_string(), 7u8)];
        assert!(matches!(train(&bad, &TrainConfig::default()), Err(ClassifierError::InvalidLabel(_))));
        let cfg = TrainConfig { holdout_fraction: 1.0, ..Default::default() };
        assert!(matches!(
            train(&[("x".to_string(), 1)], &cfg),
            Err(ClassifierError::InvalidConfig(_))
        ));
    }

    #[test]
    fn scaled_sgd_matches_dense_update() {
        // one step of the lazy-scale update against the textbook dense update
        let h = FeatureHasher::new(8, 2);
        let x = h.featurize(&["a", "b", "c"]);
        let mut lazy = Model::zeros(h);
        for (i, w) in lazy.weights_mut().iter_mut().enumerate() {
            *w = (i as f64 * 0.37).cos();
        }
        let mut dense = lazy.clone();
        let (lr, l2) = (0.5, 0.1);

        let mut p = dense.probabilities(&x);
        p[3] -= 1.0;
        let old = dense.weights().to_vec();
        for (idx, w) in dense.weights_mut().iter_mut().enumerate() {
            *w -= lr * l2 * old[idx];
        }
        for &(j, v) in x.entries() {
            for k in 0..NUM_LABELS {
                dense.weights_mut()[j as usize * NUM_LABELS + k] -= lr * p[k] * v;
            }
        }
        for k in 0..NUM_LABELS {
            dense.bias_mut()[k] -= lr * p[k];
        }

        let mut sgd = Sgd::new(&mut lazy);
        sgd.step(&x, 3, lr, l2);
        sgd.fold();
        for (a, b) in lazy.weights().iter().zip(dense.weights()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(lazy.bias(), dense.bias());
    }
}
