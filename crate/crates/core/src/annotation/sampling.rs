//! Seeded uniform sampling of comments for annotation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::AnnotationError;
use crate::corpus::Comment;

pub const DEFAULT_MAX_PER_VIDEO_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterWarning {
    pub video_id: String,
    pub count: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub comment_ids: Vec<String>,
    pub warnings: Vec<ClusterWarning>,
}

/// Draws `n` comments uniformly without replacement. The draw depends only on
/// the corpus order, `n` and `seed`. Videos holding more than
/// `max_per_video_fraction` of the sample are reported, not rejected.
pub fn sample_for_annotation(
    corpus: &[Comment],
    n: usize,
    seed: u64,
    max_per_video_fraction: f64,
) -> Result<Sample, AnnotationError> {
    if n > corpus.len() {
        return Err(AnnotationError::InsufficientCorpus {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let (picked, _) = order.partial_shuffle(&mut rng, n);

    let mut per_video: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in picked.iter() {
        *per_video.entry(corpus[i].video_id.as_str()).or_default() += 1;
    }
    let warnings: Vec<ClusterWarning> = per_video
        .into_iter()
        .filter(|&(_, count)| n > 0 && count as f64 > max_per_video_fraction * n as f64)
        .map(|(video_id, count)| ClusterWarning {
            video_id: video_id.to_string(),
            count,
            share: count as f64 / n as f64,
        })
        .collect();
    for w in &warnings {
        warn!(video_id = %w.video_id, share = w.share, "sample is clustered on one video");
    }
    Ok(Sample {
        comment_ids: picked.iter().map(|&i| corpus[i].comment_id.clone()).collect(),
        warnings,
    })
}
