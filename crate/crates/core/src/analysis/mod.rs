//! Aggregate views over a classified corpus: label counts, fortnight trend
//! series, lead changes between categories and mean likes per category.

pub mod report;
pub mod svg;

use chrono::{DateTime, Duration, Utc};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{StanceLabel, NUM_LABELS};

pub use report::{build_report, ReportBundle, ReportConfig};

pub const BIN_DAYS: i64 = 14;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("comment {comment_id} at {published_at} precedes the bin anchor {anchor}")]
    OutOfWindow {
        comment_id: String,
        published_at: DateTime<Utc>,
        anchor: DateTime<Utc>,
    },
    #[error("percent difference is undefined for a zero baseline")]
    Undefined,
    #[error("{} comments have no prediction, first: {}", .missing.len(), .missing.first().map(String::as_str).unwrap_or(""))]
    Coverage { missing: Vec<String> },
    #[error("trend series is empty")]
    EmptySeries,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Storage(#[from] crate::corpus::CorpusError),
}

/// A comment reduced to what the aggregates need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub comment_id: String,
    pub published_at: DateTime<Utc>,
    pub like_count: u64,
    pub code: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBin {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeBin {
    pub fn at(anchor: DateTime<Utc>, index: usize) -> Self {
        let start = anchor + Duration::days(BIN_DAYS * index as i64);
        Self {
            index,
            start,
            end: start + Duration::days(BIN_DAYS),
        }
    }
}

/// Per-bin label counts over contiguous bins `0..=max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub anchor: DateTime<Utc>,
    pub bins: Vec<TimeBin>,
    pub counts: Vec<[u64; NUM_LABELS]>,
}

impl TrendSeries {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// `(bin index, count)` pairs for one label.
    pub fn series(&self, label: StanceLabel) -> Vec<(usize, u64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c[label.index()]))
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Bins overlapping `[from, to)`, keeping their original indices.
    pub fn subset(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> TrendSeries {
        let (bins, counts) = self
            .bins
            .iter()
            .zip(&self.counts)
            .filter(|(b, _)| b.start < to && b.end > from)
            .map(|(b, c)| (*b, *c))
            .unzip();
        TrendSeries {
            anchor: self.anchor,
            bins,
            counts,
        }
    }
}

/// Index of the half-open fortnight containing `t`.
pub fn fortnight_index(anchor: DateTime<Utc>, t: DateTime<Utc>) -> Option<usize> {
    let secs = (t - anchor).num_seconds();
    (secs >= 0).then_some((secs / (BIN_DAYS * 86_400)) as usize)
}

/// Bins comments into fortnights from `anchor`. Bins run through the last
/// occupied one, or through the bin containing `until - 1s` when that is later.
pub fn bin_by_fortnight(
    comments: &[LabeledComment],
    anchor: DateTime<Utc>,
    until: Option<DateTime<Utc>>,
) -> Result<TrendSeries, AnalysisError> {
    let mut counts: Vec<[u64; NUM_LABELS]> = Vec::new();
    for c in comments {
        let bin = fortnight_index(anchor, c.published_at).ok_or_else(|| AnalysisError::OutOfWindow {
            comment_id: c.comment_id.clone(),
            published_at: c.published_at,
            anchor,
        })?;
        if counts.len() <= bin {
            counts.resize(bin + 1, [0; NUM_LABELS]);
        }
        counts[bin][c.code as usize] += 1;
    }
    if let Some(last) = until.and_then(|u| fortnight_index(anchor, u - Duration::seconds(1))) {
        if counts.len() <= last {
            counts.resize(last + 1, [0; NUM_LABELS]);
        }
    }
    Ok(TrendSeries {
        anchor,
        bins: (0..counts.len()).map(|i| TimeBin::at(anchor, i)).collect(),
        counts,
    })
}

pub fn count_by_label(codes: impl IntoIterator<Item = u8>) -> [u64; NUM_LABELS] {
    let mut counts = [0u64; NUM_LABELS];
    for c in codes {
        counts[c as usize] += 1;
    }
    counts
}

/// An exact percentage, rendered half away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent(pub Ratio<i128>);

impl Percent {
    pub fn to_fixed(&self, decimals: u32) -> String {
        let scale = 10i128.pow(decimals);
        let scaled = self.0 * Ratio::from_integer(scale);
        let neg = scaled < Ratio::from_integer(0);
        let abs = if neg { -scaled } else { scaled };
        let rounded = (abs + Ratio::new(1, 2)).floor().to_integer();
        let int = rounded / scale;
        let frac = rounded % scale;
        let sign = if neg && rounded != 0 { "-" } else { "" };
        if decimals == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac:0width$}", width = decimals as usize)
        }
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl std::fmt::Display for Percent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_fixed(2))
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_fixed(2))
    }
}

/// `(a - b) / b * 100`.
pub fn percent_difference_exact(a: Ratio<i128>, b: Ratio<i128>) -> Result<Percent, AnalysisError> {
    if b == Ratio::from_integer(0) {
        return Err(AnalysisError::Undefined);
    }
    Ok(Percent((a - b) / b * Ratio::from_integer(100)))
}

pub fn percent_difference(a: u64, b: u64) -> Result<Percent, AnalysisError> {
    percent_difference_exact(Ratio::from_integer(a as i128), Ratio::from_integer(b as i128))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AffinityRow {
    pub label: StanceLabel,
    pub comment_count: u64,
    pub like_sum: u64,
    /// Absent when the label has no comments.
    pub mean_likes: Option<Ratio<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinityReport {
    pub rows: [AffinityRow; NUM_LABELS],
}

pub fn affinity_by_label(comments: &[LabeledComment]) -> AffinityReport {
    let mut count = [0u64; NUM_LABELS];
    let mut likes = [0u64; NUM_LABELS];
    for c in comments {
        count[c.code as usize] += 1;
        likes[c.code as usize] += c.like_count;
    }
    AffinityReport {
        rows: StanceLabel::ALL.map(|l| {
            let (n, s) = (count[l.index()], likes[l.index()]);
            AffinityRow {
                label: l,
                comment_count: n,
                like_sum: s,
                mean_likes: (n > 0).then(|| Ratio::new(s, n)),
            }
        }),
    }
}

pub fn ratio_to_fixed(r: Ratio<u64>, decimals: u32) -> String {
    Percent(Ratio::new(*r.numer() as i128, *r.denom() as i128)).to_fixed(decimals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadChangeEvent {
    /// The bin where the new leader first leads.
    pub bin_index: usize,
    pub previous_leader: StanceLabel,
    pub new_leader: StanceLabel,
    /// New leader's count minus the previous leader's, in that bin.
    pub margin: u64,
}

pub const DEFAULT_LEAD_EXCLUDE: [StanceLabel; 2] = [StanceLabel::NoRelacionado, StanceLabel::SinPostura];

fn leader(counts: &[u64; NUM_LABELS], exclude: &[StanceLabel]) -> StanceLabel {
    StanceLabel::ALL
        .iter()
        .filter(|l| !exclude.contains(l))
        .copied()
        .fold(None::<StanceLabel>, |best, l| match best {
            Some(b) if counts[b.index()] >= counts[l.index()] => Some(b),
            _ => Some(l),
        })
        .unwrap_or(StanceLabel::AntiHamas)
}

pub fn detect_lead_changes(series: &TrendSeries, exclude: &[StanceLabel]) -> Vec<LeadChangeEvent> {
    let leaders: Vec<StanceLabel> = series.counts.iter().map(|c| leader(c, exclude)).collect();
    leaders
        .windows(2)
        .zip(series.bins.iter().skip(1).zip(series.counts.iter().skip(1)))
        .filter(|(w, _)| w[0] != w[1])
        .map(|(w, (bin, counts))| LeadChangeEvent {
            bin_index: bin.index,
            previous_leader: w[0],
            new_leader: w[1],
            margin: counts[w[1].index()] - counts[w[0].index()],
        })
        .collect()
}
