//! Comment corpus storage: newline-delimited JSON files with append,
//! cleaning and aggregate statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use icu_properties::props::ExtendedPictographic;
use icu_properties::CodePointSetData;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {source}")]
    Malformed {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid study window: start {start} is not before end {end}")]
    InvalidWindow {
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// RFC 3339 timestamps at second precision, always rendered with a `Z` suffix.
pub mod rfc3339_secs {
    use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub fn parse(raw: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        Ok(DateTime::parse_from_rfc3339(raw)?
            .with_timezone(&Utc)
            .trunc_subsecs(0))
    }

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

/// One platform comment, in the six-column capture layout plus its id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub author: String,
    #[serde(with = "rfc3339_secs")]
    pub published_at: DateTime<Utc>,
    pub like_count: u64,
    pub text: String,
    pub video_id: String,
    pub is_public: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRef {
    pub video_id: String,
    pub title: String,
    pub channel: String,
    pub matched_query: String,
    #[serde(with = "rfc3339_secs")]
    pub published_at: DateTime<Utc>,
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    #[serde(with = "rfc3339_secs")]
    pub start: DateTime<Utc>,
    #[serde(with = "rfc3339_secs")]
    pub end: DateTime<Utc>,
}

impl StudyWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if start >= end {
            return Err(CorpusError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

impl Default for StudyWindow {
    /// 2023-10-07 through the end of 2024-01-07.
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2023, 10, 7, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(2024, 1, 8, 0, 0, 0).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input_count: u64,
    pub removed_empty: u64,
    pub removed_non_referential: u64,
    pub removed_out_of_window: u64,
    pub removed_duplicate: u64,
    pub output_count: u64,
}

impl CleanReport {
    pub fn removed_total(&self) -> u64 {
        self.removed_empty
            + self.removed_non_referential
            + self.removed_out_of_window
            + self.removed_duplicate
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: u64,
    pub per_video: BTreeMap<String, u64>,
    pub date_min: Option<DateTime<Utc>>,
    pub date_max: Option<DateTime<Utc>>,
    pub like_sum: u64,
}

/// Why a comment was dropped by [`clean_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal {
    Empty,
    NonReferential,
    OutOfWindow,
    Duplicate,
}

fn is_pictographic(c: char) -> bool {
    CodePointSetData::new::<ExtendedPictographic>().contains(c)
}

fn is_emoji_glue(c: char) -> bool {
    matches!(c, '\u{200D}' | '\u{FE00}'..='\u{FE0F}' | '\u{E0100}'..='\u{E01EF}')
}

/// Alphabetic code points left after removing pictographs, variation
/// selectors and zero-width joiners.
pub fn referential_letter_count(text: &str) -> usize {
    text.chars()
        .filter(|&c| !is_pictographic(c) && !is_emoji_glue(c))
        .filter(|c| c.is_alphabetic())
        .count()
}

/// Classifies a single comment against the cleaning rules, ignoring duplicates.
pub fn removal_reason(comment: &Comment, window: &StudyWindow) -> Option<Removal> {
    if comment.text.trim().is_empty() {
        Some(Removal::Empty)
    } else if referential_letter_count(&comment.text) < 2 {
        Some(Removal::NonReferential)
    } else if !window.contains(comment.published_at) {
        Some(Removal::OutOfWindow)
    } else {
        None
    }
}

/// Pure cleaning pass. Survivors keep their original order and fields.
pub fn clean_comments(
    comments: impl IntoIterator<Item = Comment>,
    window: &StudyWindow,
) -> (Vec<Comment>, CleanReport) {
    let mut report = CleanReport::default();
    let mut seen: HashSet<(String, String, String, i64)> = HashSet::new();
    let mut kept = Vec::new();
    for comment in comments {
        report.input_count += 1;
        match removal_reason(&comment, window) {
            Some(Removal::Empty) => report.removed_empty += 1,
            Some(Removal::NonReferential) => report.removed_non_referential += 1,
            Some(Removal::OutOfWindow) => report.removed_out_of_window += 1,
            Some(Removal::Duplicate) => unreachable!(),
            None => {
                let key = (
                    comment.video_id.clone(),
                    comment.author.clone(),
                    comment.text.clone(),
                    comment.published_at.timestamp(),
                );
                if seen.insert(key) {
                    kept.push(comment);
                } else {
                    report.removed_duplicate += 1;
                }
            }
        }
    }
    report.output_count = kept.len() as u64;
    (kept, report)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CorpusError::io(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Writes `items` to `path` through a sibling temp file and rename.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomically(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub(crate) fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CorpusError::io(path, e));
    }
    Ok(())
}

/// A corpus file. One writer at a time; any number of readers may open the
/// same path.
#[derive(Debug)]
pub struct CorpusStore {
    path: PathBuf,
    ids: HashSet<String>,
}

impl CorpusStore {
    /// Opens (or lazily creates) the corpus at `path`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let ids = read_jsonl::<Comment>(&path)?
            .into_iter()
            .map(|c| c.comment_id)
            .collect();
        Ok(Self { path, ids })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, comment_id: &str) -> bool {
        self.ids.contains(comment_id)
    }

    /// Appends comments whose id is new to the store, in arrival order.
    /// On I/O failure the file is truncated back to its prior length.
    pub fn append_comments(&mut self, batch: &[Comment]) -> Result<usize> {
        let mut fresh = Vec::new();
        let mut batch_ids = HashSet::new();
        for c in batch {
            if !self.ids.contains(&c.comment_id) && batch_ids.insert(c.comment_id.as_str()) {
                fresh.push(c);
            }
        }
        if fresh.is_empty() {
            return Ok(0);
        }
        let mut buf = Vec::new();
        for c in &fresh {
            serde_json::to_writer(&mut buf, c).expect("comment serializes");
            buf.push(b'\n');
        }
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| CorpusError::io(&self.path, e))?;
        let before = file
            .metadata()
            .map_err(|e| CorpusError::io(&self.path, e))?
            .len();
        if let Err(e) = file.write_all(&buf).and_then(|_| file.sync_data()) {
            let _ = file.set_len(before);
            return Err(CorpusError::io(&self.path, e));
        }
        for c in &fresh {
            self.ids.insert(c.comment_id.clone());
        }
        Ok(fresh.len())
    }

    pub fn read_all(&self) -> Result<Vec<Comment>> {
        read_jsonl(&self.path)
    }
}

/// Cleans `source` into a fresh dataset at `dest`. The source file is not
/// modified.
pub fn clean_corpus(source: &CorpusStore, dest: &Path, window: &StudyWindow) -> Result<CleanReport> {
    let (kept, report) = clean_comments(source.read_all()?, window);
    write_jsonl(dest, &kept)?;
    Ok(report)
}

pub fn stats_of<'a>(comments: impl IntoIterator<Item = &'a Comment>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for c in comments {
        stats.count += 1;
        *stats.per_video.entry(c.video_id.clone()).or_insert(0) += 1;
        stats.like_sum += c.like_count;
        stats.date_min = Some(stats.date_min.map_or(c.published_at, |d| d.min(c.published_at)));
        stats.date_max = Some(stats.date_max.map_or(c.published_at, |d| d.max(c.published_at)));
    }
    stats
}

pub fn corpus_stats(store: &CorpusStore) -> Result<CorpusStats> {
    Ok(stats_of(&store.read_all()?))
}
