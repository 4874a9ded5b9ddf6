//! Annotation session: the sampled comments, the label log, task leases and
//! quota progress.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::stage::Stage;
use super::AnnotationError;
use crate::corpus::{read_jsonl, rfc3339_secs, write_jsonl, Comment, VideoRef};
use crate::labels::{StanceLabel, NUM_LABELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaTarget {
    pub per_label_target: u64,
    pub total_target: u64,
}

impl Default for QuotaTarget {
    fn default() -> Self {
        Self::uniform(200)
    }
}

impl QuotaTarget {
    pub fn uniform(per_label: u64) -> Self {
        Self {
            per_label_target: per_label,
            total_target: per_label * NUM_LABELS as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub comment_id: String,
    pub label: StanceLabel,
    pub annotator: String,
    #[serde(with = "rfc3339_secs")]
    pub annotated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum LogEntry {
    Label(AnnotationRecord),
    /// Reverts the annotator's most recent label on the comment.
    Undo {
        comment_id: String,
        annotator: String,
        #[serde(with = "rfc3339_secs")]
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelProgress {
    pub code: u8,
    pub name: String,
    pub count: u64,
    pub target: u64,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaProgress {
    pub per_label: Vec<LabelProgress>,
    pub total: u64,
    pub total_target: u64,
    pub all_met: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub counts: [u64; NUM_LABELS],
    pub per_label_target: u64,
    pub undersupplied: Vec<u8>,
    pub total: u64,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.undersupplied.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    pub rows: Vec<(String, u8)>,
    pub balance: BalanceReport,
}

impl TrainingSet {
    /// `text,code` CSV with a header row.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["text", "code"]).unwrap();
        for (text, code) in &self.rows {
            w.write_record([text.as_str(), &code.to_string()]).unwrap();
        }
        w.into_inner().expect("in-memory csv")
    }

    pub fn write(&self, path: &Path) -> Result<(), AnnotationError> {
        let bytes = self.to_csv();
        crate::corpus::write_atomically(path, |w| w.write_all(&bytes))?;
        Ok(())
    }
}

/// Reads a `text,code` training file.
pub fn read_training_csv(path: &Path) -> Result<Vec<(String, u8)>, AnnotationError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| AnnotationError::Csv(e.to_string()))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| AnnotationError::Csv(e.to_string()))?;
        let text = rec.get(0).unwrap_or_default().to_string();
        let code: i64 = rec
            .get(1)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e| AnnotationError::Csv(format!("bad code: {e}")))?;
        rows.push((text, StanceLabel::from_code(code)?.code()));
    }
    Ok(rows)
}

/// What `GET /api/next` returns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub comment_id: String,
    pub text: String,
    pub author: String,
    #[serde(with = "rfc3339_secs")]
    pub published_at: DateTime<Utc>,
    pub like_count: u64,
    pub video_id: String,
    pub video_title: Option<String>,
    pub channel: Option<String>,
    #[serde(with = "rfc3339_secs")]
    pub lease_expires_at: DateTime<Utc>,
    /// The annotator's own label when revisiting a comment, for preselection.
    pub current_label: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionMeta {
    quota: QuotaTarget,
    lease_minutes: i64,
}

const SAMPLE_FILE: &str = "sample.jsonl";
const LOG_FILE: &str = "labels.jsonl";
const META_FILE: &str = "session.json";
const VIDEOS_FILE: &str = "videos.jsonl";

#[derive(Debug)]
pub struct AnnotationSession {
    dir: Option<PathBuf>,
    sample: Vec<Comment>,
    index: HashMap<String, usize>,
    videos: HashMap<String, VideoRef>,
    quota: QuotaTarget,
    lease_ttl: Duration,
    stage: Stage,
    log: Vec<LogEntry>,
    /// Per sample index, a label stack per annotator; the top is active.
    labels: Vec<HashMap<String, Vec<(StanceLabel, u64)>>>,
    /// Per annotator, sample indices in the order they were labeled.
    recent: HashMap<String, Vec<usize>>,
    leases: HashMap<usize, (String, DateTime<Utc>)>,
    skipped: HashMap<String, HashSet<usize>>,
    seq: u64,
}

impl AnnotationSession {
    /// In-memory session over `sample`, which must be in sample order.
    pub fn new(sample: Vec<Comment>, quota: QuotaTarget) -> Self {
        let n = sample.len();
        let index = sample
            .iter()
            .enumerate()
            .map(|(i, c)| (c.comment_id.clone(), i))
            .collect();
        Self {
            dir: None,
            sample,
            index,
            videos: HashMap::new(),
            quota,
            lease_ttl: Duration::minutes(10),
            stage: Stage::Annotate,
            log: Vec::new(),
            labels: vec![HashMap::new(); n],
            recent: HashMap::new(),
            leases: HashMap::new(),
            skipped: HashMap::new(),
            seq: 0,
        }
    }

    /// Creates a persistent session directory. Any existing label log there is
    /// kept and replayed.
    pub fn create(
        dir: &Path,
        sample: Vec<Comment>,
        videos: Vec<VideoRef>,
        quota: QuotaTarget,
    ) -> Result<Self, AnnotationError> {
        fs::create_dir_all(dir).map_err(|e| AnnotationError::io(dir, e))?;
        write_jsonl(&dir.join(SAMPLE_FILE), &sample)?;
        write_jsonl(&dir.join(VIDEOS_FILE), &videos)?;
        let meta = SessionMeta {
            quota,
            lease_minutes: 10,
        };
        let meta_path = dir.join(META_FILE);
        fs::write(&meta_path, serde_json::to_vec_pretty(&meta).unwrap())
            .map_err(|e| AnnotationError::io(&meta_path, e))?;
        Self::open(dir)
    }

    pub fn open(dir: &Path) -> Result<Self, AnnotationError> {
        let meta_path = dir.join(META_FILE);
        let meta: SessionMeta = fs::read(&meta_path)
            .map_err(|e| AnnotationError::io(&meta_path, e))
            .and_then(|b| serde_json::from_slice(&b).map_err(|e| AnnotationError::Csv(e.to_string())))?;
        let sample: Vec<Comment> = read_jsonl(&dir.join(SAMPLE_FILE))?;
        let videos: Vec<VideoRef> = read_jsonl(&dir.join(VIDEOS_FILE))?;
        let log: Vec<LogEntry> = read_jsonl(&dir.join(LOG_FILE))?;
        let mut session = Self::new(sample, meta.quota);
        session.lease_ttl = Duration::minutes(meta.lease_minutes);
        session.videos = videos.into_iter().map(|v| (v.video_id.clone(), v)).collect();
        for entry in log {
            session.apply(entry);
        }
        session.dir = Some(dir.to_path_buf());
        Ok(session)
    }

    pub fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
    }

    pub fn set_lease_ttl(&mut self, ttl: Duration) {
        self.lease_ttl = ttl;
    }

    pub fn quota(&self) -> QuotaTarget {
        self.quota
    }

    pub fn sample(&self) -> &[Comment] {
        &self.sample
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    fn apply(&mut self, entry: LogEntry) {
        match &entry {
            LogEntry::Label(rec) => {
                if let Some(&i) = self.index.get(&rec.comment_id) {
                    self.seq += 1;
                    self.labels[i]
                        .entry(rec.annotator.clone())
                        .or_default()
                        .push((rec.label, self.seq));
                    self.recent.entry(rec.annotator.clone()).or_default().push(i);
                }
            }
            LogEntry::Undo { comment_id, annotator, .. } => {
                if let Some(&i) = self.index.get(comment_id) {
                    if let Some(stack) = self.labels[i].get_mut(annotator) {
                        stack.pop();
                        if stack.is_empty() {
                            self.labels[i].remove(annotator);
                        }
                    }
                    if let Some(r) = self.recent.get_mut(annotator) {
                        if let Some(pos) = r.iter().rposition(|&x| x == i) {
                            r.remove(pos);
                        }
                    }
                }
            }
        }
        self.log.push(entry);
    }

    fn persist(&self, entry: &LogEntry) -> Result<(), AnnotationError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(LOG_FILE);
        let mut line = serde_json::to_vec(entry).expect("log entry serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| AnnotationError::io(&path, e))?;
        f.write_all(&line)
            .and_then(|_| f.sync_data())
            .map_err(|e| AnnotationError::io(&path, e))
    }

    fn active_label(&self, i: usize, annotator: &str) -> Option<StanceLabel> {
        self.labels[i]
            .get(annotator)
            .and_then(|s| s.last())
            .map(|&(l, _)| l)
    }

    /// Active records: the latest label of each (comment, annotator) pair.
    pub fn active_records(&self) -> Vec<(String, String, StanceLabel)> {
        let mut out: Vec<_> = self
            .labels
            .iter()
            .enumerate()
            .flat_map(|(i, per)| {
                per.iter().filter_map(move |(a, stack)| {
                    stack
                        .last()
                        .map(|&(l, _)| (self.sample[i].comment_id.clone(), a.clone(), l))
                })
            })
            .collect();
        out.sort();
        out
    }

    fn counts(&self) -> [u64; NUM_LABELS] {
        let mut counts = [0u64; NUM_LABELS];
        for stack in self.labels.iter().flat_map(HashMap::values) {
            if let Some(&(l, _)) = stack.last() {
                counts[l.index()] += 1;
            }
        }
        counts
    }

    pub fn progress(&self) -> QuotaProgress {
        let counts = self.counts();
        let per_label: Vec<LabelProgress> = StanceLabel::ALL
            .iter()
            .map(|l| LabelProgress {
                code: l.code(),
                name: l.name().to_string(),
                count: counts[l.index()],
                target: self.quota.per_label_target,
                met: counts[l.index()] >= self.quota.per_label_target,
            })
            .collect();
        let total = counts.iter().sum();
        QuotaProgress {
            all_met: per_label.iter().all(|p| p.met) && total >= self.quota.total_target,
            per_label,
            total,
            total_target: self.quota.total_target,
        }
    }

    fn labeled_by_anyone(&self, i: usize) -> Option<StanceLabel> {
        self.labels[i]
            .values()
            .filter_map(|s| s.last())
            .max_by_key(|&&(_, seq)| seq)
            .map(|&(l, _)| l)
    }

    /// Next task for `annotator`, leasing it until `now + ttl`. Returns
    /// `None` when nothing is left for them.
    pub fn next_task(&mut self, annotator: &str, now: DateTime<Utc>) -> Option<Task> {
        self.leases.retain(|_, (_, exp)| *exp > now);
        let leased_to_other =
            |s: &Self, i: usize| s.leases.get(&i).is_some_and(|(who, _)| who != annotator);
        let skipped = self.skipped.get(annotator).cloned().unwrap_or_default();

        // an unexpired lease of our own is handed back first
        let own = self
            .leases
            .iter()
            .filter(|(_, (who, _))| who == annotator)
            .map(|(&i, _)| i)
            .filter(|&i| self.active_label(i, annotator).is_none())
            .min();

        let pick = own.or_else(|| {
            let counts = self.counts();
            let target = self.quota.per_label_target;
            let revising = self.stage == Stage::Revise;
            (0..self.sample.len())
                .filter(|&i| !skipped.contains(&i) && !leased_to_other(self, i))
                .filter(|&i| self.active_label(i, annotator).is_none())
                .filter_map(|i| {
                    let existing = self.labeled_by_anyone(i);
                    match (revising, existing) {
                        (false, None) => Some((0u8, i)),
                        (false, Some(_)) => None,
                        (true, Some(l)) if counts[l.index()] < target => Some((0, i)),
                        (true, None) => Some((1, i)),
                        (true, Some(_)) => Some((2, i)),
                    }
                })
                .min()
                .map(|(_, i)| i)
        })?;

        let expires = now + self.lease_ttl;
        self.leases.insert(pick, (annotator.to_string(), expires));
        let c = &self.sample[pick];
        let video = self.videos.get(&c.video_id);
        Some(Task {
            comment_id: c.comment_id.clone(),
            text: c.text.clone(),
            author: c.author.clone(),
            published_at: c.published_at,
            like_count: c.like_count,
            video_id: c.video_id.clone(),
            video_title: video.map(|v| v.title.clone()),
            channel: video.map(|v| v.channel.clone()),
            lease_expires_at: expires,
            current_label: self.active_label(pick, annotator).map(StanceLabel::code),
        })
    }

    /// Releases the annotator's lease on `comment_id` and passes over it for
    /// the rest of this session.
    pub fn skip(&mut self, comment_id: &str, annotator: &str) -> Result<(), AnnotationError> {
        let &i = self
            .index
            .get(comment_id)
            .ok_or_else(|| AnnotationError::NotInSample(comment_id.to_string()))?;
        if self.leases.get(&i).is_some_and(|(who, _)| who == annotator) {
            self.leases.remove(&i);
        }
        self.skipped.entry(annotator.to_string()).or_default().insert(i);
        Ok(())
    }

    pub fn record_label(
        &mut self,
        comment_id: &str,
        code: i64,
        annotator: &str,
        now: DateTime<Utc>,
    ) -> Result<QuotaProgress, AnnotationError> {
        let &i = self
            .index
            .get(comment_id)
            .ok_or_else(|| AnnotationError::NotInSample(comment_id.to_string()))?;
        let label = StanceLabel::from_code(code)?;
        if annotator.trim().is_empty() {
            return Err(AnnotationError::MissingAnnotator);
        }
        let entry = LogEntry::Label(AnnotationRecord {
            comment_id: comment_id.to_string(),
            label,
            annotator: annotator.to_string(),
            annotated_at: now,
        });
        self.persist(&entry)?;
        self.apply(entry);
        if self.leases.get(&i).is_some_and(|(who, _)| who == annotator) {
            self.leases.remove(&i);
        }
        Ok(self.progress())
    }

    /// Reverts the annotator's most recent label and re-leases that comment
    /// to them. Returns the comment id and the label now active for it.
    pub fn undo_last(
        &mut self,
        annotator: &str,
        now: DateTime<Utc>,
    ) -> Result<(String, Option<StanceLabel>), AnnotationError> {
        let i = *self
            .recent
            .get(annotator)
            .and_then(|r| r.last())
            .ok_or_else(|| AnnotationError::NothingToUndo(annotator.to_string()))?;
        let comment_id = self.sample[i].comment_id.clone();
        let entry = LogEntry::Undo {
            comment_id: comment_id.clone(),
            annotator: annotator.to_string(),
            at: now,
        };
        self.persist(&entry)?;
        self.apply(entry);
        self.leases.insert(i, (annotator.to_string(), now + self.lease_ttl));
        Ok((comment_id, self.active_label(i, annotator)))
    }

    /// Labeled comments in sample order, each resolved to its most recent
    /// active label across annotators.
    pub fn export_training_set(&self) -> TrainingSet {
        let mut rows = Vec::new();
        let mut counts = [0u64; NUM_LABELS];
        for (i, c) in self.sample.iter().enumerate() {
            if let Some(l) = self.labeled_by_anyone(i) {
                counts[l.index()] += 1;
                rows.push((c.text.clone(), l.code()));
            }
        }
        let target = self.quota.per_label_target;
        TrainingSet {
            balance: BalanceReport {
                undersupplied: StanceLabel::ALL
                    .iter()
                    .filter(|l| counts[l.index()] < target)
                    .map(|l| l.code())
                    .collect(),
                counts,
                per_label_target: target,
                total: rows.len() as u64,
            },
            rows,
        }
    }

    pub fn sampled_comment(&self, comment_id: &str) -> Option<&Comment> {
        self.index.get(comment_id).map(|&i| &self.sample[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn sample(n: usize) -> Vec<Comment> {
        (0..n)
            .map(|i| Comment {
                comment_id: format!("c{i}"),
                author: format!("a{i}"),
                published_at: Utc.with_ymd_and_hms(2023, 11, 1, 0, 0, 0).unwrap(),
                like_count: i as u64,
                text: format!("texto {i}"),
                video_id: format!("v{}", i % 3),
                is_public: true,
            })
            .collect()
    }

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 2, 1, 9, 0, 0).unwrap()
    }

    #[test]
    fn next_task_follows_sample_order_until_exhausted() {
        let mut s = AnnotationSession::new(sample(3), QuotaTarget::default());
        let t = s.next_task("ana", now()).unwrap();
        assert_eq!(t.comment_id, "c0");
        assert_eq!(t.lease_expires_at, now() + Duration::minutes(10));
        for id in ["c0", "c1", "c2"] {
            s.record_label(id, 3, "ana", now()).unwrap();
        }
        assert!(s.next_task("ana", now()).is_none());
    }

    #[test]
    fn leases_keep_annotators_apart() {
        let mut s = AnnotationSession::new(sample(4), QuotaTarget::default());
        let a1 = s.next_task("ana", now()).unwrap();
        let b1 = s.next_task("bea", now()).unwrap();
        assert_ne!(a1.comment_id, b1.comment_id);
        // asking again without labeling returns the same lease
        assert_eq!(s.next_task("ana", now()).unwrap().comment_id, a1.comment_id);
        s.record_label(&a1.comment_id, 1, "ana", now()).unwrap();
        let a2 = s.next_task("ana", now()).unwrap();
        assert_ne!(a2.comment_id, b1.comment_id);
        // once every lease has expired, the lowest open comment is handed out again
        let later = now() + Duration::minutes(11);
        let a3 = s.next_task("ana", later).unwrap();
        assert_eq!(a3.comment_id, b1.comment_id);
        let b_later = s.next_task("bea", later).unwrap();
        assert_eq!(b_later.comment_id, a2.comment_id);
    }

    #[test]
    fn record_label_errors() {
        let mut s = AnnotationSession::new(sample(2), QuotaTarget::default());
        assert!(matches!(s.record_label("zz", 1, "ana", now()), Err(AnnotationError::NotInSample(_))));
        assert!(matches!(s.record_label("c0", 9, "ana", now()), Err(AnnotationError::InvalidLabel(_))));
        let p = s.record_label("c0", 6, "ana", now()).unwrap();
        assert_eq!(p.per_label[6].count, 1);
        assert_eq!(p.total, 1);
    }

    #[test]
    fn relabel_overwrites_and_undo_restores() {
        let mut s = AnnotationSession::new(sample(2), QuotaTarget::default());
        s.record_label("c0", 6, "ana", now()).unwrap();
        let p = s.record_label("c0", 5, "ana", now()).unwrap();
        assert_eq!((p.per_label[6].count, p.per_label[5].count, p.total), (0, 1, 1));
        assert_eq!(s.log().len(), 2);
        let (id, restored) = s.undo_last("ana", now()).unwrap();
        assert_eq!((id.as_str(), restored), ("c0", Some(StanceLabel::ProPalestino)));
        assert_eq!(s.progress().per_label[6].count, 1);
        s.undo_last("ana", now()).unwrap();
        assert_eq!(s.progress().total, 0);
        assert!(matches!(s.undo_last("ana", now()), Err(AnnotationError::NothingToUndo(_))));
        // undone comment is offered again, with nothing preselected
        let t = s.next_task("ana", now()).unwrap();
        assert_eq!((t.comment_id.as_str(), t.current_label), ("c0", None));
    }

    #[test]
    fn full_quota_is_reported_met() {
        let mut s = AnnotationSession::new(sample(1400), QuotaTarget::default());
        for i in 0..1400 {
            s.record_label(&format!("c{i}"), (i % 7) as i64, "ana", now()).unwrap();
        }
        let p = s.progress();
        assert_eq!(p.total, 1400);
        assert!(p.all_met);
        assert!(p.per_label.iter().all(|l| l.count == 200 && l.met));
        let export = s.export_training_set();
        assert!(export.balance.is_balanced());
        assert_eq!(export.rows.len(), 1400);
    }

    #[test]
    fn skewed_export_flags_undersupplied_labels() {
        let mut s = AnnotationSession::new(sample(100), QuotaTarget::uniform(50));
        for i in 0..100 {
            s.record_label(&format!("c{i}"), 3, "ana", now()).unwrap();
        }
        let export = s.export_training_set();
        assert_eq!(export.balance.undersupplied, vec![0, 1, 2, 4, 5, 6]);
        // at the default target of 200, the 100 code-3 rows fall short as well
        let mut full = AnnotationSession::new(sample(100), QuotaTarget::default());
        for i in 0..100 {
            full.record_label(&format!("c{i}"), 3, "ana", now()).unwrap();
        }
        assert_eq!(full.export_training_set().balance.undersupplied, vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(export.to_csv(), s.export_training_set().to_csv());
        let csv = String::from_utf8(export.to_csv()).unwrap();
        assert!(csv.starts_with("text,code\ntexto 0,3\n"));
    }

    #[test]
    fn revise_stage_prefers_undersupplied_relabels() {
        let mut s = AnnotationSession::new(sample(4), QuotaTarget::uniform(1));
        s.record_label("c0", 3, "ana", now()).unwrap();
        s.record_label("c1", 3, "ana", now()).unwrap();
        s.record_label("c2", 5, "ana", now()).unwrap();
        // outside REVISE, already-labeled comments are not offered to others
        assert_eq!(s.next_task("bea", now()).unwrap().comment_id, "c3");
        s.skip("c3", "bea").unwrap();
        assert!(s.next_task("bea", now()).is_none());
        s.set_stage(Stage::Revise);
        // c2's label (5) is at target 1, label 3 is at 2: no undersupplied relabels,
        // so the order is sample order among labeled-by-others
        assert_eq!(s.next_task("bea", now()).unwrap().comment_id, "c0");
    }

    #[test]
    fn persistent_session_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = AnnotationSession::create(dir.path(), sample(5), vec![], QuotaTarget::default()).unwrap();
        s.record_label("c1", 2, "ana", now()).unwrap();
        s.record_label("c2", 4, "bea", now()).unwrap();
        s.undo_last("bea", now()).unwrap();
        let reopened = AnnotationSession::open(dir.path()).unwrap();
        assert_eq!(reopened.progress(), s.progress());
        assert_eq!(reopened.log().len(), 3);
        assert_eq!(reopened.export_training_set(), s.export_training_set());
    }
}
