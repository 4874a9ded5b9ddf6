//! Pipeline commands behind the `polemos` binary. Each `cmd_*` function works
//! on a project directory and is usable from tests without a subprocess.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{anyhow, Context};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use polemos::analysis::{build_report, ReportBundle, ReportConfig};
use polemos::annotation::{
    read_training_csv, sample_for_annotation, AnnotationError, AnnotationSession, BalanceReport, QuotaProgress,
    QuotaTarget, Stage, StageState,
};
use polemos::classifier::{
    evaluate, predict_corpus, read_predictions, write_predictions, ClassifierError, Metrics, Model,
    PredictionSummary, RemoteClassifier, StancePredictor, TrainConfig,
};
use polemos::corpus::{clean_corpus, read_jsonl, stats_of, write_jsonl, CleanReport, Comment, CorpusStats, CorpusStore, StudyWindow, VideoRef};
use polemos::ingest::mock::MockServer;
use polemos::ingest::{
    ingest, ApiConfig, IngestError, IngestOptions, IngestReport, PlatformClient, QuotaBudget, SearchQuery, SharedBudget,
};
use polemos::synth::{generate, read_gold, SynthConfig};

pub const CONFIG_FILE: &str = "polemos.toml";
/// Annotation pool drawn for synthetic projects.
pub const SYNTH_SAMPLE_POOL: usize = 3000;

/// Failures with a dedicated process exit code.
#[derive(Debug)]
pub enum Exit {
    /// A command ran before its inputs or stage were ready.
    Stage(String),
    /// The held-out accuracy missed the configured gate.
    Gate { accuracy: f64, threshold: f64 },
    /// The platform API or the remote classifier failed.
    Remote(String),
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exit::Stage(m) => write!(f, "stage error: {m}"),
            Exit::Gate { accuracy, threshold } => {
                write!(f, "accuracy gate failed: held-out accuracy {accuracy:.4} is below {threshold:.2}")
            }
            Exit::Remote(m) => write!(f, "remote failure: {m}"),
        }
    }
}

impl std::error::Error for Exit {}

/// Process exit code for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return match e {
            Exit::Stage(_) => 2,
            Exit::Gate { .. } => 3,
            Exit::Remote(_) => 4,
        };
    }
    if let Some(e) = err.downcast_ref::<ClassifierError>() {
        if matches!(
            e,
            ClassifierError::RemoteTimeout { .. } | ClassifierError::RemoteFailure { .. } | ClassifierError::Protocol { .. }
        ) {
            return 4;
        }
    }
    if let Some(e) = err.downcast_ref::<IngestError>() {
        if !matches!(e, IngestError::Storage(_) | IngestError::InvalidQuery(_)) {
            return 4;
        }
    }
    1
}

fn stage_err(msg: impl Into<String>) -> anyhow::Error {
    Exit::Stage(msg.into()).into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    pub queries: Vec<String>,
    pub max_videos: usize,
    pub quota_units: u64,
    pub base_url: Option<String>,
    pub concurrency: usize,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            queries: vec!["Israel Palestina".into(), "Gaza".into()],
            max_videos: 50,
            quota_units: 10_000,
            base_url: None,
            concurrency: 4,
            max_retries: 3,
            backoff_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSection {
    pub size: usize,
    pub seed: u64,
    pub max_per_video_fraction: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            size: 1400,
            seed: 0,
            max_per_video_fraction: polemos::annotation::DEFAULT_MAX_PER_VIDEO_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationSection {
    pub per_label_target: u64,
    pub total_target: u64,
    pub bind: String,
    pub static_dir: Option<PathBuf>,
}

impl Default for AnnotationSection {
    fn default() -> Self {
        Self {
            per_label_target: 200,
            total_target: 1400,
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GateSection {
    pub min_accuracy: f64,
}

impl Default for GateSection {
    fn default() -> Self {
        Self { min_accuracy: 0.90 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictSection {
    pub remote_endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            remote_endpoint: None,
            batch_size: 256,
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub window: StudyWindow,
    pub ingest: IngestSection,
    pub sample: SampleSection,
    pub annotation: AnnotationSection,
    pub train: TrainConfig,
    pub gate: GateSection,
    pub predict: PredictSection,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        StudyWindow::new(cfg.window.start, cfg.window.end)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Gate outcome recorded by `train`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub accuracy: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineState {
    pub stages: StageState,
    pub gate: Option<GateRecord>,
}

/// A project directory and its configuration.
#[derive(Debug, Clone)]
pub struct Project {
    pub dir: PathBuf,
    pub config: Config,
    /// Downgrade stage-order refusals to warnings.
    pub force: bool,
}

impl Project {
    /// Loads `config` if given, else `<dir>/polemos.toml` if present, else
    /// defaults.
    pub fn open(dir: &Path, config: Option<&Path>) -> anyhow::Result<Self> {
        let config = match config {
            Some(p) => Config::load(p)?,
            None if dir.join(CONFIG_FILE).exists() => Config::load(&dir.join(CONFIG_FILE))?,
            None => Config::default(),
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            force: false,
        })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.config.sample.seed = s;
            self.config.train.seed = s;
        }
        self
    }

    pub fn with_force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    /// Refuses with a stage error unless `--force` was given, in which case
    /// the refusal is logged and the command goes on.
    fn stage_gate(&self, msg: String) -> anyhow::Result<()> {
        if self.force {
            warn!("{msg}; continuing because of --force");
            Ok(())
        } else {
            Err(stage_err(msg))
        }
    }

    pub fn raw(&self) -> PathBuf {
        self.dir.join("raw.jsonl")
    }
    pub fn videos(&self) -> PathBuf {
        self.dir.join("videos.jsonl")
    }
    pub fn clean(&self) -> PathBuf {
        self.dir.join("clean.jsonl")
    }
    pub fn session_dir(&self) -> PathBuf {
        self.dir.join("annotation")
    }
    pub fn training(&self) -> PathBuf {
        self.dir.join("training.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.json")
    }
    pub fn predictions(&self) -> PathBuf {
        self.dir.join("predictions.csv")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.dir.join("report")
    }
    fn state_path(&self) -> PathBuf {
        self.dir.join("pipeline.json")
    }
    fn lock_path(&self) -> PathBuf {
        self.dir.join(".polemos.lock")
    }

    pub fn state(&self) -> anyhow::Result<PipelineState> {
        let path = self.state_path();
        if !path.exists() {
            return Ok(PipelineState {
                stages: StageState::new(Utc::now()),
                gate: None,
            });
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    fn save_state(&self, state: &PipelineState) -> anyhow::Result<()> {
        write_json(&self.state_path(), state)
    }

    fn reach(&self, target: Stage, note: &str) -> anyhow::Result<PipelineState> {
        let mut state = self.state()?;
        let entered = state
            .stages
            .reach(target, Utc::now(), note)
            .map_err(|e| stage_err(e.to_string()))?;
        if !entered.is_empty() {
            info!(stage = %state.stages.stage(), "stage advanced");
        }
        self.save_state(&state)?;
        Ok(state)
    }

    /// Takes the per-directory lock; `force` clears a stale one first.
    pub fn lock(&self, force: bool) -> anyhow::Result<ProjectLock> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.lock_path();
        if force {
            let _ = fs::remove_file(&path);
        }
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(ProjectLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(anyhow!(
                "{} is locked by another pipeline run (remove {} or pass --force if it is stale)",
                self.dir.display(),
                path.display()
            )),
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }
}

/// Removes the lock file when dropped.
#[derive(Debug)]
pub struct ProjectLock {
    path: PathBuf,
}

impl Drop for ProjectLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub comments: usize,
    pub videos: usize,
    pub disabled_videos: usize,
    pub fixture_dir: PathBuf,
    pub gold_path: PathBuf,
}

/// Writes a synthetic project: `fixture/` for `ingest --mock`, `gold.csv`
/// for `annotate-import`, and a config whose queries match the fixture.
pub fn cmd_synth(dir: &Path, cfg: &SynthConfig) -> anyhow::Result<SynthSummary> {
    fs::create_dir_all(dir)?;
    let corpus = generate(cfg);
    let fixture_dir = dir.join("fixture");
    corpus.fixture(50, 100).write_to(&fixture_dir)?;
    let gold_path = dir.join("gold.csv");
    corpus.write_gold(&gold_path)?;
    let config_path = dir.join(CONFIG_FILE);
    if !config_path.exists() {
        let config = Config {
            window: cfg.window,
            ingest: IngestSection {
                queries: corpus.queries.clone(),
                ..IngestSection::default()
            },
            // a pool large enough to fill 200 per category by skipping
            sample: SampleSection {
                size: SYNTH_SAMPLE_POOL.min(corpus.comments.len() * 3 / 4),
                ..SampleSection::default()
            },
            ..Config::default()
        };
        fs::write(&config_path, config.to_toml())?;
    }
    Ok(SynthSummary {
        comments: corpus.comments.len(),
        videos: corpus.videos.len(),
        disabled_videos: corpus.disabled.len(),
        fixture_dir,
        gold_path,
    })
}

/// Searches the configured queries and appends comments to the raw store.
/// With `mock`, a local server replays that fixture directory instead of
/// calling the platform.
pub fn cmd_ingest(project: &Project, mock: Option<&Path>) -> anyhow::Result<IngestReport> {
    let cfg = &project.config;
    if cfg.ingest.queries.is_empty() {
        return Err(stage_err("no search queries configured under [ingest]"));
    }
    let queries: Vec<SearchQuery> = cfg
        .ingest
        .queries
        .iter()
        .map(|q| SearchQuery {
            term: q.clone(),
            published_after: cfg.window.start,
            published_before: cfg.window.end,
            max_videos: cfg.ingest.max_videos,
        })
        .collect();
    let mut api = ApiConfig {
        max_retries: cfg.ingest.max_retries,
        backoff_base: Duration::from_millis(cfg.ingest.backoff_ms),
        concurrency: cfg.ingest.concurrency,
        ..ApiConfig::default()
    };
    if let Some(url) = &cfg.ingest.base_url {
        api.base_url = url.clone();
    }
    let budget = SharedBudget::new(QuotaBudget {
        units_total: cfg.ingest.quota_units,
        ..QuotaBudget::default()
    });
    let mut store = CorpusStore::open(project.raw())?;

    let rt = runtime()?;
    let report = rt.block_on(async {
        let _server;
        let client = match mock {
            Some(fixture) => {
                let server = MockServer::start(fixture.to_path_buf()).await?;
                api.base_url = server.base_url();
                api.api_key = Some("mock".into());
                _server = server;
                PlatformClient::new(api)?
            }
            None => PlatformClient::from_env(api)?,
        };
        anyhow::Ok(ingest(&queries, &client, &mut store, &budget, &IngestOptions::default()).await?)
    })?;

    let mut videos: Vec<VideoRef> = read_jsonl(&project.videos())?;
    let known: std::collections::HashSet<String> = videos.iter().map(|v| v.video_id.clone()).collect();
    videos.extend(report.videos.iter().filter(|v| !known.contains(&v.video_id)).cloned());
    write_jsonl(&project.videos(), &videos)?;
    write_json(&project.dir.join("ingest_report.json"), &report)?;
    for e in &report.errors {
        warn!(subject = %e.subject, kind = %e.kind, "{}", e.detail);
    }
    if store.is_empty() && !report.errors.is_empty() {
        let first = &report.errors[0];
        return Err(Exit::Remote(format!("nothing ingested; first error on {}: {}", first.subject, first.detail)).into());
    }
    project.reach(Stage::Procure, "comments ingested")?;
    Ok(report)
}

/// Applies the cleaning rules to the raw store, producing `clean.jsonl`.
pub fn cmd_clean(project: &Project) -> anyhow::Result<CleanReport> {
    let store = CorpusStore::open(project.raw())?;
    if store.is_empty() {
        return Err(stage_err("the raw corpus is empty; run `ingest` first"));
    }
    let report = clean_corpus(&store, &project.clean(), &project.config.window)?;
    write_json(&project.dir.join("clean_report.json"), &report)?;
    project.reach(Stage::Procure, "corpus cleaned")?;
    Ok(report)
}

fn clean_comments(project: &Project) -> anyhow::Result<Vec<Comment>> {
    if !project.clean().exists() {
        return Err(stage_err("no cleaned corpus; run `clean` first"));
    }
    Ok(read_jsonl(&project.clean())?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSummary {
    pub size: usize,
    pub seed: u64,
    pub cluster_warnings: usize,
}

/// Draws the annotation sample and creates the annotation session.
pub fn cmd_sample(project: &Project, force: bool) -> anyhow::Result<SampleSummary> {
    let corpus = clean_comments(project)?;
    let cfg = &project.config;
    let dir = project.session_dir();
    if dir.exists() {
        if !force {
            return Err(stage_err(format!(
                "an annotation session already exists in {}; pass --force to replace it",
                dir.display()
            )));
        }
        fs::remove_dir_all(&dir)?;
    }
    let sample = sample_for_annotation(&corpus, cfg.sample.size, cfg.sample.seed, cfg.sample.max_per_video_fraction)
        .map_err(|e| match e {
            AnnotationError::InsufficientCorpus { .. } => stage_err(e.to_string()),
            other => other.into(),
        })?;
    for w in &sample.warnings {
        warn!(video = %w.video_id, count = w.count, "video holds {:.1}% of the sample", w.share * 100.0);
    }
    let by_id: HashMap<&str, &Comment> = corpus.iter().map(|c| (c.comment_id.as_str(), c)).collect();
    let chosen: Vec<Comment> = sample.comment_ids.iter().map(|id| by_id[id.as_str()].clone()).collect();
    let videos: Vec<VideoRef> = read_jsonl(&project.videos())?;
    let quota = QuotaTarget {
        per_label_target: cfg.annotation.per_label_target,
        total_target: cfg.annotation.total_target,
    };
    AnnotationSession::create(&dir, chosen, videos, quota)?;
    project.reach(Stage::Annotate, "annotation sample drawn")?;
    Ok(SampleSummary {
        size: sample.comment_ids.len(),
        seed: cfg.sample.seed,
        cluster_warnings: sample.warnings.len(),
    })
}

fn open_session(project: &Project) -> anyhow::Result<AnnotationSession> {
    let dir = project.session_dir();
    if !dir.join("session.json").exists() {
        return Err(stage_err("no annotation session; run `sample` first"));
    }
    let mut session = AnnotationSession::open(&dir)?;
    if project.state()?.stages.stage() == Stage::Revise {
        session.set_stage(Stage::Revise);
    }
    Ok(session)
}

/// Records labels from a `comment_id,code` CSV. Plain mode labels every
/// sampled comment the file covers. With `fill_quota` the session is walked
/// through `next_task` like a human annotator would, skipping comments whose
/// category already met its target, until every target is met or the
/// sample runs out.
pub fn cmd_annotate_import(
    project: &Project,
    labels: &Path,
    annotator: &str,
    fill_quota: bool,
) -> anyhow::Result<QuotaProgress> {
    let mut session = open_session(project)?;
    let gold = read_gold(labels)?;
    let mut progress = session.progress();
    let mut imported = 0usize;
    if fill_quota {
        let target = session.quota().per_label_target;
        while !progress.all_met {
            let Some(task) = session.next_task(annotator, Utc::now()) else {
                break;
            };
            match gold.get(&task.comment_id) {
                Some(&code) if progress.per_label[code as usize].count < target => {
                    progress = session.record_label(&task.comment_id, code as i64, annotator, Utc::now())?;
                    imported += 1;
                }
                _ => session.skip(&task.comment_id, annotator)?,
            }
        }
    } else {
        let ids: Vec<String> = session.sample().iter().map(|c| c.comment_id.clone()).collect();
        for id in ids {
            if let Some(&code) = gold.get(&id) {
                progress = session.record_label(&id, code as i64, annotator, Utc::now())?;
                imported += 1;
            }
        }
    }
    info!(imported, "labels imported");
    Ok(progress)
}

/// Serves the annotation API, and the UI bundle when configured, until
/// interrupted.
pub fn cmd_annotate_serve(project: &Project, bind: Option<&str>) -> anyhow::Result<()> {
    let session = Arc::new(Mutex::new(open_session(project)?));
    let bind = bind.unwrap_or(&project.config.annotation.bind).to_string();
    let static_dir = project.config.annotation.static_dir.as_ref().map(|d| project.dir.join(d));
    let app = polemos::annotation::server::router(session, static_dir);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        println!("annotation API listening on http://{}", listener.local_addr()?);
        polemos::serve(listener, app).await?;
        anyhow::Ok(())
    })
}

/// Serves the trained model over the remote inference protocol.
pub fn cmd_serve_model(project: &Project, bind: &str) -> anyhow::Result<()> {
    let model = load_model(project)?;
    let app = polemos::classifier::remote::inference_router(Arc::new(model));
    let bind = bind.to_string();
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        println!("inference endpoint at http://{}/predict", listener.local_addr()?);
        polemos::serve(listener, app).await?;
        anyhow::Ok(())
    })
}

/// Writes `training.csv` from the session's latest labels.
pub fn cmd_export(project: &Project) -> anyhow::Result<BalanceReport> {
    let session = open_session(project)?;
    let set = session.export_training_set();
    set.write(&project.training())?;
    if !set.balance.undersupplied.is_empty() {
        warn!(codes = ?set.balance.undersupplied, "labels below their per-label target");
    }
    Ok(set.balance)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub examples: usize,
    pub train_size: usize,
    pub holdout_size: usize,
    pub holdout: Metrics,
    pub gate: GateRecord,
    pub warnings: Vec<String>,
    pub config: TrainConfig,
}

/// Trains on the exported labels, evaluates the holdout and applies the
/// accuracy gate. A failed gate sends the project to REVISE.
pub fn cmd_train(project: &Project) -> anyhow::Result<TrainReport> {
    let stage = project.state()?.stages.stage();
    if matches!(stage, Stage::Model | Stage::Procure) {
        project.stage_gate(format!("cannot train in stage {stage}; draw and label a sample first"))?;
    }
    if project.session_dir().join("session.json").exists() {
        cmd_export(project)?;
    }
    if !project.training().exists() {
        return Err(stage_err("no training.csv; label a sample and run `export`"));
    }
    let dataset = read_training_csv(&project.training())?;
    if dataset.is_empty() {
        return Err(stage_err("training.csv holds no labeled rows"));
    }
    project.reach(Stage::TrainTest, "training")?;

    let cfg = project.config.train;
    let outcome = polemos::classifier::train(&dataset, &cfg)?;
    for w in &outcome.warnings {
        warn!("{w}");
    }
    let heldout: Vec<(String, u8)> = outcome.split.holdout.iter().map(|&i| dataset[i].clone()).collect();
    let metrics = evaluate(&outcome.model, &heldout);
    outcome.model.save(&project.model())?;

    let threshold = project.config.gate.min_accuracy;
    let gate = GateRecord {
        accuracy: metrics.accuracy,
        threshold,
        passed: metrics.accuracy >= threshold,
    };
    let report = TrainReport {
        examples: dataset.len(),
        train_size: outcome.split.train.len(),
        holdout_size: heldout.len(),
        holdout: metrics,
        gate,
        warnings: outcome.warnings,
        config: cfg,
    };
    write_json(&project.metrics(), &report)?;

    let mut state = project.reach(Stage::Evaluate, "holdout evaluated")?;
    state.gate = Some(gate);
    if !gate.passed {
        state
            .stages
            .advance_stage(Stage::Revise, Utc::now(), "accuracy gate failed")
            .map_err(|e| stage_err(e.to_string()))?;
        project.save_state(&state)?;
        return Err(Exit::Gate {
            accuracy: gate.accuracy,
            threshold,
        }
        .into());
    }
    project.save_state(&state)?;
    Ok(report)
}

fn load_model(project: &Project) -> anyhow::Result<Model> {
    if !project.model().exists() {
        return Err(stage_err("no trained model; run `train` first"));
    }
    Ok(Model::load(&project.model())?)
}

/// Classifies the whole cleaned corpus with the local model, or with the
/// remote endpoint when one is given or configured.
pub fn cmd_predict(project: &Project, remote: Option<&str>) -> anyhow::Result<PredictionSummary> {
    let state = project.state()?;
    match state.gate {
        Some(g) if g.passed => {}
        Some(g) => project.stage_gate(format!(
            "the last model scored {:.4}, below the {:.2} gate; revise and retrain first",
            g.accuracy, g.threshold
        ))?,
        None => project.stage_gate("no model has passed the accuracy gate; run `train` first".into())?,
    }
    let corpus = clean_comments(project)?;
    let cfg = &project.config.predict;
    let remote = remote.map(str::to_string).or_else(|| cfg.remote_endpoint.clone());
    let predictor: Box<dyn StancePredictor> = match remote {
        Some(url) => Box::new(
            RemoteClassifier::new(&url, Duration::from_secs(cfg.timeout_secs))
                .map_err(|e| Exit::Remote(e.to_string()))?,
        ),
        None => Box::new(load_model(project)?),
    };
    let (rows, summary) = predict_corpus(predictor.as_ref(), &corpus, cfg.batch_size)?;
    write_predictions(&project.predictions(), &rows)?;
    project.reach(Stage::Distribute, "corpus classified")?;
    Ok(summary)
}

/// Aggregates predictions into the report directory.
pub fn cmd_report(project: &Project) -> anyhow::Result<ReportBundle> {
    if !project.predictions().exists() {
        return Err(stage_err("no predictions; run `predict` first"));
    }
    let corpus = clean_comments(project)?;
    let predictions = read_predictions(&project.predictions())?;
    let trained = if project.model().exists() {
        Some(Model::load(&project.model())?.trained_label_counts)
    } else {
        None
    };
    let config = ReportConfig {
        window: project.config.window,
        trained_label_counts: trained,
        ..ReportConfig::default()
    };
    let bundle = build_report(&corpus, &predictions, &config, &project.report_dir())?;
    for w in &bundle.collapse {
        warn!("{}", w.message);
    }
    Ok(bundle)
}

#[derive(Debug, Clone, Serialize)]
pub struct Status {
    pub stage: Stage,
    #[serde(with = "polemos::corpus::rfc3339_secs")]
    pub stage_entered_at: DateTime<Utc>,
    pub raw: CorpusStats,
    pub clean: CorpusStats,
    pub annotation: Option<QuotaProgress>,
    pub gate: Option<GateRecord>,
    pub predictions: Option<usize>,
}

/// Read-only snapshot of the project. Works on an empty directory.
pub fn cmd_status(project: &Project) -> anyhow::Result<Status> {
    let state = project.state()?;
    let raw: Vec<Comment> = read_jsonl(&project.raw())?;
    let clean: Vec<Comment> = read_jsonl(&project.clean())?;
    let annotation = if project.session_dir().join("session.json").exists() {
        Some(AnnotationSession::open(&project.session_dir())?.progress())
    } else {
        None
    };
    let predictions = if project.predictions().exists() {
        Some(read_predictions(&project.predictions())?.len())
    } else {
        None
    };
    Ok(Status {
        stage: state.stages.stage(),
        stage_entered_at: state.stages.current().entered_at,
        raw: stats_of(&raw),
        clean: stats_of(&clean),
        annotation,
        gate: state.gate,
        predictions,
    })
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stage: {} (since {})", self.stage, self.stage_entered_at.format("%Y-%m-%d %H:%M:%S"))?;
        let span = |s: &CorpusStats| match (s.date_min, s.date_max) {
            (Some(a), Some(b)) => format!(", {} to {}", a.format("%Y-%m-%d"), b.format("%Y-%m-%d")),
            _ => String::new(),
        };
        writeln!(
            f,
            "raw corpus: {} comments over {} videos{}",
            self.raw.count,
            self.raw.per_video.len(),
            span(&self.raw)
        )?;
        writeln!(
            f,
            "clean corpus: {} comments over {} videos{}",
            self.clean.count,
            self.clean.per_video.len(),
            span(&self.clean)
        )?;
        match &self.annotation {
            Some(p) => {
                let per: BTreeMap<&str, u64> = p.per_label.iter().map(|l| (l.name.as_str(), l.count)).collect();
                writeln!(f, "annotation: {}/{} labeled {:?}", p.total, p.total_target, per)?;
            }
            None => writeln!(f, "annotation: no session")?,
        }
        match &self.gate {
            Some(g) => writeln!(
                f,
                "gate: accuracy {:.4} vs {:.2} ({})",
                g.accuracy,
                g.threshold,
                if g.passed { "passed" } else { "failed" }
            )?,
            None => writeln!(f, "gate: not evaluated")?,
        }
        match self.predictions {
            Some(n) => writeln!(f, "predictions: {n}"),
            None => writeln!(f, "predictions: none"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_directory_reports_model_stage() {
        let dir = tempfile::tempdir().unwrap();
        let project = Project::open(dir.path(), None).unwrap();
        let status = cmd_status(&project).unwrap();
        assert_eq!(status.stage, Stage::Model);
        assert_eq!(status.raw.count, 0);
        assert_eq!(status.clean.count, 0);
        assert!(status.annotation.is_none() && status.gate.is_none() && status.predictions.is_none());
        assert!(!dir.path().join("pipeline.json").exists(), "status must not write");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = Config::default();
        let back: Config = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back.to_toml(), cfg.to_toml());
        let partial: Config = toml::from_str("[gate]\nmin_accuracy = 0.5\n").unwrap();
        assert_eq!(partial.gate.min_accuracy, 0.5);
        assert_eq!(partial.sample.size, 1400);
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let project = Project::open(dir.path(), None).unwrap();
        let held = project.lock(false).unwrap();
        assert!(project.lock(false).is_err());
        drop(held);
        let _again = project.lock(false).unwrap();
    }

    #[test]
    fn out_of_order_commands_are_stage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let project = Project::open(dir.path(), None).unwrap();
        for err in [
            cmd_clean(&project).unwrap_err(),
            cmd_sample(&project, false).unwrap_err(),
            cmd_train(&project).unwrap_err(),
            cmd_predict(&project, None).unwrap_err(),
            cmd_report(&project).unwrap_err(),
        ] {
            assert_eq!(exit_code(&err), 2, "{err}");
        }
    }
}
