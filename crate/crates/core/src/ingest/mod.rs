//! Video-platform data API client: video search, comment-thread paging,
//! quota accounting and bulk ingestion into a [`CorpusStore`].

pub mod mock;
pub mod wire;

use std::collections::HashSet;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::{debug, warn};

use crate::corpus::{rfc3339_secs, Comment, CorpusError, CorpusStore, VideoRef};
use wire::{
    CommentThread, CommentThreadListResponse, ErrorResponse, PlatformComment, SearchListResponse,
    REASON_COMMENTS_DISABLED, REASON_QUOTA_EXCEEDED,
};

pub const DEFAULT_BASE_URL: &str = "https://www.googleapis.com/youtube/v3";
pub const API_KEY_ENV: &str = "PLATFORM_API_KEY";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("quota exceeded: request needs {needed} units, {remaining} remaining")]
    QuotaExceeded { needed: u64, remaining: u64 },
    #[error("transient failure after {attempts} attempts: {detail}")]
    TransientFailure { attempts: u32, detail: String },
    #[error("comments are disabled for video {video_id}")]
    CommentsDisabled { video_id: String },
    #[error("HTTP {status} ({reason}): {message}")]
    Http {
        status: u16,
        reason: String,
        message: String,
    },
    #[error("could not decode response: {0}")]
    Decode(String),
    #[error("invalid search query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Storage(#[from] CorpusError),
}

impl IngestError {
    /// Short machine-readable tag used in [`IngestReport::errors`].
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::QuotaExceeded { .. } => "quota_exceeded",
            IngestError::TransientFailure { .. } => "transient_failure",
            IngestError::CommentsDisabled { .. } => "comments_disabled",
            IngestError::Http { .. } => "http_error",
            IngestError::Decode(_) => "decode_error",
            IngestError::InvalidQuery(_) => "invalid_query",
            IngestError::Storage(_) => "storage_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub term: String,
    #[serde(with = "rfc3339_secs")]
    pub published_after: DateTime<Utc>,
    #[serde(with = "rfc3339_secs")]
    pub published_before: DateTime<Utc>,
    pub max_videos: usize,
}

impl SearchQuery {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.term.trim().is_empty() {
            return Err(IngestError::InvalidQuery("empty search term".into()));
        }
        if self.published_after >= self.published_before {
            return Err(IngestError::InvalidQuery(format!(
                "published_after {} is not before published_before {}",
                self.published_after, self.published_before
            )));
        }
        if self.max_videos == 0 {
            return Err(IngestError::InvalidQuery("max_videos must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaBudget {
    pub units_total: u64,
    pub units_spent: u64,
    pub cost_per_search: u64,
    pub cost_per_thread_page: u64,
}

impl Default for QuotaBudget {
    /// The platform's default daily allowance and list-call prices.
    fn default() -> Self {
        Self {
            units_total: 10_000,
            units_spent: 0,
            cost_per_search: 100,
            cost_per_thread_page: 1,
        }
    }
}

impl QuotaBudget {
    pub fn remaining(&self) -> u64 {
        self.units_total.saturating_sub(self.units_spent)
    }

    pub fn try_debit(&mut self, units: u64) -> Result<(), IngestError> {
        if units > self.remaining() {
            return Err(IngestError::QuotaExceeded {
                needed: units,
                remaining: self.remaining(),
            });
        }
        self.units_spent += units;
        Ok(())
    }

    fn refund(&mut self, units: u64) {
        self.units_spent = self.units_spent.saturating_sub(units);
    }
}

/// Budget shared between concurrent fetches; debits are serialized.
#[derive(Debug, Clone)]
pub struct SharedBudget(Arc<Mutex<QuotaBudget>>);

impl SharedBudget {
    pub fn new(budget: QuotaBudget) -> Self {
        Self(Arc::new(Mutex::new(budget)))
    }

    pub fn snapshot(&self) -> QuotaBudget {
        *self.0.lock().unwrap()
    }

    fn debit(&self, units: u64) -> Result<(), IngestError> {
        self.0.lock().unwrap().try_debit(units)
    }

    fn refund(&self, units: u64) {
        self.0.lock().unwrap().refund(units)
    }

    fn cost_per_search(&self) -> u64 {
        self.0.lock().unwrap().cost_per_search
    }

    fn cost_per_thread_page(&self) -> u64 {
        self.0.lock().unwrap().cost_per_thread_page
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    /// Retries after the first attempt, on transport errors and 5xx only.
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    #[serde(with = "millis")]
    pub request_timeout: Duration,
    pub concurrency: usize,
    pub include_replies: bool,
    pub search_page_size: u32,
    pub thread_page_size: u32,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
            request_timeout: Duration::from_secs(30),
            concurrency: 4,
            include_replies: false,
            search_page_size: 50,
            thread_page_size: 100,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestIssue {
    /// Video id, or the search term for search-stage failures.
    pub subject: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub videos_found: u64,
    pub videos_with_comments_disabled: u64,
    pub comments_fetched: u64,
    pub comments_appended: u64,
    pub pages_fetched: u64,
    pub search_pages: u64,
    pub quota_spent: u64,
    pub errors: Vec<IngestIssue>,
    /// Distinct videos in discovery order.
    #[serde(skip)]
    pub videos: Vec<VideoRef>,
}

#[derive(Debug, Default)]
pub struct SearchOutcome {
    pub videos: Vec<VideoRef>,
    pub pages: u64,
    /// Set when the search stopped early; `videos` holds what was found.
    pub error: Option<IngestError>,
}

#[derive(Debug, Default)]
pub struct ThreadOutcome {
    pub video_id: String,
    pub comments: Vec<Comment>,
    pub pages: u64,
    pub rejected: Vec<IngestIssue>,
    /// Set when paging stopped early; `comments` holds what was delivered.
    pub error: Option<IngestError>,
}

/// Extra ingest controls.
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// When present, only these video ids are fetched.
    pub allowlist: Option<HashSet<String>>,
}

enum Attempt {
    Retry(String),
    Fatal(IngestError),
}

#[derive(Debug, Clone)]
pub struct PlatformClient {
    http: reqwest::Client,
    config: ApiConfig,
}

impl PlatformClient {
    pub fn new(config: ApiConfig) -> Result<Self, IngestError> {
        let http = reqwest::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| IngestError::Decode(format!("http client: {e}")))?;
        Ok(Self { http, config })
    }

    /// Reads the API key from `PLATFORM_API_KEY` when the config has none.
    pub fn from_env(mut config: ApiConfig) -> Result<Self, IngestError> {
        if config.api_key.is_none() {
            config.api_key = std::env::var(API_KEY_ENV).ok();
        }
        Self::new(config)
    }

    pub fn config(&self) -> &ApiConfig {
        &self.config
    }

    /// GET with retries. The caller has already paid for the request.
    async fn get_json<T: for<'de> Deserialize<'de>>(
        &self,
        endpoint: &str,
        params: &[(&str, String)],
    ) -> Result<T, IngestError> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), endpoint);
        let mut query: Vec<(&str, &str)> = params.iter().map(|(k, v)| (*k, v.as_str())).collect();
        if let Some(key) = &self.config.api_key {
            query.push(("key", key));
        }
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_base * 2u32.pow(attempt - 1);
                debug!(endpoint, attempt, ?delay, "retrying");
                tokio::time::sleep(delay).await;
            }
            match self.attempt(&url, &query).await {
                Ok(body) => {
                    return serde_json::from_value(body).map_err(|e| IngestError::Decode(e.to_string()))
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(detail)) => last = detail,
            }
        }
        Err(IngestError::TransientFailure {
            attempts,
            detail: last,
        })
    }

    async fn attempt(&self, url: &str, query: &[(&str, &str)]) -> Result<Value, Attempt> {
        let resp = self
            .http
            .get(url)
            .query(query)
            .send()
            .await
            .map_err(|e| Attempt::Retry(format!("transport: {e}")))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| Attempt::Retry(format!("transport: {e}")))?;
        if status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {}", status.as_u16())));
        }
        if !status.is_success() {
            let parsed: Option<ErrorResponse> = serde_json::from_slice(&bytes).ok();
            let reason = parsed
                .as_ref()
                .and_then(|e| e.reasons().next().map(str::to_string))
                .unwrap_or_default();
            let message = parsed.map(|e| e.error.message).unwrap_or_default();
            if reason == REASON_QUOTA_EXCEEDED {
                return Err(Attempt::Fatal(IngestError::QuotaExceeded {
                    needed: 0,
                    remaining: 0,
                }));
            }
            return Err(Attempt::Fatal(IngestError::Http {
                status: status.as_u16(),
                reason,
                message,
            }));
        }
        serde_json::from_slice(&bytes).map_err(|e| Attempt::Fatal(IngestError::Decode(e.to_string())))
    }

    /// Debits `cost`, runs the request, and refunds when no page came back.
    async fn paid_get<T: for<'de> Deserialize<'de>>(
        &self,
        budget: &SharedBudget,
        cost: u64,
        endpoint: &str,
        params: &[(&str, String)],
    ) -> Result<T, IngestError> {
        budget.debit(cost)?;
        let result = self.get_json(endpoint, params).await;
        if result.is_err() {
            budget.refund(cost);
        }
        result
    }

    /// Collects up to `query.max_videos` videos, following page tokens.
    pub async fn search_videos(&self, query: &SearchQuery, budget: &SharedBudget) -> SearchOutcome {
        let mut outcome = SearchOutcome::default();
        if let Err(e) = query.validate() {
            outcome.error = Some(e);
            return outcome;
        }
        let cost = budget.cost_per_search();
        let mut token: Option<String> = None;
        while outcome.videos.len() < query.max_videos {
            let remaining = query.max_videos - outcome.videos.len();
            let mut params = vec![
                ("part", "snippet".to_string()),
                ("type", "video".to_string()),
                ("q", query.term.clone()),
                ("publishedAfter", rfc3339_secs::format(&query.published_after)),
                ("publishedBefore", rfc3339_secs::format(&query.published_before)),
                (
                    "maxResults",
                    (remaining as u32).min(self.config.search_page_size).to_string(),
                ),
            ];
            if let Some(t) = &token {
                params.push(("pageToken", t.clone()));
            }
            let page: SearchListResponse = match self.paid_get(budget, cost, mock::SEARCH, &params).await {
                Ok(p) => p,
                Err(e) => {
                    outcome.error = Some(e);
                    break;
                }
            };
            outcome.pages += 1;
            for item in page.items {
                if outcome.videos.len() >= query.max_videos {
                    break;
                }
                let Some(video_id) = item.id.video_id else { continue };
                let Ok(published_at) = rfc3339_secs::parse(&item.snippet.published_at) else {
                    warn!(video_id, "skipping search result with bad timestamp");
                    continue;
                };
                outcome.videos.push(VideoRef {
                    video_id,
                    title: item.snippet.title,
                    channel: item.snippet.channel_title,
                    matched_query: query.term.clone(),
                    published_at,
                });
            }
            match page.next_page_token {
                Some(t) if !t.is_empty() => token = Some(t),
                _ => break,
            }
        }
        outcome
    }

    /// Pages through a video's comment threads.
    pub fn comment_threads<'a>(&'a self, video_id: &str, budget: &'a SharedBudget) -> ThreadPager<'a> {
        ThreadPager {
            client: self,
            budget,
            video_id: video_id.to_string(),
            token: None,
            done: false,
            pages: 0,
        }
    }

    /// Drains [`comment_threads`](Self::comment_threads) into one outcome.
    pub async fn fetch_comment_threads(&self, video_id: &str, budget: &SharedBudget) -> ThreadOutcome {
        let mut pager = self.comment_threads(video_id, budget);
        let mut outcome = ThreadOutcome {
            video_id: video_id.to_string(),
            ..Default::default()
        };
        loop {
            match pager.next_page().await {
                Ok(Some(page)) => {
                    outcome.comments.extend(page.comments);
                    outcome.rejected.extend(page.rejected);
                }
                Ok(None) => break,
                Err(e) => {
                    outcome.error = Some(e);
                    break;
                }
            }
        }
        outcome.pages = pager.pages;
        outcome
    }
}

#[derive(Debug, Default)]
pub struct ThreadPage {
    pub comments: Vec<Comment>,
    pub rejected: Vec<IngestIssue>,
}

/// Page-at-a-time iterator over one video's comment threads, in API order.
pub struct ThreadPager<'a> {
    client: &'a PlatformClient,
    budget: &'a SharedBudget,
    video_id: String,
    token: Option<String>,
    done: bool,
    pages: u64,
}

impl ThreadPager<'_> {
    pub fn pages_fetched(&self) -> u64 {
        self.pages
    }

    pub async fn next_page(&mut self) -> Result<Option<ThreadPage>, IngestError> {
        if self.done {
            return Ok(None);
        }
        let cfg = &self.client.config;
        let part = if cfg.include_replies { "snippet,replies" } else { "snippet" };
        let mut params = vec![
            ("part", part.to_string()),
            ("videoId", self.video_id.clone()),
            ("maxResults", cfg.thread_page_size.to_string()),
            ("textFormat", "plainText".to_string()),
        ];
        if let Some(t) = &self.token {
            params.push(("pageToken", t.clone()));
        }
        let cost = self.budget.cost_per_thread_page();
        let result: Result<CommentThreadListResponse, _> = self
            .client
            .paid_get(self.budget, cost, mock::COMMENT_THREADS, &params)
            .await;
        let page = match result {
            Ok(p) => p,
            Err(e) => {
                self.done = true;
                return Err(match e {
                    IngestError::Http { reason, .. } if reason == REASON_COMMENTS_DISABLED => {
                        IngestError::CommentsDisabled {
                            video_id: self.video_id.clone(),
                        }
                    }
                    other => other,
                });
            }
        };
        self.pages += 1;
        match page.next_page_token {
            Some(t) if !t.is_empty() => self.token = Some(t),
            _ => self.done = true,
        }
        let mut out = ThreadPage::default();
        for item in page.items {
            match map_thread(item, cfg.include_replies) {
                Ok(comments) => out.comments.extend(comments),
                Err(detail) => out.rejected.push(IngestIssue {
                    subject: self.video_id.clone(),
                    kind: "malformed_item".into(),
                    detail,
                }),
            }
        }
        Ok(Some(out))
    }
}

fn map_comment(c: PlatformComment, video_id: &str, is_public: bool) -> Result<Comment, String> {
    let published_at = rfc3339_secs::parse(&c.snippet.published_at)
        .map_err(|e| format!("comment {}: bad publishedAt {:?}: {e}", c.id, c.snippet.published_at))?;
    Ok(Comment {
        comment_id: c.id,
        author: c.snippet.author_display_name,
        published_at,
        like_count: c.snippet.like_count,
        text: c.snippet.text_original.unwrap_or(c.snippet.text_display),
        video_id: video_id.to_string(),
        is_public,
    })
}

/// Maps one raw thread item into its top-level comment (and replies when asked).
fn map_thread(item: Value, include_replies: bool) -> Result<Vec<Comment>, String> {
    let thread: CommentThread =
        serde_json::from_value(item).map_err(|e| format!("undecodable thread: {e}"))?;
    let video_id = thread.snippet.video_id;
    let is_public = thread.snippet.is_public;
    let mut out = vec![map_comment(thread.snippet.top_level_comment, &video_id, is_public)?];
    if include_replies {
        for reply in thread.replies.unwrap_or_default().comments {
            out.push(map_comment(reply, &video_id, is_public)?);
        }
    }
    Ok(out)
}

/// Searches every query, fetches each distinct video once and appends the
/// comments to `store` in video discovery order. Only storage failures abort.
pub async fn ingest(
    queries: &[SearchQuery],
    client: &PlatformClient,
    store: &mut CorpusStore,
    budget: &SharedBudget,
    options: &IngestOptions,
) -> Result<IngestReport, IngestError> {
    let start_spent = budget.snapshot().units_spent;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut videos = Vec::new();
    for query in queries {
        let outcome = client.search_videos(query, budget).await;
        report.search_pages += outcome.pages;
        if let Some(e) = outcome.error {
            report.errors.push(IngestIssue {
                subject: query.term.clone(),
                kind: e.kind().into(),
                detail: e.to_string(),
            });
        }
        for v in outcome.videos {
            let allowed = options.allowlist.as_ref().is_none_or(|a| a.contains(&v.video_id));
            if allowed && seen.insert(v.video_id.clone()) {
                videos.push(v);
            }
        }
    }
    report.videos_found = videos.len() as u64;

    let concurrency = client.config.concurrency.max(1);
    let mut fetches = stream::iter(videos.iter())
        .map(|v| client.fetch_comment_threads(&v.video_id, budget))
        .buffered(concurrency);
    while let Some(outcome) = fetches.next().await {
        report.pages_fetched += outcome.pages;
        report.comments_fetched += outcome.comments.len() as u64;
        report.comments_appended += store.append_comments(&outcome.comments)? as u64;
        report.errors.extend(outcome.rejected);
        if let Some(e) = outcome.error {
            if matches!(e, IngestError::CommentsDisabled { .. }) {
                report.videos_with_comments_disabled += 1;
            }
            report.errors.push(IngestIssue {
                subject: outcome.video_id.clone(),
                kind: e.kind().into(),
                detail: e.to_string(),
            });
        }
    }
    drop(fetches);
    report.quota_spent = budget.snapshot().units_spent - start_spent;
    report.videos = videos;
    Ok(report)
}
