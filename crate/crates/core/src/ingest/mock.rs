//! Canned-response stand-in for the platform API.
//!
//! A fixture is a directory with one subdirectory per endpoint (`search`,
//! `commentThreads`). Each response lives in a file named after the
//! form-encoded, key-sorted significant query parameters of the request it
//! answers, e.g. `search/pageToken=p2&q=Gaza+espa%C3%B1ol.json`. A file
//! holds either one response `{"status": 200, "body": {...}}` or a
//! `{"sequence": [...]}` whose entries are served in turn, the last one
//! repeating.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::oneshot;

use super::wire::{
    CommentThread, CommentThreadListResponse, CommentThreadSnippet, ErrorResponse, PlatformComment,
    PlatformCommentSnippet, SearchListResponse, SearchResult, SearchResultId, SearchSnippet,
    REASON_COMMENTS_DISABLED,
};
use crate::corpus::{rfc3339_secs, Comment, VideoRef};

pub const SEARCH: &str = "search";
pub const COMMENT_THREADS: &str = "commentThreads";

/// Parameters that select a canned response; everything else is ignored.
fn significant_params(endpoint: &str) -> &'static [&'static str] {
    match endpoint {
        SEARCH => &["q", "pageToken"],
        COMMENT_THREADS => &["videoId", "pageToken"],
        _ => &[],
    }
}

/// File stem for a request against `endpoint` with `params`.
pub fn fixture_key<'a>(endpoint: &str, params: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let wanted = significant_params(endpoint);
    let selected: BTreeMap<&str, &str> = params
        .into_iter()
        .filter(|(k, v)| wanted.contains(k) && !v.is_empty())
        .collect();
    let mut ser = form_urlencoded::Serializer::new(String::new());
    for (k, v) in selected {
        ser.append_pair(k, v);
    }
    let key = ser.finish();
    if key.is_empty() {
        "_".to_string()
    } else {
        key
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CannedResponse {
    pub status: u16,
    #[serde(default)]
    pub body: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CannedFile {
    Sequence { sequence: Vec<CannedResponse> },
    Single(CannedResponse),
}

impl CannedFile {
    fn pick(&self, hit: usize) -> Option<&CannedResponse> {
        match self {
            CannedFile::Single(r) => Some(r),
            CannedFile::Sequence { sequence } => sequence.get(hit).or_else(|| sequence.last()),
        }
    }
}

/// In-memory fixture that can be written to disk in the directory layout
/// described in the module docs.
#[derive(Debug, Clone, Default)]
pub struct MockFixture {
    files: BTreeMap<(String, String), CannedFile>,
}

impl MockFixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, endpoint: &str, params: &[(&str, &str)], file: CannedFile) -> &mut Self {
        let key = fixture_key(endpoint, params.iter().copied());
        self.files.insert((endpoint.to_string(), key), file);
        self
    }

    pub fn ok(&mut self, endpoint: &str, params: &[(&str, &str)], body: impl Serialize) -> &mut Self {
        let body = serde_json::to_value(body).expect("fixture body serializes");
        self.insert(endpoint, params, CannedFile::Single(CannedResponse { status: 200, body }))
    }

    /// Search results for `term`, split into pages of `page_size`.
    pub fn search_pages(&mut self, term: &str, videos: &[VideoRef], page_size: usize) -> &mut Self {
        let pages: Vec<&[VideoRef]> = if videos.is_empty() {
            vec![&[]]
        } else {
            videos.chunks(page_size.max(1)).collect()
        };
        for (i, page) in pages.iter().enumerate() {
            let token = page_token(i);
            let next = (i + 1 < pages.len()).then(|| page_token(i + 1));
            let body = SearchListResponse {
                next_page_token: next,
                items: page.iter().map(search_result).collect(),
            };
            self.ok(SEARCH, &[("q", term), ("pageToken", &token)], body);
        }
        self
    }

    /// Comment threads of one video, split into pages of `page_size`.
    pub fn thread_pages(&mut self, video_id: &str, comments: &[Comment], page_size: usize) -> &mut Self {
        let items: Vec<Value> = comments
            .iter()
            .map(|c| serde_json::to_value(comment_thread(c)).expect("thread serializes"))
            .collect();
        self.raw_thread_pages(video_id, items, page_size)
    }

    /// Like [`thread_pages`](Self::thread_pages) but with caller-built items,
    /// which lets tests plant corrupt records.
    pub fn raw_thread_pages(&mut self, video_id: &str, items: Vec<Value>, page_size: usize) -> &mut Self {
        let pages: Vec<Vec<Value>> = if items.is_empty() {
            vec![Vec::new()]
        } else {
            items.chunks(page_size.max(1)).map(<[Value]>::to_vec).collect()
        };
        let n = pages.len();
        for (i, page) in pages.into_iter().enumerate() {
            let token = page_token(i);
            let body = CommentThreadListResponse {
                next_page_token: (i + 1 < n).then(|| page_token(i + 1)),
                items: page,
            };
            self.ok(COMMENT_THREADS, &[("videoId", video_id), ("pageToken", &token)], body);
        }
        self
    }

    pub fn comments_disabled(&mut self, video_id: &str) -> &mut Self {
        let body = ErrorResponse::new(
            403,
            REASON_COMMENTS_DISABLED,
            "The video has disabled comments.",
        );
        self.insert(
            COMMENT_THREADS,
            &[("videoId", video_id)],
            CannedFile::Single(CannedResponse {
                status: 403,
                body: serde_json::to_value(body).unwrap(),
            }),
        )
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        for ((endpoint, key), file) in &self.files {
            let sub = dir.join(endpoint);
            fs::create_dir_all(&sub)?;
            let json = serde_json::to_vec_pretty(file).map_err(std::io::Error::other)?;
            fs::write(sub.join(format!("{key}.json")), json)?;
        }
        Ok(())
    }
}

/// The first page carries no token; later pages are `p1`, `p2`, ...
fn page_token(page: usize) -> String {
    if page == 0 {
        String::new()
    } else {
        format!("p{page}")
    }
}

pub fn search_result(v: &VideoRef) -> SearchResult {
    SearchResult {
        id: SearchResultId {
            kind: "youtube#video".into(),
            video_id: Some(v.video_id.clone()),
        },
        snippet: SearchSnippet {
            published_at: rfc3339_secs::format(&v.published_at),
            title: v.title.clone(),
            channel_title: v.channel.clone(),
        },
    }
}

pub fn comment_thread(c: &Comment) -> CommentThread {
    CommentThread {
        id: c.comment_id.clone(),
        snippet: CommentThreadSnippet {
            video_id: c.video_id.clone(),
            top_level_comment: PlatformComment {
                id: c.comment_id.clone(),
                snippet: PlatformCommentSnippet {
                    author_display_name: c.author.clone(),
                    text_original: Some(c.text.clone()),
                    text_display: c.text.clone(),
                    like_count: c.like_count,
                    published_at: rfc3339_secs::format(&c.published_at),
                },
            },
            is_public: c.is_public,
            total_reply_count: 0,
        },
        replies: None,
    }
}

#[derive(Debug)]
struct MockState {
    root: PathBuf,
    hits: Mutex<HashMap<String, usize>>,
    log: Mutex<Vec<String>>,
}

/// A running mock API bound to a loopback port.
#[derive(Debug)]
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl MockServer {
    /// Binds an ephemeral port and serves `root` until dropped. Must be called
    /// from within a Tokio runtime.
    pub async fn start(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let state = Arc::new(MockState {
            root: root.into(),
            hits: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        });
        let app = Router::new()
            .route("/search", get(search))
            .route("/commentThreads", get(comment_threads))
            .with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            state,
            shutdown: Some(tx),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Every request served so far, as `endpoint/key`.
    pub fn requests(&self) -> Vec<String> {
        self.state.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.state.log.lock().unwrap().len()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

async fn search(State(state): State<Arc<MockState>>, Query(params): Query<Vec<(String, String)>>) -> Response {
    respond(&state, SEARCH, &params)
}

async fn comment_threads(
    State(state): State<Arc<MockState>>,
    Query(params): Query<Vec<(String, String)>>,
) -> Response {
    respond(&state, COMMENT_THREADS, &params)
}

fn respond(state: &MockState, endpoint: &str, params: &[(String, String)]) -> Response {
    let key = fixture_key(endpoint, params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    let id = format!("{endpoint}/{key}");
    state.log.lock().unwrap().push(id.clone());
    let hit = {
        let mut hits = state.hits.lock().unwrap();
        let n = hits.entry(id.clone()).or_insert(0);
        *n += 1;
        *n - 1
    };
    let path = state.root.join(endpoint).join(format!("{key}.json"));
    let canned = fs::read(&path)
        .ok()
        .and_then(|bytes| serde_json::from_slice::<CannedFile>(&bytes).ok());
    match canned.as_ref().and_then(|c| c.pick(hit)) {
        Some(r) => {
            let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(r.body.clone())).into_response()
        }
        None => {
            let body = ErrorResponse::new(404, "notFound", &format!("no fixture for {id}"));
            (StatusCode::NOT_FOUND, Json(body)).into_response()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_order_independent_and_ignore_noise() {
        let a = fixture_key(SEARCH, [("q", "Gaza español"), ("pageToken", "p1"), ("key", "secret")]);
        let b = fixture_key(SEARCH, [("maxResults", "50"), ("pageToken", "p1"), ("q", "Gaza español")]);
        assert_eq!(a, b);
        assert_eq!(a, "pageToken=p1&q=Gaza+espa%C3%B1ol");
        assert_eq!(fixture_key(COMMENT_THREADS, [("videoId", "abc"), ("pageToken", "")]), "videoId=abc");
    }

    #[test]
    fn sequences_repeat_their_last_entry() {
        let f = CannedFile::Sequence {
            sequence: vec![
                CannedResponse { status: 500, body: Value::Null },
                CannedResponse { status: 200, body: Value::Null },
            ],
        };
        assert_eq!(f.pick(0).unwrap().status, 500);
        assert_eq!(f.pick(1).unwrap().status, 200);
        assert_eq!(f.pick(7).unwrap().status, 200);
    }
}
