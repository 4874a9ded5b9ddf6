//! Response shapes of the video platform's `search` and `commentThreads`
//! endpoints, reduced to the fields the pipeline reads.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchListResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_page_token: Option<String>,
    #[serde(default)]
    pub items: Vec<SearchResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub id: SearchResultId,
    pub snippet: SearchSnippet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchResultId {
    #[serde(default)]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchSnippet {
    pub published_at: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub channel_title: String,
}

/// Thread items are kept as raw JSON so one corrupt item does not sink the
/// whole page.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommentThreadListResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_page_token: Option<String>,
    #[serde(default)]
    pub items: Vec<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommentThread {
    pub id: String,
    pub snippet: CommentThreadSnippet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replies: Option<CommentReplies>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommentThreadSnippet {
    pub video_id: String,
    pub top_level_comment: PlatformComment,
    #[serde(default = "default_true")]
    pub is_public: bool,
    #[serde(default)]
    pub total_reply_count: u64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CommentReplies {
    #[serde(default)]
    pub comments: Vec<PlatformComment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformComment {
    pub id: String,
    pub snippet: PlatformCommentSnippet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlatformCommentSnippet {
    pub author_display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_original: Option<String>,
    #[serde(default)]
    pub text_display: String,
    pub like_count: u64,
    pub published_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: u16,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub errors: Vec<ErrorDetail>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorDetail {
    #[serde(default)]
    pub reason: String,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub message: String,
}

impl ErrorResponse {
    pub fn new(code: u16, reason: &str, message: &str) -> Self {
        Self {
            error: ErrorBody {
                code,
                message: message.to_string(),
                errors: vec![ErrorDetail {
                    reason: reason.to_string(),
                    domain: "youtube.api".to_string(),
                    message: message.to_string(),
                }],
            },
        }
    }

    pub fn reasons(&self) -> impl Iterator<Item = &str> {
        self.error.errors.iter().map(|e| e.reason.as_str())
    }
}

pub const REASON_COMMENTS_DISABLED: &str = "commentsDisabled";
pub const REASON_QUOTA_EXCEEDED: &str = "quotaExceeded";
