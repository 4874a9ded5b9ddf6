#![allow(dead_code)]

use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use polemos::corpus::{Comment, StudyWindow, VideoRef};
use polemos::ingest::{ApiConfig, SearchQuery};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 10, 7, 0, 0, 0).unwrap()
}

pub fn video(i: usize, query: &str) -> VideoRef {
    VideoRef {
        video_id: format!("v{i:04}"),
        title: format!("video {i}"),
        channel: "canal".into(),
        matched_query: query.into(),
        published_at: t0() + chrono::Duration::hours(i as i64),
    }
}

pub fn comment(video_id: &str, i: usize) -> Comment {
    Comment {
        comment_id: format!("{video_id}-c{i:04}"),
        author: format!("@autor{}", i % 17),
        published_at: t0() + chrono::Duration::minutes(i as i64 * 7),
        like_count: (i % 5) as u64,
        text: format!("comentario número {i} sobre {video_id}"),
        video_id: video_id.into(),
        is_public: true,
    }
}

pub fn comments(video_id: &str, n: usize) -> Vec<Comment> {
    (0..n).map(|i| comment(video_id, i)).collect()
}

pub fn query(term: &str, max_videos: usize) -> SearchQuery {
    let w = StudyWindow::default();
    SearchQuery {
        term: term.into(),
        published_after: w.start,
        published_before: w.end,
        max_videos,
    }
}

pub fn api(base_url: String) -> ApiConfig {
    ApiConfig {
        base_url,
        api_key: Some("test-key".into()),
        backoff_base: Duration::from_millis(5),
        request_timeout: Duration::from_secs(5),
        ..ApiConfig::default()
    }
}
