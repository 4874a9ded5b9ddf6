mod common;

use common::*;
use polemos::corpus::CorpusStore;
use polemos::ingest::mock::{CannedFile, CannedResponse, MockFixture, MockServer, COMMENT_THREADS, SEARCH};
use polemos::ingest::wire::ErrorResponse;
use polemos::ingest::{ingest, IngestError, IngestOptions, PlatformClient, QuotaBudget, SharedBudget};
use serde_json::json;

async fn serve(fx: &MockFixture) -> (tempfile::TempDir, MockServer) {
    let dir = tempfile::tempdir().unwrap();
    fx.write_to(dir.path()).unwrap();
    let server = MockServer::start(dir.path()).await.unwrap();
    (dir, server)
}

fn budget(units: u64) -> SharedBudget {
    SharedBudget::new(QuotaBudget {
        units_total: units,
        ..QuotaBudget::default()
    })
}

#[tokio::test]
async fn search_follows_page_tokens() {
    let videos: Vec<_> = (0..100).map(|i| video(i, "gaza")).collect();
    let mut fx = MockFixture::new();
    fx.search_pages("gaza", &videos, 50);
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let b = budget(10_000);

    let out = client.search_videos(&query("gaza", 500), &b).await;
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(out.videos, videos);
    assert_eq!(out.pages, 2);
    assert_eq!(b.snapshot().units_spent, 200);

    let capped = client.search_videos(&query("gaza", 10), &b).await;
    assert_eq!(capped.videos.len(), 10);
    assert_eq!(capped.videos[..], videos[..10]);
    assert_eq!(capped.pages, 1);
}

#[tokio::test]
async fn empty_budget_issues_no_request() {
    let mut fx = MockFixture::new();
    fx.search_pages("gaza", &[video(0, "gaza")], 50);
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let b = budget(0);
    let out = client.search_videos(&query("gaza", 5), &b).await;
    assert!(matches!(out.error, Some(IngestError::QuotaExceeded { needed: 100, remaining: 0 })));
    assert_eq!(server.request_count(), 0);
    assert_eq!(b.snapshot().units_spent, 0);
}

#[tokio::test]
async fn thread_pages_are_drained_and_charged() {
    let all = comments("vid1", 60);
    let mut fx = MockFixture::new();
    fx.thread_pages("vid1", &all, 20);
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let b = budget(10_000);

    let mut pager = client.comment_threads("vid1", &b);
    let mut seen = Vec::new();
    while let Some(page) = pager.next_page().await.unwrap() {
        assert_eq!(page.comments.len(), 20);
        seen.extend(page.comments);
    }
    assert_eq!(seen, all);
    assert_eq!(pager.pages_fetched(), 3);
    assert_eq!(b.snapshot().units_spent, 3);
    assert!(pager.next_page().await.unwrap().is_none());
    assert_eq!(server.request_count(), 3);
}

#[tokio::test]
async fn disabled_comments_are_reported_and_refunded() {
    let mut fx = MockFixture::new();
    fx.comments_disabled("quiet");
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let b = budget(10);
    let out = client.fetch_comment_threads("quiet", &b).await;
    assert!(matches!(&out.error, Some(IngestError::CommentsDisabled { video_id }) if video_id == "quiet"));
    assert_eq!(out.pages, 0);
    assert_eq!(b.snapshot().units_spent, 0);
    assert_eq!(server.request_count(), 1, "4xx is not retried");
}

#[tokio::test]
async fn malformed_items_are_skipped_with_an_issue() {
    let good = comments("v", 3);
    let mut items: Vec<_> = good
        .iter()
        .map(|c| serde_json::to_value(polemos::ingest::mock::comment_thread(c)).unwrap())
        .collect();
    let mut bad = items[1].clone();
    bad["snippet"]["topLevelComment"]["snippet"]["publishedAt"] = json!("ayer por la tarde");
    bad["id"] = json!("broken");
    bad["snippet"]["topLevelComment"]["id"] = json!("broken");
    items.insert(1, bad);
    items.push(json!({"unexpected": true}));
    let mut fx = MockFixture::new();
    fx.raw_thread_pages("v", items, 100);
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();

    let out = client.fetch_comment_threads("v", &budget(10)).await;
    assert!(out.error.is_none());
    assert_eq!(out.comments, good);
    assert_eq!(out.rejected.len(), 2);
    assert!(out.rejected.iter().all(|r| r.kind == "malformed_item" && r.subject == "v"));
    assert!(out.rejected[0].detail.contains("broken"));
}

fn canned(status: u16, body: serde_json::Value) -> CannedResponse {
    CannedResponse { status, body }
}

#[tokio::test]
async fn server_errors_are_retried_with_backoff() {
    let page = serde_json::to_value(polemos::ingest::wire::CommentThreadListResponse {
        next_page_token: None,
        items: vec![serde_json::to_value(polemos::ingest::mock::comment_thread(&comment("flaky", 0))).unwrap()],
    })
    .unwrap();
    let mut fx = MockFixture::new();
    fx.insert(
        COMMENT_THREADS,
        &[("videoId", "flaky")],
        CannedFile::Sequence {
            sequence: vec![canned(500, json!({})), canned(503, json!({})), canned(200, page)],
        },
    );
    fx.insert(
        COMMENT_THREADS,
        &[("videoId", "down")],
        CannedFile::Single(canned(502, json!({}))),
    );
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let b = budget(10);

    let out = client.fetch_comment_threads("flaky", &b).await;
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(out.comments.len(), 1);
    assert_eq!(server.request_count(), 3);

    let started = std::time::Instant::now();
    let out = client.fetch_comment_threads("down", &b).await;
    assert!(matches!(out.error, Some(IngestError::TransientFailure { attempts: 4, .. })));
    assert_eq!(server.request_count(), 3 + 4);
    // 5 + 10 + 20 ms of backoff
    assert!(started.elapsed() >= std::time::Duration::from_millis(35));
    assert_eq!(b.snapshot().units_spent, 1, "only the delivered page is charged");
}

#[tokio::test]
async fn platform_quota_errors_are_not_retried() {
    let mut fx = MockFixture::new();
    fx.insert(
        SEARCH,
        &[("q", "gaza")],
        CannedFile::Single(canned(
            403,
            serde_json::to_value(ErrorResponse::new(403, "quotaExceeded", "daily limit")).unwrap(),
        )),
    );
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let out = client.search_videos(&query("gaza", 5), &budget(1000)).await;
    assert!(matches!(out.error, Some(IngestError::QuotaExceeded { .. })));
    assert_eq!(server.request_count(), 1);
}

#[tokio::test]
async fn ingest_counters_match_the_fixture() {
    // 6 videos across two queries, one with comments disabled, 3 pages each
    let vids: Vec<_> = (0..6).map(|i| video(i, if i < 3 { "israel" } else { "gaza" })).collect();
    let mut fx = MockFixture::new();
    fx.search_pages("israel", &vids[..3], 2);
    // the second query re-discovers video 2
    let mut gaza = vec![vids[2].clone()];
    gaza.extend(vids[3..].iter().cloned());
    fx.search_pages("gaza", &gaza, 50);
    let mut expected = Vec::new();
    for v in &vids[..5] {
        let cs = comments(&v.video_id, 25);
        fx.thread_pages(&v.video_id, &cs, 10);
        expected.extend(cs);
    }
    fx.comments_disabled(&vids[5].video_id);
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let b = budget(10_000);
    let store_dir = tempfile::tempdir().unwrap();
    let mut store = CorpusStore::open(store_dir.path().join("raw.jsonl")).unwrap();

    let queries = [query("israel", 50), query("gaza", 50)];
    let report = ingest(&queries, &client, &mut store, &b, &IngestOptions::default())
        .await
        .unwrap();
    assert_eq!(report.videos_found, 6);
    assert_eq!(report.videos_with_comments_disabled, 1);
    assert_eq!(report.search_pages, 3);
    assert_eq!(report.pages_fetched, 15);
    assert_eq!(report.comments_fetched, 125);
    assert_eq!(report.comments_appended, 125);
    assert_eq!(report.quota_spent, 3 * 100 + 15);
    assert_eq!(b.snapshot().units_spent, report.quota_spent);
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].kind, "comments_disabled");
    assert_eq!(report.videos.iter().map(|v| v.video_id.as_str()).collect::<Vec<_>>(), ["v0000", "v0001", "v0002", "v0003", "v0004", "v0005"]);
    assert_eq!(store.read_all().unwrap(), expected, "appended in discovery order");

    // a second pass pays again but stores nothing new
    let again = ingest(&queries, &client, &mut store, &b, &IngestOptions::default())
        .await
        .unwrap();
    assert_eq!(again.comments_fetched, 125);
    assert_eq!(again.comments_appended, 0);
    assert_eq!(store.len(), 125);
}

#[tokio::test]
async fn allowlist_limits_fetched_videos() {
    let vids: Vec<_> = (0..3).map(|i| video(i, "gaza")).collect();
    let mut fx = MockFixture::new();
    fx.search_pages("gaza", &vids, 50);
    for v in &vids {
        fx.thread_pages(&v.video_id, &comments(&v.video_id, 4), 10);
    }
    let (_d, server) = serve(&fx).await;
    let client = PlatformClient::new(api(server.base_url())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = CorpusStore::open(dir.path().join("raw.jsonl")).unwrap();
    let options = IngestOptions {
        allowlist: Some(["v0001".to_string()].into_iter().collect()),
    };
    let report = ingest(&[query("gaza", 10)], &client, &mut store, &budget(1000), &options)
        .await
        .unwrap();
    assert_eq!(report.videos_found, 1);
    assert_eq!(store.len(), 4);
}
