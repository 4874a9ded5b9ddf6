use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use polemos::classifier::remote::{inference_router, PredictRequest};
use polemos::classifier::{predict_corpus, train, ClassifierError, RemoteClassifier, StancePredictor, TrainConfig};
use polemos::synth::{generate, SynthConfig};
use serde_json::{json, Value};

/// Serves `app` from a runtime on its own thread; the blocking client under
/// test must not run inside a runtime.
fn spawn(app: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            polemos::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn canned(body: Value) -> Router {
    Router::new().route("/predict", post(move || async move { Json(body) }))
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("texto {i}")).collect()
}

fn client(url: &str) -> RemoteClassifier {
    RemoteClassifier::new(url, Duration::from_secs(5)).unwrap()
}

#[test]
fn reference_model_substitutes_for_the_remote_service() {
    let corpus = generate(&SynthConfig { comments: 600, ..SynthConfig::default() });
    let data: Vec<(String, u8)> = corpus
        .comments
        .iter()
        .map(|c| (c.text.clone(), corpus.gold[&c.comment_id]))
        .collect();
    let cfg = TrainConfig { dim: 1 << 12, ..TrainConfig::default() };
    let model = train(&data, &cfg).unwrap().model;
    let url = spawn(inference_router(Arc::new(model.clone())));
    let remote = client(&url).with_batch_size(7);

    let (local_rows, local_summary) = predict_corpus(&model, &corpus.comments, 50).unwrap();
    let (remote_rows, remote_summary) = predict_corpus(&remote, &corpus.comments, 50).unwrap();
    assert_eq!(local_rows, remote_rows);
    assert_eq!(local_summary, remote_summary);

    let sample = texts(3);
    let a = model.predict_batch(&sample).unwrap();
    let b = remote.remote_predict(&sample).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.code, y.code);
        for (p, q) in x.probs.iter().zip(&y.probs) {
            assert_eq!(p.to_bits(), q.to_bits(), "probabilities survive the wire exactly");
        }
    }
}

#[test]
fn batches_keep_input_order() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    // echo the index encoded in each text back as its code
    let app = Router::new().route(
        "/predict",
        post(move |Json(req): Json<PredictRequest>| {
            let seen = seen.clone();
            async move {
                seen.fetch_add(1, Ordering::SeqCst);
                let results: Vec<Value> = req
                    .texts
                    .iter()
                    .map(|t| {
                        let i: usize = t.trim_start_matches("texto ").parse().unwrap();
                        let mut probs = vec![0.0; 7];
                        probs[i % 7] = 1.0;
                        json!({"code": i % 7, "probs": probs})
                    })
                    .collect();
                Json(json!({ "results": results }))
            }
        }),
    );
    let url = spawn(app);
    let preds = client(&url).with_batch_size(4).remote_predict(&texts(10)).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    assert_eq!(preds.iter().map(|p| p.code).collect::<Vec<_>>(), [0, 1, 2, 3, 4, 5, 6, 0, 1, 2]);
}

#[test]
fn malformed_payloads_are_protocol_errors() {
    let not_json = Router::new().route("/predict", post(|| async { "<html>oops</html>" }));
    match client(&spawn(not_json)).remote_predict(&texts(1)) {
        Err(ClassifierError::Protocol { excerpt, .. }) => assert_eq!(excerpt, "<html>oops</html>"),
        other => panic!("{other:?}"),
    }

    let cases = [
        json!({"results": []}),
        json!({"results": [{"code": 9, "probs": [1, 0, 0, 0, 0, 0, 0]}]}),
        json!({"results": [{"code": 0, "probs": [1, 0, 0]}]}),
        json!({"results": [{"code": 0, "probs": [0.5, 0, 0, 0, 0, 0, 0]}]}),
        json!({"results": [{"code": 0, "probs": [1.5, -0.5, 0, 0, 0, 0, 0]}]}),
        json!({"predictions": []}),
    ];
    for body in cases {
        let err = client(&spawn(canned(body.clone()))).remote_predict(&texts(1)).unwrap_err();
        assert!(matches!(err, ClassifierError::Protocol { .. }), "{body}: {err:?}");
    }

    // within tolerance is accepted
    let near = json!({"results": [{"code": 6, "probs": [0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.4000000005]}]});
    let p = client(&spawn(canned(near))).remote_predict(&texts(1)).unwrap();
    assert_eq!(p[0].code, 6);
}

#[test]
fn long_excerpts_are_truncated() {
    let long = "x".repeat(1000);
    let app = Router::new().route("/predict", post(move || async move { long }));
    match client(&spawn(app)).remote_predict(&texts(1)) {
        Err(ClassifierError::Protocol { excerpt, .. }) => assert_eq!(excerpt.len(), 200),
        other => panic!("{other:?}"),
    }
}

#[test]
fn server_errors_and_timeouts_are_distinguished() {
    let failing = Router::new().route(
        "/predict",
        post(|| async { (axum::http::StatusCode::SERVICE_UNAVAILABLE, "model loading") }),
    );
    match client(&spawn(failing)).remote_predict(&texts(1)) {
        Err(ClassifierError::RemoteFailure { status, detail }) => {
            assert_eq!(status, Some(503));
            assert_eq!(detail, "model loading");
        }
        other => panic!("{other:?}"),
    }

    let slow = Router::new().route(
        "/predict",
        post(|| async {
            tokio::time::sleep(Duration::from_secs(3)).await;
            "late"
        }),
    );
    let url = spawn(slow);
    let quick = RemoteClassifier::new(&url, Duration::from_millis(200)).unwrap();
    assert!(matches!(quick.remote_predict(&texts(1)), Err(ClassifierError::RemoteTimeout(_))));

    // nothing listens on the port of a dropped listener
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let err = client(&format!("http://{addr}")).remote_predict(&texts(1)).unwrap_err();
    assert!(matches!(err, ClassifierError::RemoteFailure { status: None, .. }), "{err:?}");
}

#[test]
fn empty_input_makes_no_request() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let app = Router::new().route(
        "/predict",
        post(move || {
            seen.fetch_add(1, Ordering::SeqCst);
            async { Json(json!({"results": []})) }
        }),
    );
    let preds = client(&spawn(app)).remote_predict(&[]).unwrap();
    assert!(preds.is_empty());
    assert_eq!(calls.load(Ordering::SeqCst), 0);
}
