//! Stance mapping over platform comment threads: ingestion, annotation,
//! classification and aggregate reporting.

pub mod analysis;
pub mod annotation;
pub mod classifier;
pub mod corpus;
pub mod ingest;
pub mod labels;
pub mod synth;

/// Serves `app` on an already bound listener until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, app: axum::Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
