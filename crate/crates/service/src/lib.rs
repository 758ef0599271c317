//! HTTP front for an annotation session.
//!
//! | route | |
//! |---|---|
//! | `GET /api/session` | cycle, budgets, pool sizes |
//! | `GET /api/next-pair` | oldest open query, `204` when none |
//! | `POST /api/answer` | `{query_id, label: "ml"\|"cl"\|"skip"}`; `404` unknown id, `409` contradiction |
//! | `POST /api/advance` | close the cycle and open the next; `423` while queries are open |
//! | `GET /api/progress` | counters and per-cycle history |
//!
//! All mutation goes through one lock, so concurrent answers are applied in
//! arrival order.

mod api;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, AnswerRequest, ApiError, SharedSession};
pub use session::{AnswerReceipt, Label, NextPair, Progress, SampleRef, Session, SessionInfo};

/// Serves `session` until the process is stopped.
pub async fn serve(
    addr: SocketAddr,
    session: Session,
    ui_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    let app = router(Arc::new(tokio::sync::Mutex::new(session)), ui_dir);
    axum::serve(listener, app).await
}
