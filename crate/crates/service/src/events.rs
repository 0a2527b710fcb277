//! Per-process event delivery: a server-sent event stream, or a long poll
//! for clients that cannot hold a stream open.
//!
//! Commits are announced on a broadcast channel carrying only the process id.
//! Delivery always re-reads the published trace after `last`, so a lagging
//! receiver never loses entries and order follows sequence numbers.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::stream::{self, Stream};
use serde::Deserialize;
use socproto_core::{Id, TraceEntry};
use tokio::sync::broadcast::error::RecvError;
use tokio::sync::{broadcast, watch};

use crate::error::ApiError;
use crate::AppState;

const DEFAULT_POLL_MS: u64 = 25_000;
const MAX_POLL_MS: u64 = 60_000;

#[derive(Debug, Default, Deserialize)]
pub struct EventsQuery {
    pub since: Option<u64>,
    pub timeout_ms: Option<u64>,
}

fn wants_stream(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/event-stream"))
}

fn last_event_id(headers: &HeaderMap) -> Option<u64> {
    headers.get("last-event-id")?.to_str().ok()?.trim().parse().ok()
}

pub async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let rx = app.commits.subscribe();
    app.engine.trace_since(&id, u64::MAX)?;
    let since = query.since.or_else(|| last_event_id(&headers)).unwrap_or(0);
    if wants_stream(&headers) {
        let stream = entry_stream(app.clone(), id, since, rx, app.shutdown.clone());
        return Ok(Sse::new(stream).keep_alive(KeepAlive::default()).into_response());
    }
    let timeout = Duration::from_millis(query.timeout_ms.unwrap_or(DEFAULT_POLL_MS).min(MAX_POLL_MS));
    Ok(Json(long_poll(&app, &id, since, rx, timeout).await?).into_response())
}

async fn long_poll(
    app: &AppState,
    id: &str,
    since: u64,
    mut rx: broadcast::Receiver<Id>,
    timeout: Duration,
) -> Result<Vec<TraceEntry>, ApiError> {
    let ready = app.engine.trace_since(id, since)?;
    if !ready.is_empty() || timeout.is_zero() {
        return Ok(ready);
    }
    let mut shutdown = app.shutdown.clone();
    let wait = async {
        loop {
            tokio::select! {
                received = rx.recv() => match received {
                    Ok(pid) if pid == id => break,
                    Ok(_) => continue,
                    Err(RecvError::Lagged(_)) | Err(RecvError::Closed) => break,
                },
                _ = shutdown.changed() => break,
            }
        }
    };
    let _ = tokio::time::timeout(timeout, wait).await;
    Ok(app.engine.trace_since(id, since)?)
}

fn to_sse(entry: &TraceEntry) -> SseEvent {
    let kind = match entry {
        TraceEntry::Firing(_) => "firing",
        TraceEntry::Adaptation(_) => "adaptation",
    };
    let data = serde_json::to_string(entry).expect("trace entries serialize");
    SseEvent::default().id(entry.seq().to_string()).event(kind).data(data)
}

struct Cursor {
    app: AppState,
    id: String,
    last: u64,
    pending: VecDeque<TraceEntry>,
    rx: broadcast::Receiver<Id>,
    shutdown: watch::Receiver<bool>,
}

fn entry_stream(
    app: AppState,
    id: String,
    since: u64,
    rx: broadcast::Receiver<Id>,
    shutdown: watch::Receiver<bool>,
) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    let cursor = Cursor { app, id, last: since, pending: VecDeque::new(), rx, shutdown };
    stream::unfold(cursor, |mut c| async move {
        loop {
            if *c.shutdown.borrow() {
                return None;
            }
            if let Some(entry) = c.pending.pop_front() {
                c.last = entry.seq();
                return Some((Ok(to_sse(&entry)), c));
            }
            match c.app.engine.trace_since(&c.id, c.last) {
                Ok(fresh) if !fresh.is_empty() => {
                    c.pending.extend(fresh);
                    continue;
                }
                Ok(_) => {}
                Err(_) => return None,
            }
            tokio::select! {
                received = c.rx.recv() => match received {
                    Ok(_) | Err(RecvError::Lagged(_)) => {}
                    Err(RecvError::Closed) => return None,
                },
                _ = c.shutdown.changed() => return None,
            }
        }
    })
}
