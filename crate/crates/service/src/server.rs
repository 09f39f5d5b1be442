//! HTTP surface: REST endpoints and one websocket session per connection.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use tokio::time::{Interval, MissedTickBehavior};

use crate::protocol::{decode, encode, ClientMessage, ServerMessage, PROTOCOL_VERSION};
use crate::session::{GuidanceKind, Session, SessionConfig, SessionError, SessionState};
use crate::store::{trial_group, Store};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session: SessionConfig,
    /// Wall-clock time between ticks; `None` ticks as fast as possible.
    pub tick_interval: Option<Duration>,
    /// Frames queued for a slow client before new frames are dropped.
    pub frame_buffer: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let session = SessionConfig::default();
        Self { tick_interval: Some(Duration::from_secs_f64(session.tick_dt)), session, frame_buffer: 8 }
    }
}

pub struct App {
    pub store: Store,
    pub config: ServiceConfig,
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/api/protocol", get(protocol))
        .route("/api/scenarios", get(scenarios))
        .route("/api/reports", get(reports))
        .route("/api/reports/{id}", get(report))
        .route("/api/groups", get(group))
        .route("/ws", get(websocket))
        .with_state(app)
}

pub async fn serve(listener: tokio::net::TcpListener, app: Arc<App>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolInfo {
    pub version: u32,
    pub client_messages: Vec<String>,
    pub server_messages: Vec<String>,
    pub tick_dt: f64,
    pub time_limit: f64,
    pub max_insertion_speed: f64,
}

async fn protocol(State(app): State<Arc<App>>) -> Json<ProtocolInfo> {
    let s = &app.config.session;
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    Json(ProtocolInfo {
        version: PROTOCOL_VERSION,
        client_messages: names(&["start", "reset", "command"]),
        server_messages: names(&["session", "frame", "terminal", "error"]),
        tick_dt: s.tick_dt,
        time_limit: s.time_limit,
        max_insertion_speed: s.max_insertion_speed,
    })
}

async fn scenarios(State(app): State<Arc<App>>) -> Response {
    Json(app.store.scenarios()).into_response()
}

async fn reports(State(app): State<Arc<App>>) -> Response {
    Json(app.store.report_ids()).into_response()
}

async fn report(State(app): State<Arc<App>>, Path(id): Path<String>) -> Response {
    match app.store.report(&id) {
        Some(r) => Json(r).into_response(),
        None => (StatusCode::NOT_FOUND, format!("no report for session {id}")).into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct GroupQuery {
    /// Comma-separated session ids.
    ids: String,
}

async fn group(State(app): State<Arc<App>>, Query(q): Query<GroupQuery>) -> Response {
    let mut trials = Vec::new();
    for id in q.ids.split(',').filter(|s| !s.is_empty()) {
        match app.store.report(id) {
            Some(r) => trials.push(r),
            None => return (StatusCode::NOT_FOUND, format!("no report for session {id}")).into_response(),
        }
    }
    match trial_group(&trials) {
        Ok(r) => Json(r).into_response(),
        Err(e) => (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    }
}

#[derive(Debug, Deserialize)]
pub struct SessionQuery {
    pub scenario: String,
    #[serde(default = "centerline")]
    pub guidance: GuidanceKind,
    pub seed: Option<u64>,
}

fn centerline() -> GuidanceKind {
    GuidanceKind::Centerline
}

async fn websocket(State(app): State<Arc<App>>, Query(q): Query<SessionQuery>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_connection(socket, app, q))
}

/// Outgoing queue. Frames are dropped when it is full; other messages wait.
struct Outbox(mpsc::Sender<String>);

impl Outbox {
    async fn send(&self, m: &ServerMessage) -> bool {
        self.0.send(encode(m)).await.is_ok()
    }

    fn offer(&self, m: &ServerMessage) -> bool {
        !matches!(self.0.try_send(encode(m)), Err(mpsc::error::TrySendError::Closed(_)))
    }
}

fn session_message(s: &Session) -> ServerMessage {
    ServerMessage::Session {
        session_id: s.id.clone(),
        scenario: s.scenario().name().to_string(),
        guidance: s.guidance().kind,
        guidance_path: s.guidance().path.clone(),
        mesh: s.mesh(),
        tick_dt: s.config().tick_dt,
        time_limit: s.config().time_limit,
        state: s.state(),
    }
}

fn error_message(e: &SessionError) -> ServerMessage {
    let state = match e {
        SessionError::Rejected { state, .. } => Some(*state),
        SessionError::Core(_) => None,
    };
    ServerMessage::Error { message: e.to_string(), state }
}

async fn next_tick(interval: &mut Option<Interval>, running: bool, throttled: bool) {
    match (running, interval) {
        (false, _) => std::future::pending().await,
        (true, Some(i)) if throttled => {
            i.tick().await;
        }
        _ => tokio::task::yield_now().await,
    }
}

async fn run_connection(socket: WebSocket, app: Arc<App>, q: SessionQuery) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::channel::<String>(app.config.frame_buffer.max(1));
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let out = Outbox(tx);

    let mut config = app.config.session.clone();
    config.seed = q.seed.unwrap_or(config.seed);
    let mut session = match app.store.create_session(&q.scenario, q.guidance, config) {
        Ok(s) => s,
        Err(e) => {
            out.send(&ServerMessage::Error { message: e.to_string(), state: None }).await;
            drop(out);
            let _ = writer.await;
            return;
        }
    };
    out.send(&session_message(&session)).await;

    let throttled = app.config.tick_interval.is_some();
    let mut interval: Option<Interval> = None;
    loop {
        let running = session.state() == SessionState::Running;
        tokio::select! {
            biased;
            incoming = stream.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match decode::<ClientMessage>(&text) {
                    Err(message) => Some(ServerMessage::Error { message, state: Some(session.state()) }),
                    Ok(ClientMessage::Command(c)) => session.command(c).err().map(|e| error_message(&e)),
                    Ok(ClientMessage::Start) => match session.start() {
                        Ok(()) => {
                            interval = app.config.tick_interval.map(|d| {
                                let mut i = tokio::time::interval(d);
                                i.set_missed_tick_behavior(MissedTickBehavior::Delay);
                                i
                            });
                            None
                        }
                        Err(e) => Some(error_message(&e)),
                    },
                    Ok(ClientMessage::Reset) => {
                        session.reset(uuid::Uuid::new_v4().to_string());
                        interval = None;
                        Some(session_message(&session))
                    }
                };
                if let Some(m) = reply {
                    if !out.send(&m).await {
                        break;
                    }
                }
            }
            _ = next_tick(&mut interval, running, throttled) => {
                match session.tick() {
                    Ok(t) => {
                        if !out.offer(&ServerMessage::Frame(t.frame)) {
                            break;
                        }
                        if let Some(report) = t.terminal {
                            if let Err(e) = app.store.save_report(report.clone()) {
                                out.send(&ServerMessage::Error { message: e.to_string(), state: Some(session.state()) }).await;
                            }
                            if !out.send(&ServerMessage::Terminal(report)).await {
                                break;
                            }
                        }
                    }
                    Err(e) => {
                        if !out.send(&error_message(&e)).await {
                            break;
                        }
                    }
                }
            }
        }
    }
    drop(out);
    let _ = writer.await;
}
