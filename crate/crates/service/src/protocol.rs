//! Versioned wire schema. Every message is one JSON text frame of the form
//! `{"version": 1, "type": ..., ...}`. Lengths are mm, angles rad, times s.

use cathnav::geometry::Vec3;
use cathnav::metrics::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::session::{GuidanceKind, SessionState};

pub const PROTOCOL_VERSION: u32 = 1;

/// Latched velocity command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Command {
    /// rad/s about the tip x axis.
    pub alpha_rate: f64,
    /// rad/s about the tip z axis.
    pub gamma_rate: f64,
    /// mm/s; negative retracts.
    pub insertion_velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Starts the trial clock of a ready session.
    Start,
    /// Discards the current trial and returns to a fresh ready session.
    Reset,
    Command(Command),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

/// Displacement of a surface vertex from its rest position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexDelta {
    pub index: usize,
    pub offset: Vec3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub to_target: f64,
    /// Closest wall point, or `None` beyond the search radius.
    pub to_wall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub tick: u64,
    /// Trial clock.
    pub clock: f64,
    pub state: SessionState,
    pub pose: Pose,
    pub body: Vec<Vec3<f64>>,
    /// Vertices displaced more than the delta threshold.
    pub deltas: Vec<VertexDelta>,
    pub target: Vec3<f64>,
    pub next_waypoint: Option<Vec3<f64>>,
    /// Unit vector toward the next waypoint in the tip frame.
    pub bend_direction: Option<Vec3<f64>>,
    pub distances: Distances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshData {
    pub vertices: Vec<Vec3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// Per-trial outcome persisted under the session id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub session_id: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub guidance: GuidanceKind,
    pub deformable: bool,
    /// Success radius, mm.
    pub epsilon: f64,
    pub state: SessionState,
    pub elapsed: f64,
    pub diagnostic: Option<String>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent once when a session is created or reset: static geometry and
    /// guidance.
    Session {
        session_id: String,
        scenario: String,
        guidance: GuidanceKind,
        guidance_path: Vec<Vec3<f64>>,
        mesh: MeshData,
        tick_dt: f64,
        time_limit: f64,
        state: SessionState,
    },
    Frame(StateFrame),
    Terminal(TrialReport),
    Error { message: String, state: Option<SessionState> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub version: u32,
    #[serde(flatten)]
    pub body: T,
}

pub fn encode<T: Serialize>(body: &T) -> String {
    serde_json::to_string(&Envelope { version: PROTOCOL_VERSION, body }).expect("message serializes")
}

/// Parses a message, rejecting other protocol versions.
pub fn decode<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    if env.version != PROTOCOL_VERSION {
        return Err(format!("unsupported protocol version {} (expected {PROTOCOL_VERSION})", env.version));
    }
    Ok(env.body)
}
