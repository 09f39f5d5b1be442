//! Teleoperation service: versioned websocket protocol, session state
//! machine and REST endpoints for scenarios and trial reports.

pub mod protocol;
pub mod server;
pub mod session;
pub mod store;

pub use protocol::{ClientMessage, Command, ServerMessage, StateFrame, TrialReport, PROTOCOL_VERSION};
pub use server::{router, serve, App, ServiceConfig};
pub use session::{Guidance, GuidanceKind, Session, SessionConfig, SessionError, SessionState};
pub use store::{trial_group, Store};
