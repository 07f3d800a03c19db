//! Conversations over the in-process broker.
//!
//! Every principal owns an exchange. With monitoring enabled a session
//! message travels
//!
//! ```text
//! principal:<P> --<cid>.<from>.<to>--> sender's monitor
//!   --> session:<cid> --> receiver's monitor --> inbox:<cid>:<to>
//! ```
//!
//! and each monitor stamps it with an audit tag that the inbox verifies.

mod broker;
mod config;
mod endpoint;

use std::fmt;

use thiserror::Error;

pub use broker::{topic_matches, BindingId, Broker, Consumer};
pub use config::{InvitationConfig, InvitationEntry};
pub use endpoint::{Endpoint, Rejection};

use crate::monitor::{Mode, MonitorConfig};

/// How messages between endpoints are mediated.
#[derive(Clone)]
pub enum Mediation {
    /// Both endpoints' monitors check every message.
    Monitor(MonitorConfig),
    /// The same hops as `Monitor`, forwarding without checks.
    Forwarder,
    /// Endpoint queues bound to each other directly.
    Direct,
}

impl Mediation {
    pub fn monitor(mode: Mode) -> Self {
        Mediation::Monitor(MonitorConfig::with_mode(mode))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mediation::Monitor(_) => "Monitor",
            Mediation::Forwarder => "Forwarder",
            Mediation::Direct => "NoMonitor",
        }
    }

    fn mediated(&self) -> bool {
        !matches!(self, Mediation::Direct)
    }
}

impl fmt::Debug for Mediation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mediation::Monitor(c) => write!(f, "Monitor({:?})", c.mode),
            _ => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("configuration lacks roles {0:?}")]
    IncompleteConfig(Vec<String>),
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("endpoint has not joined a conversation")]
    NotJoined,
    #[error("no principal plays role {0:?}")]
    UnknownPeerRole(String),
    #[error("timed out")]
    Timeout,
    #[error("invitation is for role {found}, not {expected}")]
    RoleMismatch { expected: String, found: String },
    #[error("endpoint is principal {0}")]
    PrincipalMismatch(String),
    #[error("already joined as {0}")]
    AlreadyJoined(String),
    #[error("session ended")]
    SessionEnded,
    #[error("a callback for messages from {0} is already pending")]
    DuplicateRegistration(String),
    #[error("monitor refused the invitation: {0}")]
    Monitor(String),
    #[error("bad configuration: {0}")]
    Config(String),
}

pub fn principal_exchange(principal: &str) -> String {
    format!("principal:{principal}")
}

pub fn session_exchange(cid: &str) -> String {
    format!("session:{cid}")
}

pub const INVITATION_EXCHANGE: &str = "invitations";

pub fn routing_key(cid: &str, from: &str, to: &str) -> String {
    format!("{cid}.{from}.{to}")
}

pub fn inbox_queue(cid: &str, role: &str) -> String {
    format!("inbox:{cid}:{role}")
}

pub fn invitation_queue(principal: &str) -> String {
    format!("invite:{principal}")
}

pub fn ack_queue(cid: &str) -> String {
    format!("acks:{cid}")
}
