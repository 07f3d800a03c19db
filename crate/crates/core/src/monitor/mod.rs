//! Per-endpoint outline monitor. Invitations instantiate a session FSM;
//! every later message of that session is checked against it.

mod logic;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

pub use logic::{eval_predicate, Builtin, Env, EvalError, ExternalCommand, LogicEngine};

use crate::fsm::{compile, Cursors, FsmError, NestedFsm, Triple};
use crate::message::{ConversationMessage, MessageKind};
use crate::projection::{project_all, ProjectionError};
use crate::scribble::{parse_local, serialize_global, serialize_local, GlobalProtocol, ParseError};

/// Environment variable naming the default [`Mode`].
pub const MODE_ENV: &str = "MPST_MONITOR_MODE";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionKey {
    pub cid: String,
    pub role: String,
}

impl SessionKey {
    pub fn new(cid: impl Into<String>, role: impl Into<String>) -> Self {
        let cid = cid.into();
        assert!(!cid.is_empty(), "conversation id must be nonempty");
        Self {
            cid,
            role: role.into(),
        }
    }
}

impl fmt::Display for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cid, self.role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Active,
    Completed,
    Violated,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    UnknownSession,
    UnexpectedLabel,
    WrongPeer,
    AssertionFailed,
    PayloadArity,
    AfterCompletion,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::UnknownSession => "unknown-session",
            ViolationKind::UnexpectedLabel => "unexpected-label",
            ViolationKind::WrongPeer => "wrong-peer",
            ViolationKind::AssertionFailed => "assertion-failed",
            ViolationKind::PayloadArity => "payload-arity",
            ViolationKind::AfterCompletion => "after-completion",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonitorVerdict {
    Accept,
    Violation { kind: ViolationKind, detail: String },
}

impl MonitorVerdict {
    fn violation(kind: ViolationKind, detail: impl Into<String>) -> Self {
        MonitorVerdict::Violation {
            kind,
            detail: detail.into(),
        }
    }

    pub fn is_accept(&self) -> bool {
        matches!(self, MonitorVerdict::Accept)
    }

    pub fn kind(&self) -> Option<ViolationKind> {
        match self {
            MonitorVerdict::Accept => None,
            MonitorVerdict::Violation { kind, .. } => Some(*kind),
        }
    }
}

impl fmt::Display for MonitorVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonitorVerdict::Accept => f.write_str("accept"),
            MonitorVerdict::Violation { kind, detail } => write!(f, "violation({kind}): {detail}"),
        }
    }
}

/// What happens to a message that fails its check. Either way the session
/// does not advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Drop it.
    #[default]
    Enforce,
    /// Log it and let it through.
    Suppress,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "enforce" => Ok(Mode::Enforce),
            "suppress" => Ok(Mode::Suppress),
            other => Err(format!("unknown monitor mode {other:?}")),
        }
    }
}

impl Mode {
    /// Reads [`MODE_ENV`]. Unset or unrecognised values mean enforce.
    pub fn from_env() -> Mode {
        std::env::var(MODE_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_default()
    }
}

/// Where invitations' protocol references are looked up.
pub trait ProtocolStore: Send + Sync {
    fn load(&self, reference: &str) -> Option<String>;
}

/// Resolves references as file names under a directory.
#[derive(Debug, Clone)]
pub struct DirStore(pub PathBuf);

impl ProtocolStore for DirStore {
    fn load(&self, reference: &str) -> Option<String> {
        std::fs::read_to_string(self.0.join(reference)).ok()
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryStore(pub HashMap<String, String>);

impl MemoryStore {
    /// Serves `global` as `<Name>.scr` and its projections as `<Name>_<Role>.scr`.
    pub fn from_global(global: &GlobalProtocol) -> Result<Self, ProjectionError> {
        let mut store =
            MemoryStore::default().with(format!("{}.scr", global.name), serialize_global(global));
        for (role, report) in project_all(global)? {
            store = store.with(
                format!("{}_{role}.scr", global.name),
                serialize_local(&report.result),
            );
        }
        Ok(store)
    }

    pub fn with(mut self, reference: impl Into<String>, source: impl Into<String>) -> Self {
        self.0.insert(reference.into(), source.into());
        self
    }
}

impl ProtocolStore for MemoryStore {
    fn load(&self, reference: &str) -> Option<String> {
        self.0.get(reference).cloned()
    }
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("cannot resolve protocol {0:?}")]
    UnresolvableProtocol(String),
    #[error("protocol {reference:?} does not parse: {source}")]
    InvalidProtocol {
        reference: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Compile(#[from] FsmError),
    #[error("session {0} already runs a different protocol")]
    ConflictingInvitation(SessionKey),
    #[error("malformed invitation: {0}")]
    MalformedInvitation(String),
}

#[derive(Debug)]
pub struct SessionState {
    pub protocol_ref: String,
    pub fsm: NestedFsm,
    pub cursors: Cursors,
    pub env: Env,
    pub status: SessionStatus,
}

/// One checked message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub key: Option<SessionKey>,
    pub label: String,
    pub from: String,
    pub to: String,
    pub verdict: MonitorVerdict,
}

#[derive(Clone)]
pub struct MonitorConfig {
    pub mode: Mode,
    pub engine: Arc<dyn LogicEngine>,
    /// Keep a log of every check.
    pub trace: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::from_env(),
            engine: Arc::new(Builtin),
            trace: true,
        }
    }
}

impl MonitorConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

type SessionTable = HashMap<SessionKey, Arc<Mutex<SessionState>>>;

/// Checks for one session run one at a time. Distinct sessions proceed in parallel.
pub struct Monitor {
    config: MonitorConfig,
    store: Arc<dyn ProtocolStore>,
    sessions: RwLock<SessionTable>,
    log: Mutex<Vec<LogEntry>>,
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Monitor")
            .field("mode", &self.config.mode)
            .field("sessions", &self.sessions.read().unwrap().len())
            .finish()
    }
}

impl Monitor {
    pub fn new(config: MonitorConfig, store: Arc<dyn ProtocolStore>) -> Self {
        Self {
            config,
            store,
            sessions: RwLock::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    /// Whether a message with this verdict continues to its destination.
    pub fn forwards(&self, verdict: &MonitorVerdict) -> bool {
        verdict.is_accept() || self.config.mode == Mode::Suppress
    }

    pub fn init_session(&self, inv: &ConversationMessage) -> Result<SessionKey, MonitorError> {
        if inv.kind != MessageKind::Invitation {
            return Err(MonitorError::MalformedInvitation(
                "not an invitation".into(),
            ));
        }
        let header = |k: &str| {
            inv.extra(k)
                .ok_or_else(|| MonitorError::MalformedInvitation(format!("missing {k}")))
        };
        let role = header("role")?;
        let reference = header("protocol_ref")?;
        header("principal")?;
        if inv.cid.is_empty() {
            return Err(MonitorError::MalformedInvitation(
                "empty conversation id".into(),
            ));
        }
        let key = SessionKey::new(inv.cid.clone(), role);
        if let Some(existing) = self.sessions.read().unwrap().get(&key) {
            return Self::same_protocol(existing, &key, reference);
        }

        let source = self
            .store
            .load(reference)
            .ok_or_else(|| MonitorError::UnresolvableProtocol(reference.to_owned()))?;
        let lp = parse_local(&source).map_err(|source| MonitorError::InvalidProtocol {
            reference: reference.to_owned(),
            source,
        })?;
        if lp.self_role != role {
            return Err(MonitorError::MalformedInvitation(format!(
                "{reference} is the protocol of {}, not {role}",
                lp.self_role
            )));
        }
        let fsm = compile(&lp)?;
        let state = SessionState {
            protocol_ref: reference.to_owned(),
            cursors: fsm.start(),
            fsm,
            env: Env::new(),
            status: SessionStatus::Active,
        };

        let mut sessions = self.sessions.write().unwrap();
        // another invitation may have raced us here
        if let Some(existing) = sessions.get(&key) {
            return Self::same_protocol(existing, &key, reference);
        }
        sessions.insert(key.clone(), Arc::new(Mutex::new(state)));
        Ok(key)
    }

    fn same_protocol(
        existing: &Mutex<SessionState>,
        key: &SessionKey,
        reference: &str,
    ) -> Result<SessionKey, MonitorError> {
        if existing.lock().unwrap().protocol_ref == reference {
            Ok(key.clone())
        } else {
            Err(MonitorError::ConflictingInvitation(key.clone()))
        }
    }

    /// The monitored session `msg` belongs to: the sender's if this monitor
    /// holds it, otherwise the receiver's.
    fn locate(&self, msg: &ConversationMessage) -> Option<(SessionKey, Arc<Mutex<SessionState>>)> {
        if msg.cid.is_empty() {
            return None;
        }
        let sessions = self.sessions.read().unwrap();
        [&msg.from, &msg.to].into_iter().find_map(|role| {
            let key = SessionKey::new(msg.cid.clone(), role.clone());
            sessions.get(&key).map(|s| (key, Arc::clone(s)))
        })
    }

    pub fn check(&self, msg: &ConversationMessage) -> MonitorVerdict {
        let located = self.locate(msg);
        let verdict = match &located {
            None => MonitorVerdict::violation(
                ViolationKind::UnknownSession,
                format!("no session {} for {} or {}", msg.cid, msg.from, msg.to),
            ),
            Some((_, session)) => self.check_in(&mut session.lock().unwrap(), msg),
        };
        if self.config.trace {
            self.log.lock().unwrap().push(LogEntry {
                key: located.map(|(k, _)| k),
                label: msg.label.clone(),
                from: msg.from.clone(),
                to: msg.to.clone(),
                verdict: verdict.clone(),
            });
        }
        verdict
    }

    fn check_in(&self, state: &mut SessionState, msg: &ConversationMessage) -> MonitorVerdict {
        let verdict = self.decide(state, msg);
        if !verdict.is_accept() {
            state.status = SessionStatus::Violated;
        }
        verdict
    }

    fn decide(&self, state: &mut SessionState, msg: &ConversationMessage) -> MonitorVerdict {
        use ViolationKind::*;
        let SessionState {
            fsm,
            cursors,
            env,
            status,
            ..
        } = state;
        if msg.kind != MessageKind::InSession {
            return MonitorVerdict::violation(
                UnexpectedLabel,
                "invitation inside a running session",
            );
        }
        let triple = Triple::new(msg.label.as_str(), msg.from.as_str(), msg.to.as_str());
        let Some(step) = fsm.step(cursors, &triple) else {
            if fsm.is_finished(cursors) {
                return MonitorVerdict::violation(
                    AfterCompletion,
                    format!("{triple} after the session completed"),
                );
            }
            let enabled = fsm.enabled(cursors);
            let expected: Vec<String> = enabled.iter().map(|(t, _)| t.to_string()).collect();
            let kind = if enabled.iter().any(|(t, _)| t.label == msg.label) {
                WrongPeer
            } else {
                UnexpectedLabel
            };
            return MonitorVerdict::violation(
                kind,
                format!("{triple}, expected one of [{}]", expected.join(", ")),
            );
        };

        let binders = &step.value.var_binders;
        if msg.payload.len() != binders.len() {
            return MonitorVerdict::violation(
                PayloadArity,
                format!(
                    "{triple} carries {} values, expected {}",
                    msg.payload.len(),
                    binders.len()
                ),
            );
        }
        let bound = binders
            .iter()
            .cloned()
            .zip(msg.payload.iter().map(|(_, v)| v.clone()));
        if let Some(assertion) = &step.value.assertion {
            let mut tentative = env.clone();
            tentative.extend(bound);
            match self.config.engine.eval(assertion, &tentative) {
                Ok(true) => *env = tentative,
                Ok(false) => {
                    return MonitorVerdict::violation(
                        AssertionFailed,
                        format!("{triple}: {} is false", assertion.source_text),
                    )
                }
                Err(e) => {
                    return MonitorVerdict::violation(
                        AssertionFailed,
                        format!("{triple}: {}: {e}", assertion.source_text),
                    )
                }
            }
        } else {
            env.extend(bound);
        }
        *cursors = step.cursors;
        *status = if fsm.is_finished(cursors) {
            SessionStatus::Completed
        } else {
            SessionStatus::Active
        };
        MonitorVerdict::Accept
    }

    pub fn session_status(&self, key: &SessionKey) -> SessionStatus {
        match self.sessions.read().unwrap().get(key) {
            Some(s) => s.lock().unwrap().status,
            None => SessionStatus::Unknown,
        }
    }

    /// Runs `f` on the session's state, if the session exists.
    pub fn inspect<R>(&self, key: &SessionKey, f: impl FnOnce(&SessionState) -> R) -> Option<R> {
        let session = self.sessions.read().unwrap().get(key).cloned()?;
        let guard = session.lock().unwrap();
        Some(f(&guard))
    }

    pub fn sessions(&self) -> Vec<SessionKey> {
        let mut keys: Vec<_> = self.sessions.read().unwrap().keys().cloned().collect();
        keys.sort();
        keys
    }

    pub fn trace_log(&self) -> Vec<LogEntry> {
        self.log.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests;
