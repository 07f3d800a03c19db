use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::{Duration, Instant};

use uuid::Uuid;

use super::*;
use crate::message::{ConversationMessage, MessageKind, Payload};
use crate::monitor::{Monitor, ProtocolStore, SessionKey, SessionStatus};
use crate::scribble::parse_global;

type Callback = Box<dyn FnOnce(String, Payload) + Send>;
type Routing = BTreeMap<String, String>;

const AUDIT: &str = "audit";

fn stamp(msg: &mut ConversationMessage, tag: String) {
    match msg.extras.get_mut(AUDIT) {
        Some(trail) => {
            trail.push(',');
            trail.push_str(&tag);
        }
        None => {
            msg.extras.insert(AUDIT.to_owned(), tag);
        }
    }
}

/// A message the inbox refused because it skipped a monitor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub wire: String,
    pub reason: String,
}

#[derive(Default)]
struct InboxState {
    queue: VecDeque<ConversationMessage>,
    callbacks: HashMap<String, Callback>,
    /// Stopped. Nothing more is delivered.
    closed: bool,
    /// The monitored session completed. Queued messages are still delivered.
    finished: bool,
}

/// Decides whether a consumed message reaches the application, and whether
/// it completed the session.
type Gate = Box<dyn Fn(ConversationMessage) -> Option<(ConversationMessage, bool)> + Send + Sync>;

struct Inbox {
    state: Mutex<InboxState>,
    changed: Condvar,
    gate: Option<Gate>,
}

impl Inbox {
    fn new(gate: Option<Gate>) -> Self {
        Self {
            state: Mutex::default(),
            changed: Condvar::new(),
            gate,
        }
    }

    fn deliver(&self, msg: ConversationMessage) {
        let mut s = self.state.lock().unwrap();
        if !s.closed {
            s.queue.push_back(msg);
            self.changed.notify_all();
        }
    }

    fn finish(&self) {
        self.state.lock().unwrap().finished = true;
        self.changed.notify_all();
    }

    fn close(&self) {
        let mut s = self.state.lock().unwrap();
        s.closed = true;
        s.callbacks.clear();
        self.changed.notify_all();
    }

    fn pass(&self, msg: ConversationMessage) -> Option<ConversationMessage> {
        let Some(gate) = &self.gate else {
            return Some(msg);
        };
        let (msg, completed) = gate(msg)?;
        if completed {
            self.finish();
        }
        Some(msg)
    }

    fn take(
        &self,
        from: &[&str],
        timeout: Duration,
    ) -> Result<ConversationMessage, TransportError> {
        let deadline = Instant::now() + timeout;
        loop {
            let msg = {
                let mut s = self.state.lock().unwrap();
                loop {
                    if let Some(i) = s.queue.iter().position(|m| from.contains(&m.from.as_str())) {
                        break s.queue.remove(i).expect("position is in range");
                    }
                    if s.closed || s.finished {
                        return Err(TransportError::SessionEnded);
                    }
                    let left = deadline
                        .checked_duration_since(Instant::now())
                        .ok_or(TransportError::Timeout)?;
                    s = self.changed.wait_timeout(s, left).unwrap().0;
                }
            };
            if let Some(m) = self.pass(msg) {
                return Ok(m);
            }
        }
    }

    /// Runs callbacks one at a time until the inbox closes.
    fn dispatch(&self) {
        loop {
            let mut s = self.state.lock().unwrap();
            let (msg, cb) = loop {
                if s.closed {
                    return;
                }
                let ready = s
                    .queue
                    .iter()
                    .position(|m| s.callbacks.contains_key(&m.from));
                if let Some(i) = ready {
                    let msg = s.queue.remove(i).expect("position is in range");
                    let cb = s.callbacks.remove(&msg.from).expect("checked above");
                    break (msg, cb);
                }
                s = self.changed.wait(s).unwrap();
            };
            drop(s);
            let from = msg.from.clone();
            match self.pass(msg) {
                Some(m) => cb(m.label, m.payload),
                None => {
                    // refused: keep waiting for the next message from this sender
                    let mut s = self.state.lock().unwrap();
                    if !s.closed {
                        s.callbacks.entry(from).or_insert(cb);
                    }
                }
            }
        }
    }
}

struct Joined {
    cid: String,
    role: String,
    routing: Arc<Routing>,
    inbox: Arc<Inbox>,
    bindings: Vec<BindingId>,
    queues: Vec<String>,
    dispatching: bool,
}

struct Inner {
    broker: Arc<Broker>,
    principal: String,
    mediation: Mediation,
    monitor: Option<Arc<Monitor>>,
    store: Arc<dyn ProtocolStore>,
    timeout_ms: AtomicU64,
    joined: Mutex<Option<Joined>>,
    last_key: Mutex<Option<SessionKey>>,
    rejected: Arc<Mutex<Vec<Rejection>>>,
    own_queues: Vec<String>,
    own_bindings: Vec<BindingId>,
}

impl Drop for Inner {
    fn drop(&mut self) {
        if let Some(j) = self.joined.get_mut().unwrap().take() {
            teardown(&self.broker, j);
        }
        for b in &self.own_bindings {
            self.broker.unbind(*b);
        }
        for q in &self.own_queues {
            self.broker.delete_queue(q);
        }
    }
}

fn teardown(broker: &Broker, j: Joined) {
    for b in j.bindings {
        broker.unbind(b);
    }
    for q in &j.queues {
        broker.delete_queue(q);
    }
    j.inbox.close();
}

/// A principal's handle on the broker. Clones share the same endpoint.
#[derive(Clone)]
pub struct Endpoint(Arc<Inner>);

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Endpoint")
            .field("principal", &self.0.principal)
            .field("mediation", &self.0.mediation)
            .field("session", &self.session_key())
            .finish()
    }
}

fn check_name(what: &str, name: &str) -> Result<(), TransportError> {
    if name.is_empty() || name.contains(['.', '*', '#', ':', ',']) {
        return Err(TransportError::Config(format!(
            "{what} {name:?} is not a plain name"
        )));
    }
    Ok(())
}

/// Parses `wire`, or records why not and gives up.
fn parse_or_reject(wire: &str, rejected: &Mutex<Vec<Rejection>>) -> Option<ConversationMessage> {
    match ConversationMessage::from_wire(wire) {
        Ok(m) => Some(m),
        Err(e) => {
            rejected.lock().unwrap().push(Rejection {
                wire: wire.to_owned(),
                reason: e.to_string(),
            });
            None
        }
    }
}

impl Endpoint {
    /// Connects `principal` to the broker. One endpoint per principal.
    pub fn new(
        broker: &Arc<Broker>,
        principal: &str,
        mediation: Mediation,
        store: Arc<dyn ProtocolStore>,
    ) -> Result<Endpoint, TransportError> {
        check_name("principal", principal)?;
        let invites = invitation_queue(principal);
        if broker.has_queue(&invites) {
            return Err(TransportError::Config(format!(
                "principal {principal} is already connected"
            )));
        }
        let monitor = match &mediation {
            Mediation::Monitor(cfg) => {
                Some(Arc::new(Monitor::new(cfg.clone(), Arc::clone(&store))))
            }
            _ => None,
        };
        let rejected = Arc::new(Mutex::new(Vec::new()));
        let own_exchange = principal_exchange(principal);
        broker.declare_exchange(&own_exchange);
        broker.declare_exchange(INVITATION_EXCHANGE);
        broker.declare_queue(&invites);
        let mut own_queues = vec![invites.clone()];
        let mut own_bindings = Vec::new();
        let key = format!("invite.{principal}");

        // Accepting side of invitations. The session's inbound queue is bound
        // here, before the invitee joins, so early messages wait for it.
        let in_q = format!("invite-in:{principal}");
        {
            let weak = Arc::downgrade(broker);
            let tag = format!("in:{principal}");
            let rej = Arc::clone(&rejected);
            let mon = monitor.clone();
            let target = invites.clone();
            let mediated = mediation.mediated();
            broker.declare_queue(&in_q);
            broker.consume(
                &in_q,
                Arc::new(move |wire| {
                    let (Some(broker), Some(mut msg)) =
                        (weak.upgrade(), parse_or_reject(&wire, &rej))
                    else {
                        return;
                    };
                    if let Some(m) = &mon {
                        if let Err(e) = m.init_session(&msg) {
                            msg.extras.insert("monitor_error".into(), e.to_string());
                        }
                    }
                    let role = msg.extra("role").unwrap_or_default().to_owned();
                    if check_name("role", &role).is_ok() {
                        let queue = inbox_queue(&msg.cid, &role);
                        let exchange = session_exchange(&msg.cid);
                        broker.declare_exchange(&exchange);
                        broker.declare_queue(&queue);
                        broker.bind(&exchange, &routing_key(&msg.cid, "*", &role), &queue);
                    }
                    if mediated {
                        stamp(&mut msg, tag.clone());
                    }
                    broker.push(&target, msg.to_wire());
                }),
            );
        }
        own_queues.push(in_q.clone());

        if mediation.mediated() {
            let weak = Arc::downgrade(broker);
            let out_q = format!("invite-out:{principal}");
            let tag = format!("out:{principal}");
            let rej = Arc::clone(&rejected);
            broker.declare_queue(&out_q);
            broker.consume(
                &out_q,
                Arc::new(move |wire| {
                    let (Some(broker), Some(mut msg)) =
                        (weak.upgrade(), parse_or_reject(&wire, &rej))
                    else {
                        return;
                    };
                    stamp(&mut msg, tag.clone());
                    let key = format!("invite.{}", msg.extra("principal").unwrap_or_default());
                    broker.publish(INVITATION_EXCHANGE, &key, msg.to_wire());
                }),
            );
            own_bindings.extend(broker.bind(&own_exchange, "invite.*", &out_q));

            own_bindings.extend(broker.bind(INVITATION_EXCHANGE, &key, &in_q));
            own_queues.push(out_q);
        } else {
            own_bindings.extend(broker.bind(INVITATION_EXCHANGE, &key, &in_q));
        }

        Ok(Endpoint(Arc::new(Inner {
            broker: Arc::clone(broker),
            principal: principal.to_owned(),
            mediation,
            monitor,
            store,
            timeout_ms: AtomicU64::new(10_000),
            joined: Mutex::new(None),
            last_key: Mutex::new(None),
            rejected,
            own_queues,
            own_bindings,
        })))
    }

    pub fn principal(&self) -> &str {
        &self.0.principal
    }

    pub fn mediation(&self) -> &Mediation {
        &self.0.mediation
    }

    pub fn monitor(&self) -> Option<&Arc<Monitor>> {
        self.0.monitor.as_ref()
    }

    pub fn broker(&self) -> &Arc<Broker> {
        &self.0.broker
    }

    /// Bound on blocking `join` and `receive`.
    pub fn set_timeout(&self, t: Duration) {
        self.0
            .timeout_ms
            .store(t.as_millis() as u64, Ordering::Relaxed);
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.0.timeout_ms.load(Ordering::Relaxed))
    }

    /// The current session, or the last one after `stop`.
    pub fn session_key(&self) -> Option<SessionKey> {
        self.0.last_key.lock().unwrap().clone()
    }

    pub fn cid(&self) -> Option<String> {
        self.0
            .joined
            .lock()
            .unwrap()
            .as_ref()
            .map(|j| j.cid.clone())
    }

    pub fn role(&self) -> Option<String> {
        self.0
            .joined
            .lock()
            .unwrap()
            .as_ref()
            .map(|j| j.role.clone())
    }

    /// This endpoint's monitor's view of its session.
    pub fn status(&self) -> SessionStatus {
        match (self.monitor(), self.session_key()) {
            (Some(m), Some(k)) => m.session_status(&k),
            _ => SessionStatus::Unknown,
        }
    }

    pub fn rejected(&self) -> Vec<Rejection> {
        self.0.rejected.lock().unwrap().clone()
    }

    fn resolve_protocol(&self, name: &str) -> Option<crate::scribble::GlobalProtocol> {
        let source = self
            .0
            .store
            .load(name)
            .or_else(|| self.0.store.load(&format!("{name}.scr")))?;
        parse_global(&source).ok()
    }

    /// Starts a conversation: invites every configured principal, this one
    /// included, then joins in this principal's configured role.
    pub fn create(
        &self,
        protocol: &str,
        config: &InvitationConfig,
    ) -> Result<String, TransportError> {
        config.validate()?;
        let global = self
            .resolve_protocol(protocol)
            .ok_or_else(|| TransportError::UnknownProtocol(protocol.to_owned()))?;
        let configured: BTreeSet<&str> = config.entries.iter().map(|e| e.role.as_str()).collect();
        let missing: Vec<String> = global
            .roles
            .iter()
            .filter(|r| !configured.contains(r.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(TransportError::IncompleteConfig(missing));
        }
        if let Some(e) = config
            .entries
            .iter()
            .find(|e| !global.roles.contains(&e.role))
        {
            return Err(TransportError::Config(format!(
                "{protocol} has no role {}",
                e.role
            )));
        }
        for e in &config.entries {
            check_name("role", &e.role)?;
            check_name("principal", &e.principal)?;
        }
        let own = config
            .entries
            .iter()
            .find(|e| e.principal == self.0.principal)
            .ok_or_else(|| TransportError::Config(format!("{} plays no role", self.0.principal)))?;

        let cid = Uuid::new_v4().to_string();
        let broker = &self.0.broker;
        broker.declare_exchange(&session_exchange(&cid));
        broker.declare_queue(&ack_queue(&cid));
        let routing: Routing = config
            .entries
            .iter()
            .map(|e| (e.role.clone(), e.principal.clone()))
            .collect();
        let routing = serde_json::to_string(&routing).expect("string map");
        for e in &config.entries {
            let mut inv = ConversationMessage::invitation(
                cid.as_str(),
                own.role.as_str(),
                e.role.as_str(),
                e.principal.as_str(),
                e.capability.as_str(),
            );
            inv.extras.insert("routing".into(), routing.clone());
            inv.extras.insert("protocol".into(), protocol.to_owned());
            let key = format!("invite.{}", e.principal);
            if self.0.mediation.mediated() {
                broker.publish(&principal_exchange(&self.0.principal), &key, inv.to_wire());
            } else {
                broker.publish(INVITATION_EXCHANGE, &key, inv.to_wire());
            }
        }
        let cid = self.join(&own.role, &own.principal)?;
        // Acks are the creator's to collect, so the queue goes when it stops.
        if let Some(j) = self.0.joined.lock().unwrap().as_mut() {
            j.queues.push(ack_queue(&cid));
        }
        Ok(cid)
    }

    /// Waits for an invitation and enters its conversation. Joining again in
    /// the role already held is a no-op.
    pub fn join(&self, role: &str, principal: &str) -> Result<String, TransportError> {
        if principal != self.0.principal {
            return Err(TransportError::PrincipalMismatch(self.0.principal.clone()));
        }
        if let Some(j) = self.0.joined.lock().unwrap().as_ref() {
            return if j.role == role {
                Ok(j.cid.clone())
            } else {
                Err(TransportError::AlreadyJoined(j.role.clone()))
            };
        }
        let broker = &self.0.broker;
        let wire = broker
            .pop(&invitation_queue(principal), self.timeout())
            .ok_or(TransportError::Timeout)?;
        let inv = ConversationMessage::from_wire(&wire)
            .map_err(|e| TransportError::Config(e.to_string()))?;
        if inv.kind != MessageKind::Invitation {
            return Err(TransportError::Config("expected an invitation".into()));
        }
        let invited = inv.extra("role").unwrap_or_default();
        if invited != role {
            return Err(TransportError::RoleMismatch {
                expected: role.to_owned(),
                found: invited.to_owned(),
            });
        }
        if let Some(e) = inv.extra("monitor_error") {
            return Err(TransportError::Monitor(e.to_owned()));
        }
        let routing: Routing = inv
            .extra("routing")
            .and_then(|r| serde_json::from_str(r).ok())
            .unwrap_or_default();
        if self.0.mediation.mediated() {
            let creator = routing
                .get(&inv.from)
                .map(String::as_str)
                .unwrap_or_default();
            let expected = format!("out:{creator},in:{principal}");
            if inv.extra(AUDIT) != Some(expected.as_str()) {
                self.0.rejected.lock().unwrap().push(Rejection {
                    wire,
                    reason: "invitation was not mediated".into(),
                });
                return Err(TransportError::Monitor("unmediated invitation".into()));
            }
        }

        let joined = self.attach(&inv.cid, role, Arc::new(routing));
        let cid = joined.cid.clone();
        *self.0.last_key.lock().unwrap() = Some(SessionKey::new(cid.as_str(), role));
        *self.0.joined.lock().unwrap() = Some(joined);

        let mut ack = ConversationMessage::invitation(
            cid.as_str(),
            role,
            role,
            principal,
            inv.extra("protocol_ref").unwrap_or_default(),
        );
        ack.extras.insert("ack".into(), "true".into());
        broker.push(&ack_queue(&cid), ack.to_wire());
        Ok(cid)
    }

    /// Declares and binds this endpoint's queues for one conversation.
    fn attach(&self, cid: &str, role: &str, routing: Arc<Routing>) -> Joined {
        let broker = &self.0.broker;
        let principal = self.0.principal.clone();
        let mediated = self.0.mediation.mediated();
        let key = SessionKey::new(cid, role);
        let gate = mediated.then(|| self.gate(key.clone(), Arc::clone(&routing)));
        let inbox = Arc::new(Inbox::new(gate));
        let session_x = session_exchange(cid);
        broker.declare_exchange(&session_x);

        // Bound to the session exchange when the invitation arrived.
        let inbox_q = inbox_queue(cid, role);
        broker.declare_queue(&inbox_q);
        {
            let inbox = Arc::clone(&inbox);
            let rej = Arc::clone(&self.0.rejected);
            broker.consume(
                &inbox_q,
                Arc::new(move |wire| {
                    if let Some(msg) = parse_or_reject(&wire, &rej) {
                        inbox.deliver(msg);
                    }
                }),
            );
        }
        let mut queues = vec![inbox_q];
        let mut bindings = Vec::new();

        if mediated {
            let out_q = format!("out:{cid}:{role}");
            let weak: Weak<Broker> = Arc::downgrade(broker);
            let rej = Arc::clone(&self.0.rejected);
            let mon = self.0.monitor.clone();
            let finished = Arc::clone(&inbox);
            let tag = format!("out:{principal}");
            broker.declare_queue(&out_q);
            broker.consume(
                &out_q,
                Arc::new(move |wire: String| {
                    let (Some(broker), Some(mut msg)) =
                        (weak.upgrade(), parse_or_reject(&wire, &rej))
                    else {
                        return;
                    };
                    let mut completed = false;
                    if let Some(m) = &mon {
                        let verdict = m.check(&msg);
                        completed = m.session_status(&key) == SessionStatus::Completed;
                        if !m.forwards(&verdict) {
                            return;
                        }
                    }
                    stamp(&mut msg, tag.clone());
                    broker.publish(
                        &session_exchange(&msg.cid),
                        &routing_key(&msg.cid, &msg.from, &msg.to),
                        msg.to_wire(),
                    );
                    if completed {
                        finished.finish();
                    }
                }),
            );
            bindings.extend(broker.bind(
                &principal_exchange(&principal),
                &routing_key(cid, role, "*"),
                &out_q,
            ));
            queues.push(out_q);
        }

        Joined {
            cid: cid.to_owned(),
            role: role.to_owned(),
            routing,
            inbox,
            bindings,
            queues,
            dispatching: false,
        }
    }

    /// The receiving monitor, applied as the endpoint consumes each message
    /// so that checks follow the endpoint's own order of actions. A message
    /// must come out of it stamped by both monitors.
    fn gate(&self, key: SessionKey, routing: Arc<Routing>) -> Gate {
        let rej = Arc::clone(&self.0.rejected);
        let mon = self.0.monitor.clone();
        let principal = self.0.principal.clone();
        Box::new(move |mut msg: ConversationMessage| {
            let sender = routing.get(&msg.from).map(String::as_str).unwrap_or("?");
            let reject = |msg: &ConversationMessage, reason: String| {
                rej.lock().unwrap().push(Rejection {
                    wire: msg.to_wire(),
                    reason,
                });
                None
            };
            let sent = format!("out:{sender}");
            if msg.extra(AUDIT) != Some(sent.as_str()) {
                let trail = msg.extra(AUDIT).unwrap_or("").to_owned();
                return reject(
                    &msg,
                    format!("audit trail {trail:?}, expected {sent:?} before delivery"),
                );
            }
            let mut completed = false;
            if let Some(m) = &mon {
                let verdict = m.check(&msg);
                completed = m.session_status(&key) == SessionStatus::Completed;
                if !m.forwards(&verdict) {
                    return None;
                }
            }
            stamp(&mut msg, format!("in:{principal}"));
            let expected = format!("{sent},in:{principal}");
            if msg.extra(AUDIT) != Some(expected.as_str()) {
                return reject(&msg, format!("audit trail is not {expected:?}"));
            }
            Some((msg, completed))
        })
    }

    /// Publishes without waiting for the receiver. A message the sender's
    /// monitor drops still counts as sent.
    pub fn send(&self, to: &str, label: &str, payload: Payload) -> Result<(), TransportError> {
        let (cid, role) = {
            let guard = self.0.joined.lock().unwrap();
            let j = guard.as_ref().ok_or(TransportError::NotJoined)?;
            if !j.routing.contains_key(to) {
                return Err(TransportError::UnknownPeerRole(to.to_owned()));
            }
            (j.cid.clone(), j.role.clone())
        };
        let msg = ConversationMessage::in_session(cid.as_str(), role.as_str(), to, label, payload);
        let key = routing_key(&cid, &role, to);
        let exchange = if self.0.mediation.mediated() {
            principal_exchange(&self.0.principal)
        } else {
            session_exchange(&cid)
        };
        self.0.broker.publish(&exchange, &key, msg.to_wire());
        Ok(())
    }

    fn inbox(&self) -> Result<Arc<Inbox>, TransportError> {
        let guard = self.0.joined.lock().unwrap();
        Ok(Arc::clone(
            &guard.as_ref().ok_or(TransportError::NotJoined)?.inbox,
        ))
    }

    /// Blocks for the next message from `from`.
    pub fn receive(&self, from: &str) -> Result<(String, Payload), TransportError> {
        self.receive_timeout(from, self.timeout())
    }

    pub fn receive_timeout(
        &self,
        from: &str,
        timeout: Duration,
    ) -> Result<(String, Payload), TransportError> {
        let msg = self.inbox()?.take(&[from], timeout)?;
        Ok((msg.label, msg.payload))
    }

    /// Blocks for the next message from any of `from`, returning its sender too.
    pub fn receive_any(&self, from: &[&str]) -> Result<(String, String, Payload), TransportError> {
        let msg = self.inbox()?.take(from, self.timeout())?;
        Ok((msg.from, msg.label, msg.payload))
    }

    /// Calls `callback` once with the next message from `from`, on this
    /// endpoint's dispatch thread.
    pub fn receive_async(
        &self,
        from: &str,
        callback: impl FnOnce(String, Payload) + Send + 'static,
    ) -> Result<(), TransportError> {
        let mut guard = self.0.joined.lock().unwrap();
        let j = guard.as_mut().ok_or(TransportError::NotJoined)?;
        {
            let mut s = j.inbox.state.lock().unwrap();
            if s.callbacks.contains_key(from) {
                return Err(TransportError::DuplicateRegistration(from.to_owned()));
            }
            s.callbacks.insert(from.to_owned(), Box::new(callback));
            j.inbox.changed.notify_all();
        }
        if !j.dispatching {
            j.dispatching = true;
            let inbox = Arc::clone(&j.inbox);
            std::thread::Builder::new()
                .name(format!("dispatch-{}", self.0.principal))
                .spawn(move || inbox.dispatch())
                .expect("spawn dispatcher");
        }
        Ok(())
    }

    /// Leaves the conversation. Pending receives end with `SessionEnded`.
    pub fn stop(&self) {
        let joined = self.0.joined.lock().unwrap().take();
        if let Some(j) = joined {
            teardown(&self.0.broker, j);
        }
    }

    /// Waits until `n` principals have accepted the invitations of the
    /// conversation this endpoint created, returning their roles.
    pub fn await_accepts(
        &self,
        n: usize,
        timeout: Duration,
    ) -> Result<Vec<String>, TransportError> {
        let cid = self.cid().ok_or(TransportError::NotJoined)?;
        let deadline = Instant::now() + timeout;
        let mut roles = Vec::new();
        while roles.len() < n {
            let left = deadline
                .checked_duration_since(Instant::now())
                .ok_or(TransportError::Timeout)?;
            let wire = self
                .0
                .broker
                .pop(&ack_queue(&cid), left)
                .ok_or(TransportError::Timeout)?;
            if let Ok(ack) = ConversationMessage::from_wire(&wire) {
                roles.push(ack.extra("role").unwrap_or_default().to_owned());
            }
        }
        Ok(roles)
    }
}
