//! Replays of accepted runs, and of single-point mutants of them, through a
//! monitor. The expected verdict of every mutant comes from the reference
//! semantics in [`super::oracle`], never from the monitor under test.

use std::collections::BTreeMap;
use std::sync::Arc;

use convmon::fsm::Triple;
use convmon::message::{ConversationMessage, Payload, Value};
use convmon::monitor::{
    MemoryStore, Mode, Monitor, MonitorConfig, MonitorVerdict, SessionStatus, ViolationKind,
};
use convmon::projection::project;
use convmon::scenarios;
use convmon::scribble::{parse_global, Assertion, GlobalProtocol, LocalProtocol, Sort};

use super::oracle::{self, Move, Term};

pub const DAQ: &str = include_str!("../../fixtures/DataAquisition.scr");

pub struct Subject {
    pub title: String,
    pub lp: LocalProtocol,
    pub reference: String,
    pub store: Arc<MemoryStore>,
}

fn subjects_of(title: &str, g: &GlobalProtocol) -> Vec<Subject> {
    let store = Arc::new(MemoryStore::from_global(g).expect("projectable"));
    g.roles
        .iter()
        .map(|r| Subject {
            title: format!("{title} at {r}"),
            lp: project(g, r).expect("declared role").result,
            reference: format!("{}_{r}.scr", g.name),
            store: Arc::clone(&store),
        })
        .collect()
}

/// Data acquisition at all three roles, and every benchmark protocol at S and C.
pub fn subjects() -> Vec<Subject> {
    let mut out = subjects_of(
        "data acquisition",
        &parse_global(DAQ).expect("fixture parses"),
    );
    out.extend(subjects_of("session length", &scenarios::session_length()));
    out.extend(subjects_of("payload size", &scenarios::payload_size()));
    for k in 1..=3 {
        out.extend(subjects_of(
            &format!("protocol size {k}"),
            &scenarios::protocol_size(k),
        ));
    }
    out
}

pub fn sample_value(sort: Sort) -> Value {
    match sort {
        Sort::String => Value::from("v"),
        Sort::Int => Value::Int(7),
        Sort::Bool => Value::Bool(true),
        Sort::Data => Value::Bytes(vec![1; 16]),
    }
}

fn message(cid: &str, m: &Move) -> ConversationMessage {
    let payload: Payload = m
        .sig
        .payload
        .iter()
        .map(|f| (f.name.clone(), sample_value(f.sort)))
        .collect();
    ConversationMessage::in_session(
        cid,
        m.triple.sender.as_str(),
        m.triple.receiver.as_str(),
        m.sig.label.as_str(),
        payload,
    )
}

/// The one assertion form the subjects use: `size(v) <= n`.
fn holds(a: &Assertion, payload: &Payload) -> bool {
    let text = a.source_text.replace(' ', "");
    let (lhs, n) = text.split_once("<=").expect("size(v) <= n");
    let var = lhs
        .strip_prefix("size(")
        .and_then(|s| s.strip_suffix(')'))
        .expect("size(v)");
    let n: usize = n.parse().expect("integer bound");
    match payload.iter().find(|(k, _)| k == var).map(|(_, v)| v) {
        Some(Value::Bytes(b)) => b.len() <= n,
        Some(Value::String(s)) => s.len() <= n,
        _ => false,
    }
}

/// What the monitor must say about `msg` when the protocol is at `state`.
pub fn expected(
    lp: &LocalProtocol,
    state: &Term,
    msg: &ConversationMessage,
) -> Option<ViolationKind> {
    let enabled = oracle::moves(lp, state);
    let triple = Triple::new(msg.label.as_str(), msg.from.as_str(), msg.to.as_str());
    if let Some(m) = enabled.iter().find(|m| m.triple == triple) {
        if msg.payload.len() != m.sig.payload.len() {
            return Some(ViolationKind::PayloadArity);
        }
        return match &m.assertion {
            Some(a) if !holds(a, &msg.payload) => Some(ViolationKind::AssertionFailed),
            _ => None,
        };
    }
    if oracle::is_end(state) {
        Some(ViolationKind::AfterCompletion)
    } else if enabled.iter().any(|m| m.triple.label == msg.label) {
        Some(ViolationKind::WrongPeer)
    } else {
        Some(ViolationKind::UnexpectedLabel)
    }
}

/// Single-point edits of `msg`, sent at a state whose allowed moves include `m`.
fn edits(lp: &LocalProtocol, m: &Move, msg: &ConversationMessage) -> Vec<ConversationMessage> {
    let me = lp.self_role.as_str();
    let mut out = Vec::new();

    let mut relabel = msg.clone();
    relabel.label = "Zz".into();
    out.push(relabel);

    let peer = if msg.from == me {
        msg.to.as_str()
    } else {
        msg.from.as_str()
    };
    let others: Vec<&String> = lp.roles.iter().filter(|r| *r != me && *r != peer).collect();
    if others.is_empty() {
        let mut swapped = msg.clone();
        std::mem::swap(&mut swapped.from, &mut swapped.to);
        out.push(swapped);
    }
    for other in others {
        let mut repeer = msg.clone();
        if repeer.from == me {
            repeer.to = other.clone();
        } else {
            repeer.from = other.clone();
        }
        out.push(repeer);
    }

    let mut extra = msg.clone();
    extra.payload.push(("extra".into(), Value::Int(1)));
    out.push(extra);
    if !msg.payload.is_empty() {
        let mut fewer = msg.clone();
        fewer.payload.pop();
        out.push(fewer);
    }

    if m.assertion.is_some() {
        for f in m
            .sig
            .payload
            .iter()
            .filter(|f| matches!(f.sort, Sort::Data | Sort::String))
        {
            let mut big = msg.clone();
            for (k, v) in &mut big.payload {
                if *k == f.name {
                    *v = Value::Bytes(vec![1; 513]);
                }
            }
            out.push(big);
        }
    }
    out
}

fn fresh_monitor(s: &Subject) -> Monitor {
    Monitor::new(
        MonitorConfig {
            trace: false,
            ..MonitorConfig::with_mode(Mode::Enforce)
        },
        s.store.clone(),
    )
}

fn open(monitor: &Monitor, s: &Subject, cid: &str) {
    let inv = ConversationMessage::invitation(
        cid,
        s.lp.self_role.as_str(),
        s.lp.self_role.as_str(),
        "p",
        s.reference.as_str(),
    );
    monitor.init_session(&inv).expect("subject compiles");
}

#[derive(Debug, Default)]
pub struct MutationReport {
    pub runs: usize,
    pub replayed_messages: usize,
    pub mutants: usize,
    pub by_kind: BTreeMap<&'static str, usize>,
    pub failures: Vec<String>,
}

impl MutationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Evenly spaced picks so that large run sets stay affordable.
fn sample<T>(mut v: Vec<T>, max: usize) -> Vec<T> {
    if v.len() <= max {
        return v;
    }
    let stride = v.len().div_ceil(max);
    let mut i = 0;
    v.retain(|_| {
        i += 1;
        (i - 1) % stride == 0
    });
    v
}

/// Replays every complete run of at most `max_len` messages (at most
/// `max_runs` per subject), then every mutant of each run.
pub fn mutation_campaign(subjects: &[Subject], max_len: usize, max_runs: usize) -> MutationReport {
    let mut report = MutationReport::default();
    let mut next_cid = 0usize;
    let mut cid = || {
        next_cid += 1;
        format!("c{next_cid}")
    };
    for s in subjects {
        let runs = sample(oracle::complete_runs(&s.lp, max_len), max_runs);
        let monitor = fresh_monitor(s);
        for run in &runs {
            report.runs += 1;
            let c = cid();
            open(&monitor, s, &c);
            let msgs: Vec<ConversationMessage> = run.iter().map(|m| message(&c, m)).collect();
            for (i, msg) in msgs.iter().enumerate() {
                report.replayed_messages += 1;
                let v = monitor.check(msg);
                if !v.is_accept() {
                    report
                        .failures
                        .push(format!("{}: accepted run refused at {i}: {v}", s.title));
                }
            }
            let status = monitor.session_status(&convmon::monitor::SessionKey::new(
                c.as_str(),
                s.lp.self_role.as_str(),
            ));
            if status != SessionStatus::Completed {
                report
                    .failures
                    .push(format!("{}: run ended with status {status:?}", s.title));
            }

            // Mutate position i, keeping the prefix intact. Position
            // `run.len()` appends a message after completion.
            let mut state = oracle::start(&s.lp);
            for i in 0..=run.len() {
                let candidates = match run.get(i) {
                    Some(m) => edits(&s.lp, m, &msgs[i]),
                    None => msgs.first().cloned().into_iter().collect(),
                };
                for mutant in candidates {
                    let Some(kind) = expected(&s.lp, &state, &mutant) else {
                        continue;
                    };
                    report.mutants += 1;
                    *report.by_kind.entry(kind.as_str()).or_default() += 1;
                    let c = cid();
                    open(&monitor, s, &c);
                    let retag = |m: &ConversationMessage| ConversationMessage {
                        cid: c.clone(),
                        ..m.clone()
                    };
                    for (j, m) in msgs[..i].iter().enumerate() {
                        let v = monitor.check(&retag(m));
                        if !v.is_accept() {
                            report
                                .failures
                                .push(format!("{}: prefix refused at {j}: {v}", s.title));
                        }
                    }
                    match monitor.check(&retag(&mutant)) {
                        MonitorVerdict::Violation { kind: got, .. } if got == kind => {}
                        v => report.failures.push(format!(
                            "{}: mutant {} {}->{} at {i}: expected {}, got {v}",
                            s.title,
                            mutant.label,
                            mutant.from,
                            mutant.to,
                            kind.as_str()
                        )),
                    }
                }
                if let Some(m) = run.get(i) {
                    state = m.next.clone();
                }
            }
        }
    }
    report
}

/// The agent's verdict on a `Raw` of `n` bytes once polling has started.
pub fn raw_verdict(n: usize) -> MonitorVerdict {
    let g = parse_global(DAQ).expect("fixture parses");
    let m = Monitor::new(
        MonitorConfig::with_mode(Mode::Enforce),
        Arc::new(MemoryStore::from_global(&g).unwrap()),
    );
    let cid = "raw";
    m.init_session(&ConversationMessage::invitation(
        cid,
        "A",
        "A",
        "p",
        "DataAquisition_A.scr",
    ))
    .unwrap();
    let info = || vec![("info".into(), Value::from("t"))];
    for (from, to, label, payload) in [
        ("U", "A", "Request", info()),
        ("A", "I", "Request", info()),
        ("I", "A", "Support", vec![]),
        ("A", "I", "Poll", vec![]),
    ] {
        let v = m.check(&ConversationMessage::in_session(
            cid, from, to, label, payload,
        ));
        assert!(v.is_accept(), "{label}: {v}");
    }
    m.check(&ConversationMessage::in_session(
        cid,
        "I",
        "A",
        "Raw",
        vec![("data".into(), Value::Bytes(vec![0; n]))],
    ))
}
