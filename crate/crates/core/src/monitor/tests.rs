use super::*;
use crate::message::{Payload, Value};

const DAQ_A: &str = include_str!("../../fixtures/DataAquisition_A.scr");
const REF_A: &str = "DataAquisition_A.scr";

fn monitor(mode: Mode) -> Monitor {
    let store = MemoryStore::default().with(REF_A, DAQ_A);
    Monitor::new(MonitorConfig::with_mode(mode), Arc::new(store))
}

fn invite(cid: &str) -> ConversationMessage {
    ConversationMessage::invitation(cid, "U", "A", "agent1", REF_A)
}

fn msg(label: &str, from: &str, to: &str, payload: Payload) -> ConversationMessage {
    ConversationMessage::in_session("1234", from, to, label, payload)
}

fn raw(n: usize) -> ConversationMessage {
    msg(
        "Raw",
        "I",
        "A",
        vec![("data".into(), Value::Bytes(vec![7; n]))],
    )
}

fn info() -> Payload {
    vec![("info".into(), Value::from("temp"))]
}

/// Drives the A session to just before the first `Raw`.
fn polling(m: &Monitor) -> SessionKey {
    let key = m.init_session(&invite("1234")).unwrap();
    for x in [
        msg("Request", "U", "A", info()),
        msg("Request", "A", "I", info()),
        msg("Support", "I", "A", vec![]),
        msg("Poll", "A", "I", vec![]),
    ] {
        assert_eq!(m.check(&x), MonitorVerdict::Accept, "{x:?}");
    }
    key
}

#[test]
fn invitation_starts_at_the_initial_state() {
    let m = monitor(Mode::Enforce);
    let key = m.init_session(&invite("1234")).unwrap();
    assert_eq!(key, SessionKey::new("1234", "A"));
    assert_eq!(m.session_status(&key), SessionStatus::Active);
    let initial = m
        .inspect(&key, |s| (s.cursors.clone(), s.fsm.start()))
        .unwrap();
    assert_eq!(initial.0, initial.1);
    assert_eq!(m.init_session(&invite("1234")).unwrap(), key);
    assert_eq!(m.sessions(), vec![key]);
}

#[test]
fn invitation_errors() {
    let m = monitor(Mode::Enforce);
    let missing = ConversationMessage::invitation("1", "U", "A", "agent1", "missing.scr");
    assert!(
        matches!(m.init_session(&missing), Err(MonitorError::UnresolvableProtocol(r)) if r == "missing.scr")
    );

    m.init_session(&invite("1234")).unwrap();
    let store = MemoryStore::default()
        .with(REF_A, DAQ_A)
        .with("other.scr", DAQ_A);
    let m2 = Monitor::new(MonitorConfig::with_mode(Mode::Enforce), Arc::new(store));
    m2.init_session(&invite("9")).unwrap();
    let conflicting = ConversationMessage::invitation("9", "U", "A", "agent1", "other.scr");
    assert!(matches!(
        m2.init_session(&conflicting),
        Err(MonitorError::ConflictingInvitation(_))
    ));

    let wrong_role = ConversationMessage::invitation("2", "U", "I", "inst", REF_A);
    assert!(matches!(
        m.init_session(&wrong_role),
        Err(MonitorError::MalformedInvitation(_))
    ));
    let bad = MemoryStore::default().with("bad.scr", "local protocol");
    let m3 = Monitor::new(MonitorConfig::default(), Arc::new(bad));
    let inv = ConversationMessage::invitation("3", "U", "A", "a", "bad.scr");
    assert!(matches!(
        m3.init_session(&inv),
        Err(MonitorError::InvalidProtocol { .. })
    ));
}

#[test]
fn request_then_wrong_label() {
    let m = monitor(Mode::Enforce);
    m.init_session(&invite("1234")).unwrap();
    assert_eq!(
        m.check(&msg("Stop", "U", "A", vec![])).kind(),
        Some(ViolationKind::UnexpectedLabel)
    );
    assert_eq!(
        m.check(&msg("Request", "I", "A", info())).kind(),
        Some(ViolationKind::WrongPeer)
    );
    assert_eq!(
        m.check(&msg("Request", "U", "A", vec![])).kind(),
        Some(ViolationKind::PayloadArity)
    );
    assert_eq!(
        m.check(&msg("Request", "U", "A", info())),
        MonitorVerdict::Accept
    );
    let other = ConversationMessage::in_session("777", "U", "A", "Request", info());
    assert_eq!(m.check(&other).kind(), Some(ViolationKind::UnknownSession));
}

#[test]
fn raw_size_boundary() {
    let m = monitor(Mode::Enforce);
    let key = polling(&m);
    let before = m.inspect(&key, |s| s.cursors.clone()).unwrap();
    assert_eq!(
        m.check(&raw(600)).kind(),
        Some(ViolationKind::AssertionFailed)
    );
    assert_eq!(
        m.check(&raw(513)).kind(),
        Some(ViolationKind::AssertionFailed)
    );
    assert_eq!(m.session_status(&key), SessionStatus::Violated);
    assert_eq!(m.inspect(&key, |s| s.cursors.clone()).unwrap(), before);
    assert!(m.inspect(&key, |s| s.env.get("data").is_none()).unwrap());

    assert_eq!(m.check(&raw(512)), MonitorVerdict::Accept);
    assert_eq!(m.session_status(&key), SessionStatus::Active);
    assert_eq!(
        m.inspect(&key, |s| s.env.get("data").cloned()).unwrap(),
        Some(Value::Bytes(vec![7; 512]))
    );
    assert_eq!(
        m.check(&msg("Poll", "A", "I", vec![])),
        MonitorVerdict::Accept
    );
    assert_eq!(m.check(&raw(12)), MonitorVerdict::Accept);
    // binders are overwritten by later messages
    assert_eq!(
        m.inspect(&key, |s| s.env.get("data").cloned()).unwrap(),
        Some(Value::Bytes(vec![7; 12]))
    );
}

#[test]
fn completion_and_after() {
    let m = monitor(Mode::Enforce);
    let key = polling(&m);
    assert!(m.check(&msg("Stop", "I", "A", vec![])).is_accept());
    assert_eq!(m.session_status(&key), SessionStatus::Active);
    assert!(m.check(&msg("Stop", "A", "U", vec![])).is_accept());
    assert_eq!(m.session_status(&key), SessionStatus::Completed);
    assert_eq!(
        m.check(&msg("Poll", "A", "I", vec![])).kind(),
        Some(ViolationKind::AfterCompletion)
    );
    assert_eq!(
        m.session_status(&SessionKey::new("nope", "A")),
        SessionStatus::Unknown
    );
}

#[test]
fn suppress_mode_forwards_without_advancing() {
    let m = monitor(Mode::Suppress);
    let key = polling(&m);
    let before = m.inspect(&key, |s| s.cursors.clone()).unwrap();
    let v = m.check(&raw(1000));
    assert!(m.forwards(&v));
    assert_eq!(m.inspect(&key, |s| s.cursors.clone()).unwrap(), before);
    let e = monitor(Mode::Enforce);
    assert!(!e.forwards(&v));
    assert!(e.forwards(&MonitorVerdict::Accept));
}

#[test]
fn log_records_every_check() {
    let m = monitor(Mode::Enforce);
    polling(&m);
    m.check(&raw(600));
    let log = m.trace_log();
    assert_eq!(log.len(), 5);
    assert_eq!(log[0].label, "Request");
    assert_eq!(log[0].key, Some(SessionKey::new("1234", "A")));
    assert_eq!(log[4].verdict.kind(), Some(ViolationKind::AssertionFailed));
}

#[test]
fn mode_parsing() {
    assert_eq!("Suppress".parse::<Mode>(), Ok(Mode::Suppress));
    assert_eq!(" enforce ".parse::<Mode>(), Ok(Mode::Enforce));
    assert!("lenient".parse::<Mode>().is_err());
}

#[test]
fn sessions_check_concurrently() {
    let m = Arc::new(monitor(Mode::Enforce));
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let m = Arc::clone(&m);
            std::thread::spawn(move || {
                let cid = format!("c{i}");
                m.init_session(&invite(&cid)).unwrap();
                let x = ConversationMessage::in_session(cid.as_str(), "U", "A", "Request", info());
                m.check(&x)
            })
        })
        .collect();
    for h in handles {
        assert!(h.join().unwrap().is_accept());
    }
    assert_eq!(m.sessions().len(), 8);
}
