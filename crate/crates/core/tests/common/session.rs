//! The data acquisition conversation over the broker, with a user client in
//! either blocking or callback style against scripted agent and instrument.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use convmon::message::{Payload, Value};
use convmon::monitor::{MemoryStore, Mode, ProtocolStore, SessionStatus};
use convmon::scribble::parse_global;
use convmon::transport::{Broker, Endpoint, InvitationConfig, Mediation};

use super::mutants::DAQ;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Threaded,
    EventDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The instrument supports the request and serves this many polls.
    Supported(usize),
    NotSupported,
}

/// One monitor log line with the conversation id left out.
pub type LogLine = (String, String, String, String, String);

#[derive(Debug)]
pub struct Outcome {
    pub formatted: usize,
    pub status: BTreeMap<String, SessionStatus>,
    pub logs: BTreeMap<String, Vec<LogLine>>,
    pub rejected: usize,
}

fn config() -> InvitationConfig {
    InvitationConfig::new([
        ("U", "alice", "DataAquisition_U.scr"),
        ("A", "agent1", "DataAquisition_A.scr"),
        ("I", "inst7", "DataAquisition_I.scr"),
    ])
}

fn data(n: usize) -> Payload {
    vec![("data".into(), Value::Bytes(vec![0x42; n]))]
}

fn agent(a: Endpoint) {
    a.join("A", "agent1").unwrap();
    let (label, payload) = a.receive("U").unwrap();
    assert_eq!(label, "Request");
    a.send("I", "Request", payload).unwrap();
    match a.receive("I").unwrap().0.as_str() {
        "Support" => loop {
            a.send("I", "Poll", vec![]).unwrap();
            match a.receive("I").unwrap().0.as_str() {
                "Raw" => {}
                "Stop" => {
                    a.send("U", "Stop", vec![]).unwrap();
                    break;
                }
                other => panic!("agent got {other}"),
            }
        },
        "NotSupported" => {
            a.send("I", "Stop", vec![]).unwrap();
            a.send("U", "Stop", vec![]).unwrap();
        }
        other => panic!("agent got {other}"),
    }
    a.stop();
}

fn instrument(i: Endpoint, branch: Branch) {
    i.join("I", "inst7").unwrap();
    assert_eq!(i.receive("A").unwrap().0, "Request");
    match branch {
        Branch::Supported(polls) => {
            i.send("A", "Support", vec![]).unwrap();
            for _ in 0..polls {
                assert_eq!(i.receive("A").unwrap().0, "Poll");
                i.send("A", "Raw", data(512)).unwrap();
                i.send("U", "Formatted", data(64)).unwrap();
            }
            assert_eq!(i.receive("A").unwrap().0, "Poll");
            i.send("A", "Stop", vec![]).unwrap();
        }
        Branch::NotSupported => {
            i.send("A", "NotSupported", vec![]).unwrap();
            assert_eq!(i.receive("A").unwrap().0, "Stop");
        }
    }
    i.stop();
}

fn request() -> Payload {
    vec![("info".into(), Value::from("temperature"))]
}

fn threaded_user(u: &Endpoint) -> usize {
    u.create("DataAquisition", &config()).unwrap();
    u.send("A", "Request", request()).unwrap();
    let mut formatted = 0;
    loop {
        let (from, label, _) = u.receive_any(&["I", "A"]).unwrap();
        match (from.as_str(), label.as_str()) {
            ("I", "Formatted") => formatted += 1,
            ("A", "Stop") => break,
            other => panic!("user got {other:?}"),
        }
    }
    u.stop();
    formatted
}

fn on_data(u: Endpoint, count: Arc<AtomicUsize>) {
    let again = u.clone();
    u.receive_async("I", move |label, _| {
        assert_eq!(label, "Formatted");
        count.fetch_add(1, Ordering::SeqCst);
        on_data(again, count);
    })
    .unwrap();
}

fn event_driven_user(u: &Endpoint) -> usize {
    u.create("DataAquisition", &config()).unwrap();
    u.send("A", "Request", request()).unwrap();
    let count = Arc::new(AtomicUsize::new(0));
    let (done, finished) = mpsc::channel();
    on_data(u.clone(), Arc::clone(&count));
    let conv = u.clone();
    u.receive_async("A", move |label, _| {
        assert_eq!(label, "Stop");
        conv.stop();
        done.send(()).unwrap();
    })
    .unwrap();
    finished
        .recv_timeout(Duration::from_secs(10))
        .expect("session ends");
    count.load(Ordering::SeqCst)
}

pub fn run(style: Style, branch: Branch) -> Outcome {
    let g = parse_global(DAQ).unwrap();
    let store: Arc<dyn ProtocolStore> = Arc::new(MemoryStore::from_global(&g).unwrap());
    let broker = Broker::new();
    let ep = |p: &str| {
        let e = Endpoint::new(
            &broker,
            p,
            Mediation::monitor(Mode::Enforce),
            Arc::clone(&store),
        )
        .unwrap();
        e.set_timeout(Duration::from_secs(10));
        e
    };
    let (u, a, i) = (ep("alice"), ep("agent1"), ep("inst7"));
    let agent_t = {
        let a = a.clone();
        thread::spawn(move || agent(a))
    };
    let instrument_t = {
        let i = i.clone();
        thread::spawn(move || instrument(i, branch))
    };
    let formatted = match style {
        Style::Threaded => threaded_user(&u),
        Style::EventDriven => event_driven_user(&u),
    };
    agent_t.join().unwrap();
    instrument_t.join().unwrap();

    let mut status = BTreeMap::new();
    let mut logs = BTreeMap::new();
    let mut rejected = 0;
    for (role, e) in [("U", &u), ("A", &a), ("I", &i)] {
        status.insert(role.to_owned(), e.status());
        rejected += e.rejected().len();
        let log = e
            .monitor()
            .unwrap()
            .trace_log()
            .into_iter()
            .map(|l| {
                let role = l.key.map(|k| k.role).unwrap_or_default();
                (role, l.label, l.from, l.to, l.verdict.to_string())
            })
            .collect();
        logs.insert(role.to_owned(), log);
    }
    Outcome {
        formatted,
        status,
        logs,
        rejected,
    }
}
