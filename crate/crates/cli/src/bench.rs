//! Session-completion benchmarks for the three mediation cases.
//!
//! A server `S` and client `C` run complete sessions back to back on one
//! broker. Each configuration is timed from `create` until both endpoints
//! have stopped.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use convmon::message::{Payload, Value};
use convmon::monitor::{MemoryStore, MonitorConfig, ProtocolStore};
use convmon::scenarios::{self, CLIENT, SERVER};
use convmon::scribble::GlobalProtocol;
use convmon::transport::{Broker, Endpoint, InvitationConfig, Mediation, TransportError};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_REPETITIONS: usize = 100;
pub const WARMUP: usize = 10;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("scenario setup failed: {0}")]
    ScenarioSetup(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("session failed: {0}")]
    Session(#[from] TransportError),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioId {
    SessionLength,
    ProtocolSize,
    PayloadSize,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [
        ScenarioId::SessionLength,
        ScenarioId::ProtocolSize,
        ScenarioId::PayloadSize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::SessionLength => "session-length",
            ScenarioId::ProtocolSize => "protocol-size",
            ScenarioId::PayloadSize => "payload-size",
        }
    }

    /// The sweep used when no parameters are given.
    pub fn default_params(self) -> Vec<u64> {
        match self {
            ScenarioId::SessionLength => (1..=10).map(|i| i * 100).collect(),
            ScenarioId::ProtocolSize => (1..=6).collect(),
            ScenarioId::PayloadSize => (10..=16).map(|e| 1 << e).collect(),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| BenchError::Unknown {
                what: "scenario",
                value: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    Monitor,
    Forwarder,
    NoMonitor,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Monitor, Case::Forwarder, Case::NoMonitor];

    pub fn as_str(self) -> &'static str {
        match self {
            Case::Monitor => "Monitor",
            Case::Forwarder => "Forwarder",
            Case::NoMonitor => "NoMonitor",
        }
    }

    fn mediation(self) -> Mediation {
        match self {
            Case::Monitor => Mediation::Monitor(MonitorConfig {
                trace: false,
                ..MonitorConfig::default()
            }),
            Case::Forwarder => Mediation::Forwarder,
            Case::NoMonitor => Mediation::Direct,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| BenchError::Unknown {
                what: "case",
                value: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone)]
pub struct BenchScenario {
    pub id: ScenarioId,
    pub params: Vec<u64>,
    pub repetitions: usize,
}

impl BenchScenario {
    pub fn new(id: ScenarioId, params: Vec<u64>) -> Self {
        Self {
            id,
            params,
            repetitions: DEFAULT_REPETITIONS,
        }
    }

    pub fn with_defaults(id: ScenarioId) -> Self {
        Self::new(id, id.default_params())
    }

    pub fn repetitions(mut self, n: usize) -> Self {
        self.repetitions = n;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidScenario(m.to_owned()));
        if self.params.is_empty() {
            return bad("no parameter values");
        }
        if self.params.contains(&0) {
            return bad("parameter values must be positive");
        }
        if self.params.windows(2).any(|w| w[0] >= w[1]) {
            return bad("parameter values must be strictly increasing");
        }
        if self.repetitions == 0 {
            return bad("at least one repetition");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub scenario: ScenarioId,
    pub parameter: u64,
    pub case: Case,
    pub mean: Duration,
    pub stddev: Duration,
    pub repetitions: usize,
}

impl BenchRecord {
    pub fn from_samples(
        scenario: ScenarioId,
        parameter: u64,
        case: Case,
        samples: &[Duration],
    ) -> Self {
        assert!(!samples.is_empty());
        let n = samples.len() as f64;
        let ns: Vec<f64> = samples.iter().map(|d| d.as_nanos() as f64).collect();
        let mean = ns.iter().sum::<f64>() / n;
        let var = ns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            scenario,
            parameter,
            case,
            mean: Duration::from_nanos(mean.round() as u64),
            stddev: Duration::from_nanos(var.sqrt().round() as u64),
            repetitions: samples.len(),
        }
    }
}

/// What one side does in a session.
#[derive(Debug, Clone, Copy)]
enum Script {
    /// `n` OK/ACK rounds then KO, with `bytes` of data on OK and ACK when set.
    PingPong { rounds: u64, bytes: Option<usize> },
    /// `k` OKs one way and `k` ACKs the other, all in parallel.
    Parallel { k: u64 },
}

fn bytes_payload(bytes: Option<usize>) -> Payload {
    match bytes {
        Some(n) => vec![("data".into(), Value::Bytes(vec![0x5a; n]))],
        None => Vec::new(),
    }
}

fn unexpected(who: &str, label: &str) -> TransportError {
    TransportError::Config(format!("{who} received unexpected {label}"))
}

impl Script {
    fn server(self, s: &Endpoint) -> Result<(), TransportError> {
        match self {
            Script::PingPong { rounds, bytes } => {
                for _ in 0..rounds {
                    s.send(CLIENT, "OK", bytes_payload(bytes))?;
                    let (label, _) = s.receive(CLIENT)?;
                    if label != "ACK" {
                        return Err(unexpected(SERVER, &label));
                    }
                }
                s.send(CLIENT, "KO", Vec::new())
            }
            Script::Parallel { k } => {
                for i in 1..=k {
                    s.send(CLIENT, &format!("OK{i}"), Vec::new())?;
                }
                for _ in 0..k {
                    s.receive(CLIENT)?;
                }
                Ok(())
            }
        }
    }

    fn client(self, c: &Endpoint) -> Result<(), TransportError> {
        match self {
            Script::PingPong { bytes, .. } => loop {
                let (label, _) = c.receive(SERVER)?;
                match label.as_str() {
                    "OK" => c.send(SERVER, "ACK", bytes_payload(bytes))?,
                    "KO" => return Ok(()),
                    _ => return Err(unexpected(CLIENT, &label)),
                }
            },
            Script::Parallel { k } => {
                for i in 1..=k {
                    c.send(SERVER, &format!("ACK{i}"), Vec::new())?;
                }
                for _ in 0..k {
                    c.receive(SERVER)?;
                }
                Ok(())
            }
        }
    }
}

fn setup(id: ScenarioId, param: u64) -> (GlobalProtocol, Script) {
    match id {
        ScenarioId::SessionLength => (
            scenarios::session_length(),
            Script::PingPong {
                rounds: param,
                bytes: None,
            },
        ),
        ScenarioId::ProtocolSize => (
            scenarios::protocol_size(param as usize),
            Script::Parallel { k: param },
        ),
        ScenarioId::PayloadSize => (
            scenarios::payload_size(),
            Script::PingPong {
                rounds: 1,
                bytes: Some(param as usize),
            },
        ),
    }
}

/// One server and one long-lived client context on their own broker,
/// running sessions of a single configuration back to back.
struct Rig {
    case: Case,
    protocol: String,
    script: Script,
    config: InvitationConfig,
    server: Endpoint,
    go: Option<mpsc::Sender<()>>,
    done: mpsc::Receiver<Result<(), TransportError>>,
    worker: Option<thread::JoinHandle<()>>,
}

impl Rig {
    fn new(id: ScenarioId, param: u64, case: Case) -> Result<Rig, BenchError> {
        let (global, script) = setup(id, param);
        let store: Arc<dyn ProtocolStore> = Arc::new(
            MemoryStore::from_global(&global)
                .map_err(|e| BenchError::ScenarioSetup(e.to_string()))?,
        );
        let broker = Broker::new();
        let endpoint = |p: &str| {
            Endpoint::new(&broker, p, case.mediation(), Arc::clone(&store))
                .map_err(|e| BenchError::ScenarioSetup(e.to_string()))
        };
        let server = endpoint("server")?;
        let client = endpoint("client")?;
        let config = InvitationConfig::new([
            (SERVER, "server", format!("{}_{SERVER}.scr", global.name)),
            (CLIENT, "client", format!("{}_{CLIENT}.scr", global.name)),
        ]);
        let (go, go_rx) = mpsc::channel::<()>();
        let (done_tx, done) = mpsc::channel();
        let worker = thread::Builder::new()
            .name("bench-client".into())
            .spawn(move || {
                for () in go_rx {
                    let r = client
                        .join(CLIENT, "client")
                        .and_then(|_| script.client(&client));
                    client.stop();
                    if done_tx.send(r).is_err() {
                        break;
                    }
                }
            })
            .map_err(|e| BenchError::ScenarioSetup(e.to_string()))?;
        Ok(Rig {
            case,
            protocol: global.name,
            script,
            config,
            server,
            go: Some(go),
            done,
            worker: Some(worker),
        })
    }

    /// One complete session, from `create` until both sides have stopped.
    fn session(&self) -> Result<Duration, BenchError> {
        let t0 = Instant::now();
        self.go
            .as_ref()
            .expect("rig running")
            .send(())
            .expect("client alive");
        let served = self
            .server
            .create(&self.protocol, &self.config)
            .and_then(|_| self.script.server(&self.server));
        self.server.stop();
        let client = self.done.recv().expect("client alive");
        let dt = t0.elapsed();
        served.and(client)?;
        Ok(dt)
    }
}

impl Drop for Rig {
    fn drop(&mut self) {
        self.go.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// Runs every (parameter, case) pair of `scenario`, in parameter order.
pub fn bench_run(scenario: &BenchScenario, cases: &[Case]) -> Result<Vec<BenchRecord>, BenchError> {
    bench_run_with_warmup(scenario, cases, WARMUP)
}

/// Sessions never overlap. Within one parameter value the cases take turns
/// session by session, so slow drift in the host lands on every case alike.
pub fn bench_run_with_warmup(
    scenario: &BenchScenario,
    cases: &[Case],
    warmup: usize,
) -> Result<Vec<BenchRecord>, BenchError> {
    scenario.validate()?;
    let mut cases = cases.to_vec();
    cases.sort();
    cases.dedup();
    let mut out = Vec::new();
    for &p in &scenario.params {
        let rigs = cases
            .iter()
            .map(|&c| Rig::new(scenario.id, p, c))
            .collect::<Result<Vec<_>, _>>()?;
        let mut samples = vec![Vec::with_capacity(scenario.repetitions); rigs.len()];
        for i in 0..warmup + scenario.repetitions {
            for j in 0..rigs.len() {
                let r = (i + j) % rigs.len();
                let dt = rigs[r].session()?;
                if i >= warmup {
                    samples[r].push(dt);
                }
            }
        }
        for (rig, s) in rigs.iter().zip(&samples) {
            out.push(BenchRecord::from_samples(scenario.id, p, rig.case, s));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Row<'a> {
    scenario: &'a str,
    parameter: u64,
    case: &'a str,
    mean_ns: u128,
    stddev_ns: u128,
    overhead_vs_forwarder_pct: String,
}

pub struct BenchReport {
    pub csv: String,
    pub summary: String,
}

/// `(a - forwarder) / forwarder` in percent, if the configuration has a
/// Forwarder record.
pub fn overhead_pct(records: &[BenchRecord], r: &BenchRecord) -> Option<f64> {
    let f = records.iter().find(|f| {
        f.scenario == r.scenario && f.parameter == r.parameter && f.case == Case::Forwarder
    })?;
    let f = f.mean.as_nanos() as f64;
    Some((r.mean.as_nanos() as f64 - f) / f * 100.0)
}

fn sorted(records: &[BenchRecord]) -> Vec<&BenchRecord> {
    let mut v: Vec<&BenchRecord> = records.iter().collect();
    v.sort_by_key(|r| (r.scenario, r.parameter, r.case));
    v
}

pub fn bench_report(records: &[BenchRecord]) -> BenchReport {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut summary = format!(
        "{:<15} {:>9} {:<10} {:>14} {:>14} {:>9}\n",
        "scenario", "parameter", "case", "mean", "stddev", "overhead"
    );
    for r in sorted(records) {
        let pct = overhead_pct(records, r);
        let pct_text = pct.map(|p| format!("{p:.2}")).unwrap_or_default();
        w.serialize(Row {
            scenario: r.scenario.as_str(),
            parameter: r.parameter,
            case: r.case.as_str(),
            mean_ns: r.mean.as_nanos(),
            stddev_ns: r.stddev.as_nanos(),
            overhead_vs_forwarder_pct: pct_text.clone(),
        })
        .expect("in-memory csv");
        summary.push_str(&format!(
            "{:<15} {:>9} {:<10} {:>14} {:>14} {:>8}%\n",
            r.scenario.as_str(),
            r.parameter,
            r.case.as_str(),
            format!("{:.1?}", r.mean),
            format!("{:.1?}", r.stddev),
            pct_text
        ));
    }
    let csv = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    BenchReport { csv, summary }
}

/// Whether `Monitor >= Forwarder >= NoMonitor` holds for one configuration,
/// each comparison allowed to fall short by up to one standard deviation of
/// either side. Missing cases are skipped.
pub fn ordering_holds(records: &[BenchRecord], scenario: ScenarioId, parameter: u64) -> bool {
    let by_case: BTreeMap<Case, &BenchRecord> = records
        .iter()
        .filter(|r| r.scenario == scenario && r.parameter == parameter)
        .map(|r| (r.case, r))
        .collect();
    let geq = |hi: Case, lo: Case| match (by_case.get(&hi), by_case.get(&lo)) {
        (Some(h), Some(l)) => h.mean + h.stddev.max(l.stddev) >= l.mean,
        _ => true,
    };
    geq(Case::Monitor, Case::Forwarder) && geq(Case::Forwarder, Case::NoMonitor)
}
