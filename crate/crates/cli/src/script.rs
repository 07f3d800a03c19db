//! Scripted sessions for `convmon run`.
//!
//! One action per line:
//!
//! ```text
//! send <role> <to> <label> <payload-json>
//! recv <role> <from>
//! stop <role>
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. The payload is a
//! JSON object whose values are strings, integers, booleans or tagged
//! values such as `{"bytes": "AAE="}`; it may be omitted when empty.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use convmon::message::{Payload, Value};
use convmon::monitor::{MemoryStore, Mode, MonitorVerdict, ProtocolStore, SessionStatus};
use convmon::scribble::GlobalProtocol;
use convmon::transport::{Broker, Endpoint, InvitationConfig, Mediation};

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Send {
        role: String,
        to: String,
        label: String,
        payload: Payload,
    },
    Recv {
        role: String,
        from: String,
    },
    Stop {
        role: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script(pub Vec<Action>);

fn word<'a>(rest: &mut &'a str) -> Option<&'a str> {
    let s = rest.trim_start();
    if s.is_empty() {
        return None;
    }
    let end = s.find(char::is_whitespace).unwrap_or(s.len());
    *rest = &s[end..];
    Some(&s[..end])
}

fn payload_value(v: serde_json::Value) -> Result<Value> {
    Ok(match v {
        serde_json::Value::String(s) => Value::String(s),
        serde_json::Value::Bool(b) => Value::Bool(b),
        serde_json::Value::Number(n) => {
            Value::Int(n.as_i64().ok_or_else(|| anyhow!("{n} is not an integer"))?)
        }
        other => serde_json::from_value(other)?,
    })
}

pub fn parse_payload(text: &str) -> Result<Payload> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let serde_json::Value::Object(map) = serde_json::from_str(text)? else {
        bail!("payload must be a JSON object");
    };
    map.into_iter()
        .map(|(k, v)| Ok((k, payload_value(v)?)))
        .collect()
}

impl Script {
    pub fn parse(text: &str) -> Result<Script> {
        let mut actions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let mut rest = line.trim();
            if rest.is_empty() || rest.starts_with('#') {
                continue;
            }
            let mut need = |what: &str| {
                word(&mut rest)
                    .map(str::to_owned)
                    .ok_or_else(|| anyhow!("line {}: missing {what}", n + 1))
            };
            let action = match need("action")?.as_str() {
                "send" => Action::Send {
                    role: need("role")?,
                    to: need("receiver")?,
                    label: need("label")?,
                    payload: parse_payload(rest).with_context(|| format!("line {}", n + 1))?,
                },
                "recv" => Action::Recv {
                    role: need("role")?,
                    from: need("sender")?,
                },
                "stop" => Action::Stop {
                    role: need("role")?,
                },
                other => bail!("line {}: unknown action {other:?}", n + 1),
            };
            if !matches!(action, Action::Send { .. }) && !rest.trim().is_empty() {
                bail!("line {}: trailing text {:?}", n + 1, rest.trim());
            }
            actions.push(action);
        }
        Ok(Script(actions))
    }
}

fn show_payload(p: &Payload) -> String {
    let map: serde_json::Map<String, serde_json::Value> = p
        .iter()
        .map(|(k, v)| {
            let v = match v {
                Value::String(s) => serde_json::Value::from(s.as_str()),
                Value::Int(i) => serde_json::Value::from(*i),
                Value::Bool(b) => serde_json::Value::from(*b),
                Value::Bytes(_) => serde_json::to_value(v).expect("bytes serialise"),
            };
            (k.clone(), v)
        })
        .collect();
    serde_json::Value::Object(map).to_string()
}

fn status_name(s: SessionStatus) -> &'static str {
    match s {
        SessionStatus::Active => "active",
        SessionStatus::Completed => "completed",
        SessionStatus::Violated => "violated",
        SessionStatus::Unknown => "unknown",
    }
}

/// Runs `script` with every principal monitored on one broker. The first
/// configured principal creates the session, the rest join in order.
/// Returns false when an action failed or, in enforce mode, any check
/// reported a violation.
pub fn run(
    global: &GlobalProtocol,
    config: &InvitationConfig,
    capability_dir: &Path,
    script: &Script,
    timeout: Duration,
    out: &mut impl Write,
) -> Result<bool> {
    config.validate()?;
    let mut store = MemoryStore::from_global(global)?;
    for e in &config.entries {
        if let Ok(text) = std::fs::read_to_string(capability_dir.join(&e.capability)) {
            store = store.with(e.capability.clone(), text);
        }
    }
    let store: Arc<dyn ProtocolStore> = Arc::new(store);
    let mode = Mode::from_env();
    let broker = Broker::new();
    let mut endpoints: BTreeMap<String, Endpoint> = BTreeMap::new();
    for e in &config.entries {
        let ep = Endpoint::new(
            &broker,
            &e.principal,
            Mediation::monitor(mode),
            Arc::clone(&store),
        )?;
        ep.set_timeout(timeout);
        endpoints.insert(e.role.clone(), ep);
    }
    let first = config
        .entries
        .first()
        .ok_or_else(|| anyhow!("empty invitation config"))?;
    let cid = endpoints[&first.role].create(&global.name, config)?;
    writeln!(
        out,
        "session {cid} created by {} as {}",
        first.principal, first.role
    )?;
    for e in &config.entries[1..] {
        endpoints[&e.role].join(&e.role, &e.principal)?;
        writeln!(out, "{} joined as {}", e.principal, e.role)?;
    }

    let ep = |role: &str| {
        endpoints
            .get(role)
            .ok_or_else(|| anyhow!("no endpoint plays {role}"))
    };
    let mut ok = true;
    for action in &script.0 {
        match action {
            Action::Send {
                role,
                to,
                label,
                payload,
            } => {
                let e = ep(role)?;
                let before = e.monitor().map_or(0, |m| m.trace_log().len());
                match e.send(to, label, payload.clone()) {
                    Ok(()) => {
                        // The sender's check runs inline with the publish.
                        let verdict = e
                            .monitor()
                            .and_then(|m| m.trace_log().get(before).map(|l| l.verdict.to_string()))
                            .unwrap_or_else(|| "sent".into());
                        writeln!(
                            out,
                            "send {role} -> {to} {label} {}: {verdict}",
                            show_payload(payload)
                        )?;
                    }
                    Err(err) => {
                        ok = false;
                        writeln!(out, "send {role} -> {to} {label}: error: {err}")?;
                    }
                }
            }
            Action::Recv { role, from } => match ep(role)?.receive(from) {
                Ok((label, payload)) => writeln!(
                    out,
                    "recv {role} <- {from} {label} {}",
                    show_payload(&payload)
                )?,
                Err(err) => {
                    ok = false;
                    writeln!(out, "recv {role} <- {from}: error: {err}")?;
                }
            },
            Action::Stop { role } => {
                ep(role)?.stop();
                writeln!(out, "stop {role}")?;
            }
        }
    }

    for (role, e) in &endpoints {
        let status = e.status();
        e.stop();
        let log = e.monitor().map(|m| m.trace_log()).unwrap_or_default();
        let violations = log.iter().filter(|l| !l.verdict.is_accept()).count();
        if violations > 0 && mode == Mode::Enforce {
            ok = false;
        }
        writeln!(
            out,
            "{role} ({}): {} checks, {violations} violations, status {}",
            e.principal(),
            log.len(),
            status_name(status)
        )?;
        for l in log
            .iter()
            .filter(|l| matches!(l.verdict, MonitorVerdict::Violation { .. }))
        {
            writeln!(out, "  {} {} -> {}: {}", l.label, l.from, l.to, l.verdict)?;
        }
    }
    Ok(ok)
}
