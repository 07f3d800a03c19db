use std::fmt::Write;

use super::{Direction, NestedFsm};

/// Graphviz rendering with one cluster per thread. Fork edges are dashed.
pub fn to_dot(fsm: &NestedFsm) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "digraph \"{}_{}\" {{",
        fsm.protocol_name, fsm.self_role
    );
    let _ = writeln!(out, "  rankdir=LR;");
    for (i, t) in fsm.threads.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{i} {{");
        let _ = writeln!(out, "    label=\"thread {i}\";");
        for s in &t.states {
            let shape = if t.terminal.contains(s) {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(out, "    s{s} [shape={shape}];");
        }
        let mut keys: Vec<_> = t.transitions.keys().collect();
        keys.sort();
        for k in keys {
            let v = &t.transitions[k];
            let arrow = match t.direction[k] {
                Direction::Outgoing => "!",
                Direction::Incoming => "?",
            };
            let guard = v
                .assertion
                .as_ref()
                .map(|a| format!(" [{}]", a.source_text.replace('"', "\\\"")))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "    s{} -> s{} [label=\"{}{}{}\"];",
                k.state, v.next_state, arrow, k.triple, guard
            );
        }
        let _ = writeln!(out, "  }}");
        for (s, fork) in &t.forks {
            for c in &fork.children {
                let _ = writeln!(
                    out,
                    "  s{s} -> s{} [style=dashed, label=\"fork\"];",
                    fsm.threads[*c].initial
                );
            }
            let _ = writeln!(
                out,
                "  s{s} -> s{} [style=dashed, label=\"join\"];",
                fork.join
            );
        }
    }
    let _ = writeln!(out, "  start [shape=point];");
    let _ = writeln!(out, "  start -> s{};", fsm.threads[0].initial);
    out.push_str("}\n");
    out
}
