//! Generators for the benchmark protocols between a server `S` and client `C`.

use std::fmt::Write;

use crate::scribble::{parse_global, GlobalProtocol};

pub const SERVER: &str = "S";
pub const CLIENT: &str = "C";

/// `rec X { choice at S { OK from S to C; ACK from C to S; X; } or { KO from S to C; } }`.
/// A session of length `n` loops `n` times before `KO`.
pub fn session_length_source() -> String {
    ping_pong("SessionLength", "")
}

/// The session-length protocol with a `data` payload on `OK` and `ACK`.
pub fn payload_size_source() -> String {
    ping_pong("PayloadSize", "(data)")
}

fn ping_pong(name: &str, payload: &str) -> String {
    format!(
        "global protocol {name}(role S, role C) {{
  rec X {{
    choice at S {{
      OK{payload} from S to C;
      ACK{payload} from C to S;
      X;
    }} or {{
      KO from S to C;
    }}
  }}
}}
"
    )
}

/// `k` copies of `OK from S to C | ACK from C to S` composed in one parallel
/// block. Labels carry the copy index so that no two branches share a triple.
pub fn protocol_size_source(k: usize) -> String {
    assert!(k > 0, "at least one copy of the parallel pattern");
    let mut out = String::from("global protocol ProtocolSize(role S, role C) {\n  parallel ");
    for i in 1..=k {
        if i > 1 {
            out.push_str(" and ");
        }
        let _ = write!(
            out,
            "{{\n    OK{i} from S to C;\n  }} and {{\n    ACK{i} from C to S;\n  }}"
        );
    }
    out.push_str("\n}\n");
    out
}

pub fn session_length() -> GlobalProtocol {
    parse_global(&session_length_source()).expect("generated protocol is valid")
}

pub fn payload_size() -> GlobalProtocol {
    parse_global(&payload_size_source()).expect("generated protocol is valid")
}

pub fn protocol_size(k: usize) -> GlobalProtocol {
    parse_global(&protocol_size_source(k)).expect("generated protocol is valid")
}
