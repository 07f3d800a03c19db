//! Random well-formed global protocols.
//!
//! A protocol is built from a tape of integers, each read answering one
//! construction question. Zeros always pick the simplest answer, so
//! proptest's shrinking of the tape shrinks the protocol.

use convmon::scribble::{
    Assertion, GlobalNode, GlobalProtocol, MessageSignature, PayloadField, Sort,
};
use proptest::prelude::*;

pub const ROLE_NAMES: [&str; 4] = ["A", "B", "C", "D"];

struct Tape<'a> {
    data: &'a [u32],
    pos: usize,
    labels: usize,
    vars: usize,
    fields: usize,
}

impl Tape<'_> {
    fn pick(&mut self, n: usize) -> usize {
        let v = self.data.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        v as usize % n
    }

    fn label(&mut self) -> String {
        self.labels += 1;
        format!("M{}", self.labels)
    }
}

/// The protocol described by `tape`, over `roles` roles (2 to 4).
pub fn global_from_tape(tape: &[u32], roles: usize) -> GlobalProtocol {
    assert!((2..=4).contains(&roles));
    let roles: Vec<String> = ROLE_NAMES[..roles].iter().map(|r| r.to_string()).collect();
    let mut t = Tape {
        data: tape,
        pos: 0,
        labels: 0,
        vars: 0,
        fields: 0,
    };
    let body = node(&mut t, &roles, 4, &[], true);
    GlobalProtocol {
        name: "Gen".into(),
        roles,
        body,
    }
}

fn two_roles(t: &mut Tape, roles: &[String], src: Option<&str>) -> (String, String) {
    let src = match src {
        Some(s) => s.to_owned(),
        None => roles[t.pick(roles.len())].clone(),
    };
    let others: Vec<&String> = roles.iter().filter(|r| **r != src).collect();
    let dst = others[t.pick(others.len())].clone();
    (src, dst)
}

fn interaction(
    t: &mut Tape,
    roles: &[String],
    src: Option<&str>,
    cont: impl FnOnce(&mut Tape) -> GlobalNode,
) -> GlobalNode {
    let (src, dst) = two_roles(t, roles, src);
    let label = t.label();
    let mut payload = Vec::new();
    for _ in 0..t.pick(3) {
        t.fields += 1;
        payload.push(PayloadField::new(
            format!("f{}", t.fields),
            Sort::ALL[t.pick(4)],
        ));
    }
    let assertion = match payload.first() {
        Some(f) if t.pick(3) == 1 => Some(Assertion::new(match f.sort {
            Sort::Data | Sort::String => format!("size({}) <= 512", f.name),
            Sort::Int => format!("{} >= 0", f.name),
            Sort::Bool => format!("{} or not {}", f.name, f.name),
        })),
        _ => None,
    };
    GlobalNode::Interaction {
        assertion,
        sig: MessageSignature::new(label, payload),
        src,
        dst,
        cont: Box::new(cont(t)),
    }
}

/// `scope` holds the recursion variables in reach; `guarded` says whether an
/// interaction has happened since the innermost `rec`.
fn node(
    t: &mut Tape,
    roles: &[String],
    depth: usize,
    scope: &[String],
    guarded: bool,
) -> GlobalNode {
    let can_continue = guarded && !scope.is_empty();
    if depth == 0 {
        return if can_continue && t.pick(2) == 1 {
            GlobalNode::Continue(scope[t.pick(scope.len())].clone())
        } else {
            GlobalNode::End
        };
    }
    match t.pick(8) {
        0 => GlobalNode::End,
        1..=3 => interaction(t, roles, None, |t| node(t, roles, depth - 1, scope, true)),
        4 => {
            let at = roles[t.pick(roles.len())].clone();
            let n = 2 + t.pick(2);
            let branches = (0..n)
                .map(|_| {
                    interaction(t, roles, Some(&at), |t| {
                        node(t, roles, depth - 1, scope, true)
                    })
                })
                .collect();
            GlobalNode::Choice { at, branches }
        }
        5 => {
            t.vars += 1;
            let var = format!("X{}", t.vars);
            let mut inner = scope.to_vec();
            inner.push(var.clone());
            GlobalNode::Rec {
                var,
                body: Box::new(node(t, roles, depth - 1, &inner, false)),
            }
        }
        6 if can_continue => GlobalNode::Continue(scope[t.pick(scope.len())].clone()),
        6 => GlobalNode::End,
        _ => {
            let n = 2 + t.pick(2);
            // Branches start a fresh recursion scope and must not be empty.
            let branches = (0..n)
                .map(|_| interaction(t, roles, None, |t| node(t, roles, depth - 1, &[], true)))
                .collect();
            GlobalNode::Parallel {
                branches,
                cont: Box::new(node(t, roles, depth - 1, scope, true)),
            }
        }
    }
}

pub fn arb_global() -> impl Strategy<Value = GlobalProtocol> {
    (2usize..=4, prop::collection::vec(any::<u32>(), 0..80))
        .prop_map(|(roles, tape)| global_from_tape(&tape, roles))
}
