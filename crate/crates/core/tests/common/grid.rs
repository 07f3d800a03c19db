//! An exhaustive grid of small local protocols at role `R`: up to three
//! parallel branches, each drawn from a fixed catalogue of shapes with at
//! most four interactions, with optional prefix and continuation.

use convmon::scribble::{LocalNode, LocalProtocol, MessageSignature};

const PEERS: [&str; 2] = ["P", "Q"];

fn send(label: String, to: &str, cont: LocalNode) -> LocalNode {
    LocalNode::send(MessageSignature::bare(label), to, cont)
}

fn recv(label: String, from: &str, cont: LocalNode) -> LocalNode {
    LocalNode::receive(MessageSignature::bare(label), from, cont)
}

pub const SHAPES: usize = 9;

/// Shape `shape` of the catalogue, its labels tagged with `tag` so that
/// branches never share a message.
pub fn branch(shape: usize, tag: &str, peer: &str) -> LocalNode {
    let l = |s: &str| format!("{s}{tag}");
    let end = LocalNode::End;
    match shape {
        0 => send(l("a"), peer, end),
        1 => recv(l("a"), peer, end),
        2 => send(l("a"), peer, recv(l("b"), peer, end)),
        3 => recv(
            l("a"),
            peer,
            send(l("b"), peer, recv(l("c"), peer, send(l("d"), peer, end))),
        ),
        4 => LocalNode::Choice {
            at: "R".into(),
            branches: vec![
                send(l("a"), peer, recv(l("b"), peer, end.clone())),
                send(l("c"), peer, end),
            ],
        },
        5 => LocalNode::Choice {
            at: peer.into(),
            branches: vec![
                recv(l("a"), peer, end.clone()),
                recv(l("b"), peer, send(l("c"), peer, end)),
            ],
        },
        6 => LocalNode::Rec {
            var: "X".into(),
            body: Box::new(send(
                l("a"),
                peer,
                recv(l("b"), peer, LocalNode::Continue("X".into())),
            )),
        },
        7 => LocalNode::Rec {
            var: "X".into(),
            body: Box::new(LocalNode::Choice {
                at: "R".into(),
                branches: vec![
                    send(l("a"), peer, LocalNode::Continue("X".into())),
                    send(l("b"), peer, end),
                ],
            }),
        },
        8 => LocalNode::Rec {
            var: "X".into(),
            body: Box::new(recv(
                l("a"),
                peer,
                LocalNode::Choice {
                    at: peer.into(),
                    branches: vec![
                        recv(l("b"), peer, LocalNode::Continue("X".into())),
                        recv(l("c"), peer, end),
                    ],
                },
            )),
        },
        _ => unreachable!("catalogue has {SHAPES} shapes"),
    }
}

fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for mut rest in multisets(n, k - 1) {
            if rest.first().map_or(true, |&r| r >= first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
    }
    out
}

fn wrap(body: LocalNode) -> LocalProtocol {
    LocalProtocol {
        name: "Grid".into(),
        self_role: "R".into(),
        roles: vec!["R".into(), "P".into(), "Q".into()],
        body,
    }
}

/// Every combination of 1 to 3 catalogue shapes in one parallel block,
/// each block with and without a receive before it, and followed by nothing,
/// a send or a receive.
pub fn local_grid() -> Vec<LocalProtocol> {
    let mut out = Vec::new();
    for k in 1..=3 {
        for shapes in multisets(SHAPES, k) {
            for prefix in [false, true] {
                for tail in 0..3 {
                    let branches: Vec<LocalNode> = shapes
                        .iter()
                        .enumerate()
                        .map(|(i, &s)| branch(s, &i.to_string(), PEERS[i % 2]))
                        .collect();
                    let cont = match tail {
                        0 => LocalNode::End,
                        1 => send("z".into(), "P", LocalNode::End),
                        _ => recv("z".into(), "Q", LocalNode::End),
                    };
                    let par = if k == 1 {
                        // A single branch is plain sequencing.
                        branches.into_iter().next().unwrap().then(cont)
                    } else {
                        LocalNode::Parallel {
                            branches,
                            cont: Box::new(cont),
                        }
                    };
                    let body = if prefix {
                        recv("start".into(), "P", par)
                    } else {
                        par
                    };
                    out.push(wrap(body));
                }
            }
        }
    }
    out
}
