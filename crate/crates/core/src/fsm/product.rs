//! The flat product machine, built from a term-rewriting semantics of local
//! protocols rather than from compiled threads. It is the exponential
//! construction the nested machine avoids, kept as a test oracle.

use std::collections::{HashMap, VecDeque};

use super::*;
use crate::scribble::{LocalNode, LocalProtocol};

/// Upper bound on product states before giving up.
pub const PRODUCT_STATE_LIMIT: usize = 100_000;

const UNFOLD_LIMIT: usize = 64;

pub fn product_oracle(lp: &LocalProtocol) -> Result<FsmThread, FsmError> {
    let mut ids: HashMap<LocalNode, StateId> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut thread = FsmThread::default();

    let start = normalize(lp.body.clone());
    ids.insert(start.clone(), 0);
    thread.states.insert(0);
    thread.initial = 0;
    queue.push_back(start);

    while let Some(term) = queue.pop_front() {
        let id = ids[&term];
        if can_end(&term, 0) {
            thread.terminal.insert(id);
        }
        let mut seen: HashMap<Triple, LocalNode> = HashMap::new();
        for (action, residual) in steps(lp, &term, 0) {
            let residual = normalize(residual);
            match seen.get(&action.triple) {
                Some(prev) if *prev == residual => continue,
                Some(_) => {
                    return Err(FsmError::Nondeterminism {
                        state: id,
                        triple: action.triple,
                    })
                }
                None => {
                    seen.insert(action.triple.clone(), residual.clone());
                }
            }
            let next = match ids.get(&residual) {
                Some(n) => *n,
                None => {
                    let n = ids.len();
                    if n >= PRODUCT_STATE_LIMIT {
                        return Err(FsmError::ExplosionGuard {
                            limit: PRODUCT_STATE_LIMIT,
                        });
                    }
                    ids.insert(residual.clone(), n);
                    thread.states.insert(n);
                    queue.push_back(residual);
                    n
                }
            };
            let key = TransitionKey {
                state: id,
                triple: action.triple,
            };
            thread.direction.insert(key.clone(), action.direction);
            thread.transitions.insert(
                key,
                TransitionValue {
                    next_state: next,
                    assertion: action.assertion,
                    var_binders: action.binders,
                },
            );
        }
    }
    thread.reindex();
    Ok(thread)
}

struct Action {
    triple: Triple,
    direction: Direction,
    assertion: Option<crate::scribble::Assertion>,
    binders: Vec<String>,
}

fn substitute(node: &LocalNode, var: &str, with: &LocalNode) -> LocalNode {
    match node {
        LocalNode::Continue(v) if v == var => with.clone(),
        LocalNode::Continue(_) | LocalNode::End => node.clone(),
        LocalNode::Send {
            assertion,
            sig,
            to,
            cont,
        } => LocalNode::Send {
            assertion: assertion.clone(),
            sig: sig.clone(),
            to: to.clone(),
            cont: Box::new(substitute(cont, var, with)),
        },
        LocalNode::Receive {
            assertion,
            sig,
            from,
            cont,
        } => LocalNode::Receive {
            assertion: assertion.clone(),
            sig: sig.clone(),
            from: from.clone(),
            cont: Box::new(substitute(cont, var, with)),
        },
        LocalNode::Choice { at, branches } => LocalNode::Choice {
            at: at.clone(),
            branches: branches.iter().map(|b| substitute(b, var, with)).collect(),
        },
        LocalNode::Rec { var: inner, .. } if inner == var => node.clone(),
        LocalNode::Rec { var: inner, body } => LocalNode::Rec {
            var: inner.clone(),
            body: Box::new(substitute(body, var, with)),
        },
        LocalNode::Parallel { branches, cont } => LocalNode::Parallel {
            branches: branches.iter().map(|b| substitute(b, var, with)).collect(),
            cont: Box::new(substitute(cont, var, with)),
        },
    }
}

fn unfold(var: &str, body: &LocalNode, whole: &LocalNode) -> LocalNode {
    substitute(body, var, whole)
}

/// A parallel block whose branches have all finished behaves as its continuation.
fn normalize(node: LocalNode) -> LocalNode {
    match node {
        LocalNode::Parallel { branches, cont } if branches.iter().all(|b| *b == LocalNode::End) => {
            normalize(*cont)
        }
        other => other,
    }
}

fn can_end(node: &LocalNode, depth: usize) -> bool {
    if depth > UNFOLD_LIMIT {
        return false;
    }
    match node {
        LocalNode::End => true,
        LocalNode::Send { .. } | LocalNode::Receive { .. } | LocalNode::Continue(_) => false,
        LocalNode::Choice { branches, .. } => branches.iter().any(|b| can_end(b, depth)),
        LocalNode::Rec { var, body } => can_end(&unfold(var, body, node), depth + 1),
        LocalNode::Parallel { branches, cont } => {
            branches.iter().all(|b| can_end(b, depth)) && can_end(cont, depth)
        }
    }
}

fn steps(lp: &LocalProtocol, node: &LocalNode, depth: usize) -> Vec<(Action, LocalNode)> {
    if depth > UNFOLD_LIMIT {
        return Vec::new();
    }
    match node {
        LocalNode::End | LocalNode::Continue(_) => Vec::new(),
        LocalNode::Send {
            assertion,
            sig,
            cont,
            ..
        }
        | LocalNode::Receive {
            assertion,
            sig,
            cont,
            ..
        } => {
            let (label, sender, receiver) = lp.triple_of(node).expect("message node");
            let direction = if sender == lp.self_role {
                Direction::Outgoing
            } else {
                Direction::Incoming
            };
            vec![(
                Action {
                    triple: Triple::new(label, sender, receiver),
                    direction,
                    assertion: assertion.clone(),
                    binders: sig.binders(),
                },
                (**cont).clone(),
            )]
        }
        LocalNode::Choice { branches, .. } => {
            branches.iter().flat_map(|b| steps(lp, b, depth)).collect()
        }
        LocalNode::Rec { var, body } => steps(lp, &unfold(var, body, node), depth + 1),
        LocalNode::Parallel { branches, cont } => {
            let mut out = Vec::new();
            for (i, b) in branches.iter().enumerate() {
                for (action, residual) in steps(lp, b, depth) {
                    let mut next = branches.clone();
                    next[i] = residual;
                    out.push((
                        action,
                        LocalNode::Parallel {
                            branches: next,
                            cont: cont.clone(),
                        },
                    ));
                }
            }
            if branches.iter().all(|b| can_end(b, depth)) {
                out.extend(steps(lp, cont, depth));
            }
            out
        }
    }
}
