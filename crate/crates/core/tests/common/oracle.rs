//! A reference semantics for local protocols, written directly over the
//! syntax: recursion unfolds by substitution and parallel blocks interleave
//! their branches, joining once every branch has reached `end`.

use std::collections::{BTreeSet, HashSet, VecDeque};

use convmon::fsm::Triple;
use convmon::scribble::{Assertion, LocalNode, LocalProtocol, MessageSignature};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Node(LocalNode),
    Par(Vec<Term>, LocalNode),
}

/// One message the protocol allows next.
#[derive(Debug, Clone)]
pub struct Move {
    pub triple: Triple,
    pub sig: MessageSignature,
    pub assertion: Option<Assertion>,
    pub next: Term,
}

fn subst(node: &LocalNode, var: &str, with: &LocalNode) -> LocalNode {
    let s = |n: &LocalNode| Box::new(subst(n, var, with));
    match node {
        LocalNode::Continue(v) if v == var => with.clone(),
        LocalNode::Rec { var: v, .. } if v == var => node.clone(),
        LocalNode::Rec { var: v, body } => LocalNode::Rec {
            var: v.clone(),
            body: s(body),
        },
        LocalNode::Send {
            assertion,
            sig,
            to,
            cont,
        } => LocalNode::Send {
            assertion: assertion.clone(),
            sig: sig.clone(),
            to: to.clone(),
            cont: s(cont),
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
            cont: s(cont),
        },
        LocalNode::Choice { at, branches } => LocalNode::Choice {
            at: at.clone(),
            branches: branches.iter().map(|b| subst(b, var, with)).collect(),
        },
        LocalNode::Parallel { branches, cont } => LocalNode::Parallel {
            branches: branches.iter().map(|b| subst(b, var, with)).collect(),
            cont: s(cont),
        },
        LocalNode::Continue(_) | LocalNode::End => node.clone(),
    }
}

/// Puts a term in canonical form: parallel blocks become `Par`, and a block
/// whose branches have all ended is replaced by its continuation.
pub fn norm(t: Term) -> Term {
    match t {
        Term::Node(LocalNode::Parallel { branches, cont }) => norm(Term::Par(
            branches.into_iter().map(Term::Node).collect(),
            *cont,
        )),
        // A recursion that can never send or receive is just its body.
        Term::Node(LocalNode::Rec { body, .. })
            if body.is_interaction_free() && !body.mentions_continue() =>
        {
            norm(Term::Node(*body))
        }
        Term::Par(bs, cont) => {
            let bs: Vec<Term> = bs.into_iter().map(norm).collect();
            if bs.iter().all(|b| *b == Term::Node(LocalNode::End)) {
                norm(Term::Node(cont))
            } else {
                Term::Par(bs, cont)
            }
        }
        t => t,
    }
}

pub fn start(lp: &LocalProtocol) -> Term {
    norm(Term::Node(lp.body.clone()))
}

pub fn is_end(t: &Term) -> bool {
    *t == Term::Node(LocalNode::End)
}

pub fn moves(lp: &LocalProtocol, t: &Term) -> Vec<Move> {
    let me = lp.self_role.as_str();
    match t {
        Term::Node(n) => match n {
            LocalNode::Send {
                assertion,
                sig,
                to,
                cont,
            } => vec![Move {
                triple: Triple::new(sig.label.as_str(), me, to.as_str()),
                sig: sig.clone(),
                assertion: assertion.clone(),
                next: norm(Term::Node((**cont).clone())),
            }],
            LocalNode::Receive {
                assertion,
                sig,
                from,
                cont,
            } => vec![Move {
                triple: Triple::new(sig.label.as_str(), from.as_str(), me),
                sig: sig.clone(),
                assertion: assertion.clone(),
                next: norm(Term::Node((**cont).clone())),
            }],
            LocalNode::Choice { branches, .. } => branches
                .iter()
                .flat_map(|b| moves(lp, &norm(Term::Node(b.clone()))))
                .collect(),
            LocalNode::Rec { var, body } => moves(lp, &norm(Term::Node(subst(body, var, n)))),
            LocalNode::Parallel { .. } => moves(lp, &norm(t.clone())),
            LocalNode::Continue(_) | LocalNode::End => Vec::new(),
        },
        Term::Par(bs, cont) => {
            let mut out = Vec::new();
            for (i, b) in bs.iter().enumerate() {
                for m in moves(lp, b) {
                    let mut bs2 = bs.clone();
                    bs2[i] = m.next;
                    out.push(Move {
                        next: norm(Term::Par(bs2, cont.clone())),
                        ..m
                    });
                }
            }
            out
        }
    }
}

/// All message sequences of length at most `depth`, the empty one included.
pub fn traces(lp: &LocalProtocol, depth: usize) -> BTreeSet<Vec<Triple>> {
    fn go(
        lp: &LocalProtocol,
        t: &Term,
        depth: usize,
        prefix: &mut Vec<Triple>,
        out: &mut BTreeSet<Vec<Triple>>,
    ) {
        out.insert(prefix.clone());
        if depth == 0 {
            return;
        }
        for m in moves(lp, t) {
            prefix.push(m.triple);
            go(lp, &m.next, depth - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = BTreeSet::new();
    go(lp, &start(lp), depth, &mut Vec::new(), &mut out);
    out
}

/// Number of distinct terms reachable from the start, up to `limit`.
pub fn reachable_states(lp: &LocalProtocol, limit: usize) -> usize {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([start(lp)]);
    while let Some(t) = queue.pop_front() {
        if seen.len() >= limit {
            break;
        }
        if !seen.insert(t.clone()) {
            continue;
        }
        queue.extend(moves(lp, &t).into_iter().map(|m| m.next));
    }
    seen.len()
}

/// Complete runs, those ending at `end`, of at most `max_len` messages.
pub fn complete_runs(lp: &LocalProtocol, max_len: usize) -> Vec<Vec<Move>> {
    fn go(
        lp: &LocalProtocol,
        t: &Term,
        left: usize,
        prefix: &mut Vec<Move>,
        out: &mut Vec<Vec<Move>>,
    ) {
        if is_end(t) {
            out.push(prefix.clone());
            return;
        }
        if left == 0 {
            return;
        }
        for m in moves(lp, t) {
            let next = m.next.clone();
            prefix.push(m);
            go(lp, &next, left - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(lp, &start(lp), max_len, &mut Vec::new(), &mut out);
    out
}
