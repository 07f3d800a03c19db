//! Deterministic nested state machines compiled from local protocols.
//!
//! Each parallel branch becomes its own [`FsmThread`]; the enclosing thread
//! parks on a fork state until every child can terminate, then continues at
//! the fork's join state without consuming a message. Transitions are hashed
//! by `(state, label, sender, receiver)`, and because parallel branches never
//! share a `(label, sender, receiver)` triple, each triple identifies the
//! unique thread that may consume it.

mod compile;
mod dot;
mod product;
mod traces;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::scribble::Assertion;

pub use compile::compile;
pub use dot::to_dot;
pub use product::{product_oracle, PRODUCT_STATE_LIMIT};
pub use traces::{trace_language, Trace, TraceSource, MAX_TRACE_DEPTH};

pub type StateId = usize;

/// The `(label, sender, receiver)` triple a message is matched on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub label: String,
    pub sender: String,
    pub receiver: String,
}

impl Triple {
    pub fn new(
        label: impl Into<String>,
        sender: impl Into<String>,
        receiver: impl Into<String>,
    ) -> Self {
        Self {
            label: label.into(),
            sender: sender.into(),
            receiver: receiver.into(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}->{})", self.label, self.sender, self.receiver)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionKey {
    pub state: StateId,
    pub triple: Triple,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionValue {
    pub next_state: StateId,
    pub assertion: Option<Assertion>,
    /// Payload field names, bound positionally to the message payload.
    pub var_binders: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// Child threads started at a fork state, and where the parent resumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fork {
    pub children: Vec<usize>,
    pub join: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FsmThread {
    pub states: BTreeSet<StateId>,
    pub initial: StateId,
    pub terminal: BTreeSet<StateId>,
    pub transitions: HashMap<TransitionKey, TransitionValue>,
    pub direction: HashMap<TransitionKey, Direction>,
    pub forks: BTreeMap<StateId, Fork>,
    /// Outgoing triples per state, sorted. Derived from `transitions`.
    outgoing: BTreeMap<StateId, Vec<Triple>>,
}

impl FsmThread {
    pub(crate) fn reindex(&mut self) {
        self.outgoing.clear();
        for key in self.transitions.keys() {
            self.outgoing
                .entry(key.state)
                .or_default()
                .push(key.triple.clone());
        }
        for triples in self.outgoing.values_mut() {
            triples.sort();
        }
    }

    pub fn outgoing(&self, state: StateId) -> &[Triple] {
        self.outgoing.get(&state).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn lookup(&self, state: StateId, triple: &Triple) -> Option<&TransitionValue> {
        // TODO: avoid cloning the triple once keys are interned.
        self.transitions.get(&TransitionKey {
            state,
            triple: triple.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("nondeterministic transition {triple} at state {state}")]
    Nondeterminism { state: StateId, triple: Triple },
    #[error("unsupported nesting: {0}")]
    UnsupportedNesting(String),
    #[error("state {state} has no way forward (unguarded recursion)")]
    UnguardedRecursion { state: StateId },
    #[error("product construction exceeded {limit} states")]
    ExplosionGuard { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedFsm {
    pub protocol_name: String,
    pub self_role: String,
    /// Thread 0 is the main thread.
    pub threads: Vec<FsmThread>,
    thread_of_triple: HashMap<Triple, usize>,
    thread_of_state: Vec<usize>,
    /// Whether a thread resting at the state, with any children at their
    /// initial states, may terminate.
    accepting_at_rest: Vec<bool>,
}

/// Per-thread positions of a running nested FSM. Threads whose parent is not
/// parked on their fork are inactive (`None`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cursors(pub Vec<Option<StateId>>);

/// A successful step: the thread that moved and the transition it took.
#[derive(Debug, Clone)]
pub struct Step<'a> {
    pub cursors: Cursors,
    pub thread: usize,
    pub value: &'a TransitionValue,
}

impl NestedFsm {
    pub(crate) fn from_threads(
        protocol_name: String,
        self_role: String,
        threads: Vec<FsmThread>,
    ) -> Self {
        let state_count = threads
            .iter()
            .flat_map(|t| t.states.iter())
            .max()
            .map_or(0, |m| m + 1);
        let mut thread_of_state = vec![0; state_count];
        let mut thread_of_triple = HashMap::new();
        for (i, t) in threads.iter().enumerate() {
            for s in &t.states {
                thread_of_state[*s] = i;
            }
            for k in t.transitions.keys() {
                thread_of_triple.insert(k.triple.clone(), i);
            }
        }
        let mut fsm = Self {
            protocol_name,
            self_role,
            threads,
            thread_of_triple,
            thread_of_state,
            accepting_at_rest: vec![false; state_count],
        };
        fsm.accepting_at_rest = fsm.compute_accepting_at_rest();
        fsm
    }

    fn compute_accepting_at_rest(&self) -> Vec<bool> {
        let mut acc = vec![false; self.thread_of_state.len()];
        for t in &self.threads {
            for s in &t.terminal {
                acc[*s] = true;
            }
        }
        loop {
            let mut changed = false;
            for t in &self.threads {
                for (s, fork) in &t.forks {
                    if !acc[*s]
                        && acc[fork.join]
                        && fork.children.iter().all(|c| acc[self.threads[*c].initial])
                    {
                        acc[*s] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                return acc;
            }
        }
    }

    pub fn state_count(&self) -> usize {
        self.threads.iter().map(|t| t.states.len()).sum()
    }

    pub fn initial_states(&self) -> Vec<StateId> {
        self.threads.iter().map(|t| t.initial).collect()
    }

    pub fn terminal_states(&self) -> BTreeSet<StateId> {
        self.threads
            .iter()
            .flat_map(|t| t.terminal.iter().copied())
            .collect()
    }

    pub fn thread_of(&self, triple: &Triple) -> Option<usize> {
        self.thread_of_triple.get(triple).copied()
    }

    pub fn start(&self) -> Cursors {
        let mut c = Cursors(vec![None; self.threads.len()]);
        c.0[0] = Some(self.threads[0].initial);
        self.activate(&mut c, 0);
        c
    }

    fn activate(&self, c: &mut Cursors, thread: usize) {
        let Some(s) = c.0[thread] else { return };
        if let Some(fork) = self.threads[thread].forks.get(&s) {
            for &child in &fork.children {
                c.0[child] = Some(self.threads[child].initial);
                self.activate(c, child);
            }
        }
    }

    fn deactivate_children(&self, c: &mut Cursors, thread: usize) {
        let Some(s) = c.0[thread] else { return };
        if let Some(fork) = self.threads[thread].forks.get(&s) {
            for &child in &fork.children {
                self.deactivate_children(c, child);
                c.0[child] = None;
            }
        }
    }

    fn thread_accepting(&self, c: &Cursors, thread: usize) -> bool {
        let Some(s) = c.0[thread] else { return false };
        let t = &self.threads[thread];
        if t.terminal.contains(&s) {
            return true;
        }
        match t.forks.get(&s) {
            Some(fork) => {
                self.accepting_at_rest[fork.join]
                    && fork.children.iter().all(|ch| self.thread_accepting(c, *ch))
            }
            None => false,
        }
    }

    /// The configuration may stop here.
    pub fn is_accepting(&self, c: &Cursors) -> bool {
        self.thread_accepting(c, 0)
    }

    /// Configurations reachable by joins alone, nearest first.
    fn join_closure(&self, c: &Cursors) -> Vec<Cursors> {
        let mut seen = vec![c.clone()];
        let mut queue = VecDeque::from([c.clone()]);
        while let Some(cur) = queue.pop_front() {
            for (i, t) in self.threads.iter().enumerate() {
                let Some(s) = cur.0[i] else { continue };
                let Some(fork) = t.forks.get(&s) else {
                    continue;
                };
                if !fork
                    .children
                    .iter()
                    .all(|ch| self.thread_accepting(&cur, *ch))
                {
                    continue;
                }
                let mut next = cur.clone();
                self.deactivate_children(&mut next, i);
                next.0[i] = Some(fork.join);
                self.activate(&mut next, i);
                if !seen.contains(&next) {
                    seen.push(next.clone());
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    fn apply<'a>(&'a self, c: &Cursors, triple: &Triple) -> Option<Step<'a>> {
        let thread = self.thread_of(triple)?;
        let state = c.0[thread]?;
        let value = self.threads[thread].lookup(state, triple)?;
        let mut cursors = c.clone();
        cursors.0[thread] = Some(value.next_state);
        self.activate(&mut cursors, thread);
        Some(Step {
            cursors,
            thread,
            value,
        })
    }

    /// Consumes one message, taking any joins needed to enable it.
    pub fn step<'a>(&'a self, c: &Cursors, triple: &Triple) -> Option<Step<'a>> {
        if let Some(step) = self.apply(c, triple) {
            return Some(step);
        }
        self.join_closure(c)
            .iter()
            .skip(1)
            .find_map(|cfg| self.apply(cfg, triple))
    }

    /// Every triple consumable from `c`, with the resulting configuration.
    pub fn enabled(&self, c: &Cursors) -> Vec<(Triple, Cursors)> {
        let mut out: Vec<(Triple, Cursors)> = Vec::new();
        for cfg in self.join_closure(c) {
            for (i, t) in self.threads.iter().enumerate() {
                let Some(s) = cfg.0[i] else { continue };
                for triple in t.outgoing(s) {
                    if out.iter().any(|(seen, _)| seen == triple) {
                        continue;
                    }
                    if let Some(step) = self.apply(&cfg, triple) {
                        out.push((triple.clone(), step.cursors));
                    }
                }
            }
        }
        out
    }

    /// Accepting with nothing left to consume.
    pub fn is_finished(&self, c: &Cursors) -> bool {
        self.is_accepting(c) && self.enabled(c).is_empty()
    }
}
