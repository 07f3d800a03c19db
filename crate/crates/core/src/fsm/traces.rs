use std::collections::BTreeSet;

use super::{Cursors, FsmThread, NestedFsm, StateId, Triple};

pub type Trace = Vec<Triple>;

/// Largest depth [`trace_language`] accepts.
pub const MAX_TRACE_DEPTH: usize = 12;

/// Anything that can be run message by message.
pub trait TraceSource {
    type Config: Clone;

    fn start_config(&self) -> Self::Config;
    fn moves(&self, config: &Self::Config) -> Vec<(Triple, Self::Config)>;
}

impl TraceSource for NestedFsm {
    type Config = Cursors;

    fn start_config(&self) -> Cursors {
        self.start()
    }

    fn moves(&self, config: &Cursors) -> Vec<(Triple, Cursors)> {
        self.enabled(config)
    }
}

impl TraceSource for FsmThread {
    type Config = StateId;

    fn start_config(&self) -> StateId {
        self.initial
    }

    fn moves(&self, state: &StateId) -> Vec<(Triple, StateId)> {
        self.outgoing(*state)
            .iter()
            .map(|t| {
                (
                    t.clone(),
                    self.lookup(*state, t).expect("indexed").next_state,
                )
            })
            .collect()
    }
}

/// Every message sequence of length at most `depth` the machine can perform
/// from its start, including the empty one. Parallel threads interleave freely.
///
/// # Panics
///
/// If `depth` exceeds [`MAX_TRACE_DEPTH`].
pub fn trace_language<S: TraceSource + ?Sized>(fsm: &S, depth: usize) -> BTreeSet<Trace> {
    assert!(
        depth <= MAX_TRACE_DEPTH,
        "trace depth {depth} exceeds {MAX_TRACE_DEPTH}"
    );
    let mut out = BTreeSet::new();
    let mut prefix = Vec::new();
    walk(fsm, &fsm.start_config(), depth, &mut prefix, &mut out);
    out
}

fn walk<S: TraceSource + ?Sized>(
    fsm: &S,
    config: &S::Config,
    depth: usize,
    prefix: &mut Trace,
    out: &mut BTreeSet<Trace>,
) {
    out.insert(prefix.clone());
    if depth == 0 {
        return;
    }
    for (triple, next) in fsm.moves(config) {
        prefix.push(triple);
        walk(fsm, &next, depth - 1, prefix, out);
        prefix.pop();
    }
}
