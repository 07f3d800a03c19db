use std::collections::{BTreeSet, HashMap};

use super::*;
use crate::scribble::{LocalNode, LocalProtocol};

/// Compiles a local protocol into a nested FSM.
///
/// States are numbered densely in the order the AST is visited. Recursion is
/// never unfolded: a jump becomes a back edge to the state where its `rec`
/// was entered. A `rec` (or a bare jump) that shares its entry state with
/// sibling choice branches gets its own entry state, whose outgoing
/// transitions are then copied onto the shared state.
pub fn compile(lp: &LocalProtocol) -> Result<NestedFsm, FsmError> {
    let mut b = Builder {
        lp,
        threads: Vec::new(),
        next_state: 0,
        aliases: Vec::new(),
        end_state: Vec::new(),
    };
    let main = b.new_thread();
    let init = b.new_state(main);
    b.threads[main].initial = init;
    b.node(main, &lp.body, init, false, &mut Vec::new())?;
    b.resolve_aliases()?;
    b.check()?;
    for t in &mut b.threads {
        t.reindex();
    }
    Ok(NestedFsm::from_threads(
        lp.name.clone(),
        lp.self_role.clone(),
        b.threads,
    ))
}

type Scope<'a> = Vec<(&'a str, usize, StateId)>;

struct Builder<'a> {
    lp: &'a LocalProtocol,
    threads: Vec<FsmThread>,
    next_state: StateId,
    /// `(thread, s, r)`: state `s` offers everything state `r` offers.
    aliases: Vec<(usize, StateId, StateId)>,
    /// Shared terminal state per thread, allocated on first use.
    end_state: Vec<Option<StateId>>,
}

impl<'a> Builder<'a> {
    fn new_thread(&mut self) -> usize {
        self.threads.push(FsmThread::default());
        self.end_state.push(None);
        self.threads.len() - 1
    }

    fn new_state(&mut self, thread: usize) -> StateId {
        let s = self.next_state;
        self.next_state += 1;
        self.threads[thread].states.insert(s);
        s
    }

    fn end(&mut self, thread: usize) -> StateId {
        if let Some(s) = self.end_state[thread] {
            return s;
        }
        let s = self.new_state(thread);
        self.threads[thread].terminal.insert(s);
        self.end_state[thread] = Some(s);
        s
    }

    fn lookup(scope: &Scope<'_>, var: &str, thread: usize) -> Result<StateId, FsmError> {
        match scope.iter().rev().find(|(v, _, _)| *v == var) {
            Some((_, t, s)) if *t == thread => Ok(*s),
            Some(_) => Err(FsmError::UnsupportedNesting(format!(
                "jump to {var} crosses a parallel boundary"
            ))),
            None => Err(FsmError::UnsupportedNesting(format!(
                "unbound recursion variable {var}"
            ))),
        }
    }

    /// Where a message lands: the `rec` entry for a jump, the shared end
    /// state for `End`, otherwise a fresh state (second component `true`).
    fn target(
        &mut self,
        thread: usize,
        cont: &LocalNode,
        scope: &Scope<'a>,
    ) -> Result<(StateId, bool), FsmError> {
        match cont {
            LocalNode::Continue(var) => Ok((Self::lookup(scope, var, thread)?, false)),
            LocalNode::End => Ok((self.end(thread), false)),
            _ => Ok((self.new_state(thread), true)),
        }
    }

    fn add(
        &mut self,
        thread: usize,
        key: TransitionKey,
        value: TransitionValue,
        dir: Direction,
    ) -> Result<bool, FsmError> {
        let t = &mut self.threads[thread];
        match t.transitions.get(&key) {
            Some(existing) if *existing == value => Ok(false),
            Some(_) => Err(FsmError::Nondeterminism {
                state: key.state,
                triple: key.triple,
            }),
            None => {
                t.direction.insert(key.clone(), dir);
                t.transitions.insert(key, value);
                Ok(true)
            }
        }
    }

    fn node(
        &mut self,
        thread: usize,
        node: &'a LocalNode,
        state: StateId,
        shared: bool,
        scope: &mut Scope<'a>,
    ) -> Result<(), FsmError> {
        match node {
            LocalNode::End => {
                self.threads[thread].terminal.insert(state);
                Ok(())
            }
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
                let (label, sender, receiver) = self.lp.triple_of(node).expect("message node");
                let dir = if matches!(node, LocalNode::Send { .. }) {
                    Direction::Outgoing
                } else {
                    Direction::Incoming
                };
                let (next, fresh) = self.target(thread, cont, scope)?;
                let key = TransitionKey {
                    state,
                    triple: Triple::new(label, sender, receiver),
                };
                let value = TransitionValue {
                    next_state: next,
                    assertion: assertion.clone(),
                    var_binders: sig.binders(),
                };
                self.add(thread, key, value, dir)?;
                if fresh {
                    self.node(thread, cont, next, false, scope)?;
                }
                Ok(())
            }
            LocalNode::Choice { branches, .. } => {
                let shared = shared || branches.len() > 1;
                for b in branches {
                    self.node(thread, b, state, shared, scope)?;
                }
                Ok(())
            }
            LocalNode::Rec { var, body } => {
                let entry = if shared {
                    self.new_state(thread)
                } else {
                    state
                };
                scope.push((var, thread, entry));
                let r = self.node(thread, body, entry, false, scope);
                scope.pop();
                r?;
                if entry != state {
                    self.aliases.push((thread, state, entry));
                }
                Ok(())
            }
            LocalNode::Continue(var) => {
                let entry = Self::lookup(scope, var, thread)?;
                if entry != state {
                    self.aliases.push((thread, state, entry));
                }
                Ok(())
            }
            LocalNode::Parallel { branches, cont } => {
                if shared {
                    return Err(FsmError::UnsupportedNesting(
                        "parallel block as one of several choice branches".into(),
                    ));
                }
                let mut children = Vec::with_capacity(branches.len());
                for b in branches {
                    let child = self.new_thread();
                    let init = self.new_state(child);
                    self.threads[child].initial = init;
                    self.node(child, b, init, false, scope)?;
                    children.push(child);
                }
                let (join, fresh) = self.target(thread, cont, scope)?;
                self.threads[thread]
                    .forks
                    .insert(state, Fork { children, join });
                if fresh {
                    self.node(thread, cont, join, false, scope)?;
                }
                Ok(())
            }
        }
    }

    fn resolve_aliases(&mut self) -> Result<(), FsmError> {
        loop {
            let mut changed = false;
            for &(thread, s, r) in &self.aliases.clone() {
                if self.threads[thread].forks.contains_key(&r) {
                    return Err(FsmError::UnsupportedNesting(
                        "recursion re-entering a parallel block from a choice".into(),
                    ));
                }
                if self.threads[thread].terminal.contains(&r) {
                    changed |= self.threads[thread].terminal.insert(s);
                }
                let copies: Vec<_> = self.threads[thread]
                    .transitions
                    .iter()
                    .filter(|(k, _)| k.state == r)
                    .map(|(k, v)| {
                        let key = TransitionKey {
                            state: s,
                            triple: k.triple.clone(),
                        };
                        (key, v.clone(), self.threads[thread].direction[k])
                    })
                    .collect();
                for (key, value, dir) in copies {
                    changed |= self.add(thread, key, value, dir)?;
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn check(&self) -> Result<(), FsmError> {
        let mut owner: HashMap<&Triple, usize> = HashMap::new();
        for (i, t) in self.threads.iter().enumerate() {
            let mut with_exit: BTreeSet<StateId> = t.forks.keys().copied().collect();
            let mut keys: Vec<&TransitionKey> = t.transitions.keys().collect();
            keys.sort();
            for k in keys {
                with_exit.insert(k.state);
                if let Some(other) = owner.insert(&k.triple, i) {
                    if other != i {
                        return Err(FsmError::Nondeterminism {
                            state: k.state,
                            triple: k.triple.clone(),
                        });
                    }
                }
            }
            if let Some(dead) = t
                .states
                .iter()
                .find(|s| !t.terminal.contains(s) && !with_exit.contains(s))
            {
                return Err(FsmError::UnguardedRecursion { state: *dead });
            }
        }
        Ok(())
    }
}
