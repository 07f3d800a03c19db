//! An in-process broker with topic exchanges and named queues.
//!
//! Queues either buffer messages for [`Broker::pop`] or hand them to a push
//! consumer, which runs on the publisher's thread.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

pub type Consumer = Arc<dyn Fn(String) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BindingId(u64);

/// `*` matches exactly one dot-separated word, `#` zero or more.
pub fn topic_matches(pattern: &str, key: &str) -> bool {
    fn go(p: &[&str], k: &[&str]) -> bool {
        match (p.first(), k.first()) {
            (None, None) => true,
            (Some(&"#"), _) => go(&p[1..], k) || (!k.is_empty() && go(p, &k[1..])),
            (Some(&"*"), Some(_)) => go(&p[1..], &k[1..]),
            (Some(a), Some(b)) if a == b => go(&p[1..], &k[1..]),
            _ => false,
        }
    }
    let p: Vec<&str> = pattern.split('.').collect();
    let k: Vec<&str> = key.split('.').collect();
    go(&p, &k)
}

#[derive(Default)]
struct QueueState {
    buffer: VecDeque<String>,
    consumer: Option<Consumer>,
}

/// Deliveries to one queue are serialised, push consumers included, which
/// keeps each queue FIFO under concurrent publishers. A consumer must not
/// publish back into its own queue.
#[derive(Default)]
struct Queue {
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl Queue {
    fn deliver(&self, wire: String) {
        let mut s = self.state.lock().unwrap();
        match s.consumer.clone() {
            Some(c) => c(wire),
            None => {
                s.buffer.push_back(wire);
                self.ready.notify_all();
            }
        }
    }
}

struct Binding {
    exchange: String,
    pattern: String,
    queue: String,
}

#[derive(Default)]
struct State {
    exchanges: HashSet<String>,
    queues: HashMap<String, Arc<Queue>>,
    bindings: HashMap<BindingId, Binding>,
    next_binding: u64,
}

#[derive(Default)]
pub struct Broker {
    state: RwLock<State>,
}

impl fmt::Debug for Broker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.state.read().unwrap();
        f.debug_struct("Broker")
            .field("exchanges", &s.exchanges.len())
            .field("queues", &s.queues.len())
            .field("bindings", &s.bindings.len())
            .finish()
    }
}

impl Broker {
    pub fn new() -> Arc<Broker> {
        Arc::new(Broker::default())
    }

    pub fn declare_exchange(&self, name: &str) {
        self.state
            .write()
            .unwrap()
            .exchanges
            .insert(name.to_owned());
    }

    pub fn has_exchange(&self, name: &str) -> bool {
        self.state.read().unwrap().exchanges.contains(name)
    }

    /// Idempotent.
    pub fn declare_queue(&self, name: &str) {
        self.state
            .write()
            .unwrap()
            .queues
            .entry(name.to_owned())
            .or_default();
    }

    /// Removes the queue and every binding to it.
    pub fn delete_queue(&self, name: &str) {
        let mut s = self.state.write().unwrap();
        s.queues.remove(name);
        s.bindings.retain(|_, b| b.queue != name);
    }

    pub fn has_queue(&self, name: &str) -> bool {
        self.state.read().unwrap().queues.contains_key(name)
    }

    /// Installs a push consumer. Messages already buffered are handed over first.
    pub fn consume(&self, queue: &str, consumer: Consumer) {
        let q = self.state.read().unwrap().queues.get(queue).cloned();
        let Some(q) = q else { return };
        let mut s = q.state.lock().unwrap();
        for w in s.buffer.drain(..) {
            consumer(w);
        }
        s.consumer = Some(consumer);
    }

    /// Binds an existing queue to an existing exchange.
    pub fn bind(&self, exchange: &str, pattern: &str, queue: &str) -> Option<BindingId> {
        let mut s = self.state.write().unwrap();
        if !s.exchanges.contains(exchange) || !s.queues.contains_key(queue) {
            return None;
        }
        let id = BindingId(s.next_binding);
        s.next_binding += 1;
        s.bindings.insert(
            id,
            Binding {
                exchange: exchange.to_owned(),
                pattern: pattern.to_owned(),
                queue: queue.to_owned(),
            },
        );
        Some(id)
    }

    pub fn unbind(&self, id: BindingId) {
        self.state.write().unwrap().bindings.remove(&id);
    }

    pub fn binding_count(&self) -> usize {
        self.state.read().unwrap().bindings.len()
    }

    /// Routes `wire` to every queue bound with a matching pattern, each at
    /// most once. Returns how many queues received it.
    pub fn publish(&self, exchange: &str, routing_key: &str, wire: String) -> usize {
        let targets: Vec<Arc<Queue>> = {
            let s = self.state.read().unwrap();
            let mut names: Vec<&str> = s
                .bindings
                .values()
                .filter(|b| b.exchange == exchange && topic_matches(&b.pattern, routing_key))
                .map(|b| b.queue.as_str())
                .collect();
            names.sort_unstable();
            names.dedup();
            names
                .iter()
                .filter_map(|n| s.queues.get(*n).cloned())
                .collect()
        };
        let n = targets.len();
        if let Some((last, rest)) = targets.split_last() {
            for q in rest {
                q.deliver(wire.clone());
            }
            last.deliver(wire);
        }
        n
    }

    /// Puts `wire` straight onto a queue, bypassing exchanges.
    pub fn push(&self, queue: &str, wire: String) -> bool {
        let q = self.state.read().unwrap().queues.get(queue).cloned();
        match q {
            Some(q) => {
                q.deliver(wire);
                true
            }
            None => false,
        }
    }

    /// Takes the oldest buffered message, waiting up to `timeout`.
    pub fn pop(&self, queue: &str, timeout: Duration) -> Option<String> {
        let q = self.state.read().unwrap().queues.get(queue).cloned()?;
        let deadline = Instant::now() + timeout;
        let mut s = q.state.lock().unwrap();
        loop {
            if let Some(w) = s.buffer.pop_front() {
                return Some(w);
            }
            let left = deadline.checked_duration_since(Instant::now())?;
            s = q.ready.wait_timeout(s, left).unwrap().0;
        }
    }

    pub fn queue_len(&self, queue: &str) -> usize {
        let q = self.state.read().unwrap().queues.get(queue).cloned();
        q.map_or(0, |q| q.state.lock().unwrap().buffer.len())
    }
}
