//! Abstract syntax for global and local protocols.

use std::collections::BTreeSet;
use std::fmt;

use super::assertion;

/// Payload sorts. `Data` is an opaque byte sequence supporting `size()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    String,
    Int,
    Bool,
    Data,
}

impl Sort {
    pub const ALL: [Sort; 4] = [Sort::String, Sort::Int, Sort::Bool, Sort::Data];

    pub fn keyword(self) -> &'static str {
        match self {
            Sort::String => "string",
            Sort::Int => "int",
            Sort::Bool => "bool",
            Sort::Data => "data",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Sort> {
        Sort::ALL.into_iter().find(|sort| sort.keyword() == s)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PayloadField {
    pub name: String,
    pub sort: Sort,
}

impl PayloadField {
    pub fn new(name: impl Into<String>, sort: Sort) -> Self {
        Self {
            name: name.into(),
            sort,
        }
    }
}

/// A message label (the operator) together with its typed payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessageSignature {
    pub label: String,
    pub payload: Vec<PayloadField>,
}

impl MessageSignature {
    pub fn new(label: impl Into<String>, payload: Vec<PayloadField>) -> Self {
        Self {
            label: label.into(),
            payload,
        }
    }

    pub fn bare(label: impl Into<String>) -> Self {
        Self::new(label, Vec::new())
    }

    /// Payload field names in declaration order.
    pub fn binders(&self) -> Vec<String> {
        self.payload.iter().map(|f| f.name.clone()).collect()
    }
}

pub const DEFAULT_ASSERTION_LANGUAGE: &str = "pyexpr-like";

/// A predicate attached to an interaction, written `@{ ... }`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assertion {
    pub language_tag: String,
    pub source_text: String,
    pub free_vars: BTreeSet<String>,
}

impl Assertion {
    /// Builds an assertion in the default language, extracting free variables
    /// from the source text.
    pub fn new(source_text: impl Into<String>) -> Self {
        let source_text = source_text.into().trim().to_string();
        let free_vars = assertion::free_vars(&source_text);
        Self {
            language_tag: DEFAULT_ASSERTION_LANGUAGE.to_string(),
            source_text,
            free_vars,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GlobalNode {
    Interaction {
        assertion: Option<Assertion>,
        sig: MessageSignature,
        src: String,
        dst: String,
        cont: Box<GlobalNode>,
    },
    Choice {
        at: String,
        branches: Vec<GlobalNode>,
    },
    Rec {
        var: String,
        body: Box<GlobalNode>,
    },
    Continue(String),
    Parallel {
        branches: Vec<GlobalNode>,
        cont: Box<GlobalNode>,
    },
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalProtocol {
    pub name: String,
    pub roles: Vec<String>,
    pub body: GlobalNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalNode {
    Send {
        assertion: Option<Assertion>,
        sig: MessageSignature,
        to: String,
        cont: Box<LocalNode>,
    },
    Receive {
        assertion: Option<Assertion>,
        sig: MessageSignature,
        from: String,
        cont: Box<LocalNode>,
    },
    Choice {
        at: String,
        branches: Vec<LocalNode>,
    },
    Rec {
        var: String,
        body: Box<LocalNode>,
    },
    Continue(String),
    Parallel {
        branches: Vec<LocalNode>,
        cont: Box<LocalNode>,
    },
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalProtocol {
    pub name: String,
    pub self_role: String,
    pub roles: Vec<String>,
    pub body: LocalNode,
}

/// Either kind of protocol, as found in a `.scr` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Protocol {
    Global(GlobalProtocol),
    Local(LocalProtocol),
}

impl Protocol {
    pub fn name(&self) -> &str {
        match self {
            Protocol::Global(g) => &g.name,
            Protocol::Local(l) => &l.name,
        }
    }
}

impl From<GlobalProtocol> for Protocol {
    fn from(g: GlobalProtocol) -> Self {
        Protocol::Global(g)
    }
}

impl From<LocalProtocol> for Protocol {
    fn from(l: LocalProtocol) -> Self {
        Protocol::Local(l)
    }
}

impl GlobalNode {
    pub fn interaction(
        sig: MessageSignature,
        src: impl Into<String>,
        dst: impl Into<String>,
        cont: GlobalNode,
    ) -> Self {
        GlobalNode::Interaction {
            assertion: None,
            sig,
            src: src.into(),
            dst: dst.into(),
            cont: Box::new(cont),
        }
    }

    /// Replaces every exit `End` (those not inside parallel branches) with `next`.
    pub fn then(self, next: GlobalNode) -> GlobalNode {
        match self {
            GlobalNode::End => next,
            GlobalNode::Interaction {
                assertion,
                sig,
                src,
                dst,
                cont,
            } => GlobalNode::Interaction {
                assertion,
                sig,
                src,
                dst,
                cont: Box::new(cont.then(next)),
            },
            GlobalNode::Choice { at, branches } => GlobalNode::Choice {
                at,
                branches: branches.into_iter().map(|b| b.then(next.clone())).collect(),
            },
            GlobalNode::Rec { var, body } => GlobalNode::Rec {
                var,
                body: Box::new(body.then(next)),
            },
            GlobalNode::Parallel { branches, cont } => GlobalNode::Parallel {
                branches,
                cont: Box::new(cont.then(next)),
            },
            c @ GlobalNode::Continue(_) => c,
        }
    }

    /// Number of AST nodes, counting each `End` and `Continue` leaf.
    pub fn size(&self) -> usize {
        match self {
            GlobalNode::Interaction { cont, .. } => 1 + cont.size(),
            GlobalNode::Choice { branches, .. } => {
                1 + branches.iter().map(Self::size).sum::<usize>()
            }
            GlobalNode::Rec { body, .. } => 1 + body.size(),
            GlobalNode::Parallel { branches, cont } => {
                1 + cont.size() + branches.iter().map(Self::size).sum::<usize>()
            }
            GlobalNode::Continue(_) | GlobalNode::End => 1,
        }
    }
}

impl LocalNode {
    pub fn send(sig: MessageSignature, to: impl Into<String>, cont: LocalNode) -> Self {
        LocalNode::Send {
            assertion: None,
            sig,
            to: to.into(),
            cont: Box::new(cont),
        }
    }

    pub fn receive(sig: MessageSignature, from: impl Into<String>, cont: LocalNode) -> Self {
        LocalNode::Receive {
            assertion: None,
            sig,
            from: from.into(),
            cont: Box::new(cont),
        }
    }

    /// Replaces every exit `End` (those not inside parallel branches) with `next`.
    pub fn then(self, next: LocalNode) -> LocalNode {
        match self {
            LocalNode::End => next,
            LocalNode::Send {
                assertion,
                sig,
                to,
                cont,
            } => LocalNode::Send {
                assertion,
                sig,
                to,
                cont: Box::new(cont.then(next)),
            },
            LocalNode::Receive {
                assertion,
                sig,
                from,
                cont,
            } => LocalNode::Receive {
                assertion,
                sig,
                from,
                cont: Box::new(cont.then(next)),
            },
            LocalNode::Choice { at, branches } => LocalNode::Choice {
                at,
                branches: branches.into_iter().map(|b| b.then(next.clone())).collect(),
            },
            LocalNode::Rec { var, body } => LocalNode::Rec {
                var,
                body: Box::new(body.then(next)),
            },
            LocalNode::Parallel { branches, cont } => LocalNode::Parallel {
                branches,
                cont: Box::new(cont.then(next)),
            },
            c @ LocalNode::Continue(_) => c,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            LocalNode::Send { cont, .. } | LocalNode::Receive { cont, .. } => 1 + cont.size(),
            LocalNode::Choice { branches, .. } => {
                1 + branches.iter().map(Self::size).sum::<usize>()
            }
            LocalNode::Rec { body, .. } => 1 + body.size(),
            LocalNode::Parallel { branches, cont } => {
                1 + cont.size() + branches.iter().map(Self::size).sum::<usize>()
            }
            LocalNode::Continue(_) | LocalNode::End => 1,
        }
    }

    /// True if the subtree contains no send or receive.
    pub fn is_interaction_free(&self) -> bool {
        match self {
            LocalNode::Send { .. } | LocalNode::Receive { .. } => false,
            LocalNode::Choice { branches, .. } => branches.iter().all(Self::is_interaction_free),
            LocalNode::Rec { body, .. } => body.is_interaction_free(),
            LocalNode::Parallel { branches, cont } => {
                cont.is_interaction_free() && branches.iter().all(Self::is_interaction_free)
            }
            LocalNode::Continue(_) | LocalNode::End => true,
        }
    }

    pub fn mentions_continue(&self) -> bool {
        match self {
            LocalNode::Send { cont, .. } | LocalNode::Receive { cont, .. } => {
                cont.mentions_continue()
            }
            LocalNode::Choice { branches, .. } => branches.iter().any(Self::mentions_continue),
            LocalNode::Rec { body, .. } => body.mentions_continue(),
            LocalNode::Parallel { branches, cont } => {
                cont.mentions_continue() || branches.iter().any(Self::mentions_continue)
            }
            LocalNode::Continue(_) => true,
            LocalNode::End => false,
        }
    }
}

impl LocalProtocol {
    /// The `(label, sender, receiver)` triple of a send or receive at this role.
    pub fn triple_of(&self, node: &LocalNode) -> Option<(String, String, String)> {
        match node {
            LocalNode::Send { sig, to, .. } => {
                Some((sig.label.clone(), self.self_role.clone(), to.clone()))
            }
            LocalNode::Receive { sig, from, .. } => {
                Some((sig.label.clone(), from.clone(), self.self_role.clone()))
            }
            _ => None,
        }
    }
}
