//! Global-to-local projection.
//!
//! A role keeps the interactions it sends or receives and erases the rest,
//! splicing the continuation in place. Choices whose projected branches are
//! identical collapse to one branch; other choices stay, with a
//! `non-directed-choice` warning when the role cannot tell the branches apart
//! from the first message it receives.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::scribble::{GlobalNode, GlobalProtocol, LocalNode, LocalProtocol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("role {0} is not declared by the protocol")]
    UnknownRole(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarningKind {
    NonDirectedChoice,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WarningKind::NonDirectedChoice => f.write_str("non-directed-choice"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub kind: WarningKind,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionReport {
    pub role: String,
    pub warnings: Vec<Warning>,
    pub result: LocalProtocol,
}

pub fn project(g: &GlobalProtocol, role: &str) -> Result<ProjectionReport, ProjectionError> {
    if !g.roles.iter().any(|r| r == role) {
        return Err(ProjectionError::UnknownRole(role.to_string()));
    }
    let mut p = Projector {
        role,
        warnings: Vec::new(),
    };
    let body = p.node(&g.body);
    Ok(ProjectionReport {
        role: role.to_string(),
        warnings: p.warnings,
        result: LocalProtocol {
            name: g.name.clone(),
            self_role: role.to_string(),
            roles: g.roles.clone(),
            body,
        },
    })
}

/// One report per declared role, keyed by role name.
pub fn project_all(
    g: &GlobalProtocol,
) -> Result<BTreeMap<String, ProjectionReport>, ProjectionError> {
    g.roles
        .iter()
        .map(|r| project(g, r).map(|rep| (r.clone(), rep)))
        .collect()
}

struct Projector<'a> {
    role: &'a str,
    warnings: Vec<Warning>,
}

impl Projector<'_> {
    fn node(&mut self, node: &GlobalNode) -> LocalNode {
        match node {
            GlobalNode::End => LocalNode::End,
            GlobalNode::Continue(var) => LocalNode::Continue(var.clone()),
            GlobalNode::Interaction {
                assertion,
                sig,
                src,
                dst,
                cont,
            } => {
                let cont = Box::new(self.node(cont));
                if src == self.role {
                    LocalNode::Send {
                        assertion: assertion.clone(),
                        sig: sig.clone(),
                        to: dst.clone(),
                        cont,
                    }
                } else if dst == self.role {
                    LocalNode::Receive {
                        assertion: assertion.clone(),
                        sig: sig.clone(),
                        from: src.clone(),
                        cont,
                    }
                } else {
                    *cont
                }
            }
            GlobalNode::Choice { at, branches } => {
                let projected: Vec<LocalNode> = branches.iter().map(|b| self.node(b)).collect();
                if projected.windows(2).all(|w| w[0] == w[1]) {
                    return projected.into_iter().next().unwrap_or(LocalNode::End);
                }
                if at != self.role && !directed(&projected) {
                    self.warnings.push(Warning {
                        kind: WarningKind::NonDirectedChoice,
                        location: format!("choice at {at}"),
                    });
                }
                LocalNode::Choice {
                    at: at.clone(),
                    branches: projected,
                }
            }
            GlobalNode::Rec { var, body } => {
                let body = self.node(body);
                if body.is_interaction_free() {
                    // Nothing observable remains; a lingering jump would only spin.
                    if body.mentions_continue() {
                        LocalNode::End
                    } else {
                        body
                    }
                } else {
                    LocalNode::Rec {
                        var: var.clone(),
                        body: Box::new(body),
                    }
                }
            }
            GlobalNode::Parallel { branches, cont } => {
                let branches: Vec<LocalNode> = branches
                    .iter()
                    .map(|b| self.node(b))
                    .filter(|b| *b != LocalNode::End)
                    .collect();
                let cont = self.node(cont);
                if branches.is_empty() {
                    cont
                } else {
                    LocalNode::Parallel {
                        branches,
                        cont: Box::new(cont),
                    }
                }
            }
        }
    }
}

/// Every branch opens with a receive, and the `(label, sender)` pairs differ.
fn directed(branches: &[LocalNode]) -> bool {
    let mut seen = HashSet::new();
    branches.iter().all(|b| match b {
        LocalNode::Receive { sig, from, .. } => seen.insert((sig.label.as_str(), from.as_str())),
        _ => false,
    })
}
