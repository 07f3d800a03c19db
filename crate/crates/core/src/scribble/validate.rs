use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::{ParseError, ValidationKind};

type Triple = (String, String, String);

fn check_roles(roles: &[String]) -> Result<HashSet<&str>, ParseError> {
    let mut seen = HashSet::new();
    for r in roles {
        if !seen.insert(r.as_str()) {
            return Err(ParseError::invalid(ValidationKind::DuplicateRole, r));
        }
    }
    Ok(seen)
}

fn declared(roles: &HashSet<&str>, role: &str) -> Result<(), ParseError> {
    if roles.contains(role) {
        Ok(())
    } else {
        Err(ParseError::invalid(ValidationKind::UndeclaredRole, role))
    }
}

fn describe(t: &Triple) -> String {
    format!("{} from {} to {}", t.0, t.1, t.2)
}

/// Checks role declarations, recursion scoping, choice subjects and label
/// distinctness of a global protocol.
pub fn validate_global(g: &GlobalProtocol) -> Result<(), ParseError> {
    let roles = check_roles(&g.roles)?;
    global_node(&g.body, &roles, &mut Vec::new())
}

fn global_node<'a>(
    node: &'a GlobalNode,
    roles: &HashSet<&str>,
    scope: &mut Vec<&'a str>,
) -> Result<(), ParseError> {
    match node {
        GlobalNode::End => Ok(()),
        GlobalNode::Continue(var) => {
            if scope.contains(&var.as_str()) {
                Ok(())
            } else {
                Err(ParseError::invalid(ValidationKind::UnboundRecursion, var))
            }
        }
        GlobalNode::Interaction { src, dst, cont, .. } => {
            declared(roles, src)?;
            declared(roles, dst)?;
            if src == dst {
                return Err(ParseError::invalid(ValidationKind::SelfInteraction, src));
            }
            global_node(cont, roles, scope)
        }
        GlobalNode::Choice { at, branches } => {
            declared(roles, at)?;
            let mut firsts = HashSet::new();
            for b in branches {
                match b {
                    GlobalNode::Interaction { sig, src, dst, .. } if src == at => {
                        let t = (sig.label.clone(), src.clone(), dst.clone());
                        if !firsts.insert(t.clone()) {
                            return Err(ParseError::invalid(
                                ValidationKind::LabelClash,
                                describe(&t),
                            ));
                        }
                    }
                    _ => {
                        return Err(ParseError::invalid(
                            ValidationKind::ChoiceSubject,
                            format!("choice at {at}"),
                        ))
                    }
                }
            }
            for b in branches {
                global_node(b, roles, scope)?;
            }
            Ok(())
        }
        GlobalNode::Rec { var, body } => {
            scope.push(var);
            let r = global_node(body, roles, scope);
            scope.pop();
            r
        }
        GlobalNode::Parallel { branches, cont } => {
            let mut seen: BTreeSet<Triple> = BTreeSet::new();
            for b in branches {
                // Recursion variables do not cross into parallel branches.
                global_node(b, roles, &mut Vec::new())?;
                let mut mine = BTreeSet::new();
                global_triples(b, &mut mine);
                if let Some(t) = mine.intersection(&seen).next() {
                    return Err(ParseError::invalid(ValidationKind::LabelClash, describe(t)));
                }
                seen.extend(mine);
            }
            global_node(cont, roles, scope)
        }
    }
}

fn global_triples(node: &GlobalNode, out: &mut BTreeSet<Triple>) {
    match node {
        GlobalNode::Interaction {
            sig,
            src,
            dst,
            cont,
            ..
        } => {
            out.insert((sig.label.clone(), src.clone(), dst.clone()));
            global_triples(cont, out);
        }
        GlobalNode::Choice { branches, .. } => branches.iter().for_each(|b| global_triples(b, out)),
        GlobalNode::Rec { body, .. } => global_triples(body, out),
        GlobalNode::Parallel { branches, cont } => {
            branches.iter().for_each(|b| global_triples(b, out));
            global_triples(cont, out);
        }
        GlobalNode::Continue(_) | GlobalNode::End => {}
    }
}

/// Checks a local protocol: the global rules restated for sends and receives,
/// plus membership of the projected role. Choice subjects are not enforced,
/// since projection may legitimately yield choices observed only indirectly.
pub fn validate_local(l: &LocalProtocol) -> Result<(), ParseError> {
    let roles = check_roles(&l.roles)?;
    declared(&roles, &l.self_role)?;
    local_node(l, &l.body, &roles, &mut Vec::new())
}

fn local_node<'a>(
    l: &LocalProtocol,
    node: &'a LocalNode,
    roles: &HashSet<&str>,
    scope: &mut Vec<&'a str>,
) -> Result<(), ParseError> {
    match node {
        LocalNode::End => Ok(()),
        LocalNode::Continue(var) => {
            if scope.contains(&var.as_str()) {
                Ok(())
            } else {
                Err(ParseError::invalid(ValidationKind::UnboundRecursion, var))
            }
        }
        LocalNode::Send { to: peer, cont, .. }
        | LocalNode::Receive {
            from: peer, cont, ..
        } => {
            declared(roles, peer)?;
            if *peer == l.self_role {
                return Err(ParseError::invalid(ValidationKind::SelfInteraction, peer));
            }
            local_node(l, cont, roles, scope)
        }
        LocalNode::Choice { at, branches } => {
            declared(roles, at)?;
            let mut firsts = HashSet::new();
            for b in branches {
                if let Some(t) = l.triple_of(b) {
                    if !firsts.insert(t.clone()) {
                        return Err(ParseError::invalid(
                            ValidationKind::LabelClash,
                            describe(&t),
                        ));
                    }
                }
            }
            for b in branches {
                local_node(l, b, roles, scope)?;
            }
            Ok(())
        }
        LocalNode::Rec { var, body } => {
            scope.push(var);
            let r = local_node(l, body, roles, scope);
            scope.pop();
            r
        }
        LocalNode::Parallel { branches, cont } => {
            let mut seen: BTreeSet<Triple> = BTreeSet::new();
            for b in branches {
                local_node(l, b, roles, &mut Vec::new())?;
                let mut mine = BTreeSet::new();
                local_triples(l, b, &mut mine);
                if let Some(t) = mine.intersection(&seen).next() {
                    return Err(ParseError::invalid(ValidationKind::LabelClash, describe(t)));
                }
                seen.extend(mine);
            }
            local_node(l, cont, roles, scope)
        }
    }
}

pub(crate) fn local_triples(l: &LocalProtocol, node: &LocalNode, out: &mut BTreeSet<Triple>) {
    match node {
        LocalNode::Send { cont, .. } | LocalNode::Receive { cont, .. } => {
            out.extend(l.triple_of(node));
            local_triples(l, cont, out);
        }
        LocalNode::Choice { branches, .. } => {
            branches.iter().for_each(|b| local_triples(l, b, out))
        }
        LocalNode::Rec { body, .. } => local_triples(l, body, out),
        LocalNode::Parallel { branches, cont } => {
            branches.iter().for_each(|b| local_triples(l, b, out));
            local_triples(l, cont, out);
        }
        LocalNode::Continue(_) | LocalNode::End => {}
    }
}
