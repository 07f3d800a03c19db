use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "  ";

/// Canonical text for either kind of protocol. Reparsing yields an equal AST.
pub fn serialize(protocol: &Protocol) -> String {
    match protocol {
        Protocol::Global(g) => serialize_global(g),
        Protocol::Local(l) => serialize_local(l),
    }
}

pub fn serialize_global(g: &GlobalProtocol) -> String {
    let mut out = format!("global protocol {}({}) ", g.name, role_list(&g.roles));
    write_block(&mut out, 0, &g.body, &global_stmts);
    out.push('\n');
    out
}

pub fn serialize_local(l: &LocalProtocol) -> String {
    let mut out = format!(
        "local protocol {} at {}({}) ",
        l.name,
        l.self_role,
        role_list(&l.roles)
    );
    write_block(&mut out, 0, &l.body, &local_stmts);
    out.push('\n');
    out
}

fn role_list(roles: &[String]) -> String {
    roles
        .iter()
        .map(|r| format!("role {r}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn signature(sig: &MessageSignature) -> String {
    if sig.payload.is_empty() {
        return sig.label.clone();
    }
    let fields: Vec<String> = sig
        .payload
        .iter()
        .map(|f| {
            if f.name == f.sort.keyword() {
                f.name.clone()
            } else {
                format!("{}:{}", f.sort, f.name)
            }
        })
        .collect();
    format!("{}({})", sig.label, fields.join(", "))
}

fn line(out: &mut String, depth: usize, text: &str) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push_str(text);
    out.push('\n');
}

trait Body {
    fn is_end(&self) -> bool;
}

impl Body for GlobalNode {
    fn is_end(&self) -> bool {
        matches!(self, GlobalNode::End)
    }
}

impl Body for LocalNode {
    fn is_end(&self) -> bool {
        matches!(self, LocalNode::End)
    }
}

/// Writes `{ }` for an empty body, otherwise an indented block whose closing
/// brace sits at `depth`.
fn write_block<N: Body>(
    out: &mut String,
    depth: usize,
    node: &N,
    stmts: &dyn Fn(&mut String, usize, &N),
) {
    if node.is_end() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    stmts(out, depth + 1, node);
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push('}');
}

fn write_branches<N: Body>(
    out: &mut String,
    depth: usize,
    head: &str,
    sep: &str,
    branches: &[N],
    stmts: &dyn Fn(&mut String, usize, &N),
) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push_str(head);
    out.push(' ');
    for (i, b) in branches.iter().enumerate() {
        if i > 0 {
            let _ = write!(out, " {sep} ");
        }
        write_block(out, depth, b, stmts);
    }
    out.push('\n');
}

fn global_stmts(out: &mut String, depth: usize, node: &GlobalNode) {
    match node {
        GlobalNode::End => {}
        GlobalNode::Interaction {
            assertion,
            sig,
            src,
            dst,
            cont,
        } => {
            if let Some(a) = assertion {
                line(out, depth, &format!("@{{{}}}", a.source_text));
            }
            line(
                out,
                depth,
                &format!("{} from {src} to {dst};", signature(sig)),
            );
            global_stmts(out, depth, cont);
        }
        GlobalNode::Choice { at, branches } => {
            write_branches(
                out,
                depth,
                &format!("choice at {at}"),
                "or",
                branches,
                &global_stmts,
            );
        }
        GlobalNode::Rec { var, body } => {
            write_branches(
                out,
                depth,
                &format!("rec {var}"),
                "",
                std::slice::from_ref(&**body),
                &global_stmts,
            );
        }
        GlobalNode::Continue(var) => line(out, depth, &format!("{var};")),
        GlobalNode::Parallel { branches, cont } => {
            write_branches(out, depth, "parallel", "and", branches, &global_stmts);
            global_stmts(out, depth, cont);
        }
    }
}

fn local_stmts(out: &mut String, depth: usize, node: &LocalNode) {
    match node {
        LocalNode::End => {}
        LocalNode::Send {
            assertion,
            sig,
            to,
            cont,
        } => {
            if let Some(a) = assertion {
                line(out, depth, &format!("@{{{}}}", a.source_text));
            }
            line(out, depth, &format!("{} to {to};", signature(sig)));
            local_stmts(out, depth, cont);
        }
        LocalNode::Receive {
            assertion,
            sig,
            from,
            cont,
        } => {
            if let Some(a) = assertion {
                line(out, depth, &format!("@{{{}}}", a.source_text));
            }
            line(out, depth, &format!("{} from {from};", signature(sig)));
            local_stmts(out, depth, cont);
        }
        LocalNode::Choice { at, branches } => {
            write_branches(
                out,
                depth,
                &format!("choice at {at}"),
                "or",
                branches,
                &local_stmts,
            );
        }
        LocalNode::Rec { var, body } => {
            write_branches(
                out,
                depth,
                &format!("rec {var}"),
                "",
                std::slice::from_ref(&**body),
                &local_stmts,
            );
        }
        LocalNode::Continue(var) => line(out, depth, &format!("{var};")),
        LocalNode::Parallel { branches, cont } => {
            write_branches(out, depth, "parallel", "and", branches, &local_stmts);
            local_stmts(out, depth, cont);
        }
    }
}
