//! Properties every projection must have, phrased for proptest.

use std::collections::BTreeSet;

use convmon::projection::{project, project_all, WarningKind};
use convmon::scribble::{
    parse_local, serialize_local, validate_local, GlobalNode, GlobalProtocol, LocalNode,
    LocalProtocol,
};
use proptest::prelude::*;

use super::oracle;

type Triple = (String, String, String);

fn global_triples(n: &GlobalNode, out: &mut BTreeSet<(Triple, Option<String>)>) {
    match n {
        GlobalNode::Interaction {
            assertion,
            sig,
            src,
            dst,
            cont,
        } => {
            out.insert((
                (sig.label.clone(), src.clone(), dst.clone()),
                assertion.as_ref().map(|a| a.source_text.clone()),
            ));
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

fn local_triples(lp: &LocalProtocol, n: &LocalNode, out: &mut BTreeSet<(Triple, Option<String>)>) {
    let me = lp.self_role.clone();
    match n {
        LocalNode::Send {
            assertion,
            sig,
            to,
            cont,
        } => {
            out.insert((
                (sig.label.clone(), me, to.clone()),
                assertion.as_ref().map(|a| a.source_text.clone()),
            ));
            local_triples(lp, cont, out);
        }
        LocalNode::Receive {
            assertion,
            sig,
            from,
            cont,
        } => {
            out.insert((
                (sig.label.clone(), from.clone(), me),
                assertion.as_ref().map(|a| a.source_text.clone()),
            ));
            local_triples(lp, cont, out);
        }
        LocalNode::Choice { branches, .. } => {
            branches.iter().for_each(|b| local_triples(lp, b, out))
        }
        LocalNode::Rec { body, .. } => local_triples(lp, body, out),
        LocalNode::Parallel { branches, cont } => {
            branches.iter().for_each(|b| local_triples(lp, b, out));
            local_triples(lp, cont, out);
        }
        LocalNode::Continue(_) | LocalNode::End => {}
    }
}

fn has_parallel(n: &GlobalNode) -> bool {
    match n {
        GlobalNode::Parallel { .. } => true,
        GlobalNode::Interaction { cont, .. } => has_parallel(cont),
        GlobalNode::Choice { branches, .. } => branches.iter().any(has_parallel),
        GlobalNode::Rec { body, .. } => has_parallel(body),
        GlobalNode::Continue(_) | GlobalNode::End => false,
    }
}

/// Every projection is a valid local protocol (or carries a warning), mentions
/// exactly the interactions of its role, and keeps their assertions.
pub fn check_projections(g: &GlobalProtocol) -> Result<(), TestCaseError> {
    let all = project_all(g).unwrap();
    prop_assert_eq!(all.len(), g.roles.len());
    let mut global = BTreeSet::new();
    global_triples(&g.body, &mut global);
    for (role, report) in &all {
        prop_assert_eq!(report, &project(g, role).unwrap());
        let warned = report
            .warnings
            .iter()
            .any(|w| w.kind == WarningKind::NonDirectedChoice);
        prop_assert!(
            validate_local(&report.result).is_ok() || warned,
            "{}",
            serialize_local(&report.result)
        );
        let mut local = BTreeSet::new();
        local_triples(&report.result, &report.result.body, &mut local);
        let mine: BTreeSet<_> = global
            .iter()
            .filter(|((_, s, d), _)| s == role || d == role)
            .cloned()
            .collect();
        prop_assert!(local.is_subset(&mine));
        // Only interactions that sit in collapsed, identical branches may
        // disappear, and those reappear under the same triple.
        let mine_triples: BTreeSet<_> = mine.iter().map(|(t, _)| t.clone()).collect();
        let local_set: BTreeSet<_> = local.iter().map(|(t, _)| t.clone()).collect();
        prop_assert_eq!(local_set, mine_triples);

        let text = serialize_local(&report.result);
        prop_assert_eq!(&parse_local(&text).unwrap(), &report.result, "{}", text);
    }
    // With two roles and no parallel composition, both sides observe every
    // message, so their views must allow the same message sequences.
    if g.roles.len() == 2 && !has_parallel(&g.body) {
        let a = oracle::traces(&all[&g.roles[0]].result, 6);
        let b = oracle::traces(&all[&g.roles[1]].result, 6);
        prop_assert_eq!(a, b);
    }
    Ok(())
}
