mod common;

use common::gen::{arb_global, global_from_tape};
use common::props::check_projections;
use convmon::projection::project;
use convmon::scribble::{parse_global, parse_local, serialize_global, validate_global, GlobalNode};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_globals_are_well_formed(g in arb_global()) {
        prop_assert!(validate_global(&g).is_ok(), "{}", serialize_global(&g));
    }

    #[test]
    fn serialize_then_parse_is_identity(g in arb_global()) {
        let text = serialize_global(&g);
        prop_assert_eq!(parse_global(&text).unwrap(), g, "{}", text);
        // Printing is deterministic.
        prop_assert_eq!(serialize_global(&parse_global(&text).unwrap()), text);
    }

    #[test]
    fn projection_is_total(g in arb_global()) {
        check_projections(&g)?;
    }
}

#[test]
fn generator_covers_every_construct() {
    let mut seen = [false; 6];
    fn mark(n: &GlobalNode, seen: &mut [bool; 6]) {
        match n {
            GlobalNode::Interaction { cont, .. } => {
                seen[0] = true;
                mark(cont, seen)
            }
            GlobalNode::Choice { branches, .. } => {
                seen[1] = true;
                branches.iter().for_each(|b| mark(b, seen))
            }
            GlobalNode::Rec { body, .. } => {
                seen[2] = true;
                mark(body, seen)
            }
            GlobalNode::Continue(_) => seen[3] = true,
            GlobalNode::Parallel { branches, cont } => {
                seen[4] = true;
                branches.iter().for_each(|b| mark(b, seen));
                mark(cont, seen)
            }
            GlobalNode::End => seen[5] = true,
        }
    }
    for seed in 0u32..300 {
        let tape: Vec<u32> = (0..80)
            .map(|i| seed.wrapping_mul(2654435761).rotate_left(i) ^ i)
            .collect();
        mark(
            &global_from_tape(&tape, 2 + seed as usize % 3).body,
            &mut seen,
        );
    }
    assert_eq!(seen, [true; 6]);
    assert_eq!(global_from_tape(&[], 2).body, GlobalNode::End);
}

#[test]
fn data_acquisition_projects_to_the_agent_listing() {
    let g = parse_global(common::mutants::DAQ).unwrap();
    let expected = parse_local(include_str!("../fixtures/DataAquisition_A.scr")).unwrap();
    assert_eq!(project(&g, "A").unwrap().result, expected);
    check_projections(&g).unwrap();
}
