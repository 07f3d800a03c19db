//! Generators, reference semantics and drivers shared by the integration tests.
#![allow(dead_code)]

pub mod gen;
pub mod grid;
pub mod mutants;
pub mod oracle;
pub mod props;
pub mod session;
