//! Test helpers shared with the acceptance gate in the cli crate.
#![allow(dead_code)]

pub mod golden;
pub mod invariants;
