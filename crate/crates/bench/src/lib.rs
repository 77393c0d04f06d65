//! Shared inputs for the criterion benches.

use std::collections::BTreeSet;

use qfsm_core::{compile, parse_fsm, samples, CompileError, CompiledMachine, Fsm};

pub fn m2() -> Fsm {
    parse_fsm(samples::M2).expect("bundled machine parses")
}

/// The `0*10*1` query at word length bound `k`.
pub fn m2_query(k: usize) -> Result<CompiledMachine, CompileError> {
    compile(&m2(), &BTreeSet::from([2]), k)
}
