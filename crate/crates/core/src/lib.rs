//! Reversible register machines for finite state machines.
//!
//! A deterministic machine over `{0, 1}` (with optional fall-through `e`
//! arcs) is compiled into a register machine whose step is a permutation of
//! basis states `(node, input register, output register)`. Running that
//! permutation over a uniform superposition of every encoded input of length
//! `<= K`, marking configurations that halted at a target and reflecting
//! about the mean answers "which words halt at node n" by amplitude
//! amplification. Every answer can be checked against [`fsm::halting_set`].
//!
//! ```
//! use std::collections::BTreeSet;
//! use qfsm_core::{compile, parse_fsm, search, samples, SearchMode};
//!
//! let m2 = parse_fsm(samples::M2).unwrap();
//! let compiled = compile(&m2, &BTreeSet::from([2]), 3).unwrap();
//! let result = search(&compiled, SearchMode::Auto, 100, 42).unwrap();
//! assert_eq!(result.iterations, 1);
//! assert!(result.marked_mass > 0.94);
//! ```

pub mod codec;
pub mod compiler;
pub mod fsm;
pub mod grover;
pub mod random;
pub mod regex;
pub mod register;
pub mod samples;
pub mod unitaries;

pub use codec::{decode, encode, enumerate_inputs, initial_register, EncodedInput, RegisterSpec};
pub use compiler::{
    analyze_schedule, assign_outputs, build_tracker, compile, compile_plain, complete_with_sink,
    invert, split_fanin, CompileError, CompiledMachine, MarkedFsm, Origin, RevArc, RevMachine,
    Schedule,
};
pub use fsm::{
    halting_set, parse_fsm, run_word, Arc, Diagnostic, Fsm, HaltReport, NodeId, Symbol, Word,
};
pub use grover::{
    diffuse, evolve, exactly_marked_inputs, grover_iterations_for, grover_round,
    init_superposition, mark, search, success_probability, QState, QueryResult, Sample, SearchMode,
};
pub use regex::parse_regex;
pub use register::BitRegister;
pub use unitaries::{
    build_um, initial_config, read_output_trace, run, run_traced, step, Direction, MachineConfig,
    Trace, UmTable,
};
