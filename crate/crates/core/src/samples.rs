//! Reference machines shipped with the crate.

/// Seven nodes; reads at 0 and 1, falls through everywhere else. Its `U_m`
/// table is the fourteen-row reference table.
pub const TWO_BIT_LOOP: &str = include_str!("../fixtures/two_bit_loop.fsm");

/// Halts at node 2 exactly on words matching `0*10*1`.
pub const M2: &str = include_str!("../fixtures/m2.fsm");
