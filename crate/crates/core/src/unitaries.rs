//! The three step transforms as explicit bijections on machine
//! configurations.
//!
//! One forward step applies, in order:
//!
//! * `U_i`: if the node reads, rotate the input register right by one, so
//!   the next unread bit lands in bit 0;
//! * `U_m`: a permutation of `(node, input bit 0, output bit 0)` that moves
//!   the node along its arc, clears a consumed input bit and sets a written
//!   output bit;
//! * `U_o`: if the new node writes, rotate the output register left by one.
//!
//! A backward step applies the inverses in the opposite order.

use std::fmt;

use thiserror::Error;

use crate::codec::{initial_register, EncodedInput};
use crate::compiler::{CompiledMachine, RevMachine};
use crate::register::BitRegister;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UnitaryError {
    #[error("U_m rows collide at {0}")]
    Collision(String),
    #[error("{nodes} nodes do not fit a {width}-bit node code")]
    NodeWidth { nodes: usize, width: u32 },
    #[error("output bits can only be read from a forward trace")]
    NotForward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

/// One basis state of the register machine.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MachineConfig {
    pub node: u32,
    pub input: u64,
    pub output: BitRegister,
}

impl MachineConfig {
    pub fn new(node: u32, input: u64, output: BitRegister) -> Self {
        Self {
            node,
            input,
            output,
        }
    }

    /// Renders as `(node, input, output)` with both registers in binary.
    pub fn display(&self, input_width: u32) -> String {
        format!(
            "({}, {:0w$b}, {})",
            self.node,
            self.input,
            self.output,
            w = input_width as usize
        )
    }
}

/// A `(node, i0, o0)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub node: u32,
    pub input: bool,
    pub output: bool,
}

impl Triple {
    pub fn new(node: u32, input: bool, output: bool) -> Self {
        Self {
            node,
            input,
            output,
        }
    }

    fn pack(self) -> usize {
        ((self.node as usize) << 2) | (usize::from(self.input) << 1) | usize::from(self.output)
    }

    fn unpack(code: usize) -> Self {
        Self {
            node: (code >> 2) as u32,
            input: code & 2 != 0,
            output: code & 1 != 0,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{}",
            self.node,
            u8::from(self.input),
            u8::from(self.output)
        )
    }
}

/// `U_m` as a permutation of all `2^node_width * 4` triples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UmTable {
    node_width: u32,
    forward: Vec<u32>,
    inverse: Vec<u32>,
    specified: Vec<bool>,
}

impl UmTable {
    pub fn node_width(&self) -> u32 {
        self.node_width
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn apply(&self, t: Triple) -> Triple {
        Triple::unpack(self.forward[t.pack()] as usize)
    }

    pub fn apply_inverse(&self, t: Triple) -> Triple {
        Triple::unpack(self.inverse[t.pack()] as usize)
    }

    /// Whether the row for `t` came from an arc rather than completion.
    pub fn is_specified(&self, t: Triple) -> bool {
        self.specified[t.pack()]
    }

    /// All rows in domain order.
    pub fn rows(&self) -> impl Iterator<Item = (Triple, Triple)> + '_ {
        self.forward
            .iter()
            .enumerate()
            .map(|(d, &r)| (Triple::unpack(d), Triple::unpack(r as usize)))
    }

    pub fn specified_rows(&self) -> impl Iterator<Item = (Triple, Triple)> + '_ {
        self.rows().filter(|(d, _)| self.is_specified(*d))
    }
}

impl fmt::Display for UmTable {
    /// One `n,i,o -> n',i',o'` line per row, in domain order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (d, r) in self.rows() {
            writeln!(f, "{d} -> {r}")?;
        }
        Ok(())
    }
}

const UNSET: u32 = u32::MAX;

/// Builds `U_m` for `machine`.
///
/// Arc rows: a reading arc `<n, s, m, t>` maps `(n, s, 0)` to `(m, 0, t)`,
/// clearing the consumed bit; a fall-through arc maps `(n, i, 0)` to
/// `(m, i, t)` for both `i`. A missing output writes 0. Codes with no node
/// map to themselves. Whatever is left is paired up in ascending order.
pub fn build_um(machine: &RevMachine, node_width: u32) -> Result<UmTable, UnitaryError> {
    let codes = 1usize << node_width;
    if machine.node_count() > codes {
        return Err(UnitaryError::NodeWidth {
            nodes: machine.node_count(),
            width: node_width,
        });
    }
    let size = codes * 4;
    let mut forward = vec![UNSET; size];
    let mut taken = vec![false; size];
    let mut specified = vec![false; size];

    let mut set = |from: Triple, to: Triple, arc_row: bool| -> Result<(), UnitaryError> {
        let (d, r) = (from.pack(), to.pack());
        if forward[d] != UNSET || taken[r] {
            return Err(UnitaryError::Collision(format!("{from} -> {to}")));
        }
        forward[d] = r as u32;
        taken[r] = true;
        specified[d] = arc_row;
        Ok(())
    };

    for a in machine.arcs() {
        let (src, dst) = (a.src as u32, a.dst as u32);
        let written = a.output.bit().unwrap_or(false);
        match a.input.bit() {
            Some(s) => set(
                Triple::new(src, s, false),
                Triple::new(dst, false, written),
                true,
            )?,
            None => {
                for i in [false, true] {
                    set(
                        Triple::new(src, i, false),
                        Triple::new(dst, i, written),
                        true,
                    )?;
                }
            }
        }
    }
    for node in machine.node_count() as u32..codes as u32 {
        for i in [false, true] {
            for o in [false, true] {
                let t = Triple::new(node, i, o);
                set(t, t, false)?;
            }
        }
    }

    let free_images = (0..size).filter(|&r| !taken[r]);
    let free_domain: Vec<usize> = (0..size).filter(|&d| forward[d] == UNSET).collect();
    for (d, r) in free_domain.into_iter().zip(free_images) {
        forward[d] = r as u32;
    }

    let mut inverse = vec![0u32; size];
    for (d, &r) in forward.iter().enumerate() {
        inverse[r as usize] = d as u32;
    }
    Ok(UmTable {
        node_width,
        forward,
        inverse,
        specified,
    })
}

fn rotate_right(x: u64, width: u32) -> u64 {
    (x >> 1) | ((x & 1) << (width - 1))
}

fn rotate_left(x: u64, width: u32) -> u64 {
    let top = (x >> (width - 1)) & 1;
    let shifted = if width == 64 {
        x << 1
    } else {
        (x << 1) & ((1 << width) - 1)
    };
    shifted | top
}

/// What one step did besides moving the node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEffect {
    /// Bit rotated into input bit 0 by `U_i`, when the node read.
    pub read: Option<bool>,
    /// Bit rotated out of output bit 0 by `U_o`, when the new node wrote.
    pub written: Option<bool>,
}

/// Applies one step to `cfg` in place.
pub fn step_in_place(
    compiled: &CompiledMachine,
    cfg: &mut MachineConfig,
    direction: Direction,
) -> StepEffect {
    let input_width = compiled.registers.input_width;
    debug_assert_eq!(cfg.output.width(), compiled.registers.output_width);
    let mut effect = StepEffect::default();
    match direction {
        Direction::Forward => {
            if compiled.is_reading(cfg.node) {
                cfg.input = rotate_right(cfg.input, input_width);
                effect.read = Some(cfg.input & 1 == 1);
            }
            let t = compiled
                .um
                .apply(Triple::new(cfg.node, cfg.input & 1 == 1, cfg.output.bit(0)));
            apply_triple(cfg, t);
            if compiled.is_writing(cfg.node) {
                effect.written = Some(cfg.output.bit(0));
                cfg.output.rotate_left();
            }
        }
        Direction::Backward => {
            if compiled.is_writing(cfg.node) {
                cfg.output.rotate_right();
            }
            let t = compiled.um.apply_inverse(Triple::new(
                cfg.node,
                cfg.input & 1 == 1,
                cfg.output.bit(0),
            ));
            apply_triple(cfg, t);
            if compiled.is_reading(cfg.node) {
                cfg.input = rotate_left(cfg.input, input_width);
            }
        }
    }
    effect
}

fn apply_triple(cfg: &mut MachineConfig, t: Triple) {
    cfg.node = t.node;
    cfg.input = (cfg.input & !1) | u64::from(t.input);
    cfg.output.set_bit(0, t.output);
}

pub fn step(
    compiled: &CompiledMachine,
    cfg: &MachineConfig,
    direction: Direction,
) -> MachineConfig {
    let mut next = cfg.clone();
    step_in_place(compiled, &mut next, direction);
    next
}

/// Configuration for `input` before any step: start node, shifted input,
/// empty output.
pub fn initial_config(compiled: &CompiledMachine, input: EncodedInput) -> MachineConfig {
    MachineConfig {
        node: compiled.machine.start() as u32,
        input: initial_register(input),
        output: BitRegister::zero(compiled.registers.output_width),
    }
}

pub fn run(
    compiled: &CompiledMachine,
    start: &MachineConfig,
    steps: usize,
    direction: Direction,
) -> MachineConfig {
    let mut cfg = start.clone();
    for _ in 0..steps {
        step_in_place(compiled, &mut cfg, direction);
    }
    cfg
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub config: MachineConfig,
    pub effect: StepEffect,
}

/// Every configuration visited by a run, after each step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub direction: Direction,
    pub start: MachineConfig,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn last(&self) -> &MachineConfig {
        self.steps.last().map_or(&self.start, |s| &s.config)
    }

    pub fn reads(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.effect.read.is_some())
            .count()
    }
}

pub fn run_traced(
    compiled: &CompiledMachine,
    start: &MachineConfig,
    steps: usize,
    direction: Direction,
) -> Trace {
    let mut cfg = start.clone();
    let steps = (0..steps)
        .map(|_| {
            let effect = step_in_place(compiled, &mut cfg, direction);
            TraceStep {
                config: cfg.clone(),
                effect,
            }
        })
        .collect();
    Trace {
        direction,
        start: start.clone(),
        steps,
    }
}

/// Output bits in the order they were written.
///
/// With no wrap-around, the first-written bit sits highest in the final
/// output register and the last-written one at bit 1.
pub fn read_output_trace(trace: &Trace) -> Result<Vec<bool>, UnitaryError> {
    if trace.direction != Direction::Forward {
        return Err(UnitaryError::NotForward);
    }
    Ok(trace
        .steps
        .iter()
        .filter_map(|s| s.effect.written)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{assign_outputs, compile_plain, MarkedFsm};
    use crate::fsm::{parse_fsm, Fsm};
    use crate::samples;

    fn two_bit_loop() -> CompiledMachine {
        compile_plain(&parse_fsm(samples::TWO_BIT_LOOP).unwrap(), 1).unwrap()
    }

    fn cfg(c: &CompiledMachine, node: u32, input: u64, output: u64) -> MachineConfig {
        MachineConfig::new(
            node,
            input,
            BitRegister::from_u64(c.registers.output_width, output),
        )
    }

    type Row = (u32, u8, u8);

    const TWO_BIT_LOOP_ROWS: [(Row, Row); 14] = [
        ((0, 0, 0), (1, 0, 0)),
        ((0, 1, 0), (4, 0, 0)),
        ((1, 0, 0), (2, 0, 0)),
        ((1, 1, 0), (3, 0, 0)),
        ((2, 0, 0), (6, 0, 1)),
        ((2, 1, 0), (6, 1, 1)),
        ((3, 0, 0), (5, 0, 1)),
        ((3, 1, 0), (5, 1, 1)),
        ((4, 0, 0), (5, 0, 0)),
        ((4, 1, 0), (5, 1, 0)),
        ((5, 0, 0), (6, 0, 0)),
        ((5, 1, 0), (6, 1, 0)),
        ((6, 0, 0), (0, 0, 0)),
        ((6, 1, 0), (0, 1, 0)),
    ];

    fn triple((n, i, o): (u32, u8, u8)) -> Triple {
        Triple::new(n, i == 1, o == 1)
    }

    #[test]
    fn two_bit_loop_table_has_every_reference_row() {
        let c = two_bit_loop();
        let specified: Vec<_> = c.um.specified_rows().collect();
        assert_eq!(specified.len(), 14);
        for (from, to) in TWO_BIT_LOOP_ROWS {
            assert_eq!(c.um.apply(triple(from)), triple(to), "{from:?}");
            assert!(c.um.is_specified(triple(from)));
        }
        let text = c.um.to_string();
        assert!(text.contains("2,0,0 -> 6,0,1\n"));
        assert!(text.contains("0,1,0 -> 4,0,0\n"));
        // unused code 7 is fixed
        for i in [false, true] {
            for o in [false, true] {
                let t = Triple::new(7, i, o);
                assert_eq!(c.um.apply(t), t);
            }
        }
        let mut images: Vec<Triple> = c.um.rows().map(|(_, r)| r).collect();
        images.sort();
        images.dedup();
        assert_eq!(images.len(), 32);
    }

    #[test]
    fn one_node_no_arcs_is_identity() {
        let rev = assign_outputs(&MarkedFsm::plain(Fsm::new(1, 0, vec![], []))).unwrap();
        let um = build_um(&rev, 0).unwrap();
        assert_eq!(um.len(), 4);
        assert!(um.rows().all(|(d, r)| d == r));
    }

    #[test]
    fn node_width_must_cover_nodes() {
        let rev =
            assign_outputs(&MarkedFsm::plain(parse_fsm(samples::TWO_BIT_LOOP).unwrap())).unwrap();
        assert_eq!(
            build_um(&rev, 2),
            Err(UnitaryError::NodeWidth { nodes: 7, width: 2 })
        );
    }

    #[test]
    fn first_forward_step_reads_a0() {
        let c = two_bit_loop();
        let next = step(&c, &cfg(&c, 0, 0b110, 0), Direction::Forward);
        assert_eq!(next, cfg(&c, 4, 0b010, 0));
    }

    #[test]
    fn step_round_trip_on_samples() {
        let c = two_bit_loop();
        for node in 0..8 {
            for input in 0..8 {
                for output in [0, 1, 2, 0x7fff, 0x4001] {
                    let x = cfg(&c, node, input, output);
                    let y = step(&c, &x, Direction::Forward);
                    assert_eq!(step(&c, &y, Direction::Backward), x);
                }
            }
        }
    }

    #[test]
    fn word_one_round_trip_on_two_bit_loop() {
        let c = two_bit_loop();
        let start = cfg(&c, 0, 0b110, 0);
        let fwd = run_traced(&c, &start, 8, Direction::Forward);
        assert_eq!(fwd.last(), &cfg(&c, 0, 0, 0));
        assert_eq!(read_output_trace(&fwd).unwrap(), vec![false; 4]);
        assert_eq!(fwd.reads(), 2);
        assert_eq!(run(&c, fwd.last(), 8, Direction::Backward), start);
        assert_eq!(run(&c, &start, 0, Direction::Forward), start);
        let back = run_traced(&c, fwd.last(), 8, Direction::Backward);
        assert_eq!(read_output_trace(&back), Err(UnitaryError::NotForward));
    }

    #[test]
    fn single_write_of_one_lands_at_bit_one() {
        let c = two_bit_loop();
        // reads 0, 0 then 2 -e-> 6 writes 1
        let t = run_traced(&c, &cfg(&c, 0, 0, 0), 3, Direction::Forward);
        assert_eq!(read_output_trace(&t).unwrap(), vec![true]);
        assert_eq!(t.last().output.to_u64(), Some(2));
        assert_eq!(t.last().node, 6);
    }

    #[test]
    fn no_writes_gives_empty_output_trace() {
        let c = two_bit_loop();
        let t = run_traced(&c, &cfg(&c, 0, 0b110, 0), 1, Direction::Forward);
        assert!(read_output_trace(&t).unwrap().is_empty());
    }

    #[test]
    fn unused_code_is_inert() {
        let c = two_bit_loop();
        let x = cfg(&c, 7, 0b101, 0b11);
        assert_eq!(run(&c, &x, 25, Direction::Forward), x);
        assert_eq!(run(&c, &x, 25, Direction::Backward), x);
    }

    #[test]
    fn input_rotation_helpers() {
        assert_eq!(rotate_right(0b110, 3), 0b011);
        assert_eq!(rotate_left(0b011, 3), 0b110);
        assert_eq!(rotate_left(rotate_right(1, 64), 64), 1);
    }
}
