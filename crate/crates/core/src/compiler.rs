//! Machine-to-machine passes that turn a classical [`Fsm`] into a reversible
//! register machine.
//!
//! The pipeline run by [`compile`]:
//!
//! 1. [`complete_with_sink`]: route every missing transition to a dead node.
//! 2. [`build_tracker`]: pair each node with the node at which the most
//!    recent `1` was read. Once the marker bit of an encoded input has been
//!    read, that second component is the node where the un-encoded word
//!    halted, and trailing zero reads never change it.
//! 3. [`split_fanin`]: insert fall-through nodes until no node has more than
//!    two incoming arcs.
//! 4. [`assign_outputs`]: nodes with two incoming arcs record which one was
//!    taken as an output bit, which makes every step invertible.
//! 5. [`analyze_schedule`]: a step budget after which every input has been
//!    read in full.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{RegisterSpec, MAX_ENCODABLE_LEN};
use crate::fsm::{Arc, Diagnostic, Fsm, NodeId, Symbol};
use crate::unitaries::{build_um, UmTable, UnitaryError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("invalid machine: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("no target nodes given")]
    NoTargets,
    #[error("target node {0} out of range")]
    TargetOutOfRange(NodeId),
    #[error("length bound {k} exceeds the maximum of {max}")]
    BoundTooLarge { k: usize, max: usize },
    #[error("eps cycle through node {0}")]
    EpsCycle(NodeId),
    #[error("node {node} has {count} upstream arcs; at most 2 allowed")]
    FanIn { node: NodeId, count: usize },
    #[error("malformed reversible machine: {0}")]
    Malformed(String),
    #[error("{0} nodes need more than 32 code bits")]
    TooManyNodes(usize),
    #[error(transparent)]
    Unitary(#[from] UnitaryError),
}

/// What a compiled node stands for in the source machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Origin {
    Original {
        node: NodeId,
    },
    /// Product state: source node, and the node at which the last `1` was
    /// read (`None` until the first `1`).
    Tracker {
        node: NodeId,
        last_one: Option<NodeId>,
    },
    /// Fall-through node inserted in front of `into`.
    Split {
        into: NodeId,
    },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Original { node } => write!(f, "original {node}"),
            Origin::Tracker {
                node,
                last_one: None,
            } => write!(f, "tracker ({node}, ⊥)"),
            Origin::Tracker {
                node,
                last_one: Some(c),
            } => write!(f, "tracker ({node}, {c})"),
            Origin::Split { into } => write!(f, "split -> {into}"),
        }
    }
}

/// An [`Fsm`] carrying a marked node set and per-node provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedFsm {
    pub fsm: Fsm,
    pub marked: BTreeSet<NodeId>,
    pub origins: Vec<Origin>,
}

impl MarkedFsm {
    /// Wraps a machine with nothing marked.
    pub fn plain(fsm: Fsm) -> Self {
        let origins = (0..fsm.node_count())
            .map(|node| Origin::Original { node })
            .collect();
        Self {
            fsm,
            marked: BTreeSet::new(),
            origins,
        }
    }

    pub fn upstream_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.fsm.node_count()];
        for a in self.fsm.arcs() {
            counts[a.dst] += 1;
        }
        counts
    }
}

/// Adds a dead node (always the last id) with self-loops on both symbols and
/// routes every missing symbol transition to it. Fall-through nodes are left
/// alone.
pub fn complete_with_sink(machine: &Fsm) -> Fsm {
    let dead = machine.node_count();
    let mut arcs = machine.arcs().to_vec();
    for node in 0..machine.node_count() {
        if machine.eps_successor(node).is_some() {
            continue;
        }
        for sym in [Symbol::Zero, Symbol::One] {
            if machine.next(node, sym).is_none() {
                arcs.push(Arc::new(node, sym, dead));
            }
        }
    }
    arcs.push(Arc::new(dead, Symbol::Zero, dead));
    arcs.push(Arc::new(dead, Symbol::One, dead));
    Fsm::new(
        dead + 1,
        machine.start(),
        arcs,
        machine.accepts().iter().copied(),
    )
}

/// Product of `machine` with a "node at the last 1" register.
///
/// States are `(m, c)`. Reading `0` moves `m` and keeps `c`; reading `1`
/// moves `m` and sets `c` to the node `m` it was read at; `e` arcs move `m`
/// only. States with `c` in `targets` are marked. Only states reachable from
/// `(start, ⊥)` are built, numbered breadth-first.
pub fn build_tracker(machine: &Fsm, targets: &BTreeSet<NodeId>) -> MarkedFsm {
    type State = (NodeId, Option<NodeId>);
    let start: State = (machine.start(), None);
    let mut ids: BTreeMap<State, NodeId> = BTreeMap::from([(start, 0)]);
    let mut states = vec![start];
    let mut queue = VecDeque::from([start]);
    let mut arcs = Vec::new();

    while let Some(state @ (m, c)) = queue.pop_front() {
        let src = ids[&state];
        let moves: Vec<(Symbol, State)> = match machine.eps_successor(m) {
            Some(next) => vec![(Symbol::Eps, (next, c))],
            None => [Symbol::Zero, Symbol::One]
                .into_iter()
                .filter_map(|sym| {
                    let next = machine.next(m, sym)?;
                    let c = if sym == Symbol::One { Some(m) } else { c };
                    Some((sym, (next, c)))
                })
                .collect(),
        };
        for (sym, next) in moves {
            let dst = *ids.entry(next).or_insert_with(|| {
                states.push(next);
                queue.push_back(next);
                states.len() - 1
            });
            arcs.push(Arc::new(src, sym, dst));
        }
    }

    let marked = states
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| c.is_some_and(|c| targets.contains(&c)))
        .map(|(id, _)| id)
        .collect();
    let origins = states
        .iter()
        .map(|&(node, last_one)| Origin::Tracker { node, last_one })
        .collect();
    MarkedFsm {
        fsm: Fsm::new(states.len(), 0, arcs, []),
        marked,
        origins,
    }
}

/// Splits fan-in until every node has at most two upstream arcs.
///
/// For a node `n` with more than two, its upstream arcs are sorted by
/// `(src, sym)`, the first two are redirected to a fresh node `n'`, and
/// `n' -e-> n` is added. Fresh nodes sort after every existing one, so the
/// replacements build a balanced tree. A fresh node is marked iff `n` is.
pub fn split_fanin(machine: MarkedFsm) -> MarkedFsm {
    let MarkedFsm {
        fsm,
        mut marked,
        mut origins,
    } = machine;
    let original_count = fsm.node_count();
    let mut node_count = original_count;
    let mut arcs = fsm.arcs().to_vec();

    for n in 0..original_count {
        loop {
            let mut upstream: Vec<usize> = (0..arcs.len()).filter(|&i| arcs[i].dst == n).collect();
            if upstream.len() <= 2 {
                break;
            }
            upstream.sort_by_key(|&i| (arcs[i].src, arcs[i].sym));
            let fresh = node_count;
            node_count += 1;
            for &i in &upstream[..2] {
                arcs[i].dst = fresh;
            }
            arcs.push(Arc::new(fresh, Symbol::Eps, n));
            origins.push(Origin::Split { into: n });
            if marked.contains(&n) {
                marked.insert(fresh);
            }
        }
    }

    MarkedFsm {
        fsm: Fsm::new(node_count, fsm.start(), arcs, fsm.accepts().iter().copied()),
        marked,
        origins,
    }
}

/// A reversible arc `<src, input, dst, output>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RevArc {
    pub src: NodeId,
    pub input: Symbol,
    pub dst: NodeId,
    pub output: Symbol,
}

impl fmt::Display for RevArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.src, self.input, self.dst, self.output
        )
    }
}

/// A machine whose every step can be undone: fan-in is at most two and a
/// node entered from two arcs records which one in an output bit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevMachine {
    node_count: usize,
    arcs: Vec<RevArc>,
    start: NodeId,
    reading: BTreeSet<NodeId>,
    writing: BTreeSet<NodeId>,
    origins: Vec<Origin>,
}

impl RevMachine {
    /// Sorts the arcs and derives the reading and writing sets.
    pub fn new(
        node_count: usize,
        start: NodeId,
        mut arcs: Vec<RevArc>,
        origins: Vec<Origin>,
    ) -> Self {
        arcs.sort();
        let reading = arcs
            .iter()
            .filter(|a| !a.input.is_eps())
            .map(|a| a.src)
            .collect();
        let writing = arcs
            .iter()
            .filter(|a| !a.output.is_eps())
            .map(|a| a.dst)
            .collect();
        Self {
            node_count,
            arcs,
            start,
            reading,
            writing,
            origins,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Sorted by `(src, input, dst, output)`.
    pub fn arcs(&self) -> &[RevArc] {
        &self.arcs
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    /// Nodes whose out-arcs consume an input bit.
    pub fn reading(&self) -> &BTreeSet<NodeId> {
        &self.reading
    }

    /// Nodes whose entry writes an output bit.
    pub fn writing(&self) -> &BTreeSet<NodeId> {
        &self.writing
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn upstream(&self, node: NodeId) -> impl Iterator<Item = &RevArc> {
        self.arcs.iter().filter(move |a| a.dst == node)
    }

    pub fn eps_successor(&self, node: NodeId) -> Option<NodeId> {
        self.arcs
            .iter()
            .find(|a| a.src == node && a.input.is_eps())
            .map(|a| a.dst)
    }

    /// Checks the structural invariants: nodes in range, deterministic
    /// forward arcs, fan-in at most two, and two-way fan-in told apart by
    /// distinct output bits.
    pub fn check(&self) -> Result<(), CompileError> {
        let bad = |msg: String| Err(CompileError::Malformed(msg));
        if self.start >= self.node_count && self.node_count > 0 {
            return bad(format!("start {} out of range", self.start));
        }
        if self.origins.len() != self.node_count {
            return bad("provenance does not cover every node".into());
        }
        let mut out = vec![[0usize; 3]; self.node_count];
        let mut entries: Vec<Vec<Symbol>> = vec![Vec::new(); self.node_count];
        for a in &self.arcs {
            if a.src >= self.node_count || a.dst >= self.node_count {
                return bad(format!("arc {a} references a missing node"));
            }
            out[a.src][sym_index(a.input)] += 1;
            entries[a.dst].push(a.output);
        }
        for (node, c) in out.iter().enumerate() {
            if c[2] > 1 || (c[2] == 1 && c[0] + c[1] > 0) || c[0] > 1 || c[1] > 1 {
                return bad(format!("node {node} is not deterministic"));
            }
        }
        for (node, outs) in entries.iter().enumerate() {
            match outs.as_slice() {
                [] | [_] => {}
                [a, b] => {
                    if a.is_eps() || b.is_eps() || a == b {
                        return bad(format!("entries into node {node} are not distinguishable"));
                    }
                }
                more => {
                    return Err(CompileError::FanIn {
                        node,
                        count: more.len(),
                    })
                }
            }
        }
        Ok(())
    }
}

fn sym_index(s: Symbol) -> usize {
    match s {
        Symbol::Zero => 0,
        Symbol::One => 1,
        Symbol::Eps => 2,
    }
}

/// Gives each node with two upstream arcs an output bit per arc: sorted by
/// `(src, sym)`, the first writes `1` and the second `0`. Arcs into nodes with
/// a single upstream arc write nothing.
pub fn assign_outputs(machine: &MarkedFsm) -> Result<RevMachine, CompileError> {
    let counts = machine.upstream_counts();
    if let Some((node, &count)) = counts.iter().enumerate().find(|(_, &c)| c > 2) {
        return Err(CompileError::FanIn { node, count });
    }
    let mut by_dst: BTreeMap<NodeId, Vec<Arc>> = BTreeMap::new();
    for a in machine.fsm.arcs() {
        by_dst.entry(a.dst).or_default().push(*a);
    }
    let mut arcs = Vec::with_capacity(machine.fsm.arcs().len());
    for (_, mut upstream) in by_dst {
        upstream.sort_by_key(|a| (a.src, a.sym));
        let outputs: &[Symbol] = if upstream.len() == 2 {
            &[Symbol::One, Symbol::Zero]
        } else {
            &[Symbol::Eps]
        };
        for (a, &output) in upstream.iter().zip(outputs) {
            arcs.push(RevArc {
                src: a.src,
                input: a.sym,
                dst: a.dst,
                output,
            });
        }
    }
    let rev = RevMachine::new(
        machine.fsm.node_count(),
        machine.fsm.start(),
        arcs,
        machine.origins.clone(),
    );
    rev.check()?;
    Ok(rev)
}

/// Reverses every arc and swaps input and output roles.
pub fn invert(machine: &RevMachine) -> Result<RevMachine, CompileError> {
    machine.check()?;
    let arcs = machine
        .arcs
        .iter()
        .map(|a| RevArc {
            src: a.dst,
            input: a.output,
            dst: a.src,
            output: a.input,
        })
        .collect();
    let inv = RevMachine::new(
        machine.node_count,
        machine.start,
        arcs,
        machine.origins.clone(),
    );
    inv.check()?;
    Ok(inv)
}

/// Step budget for a compiled machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// `T`: forward steps per evolution.
    pub steps: usize,
    /// `E`: longest run of consecutive `e` arcs.
    pub eps_run: usize,
    /// `K + 1`: reads needed to consume an encoded input.
    pub reads_required: usize,
}

/// `E` is the longest path in the `e`-arc subgraph; `T = (K+1)(E+1) + E`.
///
/// At most `E` fall-through steps separate two reads, so `T` steps always
/// include `K+1` reads.
pub fn analyze_schedule(machine: &RevMachine, k: usize) -> Result<Schedule, CompileError> {
    let n = machine.node_count();
    let mut next = vec![None; n];
    for a in machine.arcs().iter().filter(|a| a.input.is_eps()) {
        next[a.src] = Some(a.dst);
    }
    // run[v]: number of e arcs followed from v before reaching a node without one
    let mut run: Vec<Option<usize>> = vec![None; n];
    for root in 0..n {
        let mut path = Vec::new();
        let mut on_path = BTreeSet::new();
        let mut node = root;
        let mut tail = loop {
            if let Some(r) = run[node] {
                break r;
            }
            if !on_path.insert(node) {
                return Err(CompileError::EpsCycle(node));
            }
            path.push(node);
            match next[node] {
                Some(nx) => node = nx,
                None => {
                    path.pop();
                    run[node] = Some(0);
                    break 0;
                }
            }
        };
        while let Some(v) = path.pop() {
            tail += 1;
            run[v] = Some(tail);
        }
    }
    let eps_run = run.into_iter().flatten().max().unwrap_or(0);
    let reads_required = k + 1;
    Ok(Schedule {
        steps: reads_required * (eps_run + 1) + eps_run,
        eps_run,
        reads_required,
    })
}

/// Bits needed to hold `count` distinct node codes.
pub fn node_width_for(count: usize) -> u32 {
    if count <= 1 {
        0
    } else {
        usize::BITS - (count - 1).leading_zeros()
    }
}

/// A reversible machine ready to simulate: widths, step budget, `U_m`
/// table and the query it answers.
#[derive(Clone, Debug)]
pub struct CompiledMachine {
    pub machine: RevMachine,
    pub registers: RegisterSpec,
    pub schedule: Schedule,
    pub k: usize,
    /// Nodes at which a finished run answers the query.
    pub marked: BTreeSet<NodeId>,
    pub um: UmTable,
    /// The classical machine this was compiled from.
    pub source: Fsm,
    /// Halting targets in `source`; `None` for a plain compile.
    pub targets: Option<BTreeSet<NodeId>>,
    reading_mask: Vec<bool>,
    writing_mask: Vec<bool>,
    marked_mask: Vec<bool>,
}

impl CompiledMachine {
    fn assemble(
        rev: RevMachine,
        marked: BTreeSet<NodeId>,
        k: usize,
        source: Fsm,
        targets: Option<BTreeSet<NodeId>>,
    ) -> Result<Self, CompileError> {
        let schedule = analyze_schedule(&rev, k)?;
        let node_width = node_width_for(rev.node_count());
        if node_width > 30 {
            return Err(CompileError::TooManyNodes(rev.node_count()));
        }
        let um = build_um(&rev, node_width)?;
        let registers = RegisterSpec {
            input_width: (k + 2) as u32,
            // one spare write beyond T + E keeps the first written bit from
            // wrapping into the low bit for any run of up to T + E steps
            output_width: (schedule.steps + schedule.eps_run + 1) as u32,
            node_width,
        };
        let codes = 1usize << node_width;
        let mask = |set: &BTreeSet<NodeId>| (0..codes).map(|c| set.contains(&c)).collect();
        Ok(Self {
            reading_mask: mask(rev.reading()),
            writing_mask: mask(rev.writing()),
            marked_mask: mask(&marked),
            machine: rev,
            registers,
            schedule,
            k,
            marked,
            um,
            source,
            targets,
        })
    }

    pub fn is_reading(&self, code: u32) -> bool {
        self.reading_mask
            .get(code as usize)
            .copied()
            .unwrap_or(false)
    }

    pub fn is_writing(&self, code: u32) -> bool {
        self.writing_mask
            .get(code as usize)
            .copied()
            .unwrap_or(false)
    }

    pub fn is_marked(&self, code: u32) -> bool {
        self.marked_mask
            .get(code as usize)
            .copied()
            .unwrap_or(false)
    }

    /// `2^(K+1)`, the number of input register values searched over.
    pub fn search_space(&self) -> u64 {
        1u64 << (self.k + 1)
    }

    /// Same machine with a different output register width.
    ///
    /// Steps stay bijective for any width; this lets exhaustive checks run
    /// over a small configuration space.
    pub fn with_output_width(&self, width: u32) -> Self {
        let mut narrowed = self.clone();
        narrowed.registers.output_width = width.max(1);
        narrowed
    }

    /// Deterministic text serialization: registers, schedule, marked set,
    /// node table, arcs and the full `U_m` table.
    pub fn to_text(&self) -> String {
        let r = &self.registers;
        let s = &self.schedule;
        let mut out = String::new();
        out.push_str(&format!("K {}\n", self.k));
        out.push_str(&format!(
            "registers node={} input={} output={}\n",
            r.node_width, r.input_width, r.output_width
        ));
        out.push_str(&format!("schedule E={} T={}\n", s.eps_run, s.steps));
        match &self.targets {
            Some(t) => out.push_str(&format!("targets {}\n", join(t))),
            None => out.push_str("targets none\n"),
        }
        out.push_str(&format!("marked {}\n", join(&self.marked)));
        out.push_str(&format!("nodes {}\n", self.machine.node_count()));
        for (id, origin) in self.machine.origins().iter().enumerate() {
            let mut flags = Vec::new();
            if id == self.machine.start() {
                flags.push("start");
            }
            if self.machine.reading().contains(&id) {
                flags.push("reading");
            }
            if self.machine.writing().contains(&id) {
                flags.push("writing");
            }
            if self.marked.contains(&id) {
                flags.push("marked");
            }
            out.push_str(&format!("  {id}: {origin}"));
            if !flags.is_empty() {
                out.push_str(&format!(" [{}]", flags.join(" ")));
            }
            out.push('\n');
        }
        out.push_str(&format!("arcs {}\n", self.machine.arcs().len()));
        for a in self.machine.arcs() {
            out.push_str(&format!("  {a}\n"));
        }
        out.push_str("um\n");
        out.push_str(&self.um.to_string());
        out
    }
}

fn join(set: &BTreeSet<NodeId>) -> String {
    if set.is_empty() {
        return "-".into();
    }
    set.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn check_common(machine: &Fsm, k: usize) -> Result<(), CompileError> {
    let diags = machine.validate();
    if !diags.is_empty() {
        return Err(CompileError::Invalid(diags));
    }
    if k > MAX_ENCODABLE_LEN {
        return Err(CompileError::BoundTooLarge {
            k,
            max: MAX_ENCODABLE_LEN,
        });
    }
    Ok(())
}

/// Compiles a halting query: which words of length `<= k` halt at one of
/// `targets`.
pub fn compile(
    machine: &Fsm,
    targets: &BTreeSet<NodeId>,
    k: usize,
) -> Result<CompiledMachine, CompileError> {
    check_common(machine, k)?;
    if targets.is_empty() {
        return Err(CompileError::NoTargets);
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= machine.node_count()) {
        return Err(CompileError::TargetOutOfRange(t));
    }
    let total = complete_with_sink(machine);
    let split = split_fanin(build_tracker(&total, targets));
    let rev = assign_outputs(&split)?;
    CompiledMachine::assemble(rev, split.marked, k, machine.clone(), Some(targets.clone()))
}

/// Compiles the machine itself, with no halting detector and nothing marked.
///
/// Node ids are preserved. A dead node is added only if some transition is
/// missing.
pub fn compile_plain(machine: &Fsm, k: usize) -> Result<CompiledMachine, CompileError> {
    check_common(machine, k)?;
    let base = if machine.is_total() {
        machine.clone()
    } else {
        complete_with_sink(machine)
    };
    let split = split_fanin(MarkedFsm::plain(base));
    let rev = assign_outputs(&split)?;
    CompiledMachine::assemble(rev, BTreeSet::new(), k, machine.clone(), None)
}
