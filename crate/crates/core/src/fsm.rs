//! Classical finite state machines over the binary alphabet.
//!
//! This is the reference side of the crate: [`run_word`] and
//! [`halting_set`] are the brute-force answers that every quantum result is
//! checked against.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier, `0..node_count`.
pub type NodeId = usize;

/// Largest word length accepted by the enumerating operations.
pub const DEFAULT_MAX_LEN: usize = 16;

/// An arc label: a binary input symbol or the fall-through `e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Zero,
    One,
    Eps,
}

impl Symbol {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    /// `None` for [`Symbol::Eps`].
    pub fn bit(self) -> Option<bool> {
        match self {
            Symbol::Zero => Some(false),
            Symbol::One => Some(true),
            Symbol::Eps => None,
        }
    }

    pub fn is_eps(self) -> bool {
        self == Symbol::Eps
    }

    fn index(self) -> usize {
        match self {
            Symbol::Zero => 0,
            Symbol::One => 1,
            Symbol::Eps => 2,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Eps => 'e',
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub src: NodeId,
    pub sym: Symbol,
    pub dst: NodeId,
}

impl Arc {
    pub fn new(src: NodeId, sym: Symbol, dst: NodeId) -> Self {
        Self { src, sym, dst }
    }
}

/// A binary input word. `bits()[0]` is read first and is printed leftmost.
///
/// Words order shortlex: shorter words first, then lexicographically in
/// reading order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<bool>);

impl Word {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The `len`-bit word whose `i`-th symbol is bit `i` of `pattern`.
    pub fn from_low_bits(pattern: u64, len: usize) -> Self {
        Self((0..len).map(|i| (pattern >> i) & 1 == 1).collect())
    }

    /// All words of length `0..=max_len`, shortlex order.
    pub fn all_up_to(max_len: usize) -> impl Iterator<Item = Word> {
        (0..=max_len).flat_map(|len| {
            (0..1u64 << len).map(move |p| {
                // reverse so the iteration order agrees with shortlex
                let bits: Vec<bool> = (0..len).map(|i| (p >> (len - 1 - i)) & 1 == 1).collect();
                Word(bits)
            })
        })
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid word character {0:?}; expected 0 or 1")]
pub struct WordParseError(char);

impl FromStr for Word {
    type Err = WordParseError;

    /// Accepts `0`/`1` strings; `""` and `"ε"` are the empty word.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ε" {
            return Ok(Word::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(WordParseError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = WordParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One violated machine invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    StartOutOfRange(NodeId),
    AcceptOutOfRange(NodeId),
    ArcOutOfRange(Arc),
    /// A node carries an `e` arc next to some other out-arc.
    EpsNotExclusive(NodeId),
    /// Two arcs leave the node on the same symbol.
    Nondeterministic(NodeId, Symbol),
    /// Nodes on a cycle made only of `e` arcs, smallest first.
    EpsCycle(Vec<NodeId>),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::StartOutOfRange(n) => write!(f, "start node {n} out of range"),
            Diagnostic::AcceptOutOfRange(n) => write!(f, "accept node {n} out of range"),
            Diagnostic::ArcOutOfRange(a) => {
                write!(
                    f,
                    "arc {} {} {} references a missing node",
                    a.src, a.sym, a.dst
                )
            }
            Diagnostic::EpsNotExclusive(n) => write!(f, "eps not exclusive at node {n}"),
            Diagnostic::Nondeterministic(n, s) => {
                write!(f, "nondeterministic: node {n} has several arcs on {s}")
            }
            Diagnostic::EpsCycle(nodes) => {
                let list: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
                write!(f, "eps cycle through nodes {}", list.join(", "))
            }
        }
    }
}

/// A deterministic machine with optional `e` arcs.
///
/// Construction never fails; [`Fsm::validate`] reports what is wrong.
/// Operations that simulate the machine assume it validated cleanly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fsm {
    node_count: usize,
    arcs: Vec<Arc>,
    start: NodeId,
    accepts: BTreeSet<NodeId>,
    // [zero, one, eps] successor per node; first arc wins on duplicates
    table: Vec<[Option<NodeId>; 3]>,
}

impl Fsm {
    pub fn new(
        node_count: usize,
        start: NodeId,
        arcs: Vec<Arc>,
        accepts: impl IntoIterator<Item = NodeId>,
    ) -> Self {
        let mut table = vec![[None; 3]; node_count];
        for a in &arcs {
            if a.src < node_count && a.dst < node_count {
                let slot = &mut table[a.src][a.sym.index()];
                if slot.is_none() {
                    *slot = Some(a.dst);
                }
            }
        }
        Self {
            node_count,
            arcs,
            start,
            accepts: accepts.into_iter().collect(),
            table,
        }
    }

    /// Builds and validates in one go.
    pub fn validated(
        node_count: usize,
        start: NodeId,
        arcs: Vec<Arc>,
        accepts: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, Vec<Diagnostic>> {
        let m = Self::new(node_count, start, arcs, accepts);
        let diags = m.validate();
        if diags.is_empty() {
            Ok(m)
        } else {
            Err(diags)
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn accepts(&self) -> &BTreeSet<NodeId> {
        &self.accepts
    }

    pub fn next(&self, node: NodeId, sym: Symbol) -> Option<NodeId> {
        self.table.get(node).and_then(|row| row[sym.index()])
    }

    pub fn eps_successor(&self, node: NodeId) -> Option<NodeId> {
        self.next(node, Symbol::Eps)
    }

    /// True when every node either falls through on `e` or has arcs on
    /// both `0` and `1`.
    pub fn is_total(&self) -> bool {
        self.table
            .iter()
            .all(|row| row[2].is_some() || (row[0].is_some() && row[1].is_some()))
    }

    /// Follows `e` arcs from `node` until a node without one.
    ///
    /// Bounded by `node_count` so a malformed machine cannot hang.
    pub fn eps_closure(&self, mut node: NodeId) -> NodeId {
        for _ in 0..=self.node_count {
            match self.eps_successor(node) {
                Some(next) => node = next,
                None => break,
            }
        }
        node
    }

    /// Every violated invariant; empty means the machine is well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let n = self.node_count;
        let mut diags = Vec::new();
        if self.start >= n {
            diags.push(Diagnostic::StartOutOfRange(self.start));
        }
        for &acc in &self.accepts {
            if acc >= n {
                diags.push(Diagnostic::AcceptOutOfRange(acc));
            }
        }
        let mut counts = vec![[0usize; 3]; n];
        for a in &self.arcs {
            if a.src >= n || a.dst >= n {
                diags.push(Diagnostic::ArcOutOfRange(*a));
                continue;
            }
            counts[a.src][a.sym.index()] += 1;
        }
        for (node, c) in counts.iter().enumerate() {
            if c[2] > 0 && (c[0] + c[1] > 0 || c[2] > 1) {
                diags.push(Diagnostic::EpsNotExclusive(node));
            }
            for sym in [Symbol::Zero, Symbol::One] {
                if c[sym.index()] > 1 {
                    diags.push(Diagnostic::Nondeterministic(node, sym));
                }
            }
        }
        diags.extend(self.eps_cycles().into_iter().map(Diagnostic::EpsCycle));
        diags
    }

    // Each node has at most one `e` successor in the table, so cycles are
    // found by walking the functional graph.
    fn eps_cycles(&self) -> Vec<Vec<NodeId>> {
        const UNSEEN: u8 = 0;
        const ACTIVE: u8 = 1;
        const DONE: u8 = 2;
        let mut state = vec![UNSEEN; self.node_count];
        let mut cycles = Vec::new();
        for root in 0..self.node_count {
            let mut path = Vec::new();
            let mut node = root;
            loop {
                match state[node] {
                    DONE => break,
                    ACTIVE => {
                        let pos = path.iter().position(|&p| p == node).unwrap_or(0);
                        let mut cycle = path[pos..].to_vec();
                        cycle.sort_unstable();
                        cycles.push(cycle);
                        break;
                    }
                    _ => {}
                }
                state[node] = ACTIVE;
                path.push(node);
                match self.eps_successor(node) {
                    Some(next) => node = next,
                    None => break,
                }
            }
            for p in path {
                state[p] = DONE;
            }
        }
        cycles
    }

    /// Renders the machine in the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("start {}\n", self.start);
        for a in &self.arcs {
            out.push_str(&format!("arc {} {} {}\n", a.src, a.sym, a.dst));
        }
        for acc in &self.accepts {
            out.push_str(&format!("accept {acc}\n"));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: reference to undeclared node {node}")]
    UndeclaredNode { line: usize, node: NodeId },
    #[error("line {line}: duplicate start (first given on line {first})")]
    DuplicateStart { line: usize, first: usize },
    #[error("missing start line")]
    MissingStart,
    #[error("node ids must be contiguous from 0; node {0} never appears")]
    NonContiguous(NodeId),
    #[error("invalid machine: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// Parses the text format:
///
/// ```text
/// # comment
/// start 0
/// arc 0 1 1      # src symbol dst, symbol is 0, 1 or e
/// accept 1
/// ```
///
/// Nodes are declared by the `start` line and by appearing in arcs; an
/// `accept` line may only name declared nodes.
pub fn parse_fsm(text: &str) -> Result<Fsm, ParseError> {
    let mut start: Option<(NodeId, usize)> = None;
    let mut arcs = Vec::new();
    let mut accept_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let syntax = |message: String| ParseError::Syntax { line, message };
        let node = |s: &str| {
            s.parse::<NodeId>()
                .map_err(|_| syntax(format!("expected a node id, found {s:?}")))
        };
        match fields.as_slice() {
            ["start", id] => {
                let id = node(id)?;
                if let Some((_, first)) = start {
                    return Err(ParseError::DuplicateStart { line, first });
                }
                start = Some((id, line));
            }
            ["arc", src, sym, dst] => {
                let sym = match *sym {
                    "0" => Symbol::Zero,
                    "1" => Symbol::One,
                    "e" => Symbol::Eps,
                    other => {
                        return Err(syntax(format!(
                            "symbol must be 0, 1, or e, found {other:?}"
                        )))
                    }
                };
                arcs.push(Arc::new(node(src)?, sym, node(dst)?));
            }
            ["accept", id] => accept_lines.push((node(id)?, line)),
            [keyword, ..] if matches!(*keyword, "start" | "arc" | "accept") => {
                return Err(syntax(format!("wrong number of fields for {keyword}")));
            }
            [keyword, ..] => return Err(syntax(format!("unknown directive {keyword:?}"))),
            [] => unreachable!(),
        }
    }

    let (start, _) = start.ok_or(ParseError::MissingStart)?;
    let mut declared = BTreeSet::from([start]);
    for a in &arcs {
        declared.insert(a.src);
        declared.insert(a.dst);
    }
    let node_count = declared.last().map_or(0, |&m| m + 1);
    if let Some(gap) = (0..node_count).find(|n| !declared.contains(n)) {
        return Err(ParseError::NonContiguous(gap));
    }
    for &(acc, line) in &accept_lines {
        if !declared.contains(&acc) {
            return Err(ParseError::UndeclaredNode { line, node: acc });
        }
    }
    Fsm::validated(
        node_count,
        start,
        arcs,
        accept_lines.into_iter().map(|(a, _)| a),
    )
    .map_err(ParseError::Invalid)
}

/// Where a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HaltReport {
    /// Whole word consumed; `e` arcs chased to this node.
    HaltsAt(NodeId),
    /// No transition for the next symbol at `node` after `consumed` symbols.
    Stuck { node: NodeId, consumed: usize },
}

/// Reads one symbol from `node`: chases `e` arcs, then takes the arc on `bit`.
fn advance(machine: &Fsm, node: NodeId, bit: bool) -> Result<NodeId, NodeId> {
    let here = machine.eps_closure(node);
    machine.next(here, Symbol::from_bit(bit)).ok_or(here)
}

/// Runs `word` from the start node.
///
/// A node that still has out-arcs when the word runs out only counts as the
/// halt node if those arcs read input; `e` arcs are always followed first.
pub fn run_word(machine: &Fsm, word: &Word) -> HaltReport {
    let mut node = machine.start();
    for (consumed, &bit) in word.bits().iter().enumerate() {
        match advance(machine, node, bit) {
            Ok(next) => node = next,
            Err(stuck) => {
                return HaltReport::Stuck {
                    node: stuck,
                    consumed,
                }
            }
        }
    }
    HaltReport::HaltsAt(machine.eps_closure(node))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("word length bound {k} exceeds the maximum of {max}")]
pub struct TooLong {
    pub k: usize,
    pub max: usize,
}

/// All words of length `<= k` whose run halts at one of `targets`.
///
/// Walks the prefix tree, so branches that get stuck are pruned as soon as
/// they leave the machine.
pub fn halting_set(
    machine: &Fsm,
    targets: &BTreeSet<NodeId>,
    k: usize,
) -> Result<BTreeSet<Word>, TooLong> {
    if k > DEFAULT_MAX_LEN {
        return Err(TooLong {
            k,
            max: DEFAULT_MAX_LEN,
        });
    }
    let mut found = BTreeSet::new();
    let mut stack = vec![(machine.start(), Vec::new())];
    while let Some((node, prefix)) = stack.pop() {
        if targets.contains(&machine.eps_closure(node)) {
            found.insert(Word::new(prefix.clone()));
        }
        if prefix.len() == k {
            continue;
        }
        for bit in [true, false] {
            if let Ok(next) = advance(machine, node, bit) {
                let mut longer = prefix.clone();
                longer.push(bit);
                stack.push((next, longer));
            }
        }
    }
    Ok(found)
}
