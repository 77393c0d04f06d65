//! Amplitude amplification over every input of length `<= K`.
//!
//! One round is evolve (`T` forward steps), mark (flip the sign of every
//! configuration at a marked node), devolve (`T` backward steps) and diffuse
//! (reflect about the uniform superposition). Evolution only permutes basis
//! states, so the state is stored sparsely: exactly `2^(K+1)` entries no
//! matter how wide the output register gets.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_input, EncodedInput};
use crate::compiler::CompiledMachine;
use crate::fsm::{run_word, HaltReport, Word};
use crate::register::BitRegister;
use crate::unitaries::{run, Direction, MachineConfig};

/// Largest `K` simulated; the state holds `2^(K+1)` amplitudes.
pub const MAX_QUANTUM_LEN: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum GroverError {
    #[error("K = {k} needs 2^{} amplitudes; the limit is K = {max}", .k + 1)]
    TooLarge { k: usize, max: usize },
    #[error("state has support outside the initial domain (missing devolve?)")]
    OutsideDomain,
    #[error("no marked inputs: iteration count is undefined")]
    NoMarked,
    #[error("marked count {m} exceeds the search space {n}")]
    TooManyMarked { n: u64, m: u64 },
    #[error("machine was compiled without halting targets")]
    NoQuery,
    #[error("at least one shot is required")]
    NoShots,
}

/// Sparse amplitudes over machine configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct QState {
    amplitudes: BTreeMap<MachineConfig, Complex64>,
}

impl QState {
    pub fn amplitudes(&self) -> &BTreeMap<MachineConfig, Complex64> {
        &self.amplitudes
    }

    pub fn support_len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, cfg: &MachineConfig) -> Complex64 {
        self.amplitudes.get(cfg).copied().unwrap_or_default()
    }
}

fn domain_config(compiled: &CompiledMachine, value: u64) -> MachineConfig {
    MachineConfig {
        node: compiled.machine.start() as u32,
        input: value << 1,
        output: BitRegister::zero(compiled.registers.output_width),
    }
}

/// Encoded input value of a configuration in the initial domain.
fn domain_index(compiled: &CompiledMachine, cfg: &MachineConfig) -> Option<u64> {
    let in_domain = cfg.node == compiled.machine.start() as u32
        && cfg.output.is_zero()
        && cfg.input & 1 == 0
        && (cfg.input >> 1) < compiled.search_space();
    in_domain.then_some(cfg.input >> 1)
}

/// Whether every configuration in `state` is an initial one.
pub fn in_domain(state: &QState, compiled: &CompiledMachine) -> bool {
    state
        .amplitudes
        .keys()
        .all(|cfg| domain_index(compiled, cfg).is_some())
}

/// Equal amplitude on all `2^(K+1)` input register values, including the
/// all-zero one that encodes no word.
pub fn init_superposition(compiled: &CompiledMachine) -> Result<QState, GroverError> {
    if compiled.k > MAX_QUANTUM_LEN {
        return Err(GroverError::TooLarge {
            k: compiled.k,
            max: MAX_QUANTUM_LEN,
        });
    }
    let n = compiled.search_space();
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let amplitudes = (0..n).map(|v| (domain_config(compiled, v), amp)).collect();
    Ok(QState { amplitudes })
}

/// Runs every basis state `steps` steps. Amplitudes are carried, never
/// combined.
pub fn evolve(
    state: QState,
    compiled: &CompiledMachine,
    steps: usize,
    direction: Direction,
) -> QState {
    let amplitudes = state
        .amplitudes
        .into_iter()
        .map(|(cfg, amp)| (run(compiled, &cfg, steps, direction), amp))
        .collect();
    QState { amplitudes }
}

/// Negates the amplitude of every configuration at a marked node.
pub fn mark(mut state: QState, compiled: &CompiledMachine) -> QState {
    for (cfg, amp) in state.amplitudes.iter_mut() {
        if compiled.is_marked(cfg.node) {
            *amp = -*amp;
        }
    }
    state
}

/// Inversion about the mean over the whole initial domain.
pub fn diffuse(state: QState, compiled: &CompiledMachine) -> Result<QState, GroverError> {
    let n = compiled.search_space();
    let mut dense = vec![Complex64::default(); n as usize];
    for (cfg, amp) in &state.amplitudes {
        let idx = domain_index(compiled, cfg).ok_or(GroverError::OutsideDomain)?;
        dense[idx as usize] = *amp;
    }
    let mean = dense.iter().sum::<Complex64>() / n as f64;
    let amplitudes = dense
        .into_iter()
        .enumerate()
        .map(|(v, amp)| (domain_config(compiled, v as u64), mean * 2.0 - amp))
        .collect();
    Ok(QState { amplitudes })
}

/// Probability mass currently sitting on marked nodes.
pub fn marked_mass(state: &QState, compiled: &CompiledMachine) -> f64 {
    state
        .amplitudes
        .iter()
        .filter(|(cfg, _)| compiled.is_marked(cfg.node))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Marked mass the oracle would see: evolves a copy `T` steps and measures.
pub fn evolved_marked_mass(state: &QState, compiled: &CompiledMachine) -> f64 {
    let evolved = evolve(
        state.clone(),
        compiled,
        compiled.schedule.steps,
        Direction::Forward,
    );
    marked_mass(&evolved, compiled)
}

/// evolve, mark, devolve, diffuse.
pub fn grover_round(state: QState, compiled: &CompiledMachine) -> Result<QState, GroverError> {
    let t = compiled.schedule.steps;
    let state = evolve(state, compiled, t, Direction::Forward);
    let state = mark(state, compiled);
    let state = evolve(state, compiled, t, Direction::Backward);
    diffuse(state, compiled)
}

fn angle(n: u64, m: u64) -> f64 {
    (m as f64 / n as f64).sqrt().asin()
}

/// `floor(pi / 4θ)` with `θ = asin(sqrt(M/N))`.
pub fn grover_iterations_for(n: u64, m: u64) -> Result<usize, GroverError> {
    if m == 0 {
        return Err(GroverError::NoMarked);
    }
    if m > n {
        return Err(GroverError::TooManyMarked { n, m });
    }
    Ok((PI / (4.0 * angle(n, m))).floor() as usize)
}

/// `sin²((2j+1)θ)`: marked probability after `j` rounds.
pub fn success_probability(n: u64, m: u64, rounds: usize) -> f64 {
    ((2 * rounds + 1) as f64 * angle(n, m)).sin().powi(2)
}

/// Every input whose run ends on a marked node after `T` steps.
///
/// `None` stands for the all-zero register.
pub fn exactly_marked_inputs(compiled: &CompiledMachine) -> BTreeSet<Option<Word>> {
    (0..compiled.search_space())
        .filter(|&v| {
            let end = run(
                compiled,
                &domain_config(compiled, v),
                compiled.schedule.steps,
                Direction::Forward,
            );
            compiled.is_marked(end.node)
        })
        .map(|v| decode_value(compiled, v))
        .collect()
}

fn decode_value(compiled: &CompiledMachine, value: u64) -> Option<Word> {
    EncodedInput::new(value, compiled.k)
        .ok()
        .and_then(|e| decode_input(e).ok())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Fixed(usize),
    Auto,
    Bbht,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchMode::Fixed(j) => write!(f, "fixed({j})"),
            SearchMode::Auto => f.write_str("auto"),
            SearchMode::Bbht => f.write_str("bbht"),
        }
    }
}

/// One distinct measurement outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// Decoded word; `None` for the all-zero register.
    pub word: Option<Word>,
    pub count: usize,
    /// Confirmed by running the classical machine.
    pub marked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub samples: Vec<Sample>,
    /// Total rounds applied (summed over attempts in bbht mode).
    pub iterations: usize,
    /// Marked mass of the final state before measurement.
    pub marked_mass: f64,
    pub seed: u64,
    pub mode: SearchMode,
    /// First confirmed word in bbht mode.
    pub solution: Option<Word>,
}

impl QueryResult {
    pub fn shots(&self) -> usize {
        self.samples.iter().map(|s| s.count).sum()
    }

    pub fn marked_shots(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.marked)
            .map(|s| s.count)
            .sum()
    }
}

/// Whether the source machine halts at a target on `word`.
pub fn confirm(compiled: &CompiledMachine, word: &Word) -> bool {
    let Some(targets) = &compiled.targets else {
        return false;
    };
    word.len() <= compiled.k
        && matches!(run_word(&compiled.source, word), HaltReport::HaltsAt(n) if targets.contains(&n))
}

struct Tally(BTreeMap<Option<Word>, (usize, bool)>);

impl Tally {
    fn new() -> Self {
        Self(BTreeMap::new())
    }

    fn record(&mut self, compiled: &CompiledMachine, value: u64) -> (Option<Word>, bool) {
        let word = decode_value(compiled, value);
        let marked = word.as_ref().is_some_and(|w| confirm(compiled, w));
        let entry = self.0.entry(word.clone()).or_insert((0, marked));
        entry.0 += 1;
        (word, marked)
    }

    fn into_samples(self) -> Vec<Sample> {
        self.0
            .into_iter()
            .map(|(word, (count, marked))| Sample {
                word,
                count,
                marked,
            })
            .collect()
    }
}

fn measure(state: &QState, rng: &mut ChaCha8Rng, shots: usize) -> Vec<u64> {
    let (configs, weights): (Vec<&MachineConfig>, Vec<f64>) = state
        .amplitudes
        .iter()
        .map(|(cfg, a)| (cfg, a.norm_sqr()))
        .unzip();
    let dist = WeightedIndex::new(&weights).expect("state has positive norm");
    (0..shots)
        .map(|_| configs[dist.sample(rng)].input >> 1)
        .collect()
}

fn amplify(compiled: &CompiledMachine, rounds: usize) -> Result<QState, GroverError> {
    let mut state = init_superposition(compiled)?;
    for _ in 0..rounds {
        state = grover_round(state, compiled)?;
    }
    Ok(state)
}

/// Runs a search and samples the input register.
///
/// * `Fixed(j)`: `j` rounds, then `shots` measurements.
/// * `Auto`: reads the marked count off one evolution, runs the optimal
///   number of rounds (none if nothing is marked), then measures.
/// * `Bbht`: unknown marked count. Repeatedly draws a round count below a
///   bound that grows by 6/5 per failure (capped at `sqrt(N)`), measures once
///   and checks the word classically; stops at the first hit or once the
///   rounds spent exceed `3 sqrt(N)`. `shots` is unused.
pub fn search(
    compiled: &CompiledMachine,
    mode: SearchMode,
    shots: usize,
    seed: u64,
) -> Result<QueryResult, GroverError> {
    if compiled.targets.is_none() {
        return Err(GroverError::NoQuery);
    }
    if shots == 0 {
        return Err(GroverError::NoShots);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = compiled.search_space();
    let mut tally = Tally::new();

    let rounds = match mode {
        SearchMode::Bbht => return bbht(compiled, seed, rng),
        SearchMode::Fixed(j) => j,
        SearchMode::Auto => {
            let initial = init_superposition(compiled)?;
            let m = (evolved_marked_mass(&initial, compiled) * n as f64).round() as u64;
            grover_iterations_for(n, m).unwrap_or(0)
        }
    };
    let state = amplify(compiled, rounds)?;
    let mass = evolved_marked_mass(&state, compiled);
    for value in measure(&state, &mut rng, shots) {
        tally.record(compiled, value);
    }
    Ok(QueryResult {
        samples: tally.into_samples(),
        iterations: rounds,
        marked_mass: mass,
        seed,
        mode,
        solution: None,
    })
}

fn bbht(
    compiled: &CompiledMachine,
    seed: u64,
    mut rng: ChaCha8Rng,
) -> Result<QueryResult, GroverError> {
    const GROWTH: f64 = 6.0 / 5.0;
    let sqrt_n = (compiled.search_space() as f64).sqrt();
    let cutoff = 3.0 * sqrt_n;
    let mut bound = 1.0_f64;
    let mut total = 0usize;
    let mut tally = Tally::new();
    let mut solution = None;

    let last = loop {
        let rounds = rng.gen_range(0..bound.ceil() as usize);
        let state = amplify(compiled, rounds)?;
        total += rounds;
        let value = measure(&state, &mut rng, 1)[0];
        let (word, hit) = tally.record(compiled, value);
        if hit {
            solution = word;
            break state;
        }
        bound = (GROWTH * bound).min(sqrt_n);
        if total as f64 > cutoff {
            break state;
        }
    };

    Ok(QueryResult {
        samples: tally.into_samples(),
        iterations: total,
        marked_mass: evolved_marked_mass(&last, compiled),
        seed,
        mode: SearchMode::Bbht,
        solution,
    })
}
