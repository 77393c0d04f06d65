//! Properties of the compile pipeline and the step transforms, checked
//! against the classical runner over seeded random machines.

use std::collections::BTreeSet;

use proptest::prelude::*;
use qfsm_core::codec::{decode, encode, enumerate_inputs, initial_register};
use qfsm_core::compiler::node_width_for;
use qfsm_core::random::{random_fsm, random_total_dfa};
use qfsm_core::unitaries::step_in_place;
use qfsm_core::{
    compile, compile_plain, halting_set, initial_config, invert, parse_fsm, run, run_traced,
    run_word, samples, step, BitRegister, CompiledMachine, Direction, Fsm, HaltReport,
    MachineConfig, NodeId, Word,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn halts_in(m: &Fsm, targets: &BTreeSet<NodeId>, w: &Word) -> bool {
    matches!(run_word(m, w), HaltReport::HaltsAt(n) if targets.contains(&n))
}

fn random_targets<R: Rng>(rng: &mut R, nodes: usize) -> BTreeSet<NodeId> {
    let mut t: BTreeSet<NodeId> = (0..nodes).filter(|_| rng.gen_bool(0.3)).collect();
    if t.is_empty() {
        t.insert(rng.gen_range(0..nodes));
    }
    t
}

fn end_node(c: &CompiledMachine, w: &Word, steps: usize) -> u32 {
    let start = initial_config(c, encode(w, c.k).unwrap());
    run(c, &start, steps, Direction::Forward).node
}

#[test]
fn codec_is_a_bijection_up_to_ten() {
    for k in 0..=10usize {
        let all = enumerate_inputs(k).unwrap();
        assert_eq!(all.len(), (1 << (k + 1)) - 1);
        let mut seen = BTreeSet::new();
        for w in Word::all_up_to(k) {
            let e = encode(&w, k).unwrap();
            assert!(e.value() >= 1 && e.value() < 1 << (k + 1));
            assert!(seen.insert(e.value()));
            assert_eq!(decode(e.value(), k).unwrap(), w);
            let reg = initial_register(e);
            assert_eq!(reg & 1, 0);
            assert_eq!(reg >> (w.len() + 1), 1, "marker sits at bit k+1");
        }
        assert_eq!(seen.len(), all.len());
    }
}

#[test]
fn halting_set_matches_word_by_word_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let nodes = rng.gen_range(1..=6);
        let m = random_fsm(&mut rng, nodes);
        let targets = random_targets(&mut rng, nodes);
        let k = rng.gen_range(0..=7);
        let brute: BTreeSet<Word> = Word::all_up_to(k)
            .filter(|w| halts_in(&m, &targets, w))
            .collect();
        assert_eq!(halting_set(&m, &targets, k).unwrap(), brute);
    }
}

proptest! {
    #[test]
    fn halting_set_grows_only_by_longer_words(seed: u64, k in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = rng.gen_range(1..=6);
        let m = random_fsm(&mut rng, nodes);
        let targets = random_targets(&mut rng, nodes);
        let small = halting_set(&m, &targets, k).unwrap();
        let big = halting_set(&m, &targets, k + 1).unwrap();
        prop_assert!(small.is_subset(&big));
        prop_assert!(big.difference(&small).all(|w| w.len() == k + 1));
    }

    #[test]
    fn codec_round_trips(bits in proptest::collection::vec(any::<bool>(), 0..=40), extra in 0usize..20) {
        let w = Word::new(bits);
        let k = w.len() + extra;
        prop_assert_eq!(decode(encode(&w, k).unwrap().value(), k).unwrap(), w);
    }
}

/// Exhaustive over words for small random machines: the compiled machine ends
/// on a marked node after `T` steps exactly when the source halts at a target,
/// and stays that way through `T + E`.
#[test]
fn compiled_machine_preserves_halting_behavior() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..120 {
        let nodes = rng.gen_range(1..=6);
        let m = random_fsm(&mut rng, nodes);
        let targets = random_targets(&mut rng, nodes);
        let k = rng.gen_range(0..=5);
        let c = compile(&m, &targets, k).unwrap();
        let (t, e) = (c.schedule.steps, c.schedule.eps_run);
        for w in Word::all_up_to(k) {
            let want = halts_in(&m, &targets, &w);
            for steps in t..=t + e {
                let got = c.is_marked(end_node(&c, &w, steps));
                assert_eq!(
                    got,
                    want,
                    "case {case}, word {w}, steps {steps}\n{}",
                    m.to_text()
                );
            }
        }
        // the zero register never reads a 1, so it is never marked
        let zero = MachineConfig::new(
            c.machine.start() as u32,
            0,
            BitRegister::zero(c.registers.output_width),
        );
        assert!(!c.is_marked(run(&c, &zero, t, Direction::Forward).node));
    }
}

#[test]
fn compiled_structure_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let nodes = rng.gen_range(1..=6);
        let m = random_fsm(&mut rng, nodes);
        let targets = random_targets(&mut rng, nodes);
        let c = compile(&m, &targets, 3).unwrap();
        let rev = &c.machine;
        rev.check().unwrap();
        for n in 0..rev.node_count() {
            let ups: Vec<_> = rev.upstream(n).collect();
            assert!(ups.len() <= 2);
            // the output bit identifies the arc taken into n
            if ups.len() == 2 {
                assert_ne!(ups[0].output, ups[1].output);
                assert!(!ups[0].output.is_eps() && !ups[1].output.is_eps());
            } else {
                assert!(ups.iter().all(|a| a.output.is_eps()));
            }
        }
        // split nodes are marked exactly when the node they feed is
        for (id, origin) in rev.origins().iter().enumerate() {
            if let qfsm_core::Origin::Split { into } = origin {
                assert_eq!(c.marked.contains(&id), c.marked.contains(into));
            }
        }
        assert_eq!(invert(&invert(rev).unwrap()).unwrap(), *rev);
        assert!(c.registers.output_width as usize >= c.schedule.steps);
        assert_eq!(c.registers.input_width as usize, c.k + 2);
        assert_eq!(c.registers.node_width, node_width_for(rev.node_count()));
        // recompiling gives identical bytes
        assert_eq!(compile(&m, &targets, 3).unwrap().to_text(), c.to_text());
    }
}

#[test]
fn plain_compile_fan_in_is_min_of_two_and_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let nodes = rng.gen_range(1..=6);
        let m = random_total_dfa(&mut rng, nodes);
        let orig_max = (0..nodes)
            .map(|n| m.arcs().iter().filter(|a| a.dst == n).count())
            .max()
            .unwrap();
        let c = compile_plain(&m, 2).unwrap();
        let new_max = (0..c.machine.node_count())
            .map(|n| c.machine.upstream(n).count())
            .max()
            .unwrap();
        assert_eq!(new_max, orig_max.min(2));
    }
}

fn random_config<R: Rng>(rng: &mut R, c: &CompiledMachine) -> MachineConfig {
    let r = &c.registers;
    let mut out = BitRegister::zero(r.output_width);
    for i in 0..r.output_width {
        out.set_bit(i, rng.gen_bool(0.5));
    }
    MachineConfig::new(
        rng.gen_range(0..1u32 << r.node_width),
        rng.gen_range(0..1u64 << r.input_width),
        out,
    )
}

/// Every configuration of a narrowed register geometry; the step only ever
/// touches bit 0 and rotations, so width does not affect bijectivity.
fn assert_exhaustively_reversible(c: &CompiledMachine, budget: u32) {
    let r = c.registers;
    let out_width = budget
        .saturating_sub(r.node_width + r.input_width)
        .clamp(1, r.output_width);
    let narrow = c.with_output_width(out_width);
    let mut images = BTreeSet::new();
    for node in 0..1u32 << r.node_width {
        for input in 0..1u64 << r.input_width {
            for output in 0..1u64 << out_width {
                let x = MachineConfig::new(node, input, BitRegister::from_u64(out_width, output));
                let y = step(&narrow, &x, Direction::Forward);
                assert_eq!(step(&narrow, &y, Direction::Backward), x);
                images.insert(y);
            }
        }
    }
    assert_eq!(
        images.len(),
        1 << (r.node_width + r.input_width + out_width)
    );
}

#[test]
fn steps_are_bijections() {
    let fig = compile_plain(&parse_fsm(samples::TWO_BIT_LOOP).unwrap(), 1).unwrap();
    assert_exhaustively_reversible(&fig, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..30 {
        let nodes = rng.gen_range(1..=5);
        let m = random_fsm(&mut rng, nodes);
        let targets = random_targets(&mut rng, nodes);
        let c = compile(&m, &targets, rng.gen_range(0..=3)).unwrap();
        assert_exhaustively_reversible(&c, 14);
        for _ in 0..2_000 {
            let x = random_config(&mut rng, &c);
            let y = step(&c, &x, Direction::Forward);
            assert_eq!(step(&c, &y, Direction::Backward), x);
        }
    }
}

/// Along every real run the output bit under `U_m` is clear, the run reads
/// at least `K + 1` bits within `T` steps, and written bits stack up with
/// the first one highest.
#[test]
fn forward_runs_respect_the_register_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..60 {
        let nodes = rng.gen_range(1..=6);
        let m = random_fsm(&mut rng, nodes);
        let targets = random_targets(&mut rng, nodes);
        let k = rng.gen_range(0..=4);
        let c = compile(&m, &targets, k).unwrap();
        let (t, e) = (c.schedule.steps, c.schedule.eps_run);
        for (input, _) in enumerate_inputs(k).unwrap() {
            let start = initial_config(&c, input);
            let mut cfg = start.clone();
            for _ in 0..t + e {
                // U_i leaves output alone, so bit 0 here is what U_m sees
                assert!(!cfg.output.bit(0));
                step_in_place(&c, &mut cfg, Direction::Forward);
            }
            let trace = run_traced(&c, &start, t, Direction::Forward);
            assert!(trace.reads() > k);
            let written = qfsm_core::read_output_trace(&trace).unwrap();
            let out = &trace.last().output;
            for (i, &b) in written.iter().enumerate() {
                assert_eq!(out.bit((written.len() - i) as u32), b);
            }
            assert!(!out.bit(0));
            assert_eq!(run(&c, trace.last(), t, Direction::Backward), start);
        }
    }
}
