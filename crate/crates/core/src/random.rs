//! Seeded random machines for property checks and benchmarks.

use rand::Rng;

use crate::fsm::{Arc, Fsm, Symbol};

/// A total DFA: every node has arcs on both symbols, no `e` arcs.
pub fn random_total_dfa<R: Rng>(rng: &mut R, nodes: usize) -> Fsm {
    let arcs = (0..nodes)
        .flat_map(|src| [Symbol::Zero, Symbol::One].map(|s| (src, s)))
        .map(|(src, sym)| Arc::new(src, sym, rng.gen_range(0..nodes)))
        .collect();
    Fsm::new(nodes, 0, arcs, [])
}

/// A valid machine that may be partial and may have `e` arcs.
///
/// `e` arcs only point to higher ids, so no `e` cycle can form.
pub fn random_fsm<R: Rng>(rng: &mut R, nodes: usize) -> Fsm {
    let mut arcs = Vec::new();
    for src in 0..nodes {
        if src + 1 < nodes && rng.gen_bool(0.3) {
            arcs.push(Arc::new(src, Symbol::Eps, rng.gen_range(src + 1..nodes)));
            continue;
        }
        for sym in [Symbol::Zero, Symbol::One] {
            if rng.gen_bool(0.8) {
                arcs.push(Arc::new(src, sym, rng.gen_range(0..nodes)));
            }
        }
    }
    Fsm::new(nodes, 0, arcs, [])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_machines_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            for _ in 0..50 {
                assert!(random_fsm(&mut rng, n).validate().is_empty());
                let d = random_total_dfa(&mut rng, n);
                assert!(d.validate().is_empty() && d.is_total());
            }
        }
    }
}
