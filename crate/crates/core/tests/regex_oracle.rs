//! DFA construction checked against a backtracking matcher that shares no
//! code with it.

use qfsm_core::{parse_fsm, parse_regex, run_word, Fsm, HaltReport, Word};

/// Recursive-descent matcher over the raw pattern. Each function returns
/// every input position a sub-pattern can end at, starting from `at`.
struct Matcher<'a> {
    pat: &'a [u8],
    input: &'a [u8],
}

impl Matcher<'_> {
    // alternatives from `p`; returns (end positions, pattern offset after)
    fn alt(&self, p: usize, at: &[usize]) -> (Vec<usize>, usize) {
        let (mut ends, mut q) = self.cat(p, at);
        while q < self.pat.len() && self.pat[q] == b'|' {
            let (more, r) = self.cat(q + 1, at);
            ends.extend(more);
            q = r;
        }
        ends.sort_unstable();
        ends.dedup();
        (ends, q)
    }

    fn cat(&self, mut p: usize, at: &[usize]) -> (Vec<usize>, usize) {
        let mut cur = at.to_vec();
        while p < self.pat.len() && !matches!(self.pat[p], b'|' | b')') {
            let (atom_end, after) = self.atom_span(p);
            let starred = after < self.pat.len() && self.pat[after] == b'*';
            if starred {
                // closure: keep applying the atom until no new positions
                let mut all = cur.clone();
                let mut frontier = cur.clone();
                while !frontier.is_empty() {
                    let next = self.atom(p, atom_end, &frontier);
                    frontier = next.into_iter().filter(|x| !all.contains(x)).collect();
                    frontier.sort_unstable();
                    frontier.dedup();
                    all.extend(&frontier);
                }
                cur = all;
                p = after + 1;
            } else {
                cur = self.atom(p, atom_end, &cur);
                p = after;
            }
            cur.sort_unstable();
            cur.dedup();
        }
        (cur, p)
    }

    /// Pattern range of the atom at `p`: (end of inner, offset after atom).
    fn atom_span(&self, p: usize) -> (usize, usize) {
        if self.pat[p] == b'(' {
            let mut depth = 0;
            for (i, &c) in self.pat.iter().enumerate().skip(p) {
                match c {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            return (i, i + 1);
                        }
                    }
                    _ => {}
                }
            }
            panic!("unbalanced oracle pattern");
        }
        (p + 1, p + 1)
    }

    fn atom(&self, p: usize, _end: usize, at: &[usize]) -> Vec<usize> {
        match self.pat[p] {
            b'(' => self.alt(p + 1, at).0,
            lit => at
                .iter()
                .filter(|&&i| i < self.input.len() && self.input[i] == lit)
                .map(|&i| i + 1)
                .collect(),
        }
    }
}

fn oracle_matches(pattern: &str, word: &Word) -> bool {
    let input: Vec<u8> = word
        .bits()
        .iter()
        .map(|&b| if b { b'1' } else { b'0' })
        .collect();
    let m = Matcher {
        pat: pattern.as_bytes(),
        input: &input,
    };
    m.alt(0, &[0]).0.contains(&input.len())
}

fn dfa_accepts(m: &Fsm, word: &Word) -> bool {
    matches!(run_word(m, word), HaltReport::HaltsAt(n) if m.accepts().contains(&n))
}

const PATTERNS: &[&str] = &[
    "0*10*1",
    "1",
    "",
    "(0|1)*",
    "(01|10)*",
    "(0*1)*0",
    "1(0|11)*|0",
    "((0|1)(0|1))*",
    "(|1)0*(1|)",
    "(1*0)*1*",
    "0(1(0|)1)*0",
    "(()|0)*1",
];

#[test]
fn dfa_agrees_with_backtracking_matcher() {
    for &p in PATTERNS {
        let dfa = parse_regex(p).unwrap();
        assert!(dfa.validate().is_empty(), "{p}");
        for w in Word::all_up_to(8) {
            assert_eq!(
                dfa_accepts(&dfa, &w),
                oracle_matches(p, &w),
                "pattern {p:?} word {w}"
            );
        }
    }
}

#[test]
fn printed_dfa_keeps_its_language() {
    for &p in PATTERNS {
        let dfa = parse_regex(p).unwrap();
        let reparsed = parse_fsm(&dfa.to_text()).unwrap();
        for w in Word::all_up_to(8) {
            assert_eq!(
                dfa_accepts(&reparsed, &w),
                oracle_matches(p, &w),
                "pattern {p:?} word {w}"
            );
        }
    }
}

#[test]
fn oracle_sanity() {
    let w = |s: &str| s.parse::<Word>().unwrap();
    assert!(oracle_matches("0*10*1", &w("0101")));
    assert!(!oracle_matches("0*10*1", &w("01010")));
    assert!(oracle_matches("", &Word::empty()));
    assert!(oracle_matches("(0|1)*", &w("0110")));
    assert!(!oracle_matches("1", &w("0")));
}
