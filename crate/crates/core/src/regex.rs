//! Binary regular expressions compiled to deterministic machines.
//!
//! Grammar:
//!
//! ```text
//! alt  := cat ('|' cat)*
//! cat  := rep*            (empty cat matches the empty word)
//! rep  := atom '*'?
//! atom := '0' | '1' | '(' alt ')'
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::fsm::{Arc, Fsm, NodeId, Symbol};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegexError {
    #[error("unbalanced parenthesis at offset {0}")]
    Unbalanced(usize),
    #[error("dangling '*' at offset {0}")]
    DanglingStar(usize),
    #[error("unexpected character {ch:?} at offset {offset}")]
    Unexpected { ch: char, offset: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ast {
    Empty,
    Lit(bool),
    Cat(Vec<Ast>),
    Alt(Vec<Ast>),
    Star(Box<Ast>),
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Self {
        Self {
            chars: src.char_indices().collect(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<(usize, char)> {
        self.chars.get(self.pos).copied()
    }

    fn alt(&mut self) -> Result<Ast, RegexError> {
        let mut branches = vec![self.cat()?];
        while let Some((_, '|')) = self.peek() {
            self.pos += 1;
            branches.push(self.cat()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            Ast::Alt(branches)
        })
    }

    fn cat(&mut self) -> Result<Ast, RegexError> {
        let mut items = Vec::new();
        while let Some((offset, c)) = self.peek() {
            let atom = match c {
                '0' | '1' => {
                    self.pos += 1;
                    Ast::Lit(c == '1')
                }
                '(' => {
                    self.pos += 1;
                    let inner = self.alt()?;
                    match self.peek() {
                        Some((_, ')')) => self.pos += 1,
                        _ => return Err(RegexError::Unbalanced(offset)),
                    }
                    inner
                }
                '|' | ')' => break,
                '*' => return Err(RegexError::DanglingStar(offset)),
                ch => return Err(RegexError::Unexpected { ch, offset }),
            };
            if let Some((_, '*')) = self.peek() {
                self.pos += 1;
                items.push(Ast::Star(Box::new(atom)));
            } else {
                items.push(atom);
            }
        }
        Ok(match items.len() {
            0 => Ast::Empty,
            1 => items.pop().unwrap(),
            _ => Ast::Cat(items),
        })
    }
}

fn parse_ast(pattern: &str) -> Result<Ast, RegexError> {
    let mut p = Parser::new(pattern);
    let ast = p.alt()?;
    match p.peek() {
        None => Ok(ast),
        Some((offset, ')')) => Err(RegexError::Unbalanced(offset)),
        // alt() only stops at ')' or end of input
        Some((offset, ch)) => Err(RegexError::Unexpected { ch, offset }),
    }
}

/// Thompson automaton: `eps[s]` and `on[s][bit]` list successor states.
#[derive(Default)]
struct Nfa {
    eps: Vec<Vec<usize>>,
    on: Vec<[Vec<usize>; 2]>,
}

impl Nfa {
    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.on.push([Vec::new(), Vec::new()]);
        self.eps.len() - 1
    }

    /// Returns (entry, exit) of the fragment for `ast`.
    fn build(&mut self, ast: &Ast) -> (usize, usize) {
        match ast {
            Ast::Empty => {
                let s = self.state();
                (s, s)
            }
            Ast::Lit(bit) => {
                let (a, b) = (self.state(), self.state());
                self.on[a][*bit as usize].push(b);
                (a, b)
            }
            Ast::Cat(items) => {
                let (entry, mut exit) = self.build(&items[0]);
                for item in &items[1..] {
                    let (e, x) = self.build(item);
                    self.eps[exit].push(e);
                    exit = x;
                }
                (entry, exit)
            }
            Ast::Alt(branches) => {
                let (entry, exit) = (self.state(), self.state());
                for b in branches {
                    let (e, x) = self.build(b);
                    self.eps[entry].push(e);
                    self.eps[x].push(exit);
                }
                (entry, exit)
            }
            Ast::Star(inner) => {
                let (entry, exit) = (self.state(), self.state());
                let (e, x) = self.build(inner);
                self.eps[entry].extend([e, exit]);
                self.eps[x].extend([e, exit]);
                (entry, exit)
            }
        }
    }

    fn closure(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        let mut stack: Vec<usize> = seed.into_iter().collect();
        while let Some(s) = stack.pop() {
            if set.insert(s) {
                stack.extend(self.eps[s].iter().copied());
            }
        }
        set
    }
}

/// Compiles `pattern` to a deterministic machine whose accept set
/// recognizes exactly the pattern's language.
///
/// Missing transitions are left out rather than routed to a dead node, so
/// `"1"` gives two nodes.
pub fn parse_regex(pattern: &str) -> Result<Fsm, RegexError> {
    let ast = parse_ast(pattern)?;
    let mut nfa = Nfa::default();
    let (entry, exit) = nfa.build(&ast);

    let start = nfa.closure([entry]);
    let mut ids: BTreeMap<BTreeSet<usize>, NodeId> = BTreeMap::from([(start.clone(), 0)]);
    let mut order = vec![start.clone()];
    let mut queue = VecDeque::from([start]);
    let mut arcs = Vec::new();
    while let Some(set) = queue.pop_front() {
        let src = ids[&set];
        for bit in [false, true] {
            let moved = nfa.closure(
                set.iter()
                    .flat_map(|&s| nfa.on[s][bit as usize].iter().copied()),
            );
            if moved.is_empty() {
                continue;
            }
            let dst = match ids.get(&moved) {
                Some(&id) => id,
                None => {
                    let id = order.len();
                    ids.insert(moved.clone(), id);
                    order.push(moved.clone());
                    queue.push_back(moved);
                    id
                }
            };
            arcs.push(Arc::new(src, Symbol::from_bit(bit), dst));
        }
    }
    let accepts = order
        .iter()
        .enumerate()
        .filter(|(_, set)| set.contains(&exit))
        .map(|(id, _)| id);
    Ok(Fsm::new(order.len(), 0, arcs, accepts))
}
