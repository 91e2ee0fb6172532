//! Symbols: the atoms of working memory.
//!
//! An identifier is a letter plus an index (`S1`, `O3`). Constants are
//! integers, floats or strings and compare by value. An identifier never
//! equals a constant.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// A short-term identifier such as `S1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ident {
    pub letter: char,
    pub index: u32,
}

impl Ident {
    pub const fn new(letter: char, index: u32) -> Self {
        Ident { letter, index }
    }

    /// Parses `S12`-style identifier text.
    pub fn parse(text: &str) -> Option<Ident> {
        let mut chars = text.chars();
        let letter = chars.next()?;
        if !letter.is_ascii_uppercase() {
            return None;
        }
        let rest = chars.as_str();
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        rest.parse().ok().map(|index| Ident { letter, index })
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.letter, self.index)
    }
}

/// A working-memory symbol.
#[derive(Clone, Debug)]
pub enum Symbol {
    Id(Ident),
    Int(i64),
    Float(f64),
    Str(Arc<str>),
}

impl Symbol {
    pub fn str(s: &str) -> Symbol {
        Symbol::Str(Arc::from(s))
    }

    pub fn as_ident(&self) -> Option<Ident> {
        match self {
            Symbol::Id(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Symbol::Int(i) => Some(*i as f64),
            Symbol::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Symbol::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_ident(&self) -> bool {
        matches!(self, Symbol::Id(_))
    }

    fn rank(&self) -> u8 {
        match self {
            Symbol::Id(_) => 0,
            Symbol::Int(_) => 1,
            Symbol::Float(_) => 2,
            Symbol::Str(_) => 3,
        }
    }

    /// Parses a printed symbol: identifier pattern, number, `|quoted|` or bare string.
    pub fn parse_token(text: &str) -> Symbol {
        if let Some(id) = Ident::parse(text) {
            return Symbol::Id(id);
        }
        if let Some(inner) = text.strip_prefix('|').and_then(|t| t.strip_suffix('|')) {
            return Symbol::str(inner);
        }
        if let Ok(i) = text.parse::<i64>() {
            return Symbol::Int(i);
        }
        if looks_like_float(text) {
            if let Ok(f) = text.parse::<f64>() {
                return Symbol::Float(f);
            }
        }
        Symbol::str(text)
    }
}

fn looks_like_float(text: &str) -> bool {
    let t = text.strip_prefix(['-', '+']).unwrap_or(text);
    !t.is_empty()
        && t.chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '.')
        && t.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'))
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Symbol::Id(a), Symbol::Id(b)) => a == b,
            (Symbol::Int(a), Symbol::Int(b)) => a == b,
            (Symbol::Float(a), Symbol::Float(b)) => a.to_bits() == b.to_bits(),
            (Symbol::Str(a), Symbol::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Symbol::Id(id) => id.hash(state),
            Symbol::Int(i) => i.hash(state),
            Symbol::Float(f) => f.to_bits().hash(state),
            Symbol::Str(s) => s.hash(state),
        }
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Symbol::Id(a), Symbol::Id(b)) => a.cmp(b),
            (Symbol::Int(a), Symbol::Int(b)) => a.cmp(b),
            (Symbol::Float(a), Symbol::Float(b)) => a.total_cmp(b),
            (Symbol::Str(a), Symbol::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl From<Ident> for Symbol {
    fn from(id: Ident) -> Self {
        Symbol::Id(id)
    }
}

impl From<i64> for Symbol {
    fn from(i: i64) -> Self {
        Symbol::Int(i)
    }
}

impl From<f64> for Symbol {
    fn from(f: f64) -> Self {
        Symbol::Float(f)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::str(s)
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || Ident::parse(s).is_some()
        || s.parse::<i64>().is_ok()
        || looks_like_float(s)
        || s.starts_with(['-', '<', '@', '^', '{', '}', '(', ')', '+', '=', '>', '|'])
        || s.chars().any(|c| {
            c.is_whitespace() || matches!(c, '(' | ')' | '{' | '}' | '^' | '|' | '#' | ';')
        })
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Id(id) => write!(f, "{id}"),
            Symbol::Int(i) => write!(f, "{i}"),
            Symbol::Float(x) => {
                if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Symbol::Str(s) => {
                if needs_quotes(s) {
                    write!(f, "|{s}|")
                } else {
                    write!(f, "{s}")
                }
            }
        }
    }
}

/// Hands out fresh identifiers, one counter per letter.
#[derive(Clone, Debug, Default)]
pub struct IdGen {
    counters: HashMap<char, u32>,
}

impl IdGen {
    pub fn fresh(&mut self, letter: char) -> Ident {
        let letter = if letter.is_ascii_alphabetic() {
            letter.to_ascii_uppercase()
        } else {
            'I'
        };
        let n = self.counters.entry(letter).or_insert(0);
        *n += 1;
        Ident::new(letter, *n)
    }

    /// Makes sure future identifiers with this letter are numbered past `id`.
    pub fn reserve(&mut self, id: Ident) {
        let n = self.counters.entry(id.letter).or_insert(0);
        if *n < id.index {
            *n = id.index;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers_never_equal_constants() {
        let id = Symbol::Id(Ident::new('S', 1));
        assert_ne!(id, Symbol::str("S1"));
        assert_ne!(Symbol::Int(1), Symbol::Float(1.0));
        assert_eq!(Symbol::Float(0.5), Symbol::Float(0.5));
    }

    #[test]
    fn token_parsing() {
        assert_eq!(Symbol::parse_token("S12"), Symbol::Id(Ident::new('S', 12)));
        assert_eq!(Symbol::parse_token("12"), Symbol::Int(12));
        assert_eq!(Symbol::parse_token("-0.5"), Symbol::Float(-0.5));
        assert_eq!(Symbol::parse_token("|S1|"), Symbol::str("S1"));
        assert_eq!(Symbol::parse_token("move-block"), Symbol::str("move-block"));
    }

    #[test]
    fn display_roundtrip() {
        for s in [
            Symbol::str("S1"),
            Symbol::Float(2.0),
            Symbol::str("a b"),
            Symbol::Int(-3),
            Symbol::str("x"),
        ] {
            assert_eq!(Symbol::parse_token(&s.to_string()), s);
        }
    }

    #[test]
    fn idgen_counts_per_letter() {
        let mut g = IdGen::default();
        assert_eq!(g.fresh('o'), Ident::new('O', 1));
        assert_eq!(g.fresh('O'), Ident::new('O', 2));
        assert_eq!(g.fresh('S'), Ident::new('S', 1));
        g.reserve(Ident::new('S', 9));
        assert_eq!(g.fresh('S'), Ident::new('S', 10));
    }
}
