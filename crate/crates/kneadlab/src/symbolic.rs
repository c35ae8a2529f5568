//! Symbol sequences for bimodal maps: the five-symbol alphabet, the
//! signed-lexicographic order, shifts, minimality, and admissibility.
//!
//! A bimodal map has three monotone laps separated by two critical points.
//! Points are coded by which lap (or critical point) each iterate visits:
//! `I1 < C1 < I2 < C2 < I3` in the spatial order of the line. The outer
//! laps are increasing (`sign +1`), the middle lap is decreasing (`-1`),
//! and critical symbols carry sign 0. Sequences either end at a critical
//! symbol (the orbit hits a turning point and the code stops) or continue
//! forever; eventually-constant tails (all `I2` or all `I3`, for orbits
//! absorbed by a fixed point's lap) are represented exactly.
//!
//! The order on sequences mirrors the order of points on the line: compare
//! symbol-by-symbol, flipping the comparison whenever the running product
//! of lap signs is negative. Kneading sequences — the codes of the critical
//! values — are *minimal*: no shift of the sequence is strictly smaller.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// One symbol of the itinerary alphabet, ordered by position on the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Left increasing lap.
    I1,
    /// Left critical point.
    C1,
    /// Middle decreasing lap.
    I2,
    /// Right critical point.
    C2,
    /// Right increasing lap.
    I3,
}

impl Symbol {
    /// Lap sign: +1 on increasing laps, -1 on the decreasing lap, 0 at
    /// critical points.
    pub fn sign(self) -> i8 {
        match self {
            Symbol::I1 | Symbol::I3 => 1,
            Symbol::I2 => -1,
            Symbol::C1 | Symbol::C2 => 0,
        }
    }

    /// True for the two critical symbols.
    pub fn is_critical(self) -> bool {
        matches!(self, Symbol::C1 | Symbol::C2)
    }

    /// Spatial rank 1..=5 (left to right on the line).
    pub fn rank(self) -> u8 {
        match self {
            Symbol::I1 => 1,
            Symbol::C1 => 2,
            Symbol::I2 => 3,
            Symbol::C2 => 4,
            Symbol::I3 => 5,
        }
    }

    /// Compact one-character code used in text formats.
    pub fn to_char(self) -> char {
        match self {
            Symbol::I1 => '1',
            Symbol::C1 => 'A',
            Symbol::I2 => '2',
            Symbol::C2 => 'B',
            Symbol::I3 => '3',
        }
    }

    /// Parse the one-character code.
    pub fn from_char(c: char) -> Option<Symbol> {
        match c {
            '1' => Some(Symbol::I1),
            'A' => Some(Symbol::C1),
            '2' => Some(Symbol::I2),
            'B' => Some(Symbol::C2),
            '3' => Some(Symbol::I3),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// Errors from sequence construction and parsing.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("invalid symbol character {0:?}")]
    BadSymbol(char),
    #[error("critical symbol inside the head of an infinite sequence at position {0}")]
    InteriorCritical(usize),
    #[error("repeating tail must be a lap symbol, got {0}")]
    CriticalTail(Symbol),
    #[error("malformed sequence literal: {0}")]
    BadLiteral(String),
}

/// How a sequence ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tail {
    /// The sequence stops with its head (whose last symbol is critical, or
    /// which is being used as a plain finite word).
    Finite,
    /// The head is followed by the given lap symbol repeated forever.
    Repeat(Symbol),
}

/// A symbol sequence: a finite head plus a tail.
///
/// Normal form: with a `Repeat(s)` tail the head never ends in `s` (trailing
/// copies are absorbed into the tail), so equal sequences have equal
/// representations. With a `Finite` tail, critical symbols may appear only
/// as the very last symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItinerarySeq {
    head: Vec<Symbol>,
    tail: Tail,
}

impl ItinerarySeq {
    /// A finite sequence (possibly ending in a critical symbol).
    pub fn finite(head: Vec<Symbol>) -> Result<Self, SymbolicError> {
        for (i, s) in head.iter().enumerate() {
            if s.is_critical() && i + 1 != head.len() {
                return Err(SymbolicError::InteriorCritical(i));
            }
        }
        Ok(ItinerarySeq { head, tail: Tail::Finite })
    }

    /// Head followed by `sym` repeated forever. Trailing copies of `sym`
    /// in the head are absorbed into the tail.
    pub fn repeating(mut head: Vec<Symbol>, sym: Symbol) -> Result<Self, SymbolicError> {
        if sym.is_critical() {
            return Err(SymbolicError::CriticalTail(sym));
        }
        for (i, s) in head.iter().enumerate() {
            if s.is_critical() {
                return Err(SymbolicError::InteriorCritical(i));
            }
        }
        while head.last() == Some(&sym) {
            head.pop();
        }
        Ok(ItinerarySeq { head, tail: Tail::Repeat(sym) })
    }

    /// The constant sequence `sym` repeated forever.
    pub fn constant(sym: Symbol) -> Self {
        ItinerarySeq::repeating(Vec::new(), sym).expect("lap symbol")
    }

    pub fn head(&self) -> &[Symbol] {
        &self.head
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// Number of symbols in the head (a `Finite` sequence's total length).
    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    /// True when the sequence is finite and ends at a critical symbol.
    pub fn ends_critical(&self) -> bool {
        self.tail == Tail::Finite && self.head.last().is_some_and(|s| s.is_critical())
    }

    /// True for infinite sequences.
    pub fn is_infinite(&self) -> bool {
        matches!(self.tail, Tail::Repeat(_))
    }

    /// Symbol at position `n` (0-based); `None` past the end of a finite
    /// sequence.
    pub fn symbol_at(&self, n: usize) -> Option<Symbol> {
        if n < self.head.len() {
            Some(self.head[n])
        } else {
            match self.tail {
                Tail::Finite => None,
                Tail::Repeat(s) => Some(s),
            }
        }
    }

    /// Drop the first `n` symbols. Shifting a finite sequence past its end
    /// yields the empty finite sequence.
    pub fn shift(&self, n: usize) -> ItinerarySeq {
        if n <= self.head.len() {
            ItinerarySeq {
                head: self.head[n..].to_vec(),
                tail: self.tail,
            }
        } else {
            match self.tail {
                Tail::Finite => ItinerarySeq { head: Vec::new(), tail: Tail::Finite },
                Tail::Repeat(_) => ItinerarySeq { head: Vec::new(), tail: self.tail },
            }
        }
    }

    /// Prefix of the first `n` symbols as a plain word (shorter if the
    /// sequence is finite and shorter).
    pub fn prefix(&self, n: usize) -> Vec<Symbol> {
        (0..n).map_while(|i| self.symbol_at(i)).collect()
    }

    /// `word ++ self`: prepend a finite word. The word must not contain
    /// critical symbols (they only terminate sequences).
    pub fn prepend(&self, word: &[Symbol]) -> Result<ItinerarySeq, SymbolicError> {
        for (i, s) in word.iter().enumerate() {
            if s.is_critical() {
                return Err(SymbolicError::InteriorCritical(i));
            }
        }
        let mut head: Vec<Symbol> = word.to_vec();
        head.extend_from_slice(&self.head);
        match self.tail {
            Tail::Finite => ItinerarySeq::finite(head),
            Tail::Repeat(s) => ItinerarySeq::repeating(head, s),
        }
    }

    /// Signed-lexicographic comparison; see [`cmp_signed`].
    pub fn cmp_seq(&self, other: &ItinerarySeq) -> Ordering {
        // Any difference between distinct sequences appears within
        // max(head lengths) + 1 symbols: beyond both heads, both sequences
        // are constant (or ended).
        let limit = self.head.len().max(other.head.len()) + 1;
        for n in 0..limit {
            match (self.symbol_at(n), other.symbol_at(n)) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) | (Some(_), None) => {
                    // A finite sequence ends at a critical symbol (or is a
                    // plain word prefix); ending earlier with identical
                    // prefix cannot happen between normalized sequences
                    // because the previous positions matched and a critical
                    // symbol differs from every lap symbol. Treat
                    // exhaustion as equality of the common part — reaching
                    // here means one sequence is a strict prefix of the
                    // other, which only arises comparing plain words.
                    return Ordering::Equal;
                }
                (Some(a), Some(b)) => {
                    if a != b {
                        let sign = sign_product(self, n);
                        let base = a.cmp(&b);
                        return if sign >= 0 { base } else { base.reverse() };
                    }
                }
            }
        }
        Ordering::Equal
    }

    /// True when no shift of the sequence precedes the sequence itself.
    ///
    /// For a `Repeat` tail only shifts up to the head length need checking
    /// (later shifts repeat); for a finite sequence all proper shifts are
    /// checked against the whole.
    pub fn is_minimal(&self) -> bool {
        let max_shift = match self.tail {
            Tail::Finite => self.head.len(),
            Tail::Repeat(_) => self.head.len() + 1,
        };
        for n in 1..max_shift {
            if self.shift(n).cmp_seq(self) == Ordering::Less {
                return false;
            }
        }
        true
    }

    /// Admissibility with respect to a kneading sequence `k`: every shift
    /// that starts after any leading `I1` block satisfies `shift >= k`.
    /// Shifts beginning inside the leading `I1` block are exempt (points
    /// left of the first critical point may code below the kneading
    /// sequence), and a shift landing exactly on a terminal critical
    /// symbol codes a critical point, which is compared as-is.
    pub fn is_admissible(&self, k: &ItinerarySeq) -> bool {
        // Length of the leading I1 block.
        let mut lead = 0usize;
        while self.symbol_at(lead) == Some(Symbol::I1) {
            lead += 1;
            if lead > self.head.len() {
                // I1 repeated forever: admissible by convention.
                return true;
            }
        }
        let max_shift = match self.tail {
            Tail::Finite => self.head.len(),
            Tail::Repeat(_) => self.head.len() + 1,
        };
        for n in lead..max_shift {
            if self.shift(n).cmp_seq(k) == Ordering::Less {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for ItinerarySeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.head {
            write!(f, "{}", s.to_char())?;
        }
        match self.tail {
            Tail::Finite => Ok(()),
            Tail::Repeat(s) => write!(f, "({})^inf", s.to_char()),
        }
    }
}

/// Running product of lap signs over the first `n` symbols of `seq`
/// (+1 for an empty product). Stops early (returns 0) if a critical symbol
/// appears before position `n`, though normalized sequences never hit that.
fn sign_product(seq: &ItinerarySeq, n: usize) -> i8 {
    let mut p = 1i8;
    for i in 0..n {
        match seq.symbol_at(i) {
            Some(s) => p *= s.sign(),
            None => return p,
        }
    }
    p
}

/// Signed-lexicographic comparison of two sequences. The first differing
/// position decides, with the comparison reversed when the shared prefix
/// has an odd number of decreasing-lap symbols.
pub fn cmp_signed(a: &ItinerarySeq, b: &ItinerarySeq) -> Ordering {
    a.cmp_seq(b)
}

/// `base ++ rep^n ++ rest`: concatenate a word, `n` copies of a repeated
/// word, and a final sequence.
pub fn concat_power(
    base: &[Symbol],
    rep: &[Symbol],
    n: usize,
    rest: &ItinerarySeq,
) -> Result<ItinerarySeq, SymbolicError> {
    let mut word: Vec<Symbol> = base.to_vec();
    for _ in 0..n {
        word.extend_from_slice(rep);
    }
    rest.prepend(&word)
}

/// Render a plain word in the compact character code.
pub fn word_to_string(word: &[Symbol]) -> String {
    word.iter().map(|s| s.to_char()).collect()
}

/// Parse a plain word from the compact character code.
pub fn word_from_str(s: &str) -> Result<Vec<Symbol>, SymbolicError> {
    s.chars()
        .map(|c| Symbol::from_char(c).ok_or(SymbolicError::BadSymbol(c)))
        .collect()
}

/// Parse a sequence literal: a word, optionally followed by `(s)^inf` for a
/// repeating tail, e.g. `12B`, `1(2)^inf`, `(1)^inf`.
pub fn seq_from_str(text: &str) -> Result<ItinerarySeq, SymbolicError> {
    if let Some(idx) = text.find('(') {
        let (head_s, tail_s) = text.split_at(idx);
        let rest = tail_s
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(")^inf"))
            .ok_or_else(|| SymbolicError::BadLiteral(text.to_string()))?;
        if rest.chars().count() != 1 {
            return Err(SymbolicError::BadLiteral(text.to_string()));
        }
        let sym = Symbol::from_char(rest.chars().next().unwrap())
            .ok_or_else(|| SymbolicError::BadLiteral(text.to_string()))?;
        let head = word_from_str(head_s)?;
        ItinerarySeq::repeating(head, sym)
    } else {
        ItinerarySeq::finite(word_from_str(text)?)
    }
}

/// An observed itinerary: either fully resolved (finite-critical or
/// eventually-repeating) or known only to a finite depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Itinerary {
    /// The code is known exactly.
    Seq(ItinerarySeq),
    /// Only the first symbols are known; the orbit was followed to finite
    /// depth without resolving a tail.
    Prefix(Vec<Symbol>),
}

impl Itinerary {
    /// The known prefix, up to `n` symbols.
    pub fn prefix(&self, n: usize) -> Vec<Symbol> {
        match self {
            Itinerary::Seq(s) => s.prefix(n),
            Itinerary::Prefix(w) => w.iter().copied().take(n).collect(),
        }
    }

    /// Number of symbols known.
    pub fn known_len(&self) -> Option<usize> {
        match self {
            Itinerary::Seq(_) => None, // unbounded (or ends critically)
            Itinerary::Prefix(w) => Some(w.len()),
        }
    }

    /// Compare against a fully-known target. Returns `Some(ordering)` when
    /// the known symbols decide it, `None` when the observed prefix is a
    /// prefix of the target (too short to decide).
    pub fn cmp_target(&self, target: &ItinerarySeq) -> Option<Ordering> {
        match self {
            Itinerary::Seq(s) => Some(s.cmp_seq(target)),
            Itinerary::Prefix(w) => cmp_word_prefix(w, target),
        }
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Itinerary::Seq(s) => write!(f, "{s}"),
            Itinerary::Prefix(w) => {
                for s in w {
                    write!(f, "{}", s.to_char())?;
                }
                write!(f, "…")
            }
        }
    }
}

/// Compare a finite observed word (no critical symbols — laps only) against
/// a full sequence. Decided at the first difference; `None` if the word is
/// a prefix of the sequence. A critical symbol in the target differs from
/// every lap symbol, so targets ending critically are decided once the word
/// reaches that position.
pub fn cmp_word_prefix(word: &[Symbol], target: &ItinerarySeq) -> Option<Ordering> {
    let mut sign = 1i8;
    for (n, &a) in word.iter().enumerate() {
        match target.symbol_at(n) {
            None => {
                // Word runs past a finite target: the target ended at a
                // critical symbol which would have differed; the only way to
                // get here is comparing against a plain finite word target.
                return Some(Ordering::Equal);
            }
            Some(b) => {
                if a != b {
                    let base = a.cmp(&b);
                    return Some(if sign >= 0 { base } else { base.reverse() });
                }
                sign *= a.sign();
            }
        }
    }
    match target.symbol_at(word.len()) {
        None => Some(Ordering::Equal),
        Some(_) => None,
    }
}
