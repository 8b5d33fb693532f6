//! Words over `{0,1}` and `{0,1,2}`, rational word polynomials and the shuffle
//! Hopf algebra operations on them.
//!
//! - [`Word`]: packed 0/1 word, ordered by length then lexicographically (`0 < 1`)
//! - [`SeqWord`]: word over `{0,1,2}` used for sequential graphs
//! - [`WordPoly`]: finite ℚ-linear combination of words
//! - [`shuffle`], [`deconcatenations`], [`antipode`], [`is_lyndon`], [`lyndon_bracket`],
//!   [`expand_letter2`]

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::{Error, Q};

/// Maximal number of letters in a packed [`Word`].
pub const MAX_LEN: usize = 63;

/// A word over the alphabet `{0,1}`, packed into a machine integer.
///
/// The first letter is the most significant bit, so the derived order is
/// graded-lexicographic with `0 < 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    len: u8,
    bits: u64,
}

impl Word {
    pub const EMPTY: Word = Word { len: 0, bits: 0 };

    pub fn from_letters(letters: &[u8]) -> Word {
        assert!(letters.len() <= MAX_LEN, "word too long");
        let mut w = Word::EMPTY;
        for &a in letters {
            w = w.push(a);
        }
        w
    }

    /// The word `a^n`.
    pub fn repeat(a: u8, n: usize) -> Word {
        Word::from_letters(&vec![a; n])
    }

    pub fn letter(a: u8) -> Word {
        Word::EMPTY.push(a)
    }

    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn get(self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.bits >> (self.len() - 1 - i)) & 1) as u8
    }

    pub fn first(self) -> Option<u8> {
        (!self.is_empty()).then(|| self.get(0))
    }

    pub fn last(self) -> Option<u8> {
        (!self.is_empty()).then(|| (self.bits & 1) as u8)
    }

    /// Appends a letter on the right.
    #[must_use]
    pub fn push(self, a: u8) -> Word {
        debug_assert!(a < 2);
        assert!(self.len() < MAX_LEN, "word too long");
        Word { len: self.len + 1, bits: (self.bits << 1) | a as u64 }
    }

    /// Prepends a letter on the left.
    #[must_use]
    pub fn prepend(self, a: u8) -> Word {
        Word::letter(a).concat(self)
    }

    #[must_use]
    pub fn concat(self, other: Word) -> Word {
        assert!(self.len() + other.len() <= MAX_LEN, "word too long");
        Word { len: self.len + other.len, bits: (self.bits << other.len) | other.bits }
    }

    /// The first `n` letters.
    #[must_use]
    pub fn prefix(self, n: usize) -> Word {
        debug_assert!(n <= self.len());
        Word { len: n as u8, bits: self.bits >> (self.len() - n) }
    }

    /// Everything after the first `n` letters.
    #[must_use]
    pub fn suffix_from(self, n: usize) -> Word {
        debug_assert!(n <= self.len());
        let k = self.len() - n;
        Word { len: k as u8, bits: if k == 0 { 0 } else { self.bits & ((1u64 << k) - 1) } }
    }

    /// Removes the last letter.
    #[must_use]
    pub fn pop(self) -> (Word, u8) {
        let a = self.last().expect("pop on empty word");
        (Word { len: self.len - 1, bits: self.bits >> 1 }, a)
    }

    /// Removes the first letter.
    #[must_use]
    pub fn pop_front(self) -> (u8, Word) {
        let a = self.first().expect("pop_front on empty word");
        (a, self.suffix_from(1))
    }

    #[must_use]
    pub fn reverse(self) -> Word {
        let mut r = Word::EMPTY;
        for i in (0..self.len()).rev() {
            r = r.push(self.get(i));
        }
        r
    }

    /// Exchanges the letters 0 and 1.
    #[must_use]
    pub fn swap01(self) -> Word {
        let mask = if self.len == 0 { 0 } else { u64::MAX >> (64 - self.len as u32) };
        Word { len: self.len, bits: !self.bits & mask }
    }

    pub fn letters(self) -> impl Iterator<Item = u8> {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn count_ones(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn count_zeros(self) -> usize {
        self.len() - self.count_ones()
    }

    /// Admissible words begin with 1 and end with 0; the empty word counts as admissible.
    pub fn is_admissible(self) -> bool {
        self.is_empty() || (self.first() == Some(1) && self.last() == Some(0))
    }

    /// All words of the given length in increasing order.
    pub fn all_of_len(n: usize) -> impl Iterator<Item = Word> {
        assert!(n <= 20);
        (0..(1u64 << n)).map(move |bits| Word { len: n as u8, bits })
    }

    pub fn is_zeros(self) -> bool {
        self.bits == 0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "ε");
        }
        for a in self.letters() {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Word, Error> {
        let seq: SeqWord = s.parse()?;
        seq.to_word01().ok_or_else(|| Error::Parse(format!("letter 2 not allowed in {s:?}")))
    }
}

/// A word over `{0,1,2}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SeqWord(pub Vec<u8>);

impl SeqWord {
    pub fn new(letters: Vec<u8>) -> SeqWord {
        assert!(letters.iter().all(|&a| a < 3));
        SeqWord(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn reverse(&self) -> SeqWord {
        SeqWord(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &SeqWord) -> SeqWord {
        SeqWord(self.0.iter().chain(other.0.iter()).copied().collect())
    }

    pub fn to_word01(&self) -> Option<Word> {
        self.0.iter().all(|&a| a < 2).then(|| Word::from_letters(&self.0))
    }
}

impl From<Word> for SeqWord {
    fn from(w: Word) -> SeqWord {
        SeqWord(w.letters().collect())
    }
}

impl fmt::Display for SeqWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for a in &self.0 {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SeqWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeqWord({self})")
    }
}

impl FromStr for SeqWord {
    type Err = Error;

    /// Accepts `""`, `"ε"`, plain letters, whitespace, and repetition sugar `(01){3}` or `0{4}`.
    fn from_str(s: &str) -> Result<SeqWord, Error> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let out = parse_seq(&chars, &mut pos, false)?;
        if pos != chars.len() {
            return Err(Error::Parse(format!("unexpected {:?} at position {pos} in word {s:?}", chars[pos])));
        }
        Ok(SeqWord(out))
    }
}

fn parse_seq(chars: &[char], pos: &mut usize, nested: bool) -> Result<Vec<u8>, Error> {
    let mut out = Vec::new();
    while *pos < chars.len() {
        let c = chars[*pos];
        let unit: Vec<u8> = match c {
            '0' | '1' | '2' => {
                *pos += 1;
                vec![c as u8 - b'0']
            }
            'ε' => {
                *pos += 1;
                vec![]
            }
            '(' => {
                *pos += 1;
                let inner = parse_seq(chars, pos, true)?;
                if chars.get(*pos) != Some(&')') {
                    return Err(Error::Parse(format!("missing ')' at position {pos}")));
                }
                *pos += 1;
                inner
            }
            ')' if nested => return Ok(out),
            _ => return Err(Error::Parse(format!("unexpected {c:?} at position {pos}"))),
        };
        if chars.get(*pos) == Some(&'{') {
            *pos += 1;
            let start = *pos;
            while *pos < chars.len() && chars[*pos].is_ascii_digit() {
                *pos += 1;
            }
            let n: usize = chars[start..*pos]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| Error::Parse(format!("bad repetition count at position {start}")))?;
            if chars.get(*pos) != Some(&'}') {
                return Err(Error::Parse(format!("missing '}}' at position {pos}")));
            }
            *pos += 1;
            for _ in 0..n {
                out.extend_from_slice(&unit);
            }
        } else {
            out.extend(unit);
        }
    }
    if nested {
        return Err(Error::Parse("unbalanced '('".into()));
    }
    Ok(out)
}

/// A finite ℚ-linear combination of 0/1 words without zero coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct WordPoly {
    terms: BTreeMap<Word, Q>,
}

impl WordPoly {
    pub fn zero() -> WordPoly {
        WordPoly::default()
    }

    pub fn word(w: Word) -> WordPoly {
        WordPoly::term(w, Q::one())
    }

    pub fn term(w: Word, c: Q) -> WordPoly {
        let mut p = WordPoly::zero();
        p.add_term(w, c);
        p
    }

    pub fn add_term(&mut self, w: Word, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &WordPoly, c: &Q) {
        for (w, d) in &other.terms {
            self.add_term(*w, d * c);
        }
    }

    pub fn coeff(&self, w: Word) -> Q {
        self.terms.get(&w).cloned().unwrap_or_else(Q::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of all coefficients.
    pub fn mass(&self) -> Q {
        self.terms.values().fold(Q::zero(), |a, b| a + b)
    }

    /// The homogeneous part of the given length.
    pub fn graded(&self, n: usize) -> WordPoly {
        WordPoly { terms: self.terms.iter().filter(|(w, _)| w.len() == n).map(|(w, c)| (*w, c.clone())).collect() }
    }

    pub fn map_words(&self, f: impl Fn(Word) -> Word) -> WordPoly {
        let mut p = WordPoly::zero();
        for (w, c) in &self.terms {
            p.add_term(f(*w), c.clone());
        }
        p
    }

    pub fn shuffle(&self, other: &WordPoly) -> WordPoly {
        let mut p = WordPoly::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                let ab = a * b;
                for (w, n) in shuffle_counts(*u, *v) {
                    p.add_term(w, &ab * Q::from_integer(BigInt::from(n)));
                }
            }
        }
        p
    }

    pub fn concat(&self, other: &WordPoly) -> WordPoly {
        let mut p = WordPoly::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                p.add_term(u.concat(*v), a * b);
            }
        }
        p
    }

    pub fn antipode(&self) -> WordPoly {
        let mut p = WordPoly::zero();
        for (w, c) in &self.terms {
            p.add_scaled(&antipode(*w), c);
        }
        p
    }
}

impl std::ops::Add<&WordPoly> for &WordPoly {
    type Output = WordPoly;
    fn add(self, rhs: &WordPoly) -> WordPoly {
        let mut p = self.clone();
        p.add_scaled(rhs, &Q::one());
        p
    }
}

impl std::ops::Sub<&WordPoly> for &WordPoly {
    type Output = WordPoly;
    fn sub(self, rhs: &WordPoly) -> WordPoly {
        let mut p = self.clone();
        p.add_scaled(rhs, &-Q::one());
        p
    }
}

impl fmt::Display for WordPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i > 0 {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            } else if neg {
                write!(f, "-")?;
            }
            if a.is_one() {
                write!(f, "{w}")?;
            } else {
                write!(f, "{a}·{w}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for WordPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Shuffle product of two words with integer multiplicities.
pub fn shuffle_counts(u: Word, v: Word) -> HashMap<Word, u64> {
    let mut out = HashMap::new();
    let n = u.len() + v.len();
    if u.is_empty() || v.is_empty() {
        out.insert(u.concat(v), 1);
        return out;
    }
    // layer[i][j]: words formed from the first i letters of u and j letters of v
    let mut layer: Vec<HashMap<Word, u64>> = vec![HashMap::new(); v.len() + 1];
    layer[0].insert(Word::EMPTY, 1);
    for i in 0..=u.len() {
        for j in 0..=v.len() {
            if i == 0 && j == 0 {
                continue;
            }
            let mut cur: HashMap<Word, u64> = HashMap::new();
            if i > 0 {
                // layer[j] still holds row i-1
                for (w, c) in &layer[j] {
                    *cur.entry(w.push(u.get(i - 1))).or_default() += c;
                }
            }
            if j > 0 {
                for (w, c) in &layer[j - 1] {
                    *cur.entry(w.push(v.get(j - 1))).or_default() += c;
                }
            }
            layer[j] = cur;
        }
    }
    debug_assert!(layer[v.len()].keys().all(|w| w.len() == n));
    out = std::mem::take(&mut layer[v.len()]);
    out
}

/// `u ⧢ v` as a word polynomial.
pub fn shuffle(u: Word, v: Word) -> WordPoly {
    let mut p = WordPoly::zero();
    for (w, n) in shuffle_counts(u, v) {
        p.add_term(w, Q::from_integer(BigInt::from(n)));
    }
    p
}

/// All cuts `(u,v)` with `uv = w`, from `(ε,w)` to `(w,ε)`.
pub fn deconcatenations(w: Word) -> Vec<(Word, Word)> {
    (0..=w.len()).map(|i| (w.prefix(i), w.suffix_from(i))).collect()
}

/// `(-1)^{|w|} w̃`.
pub fn antipode(w: Word) -> WordPoly {
    let sign = if w.len() % 2 == 0 { Q::one() } else { -Q::one() };
    WordPoly::term(w.reverse(), sign)
}

/// A nonempty word strictly smaller than each of its proper right factors.
pub fn is_lyndon(w: Word) -> bool {
    if w.is_empty() {
        return false;
    }
    (1..w.len()).all(|i| lex_less(w, w.suffix_from(i)))
}

/// Plain lexicographic comparison (a proper prefix is smaller).
pub fn lex_less(a: Word, b: Word) -> bool {
    let n = a.len().min(b.len());
    for i in 0..n {
        if a.get(i) != b.get(i) {
            return a.get(i) < b.get(i);
        }
    }
    a.len() < b.len()
}

/// Expanded nested commutator of a Lyndon word via its standard factorization
/// (longest proper Lyndon right factor).
pub fn lyndon_bracket(w: Word) -> Result<WordPoly, Error> {
    if !is_lyndon(w) {
        return Err(Error::NotLyndon(w.to_string()));
    }
    Ok(bracket_rec(w))
}

fn bracket_rec(w: Word) -> WordPoly {
    if w.len() == 1 {
        return WordPoly::word(w);
    }
    let split = (1..w.len()).find(|&i| is_lyndon(w.suffix_from(i))).expect("Lyndon factorization");
    let a = bracket_rec(w.prefix(split));
    let b = bracket_rec(w.suffix_from(split));
    &a.concat(&b) - &b.concat(&a)
}

/// Replaces each letter 2 by `1 − 0`.
pub fn expand_letter2(w: &SeqWord) -> WordPoly {
    let mut acc: Vec<(Word, i64)> = vec![(Word::EMPTY, 1)];
    for &a in w.letters() {
        let mut next = Vec::with_capacity(acc.len() * 2);
        for (u, s) in acc {
            match a {
                2 => {
                    next.push((u.push(1), s));
                    next.push((u.push(0), -s));
                }
                _ => next.push((u.push(a), s)),
            }
        }
        acc = next;
    }
    let mut p = WordPoly::zero();
    for (u, s) in acc {
        p.add_term(u, Q::from_integer(BigInt::from(s)));
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn q(n: i64) -> Q {
        Q::from_integer(BigInt::from(n))
    }

    #[test]
    fn packing_and_order() {
        let a = w("0110");
        assert_eq!(a.len(), 4);
        assert_eq!(a.to_string(), "0110");
        assert_eq!(a.reverse(), w("0110"));
        assert_eq!(w("001").swap01(), w("110"));
        assert!(w("1") < w("00"));
        assert!(w("001") < w("010"));
        assert_eq!(w("0110").prefix(2), w("01"));
        assert_eq!(w("0110").suffix_from(1), w("110"));
        assert_eq!(Word::EMPTY.to_string(), "ε");
        assert_eq!(w(""), Word::EMPTY);
        assert_eq!(w("ε"), Word::EMPTY);
    }

    #[test]
    fn repetition_sugar() {
        let s: SeqWord = "2(01){3}2".parse().unwrap();
        assert_eq!(s.to_string(), "20101012");
        let s: SeqWord = "2 0{3} 2".parse().unwrap();
        assert_eq!(s.to_string(), "20002");
        assert!("2(01".parse::<SeqWord>().is_err());
        assert!("3".parse::<SeqWord>().is_err());
    }

    #[test]
    fn shuffle_examples() {
        assert_eq!(shuffle(Word::EMPTY, w("0110")), WordPoly::word(w("0110")));
        let mut e = WordPoly::word(w("01"));
        e.add_term(w("10"), q(1));
        assert_eq!(shuffle(w("0"), w("1")), e);
        let mut e = WordPoly::term(w("011"), q(2));
        e.add_term(w("101"), q(1));
        assert_eq!(shuffle(w("01"), w("1")), e);
    }

    #[test]
    fn deconcatenation_examples() {
        assert_eq!(deconcatenations(Word::EMPTY), vec![(Word::EMPTY, Word::EMPTY)]);
        assert_eq!(deconcatenations(w("0")), vec![(Word::EMPTY, w("0")), (w("0"), Word::EMPTY)]);
        assert_eq!(deconcatenations(w("01")), vec![(Word::EMPTY, w("01")), (w("0"), w("1")), (w("01"), Word::EMPTY)]);
    }

    #[test]
    fn antipode_examples() {
        assert_eq!(antipode(Word::EMPTY), WordPoly::word(Word::EMPTY));
        assert_eq!(antipode(w("01")), WordPoly::word(w("10")));
        assert_eq!(antipode(w("001")), WordPoly::term(w("100"), q(-1)));
    }

    #[test]
    fn lyndon_examples() {
        assert!(is_lyndon(w("01")));
        assert!(!is_lyndon(w("10")));
        assert!(!is_lyndon(w("0101")));
        assert!(is_lyndon(w("0011")));
        let mut e = WordPoly::word(w("01"));
        e.add_term(w("10"), q(-1));
        assert_eq!(lyndon_bracket(w("01")).unwrap(), e);
        let mut e = WordPoly::word(w("001"));
        e.add_term(w("010"), q(-2));
        e.add_term(w("100"), q(1));
        assert_eq!(lyndon_bracket(w("001")).unwrap(), e);
        assert!(matches!(lyndon_bracket(w("10")), Err(Error::NotLyndon(_))));
    }

    #[test]
    fn letter2_examples() {
        let two: SeqWord = "2".parse().unwrap();
        let mut e = WordPoly::word(w("1"));
        e.add_term(w("0"), q(-1));
        assert_eq!(expand_letter2(&two), e);
        let mut e = WordPoly::word(w("11"));
        e.add_term(w("01"), q(-1));
        assert_eq!(expand_letter2(&"21".parse().unwrap()), e);
        let mut e = WordPoly::word(w("111"));
        e.add_term(w("011"), q(-1));
        e.add_term(w("110"), q(-1));
        e.add_term(w("010"), q(1));
        assert_eq!(expand_letter2(&"212".parse().unwrap()), e);
    }
}
