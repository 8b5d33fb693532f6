//! Formal multiple zeta values.
//!
//! An [`MzvExpr`] is a ℚ-linear combination of symbols `ζ_w = I(0;w;1)` indexed by
//! 0/1 words, the empty word standing for the constant 1. Letter 1 is the form
//! `dt/(t-1)`, so `ζ_{10^{n_1-1}…10^{n_r-1}} = (-1)^r ζ(n_1,…,n_r)` with the sum
//! running over `k_1 < … < k_r`.
//!
//! Two levels of arithmetic are provided:
//! - word level: [`MzvExpr::product`] (shuffle) and [`MzvExpr::regularize`]
//! - reduced level: [`MzvExpr::reduce`] rewrites into the surviving words of the
//!   double-shuffle elimination of each weight; `*` multiplies reduced expressions
//!   and stays reduced, so equality of reduced expressions is equality of values.

mod reducer;
mod report;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::words::{shuffle_counts, Word, WordPoly};
use crate::{Error, Q};

pub use reducer::{
    cache_dir, dimension_check, expected_dimension, relation_system, set_cache_dir, set_weight_cap,
    weight_cap, RelationKind, RelationSystem, WeightTable,
};
pub use report::{generators, Generator, Monomial, ReportBasis};

/// A sequence `(n_1,…,n_r)` of positive integers; convergent when `n_r ≥ 2`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Composition(pub Vec<u32>);

impl Composition {
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn is_convergent(&self) -> bool {
        self.0.last().is_none_or(|&n| n >= 2)
    }

    /// The word `10^{n_1-1}…10^{n_r-1}`; `ζ(n) = (-1)^r ζ_word`.
    pub fn to_word(&self) -> Word {
        let mut w = Word::EMPTY;
        for &n in &self.0 {
            assert!(n >= 1, "composition parts must be positive");
            w = w.push(1);
            for _ in 1..n {
                w = w.push(0);
            }
        }
        w
    }

    /// Inverse of [`Composition::to_word`] on admissible words.
    pub fn from_word(w: Word) -> Result<Composition, Error> {
        if !w.is_admissible() {
            return Err(Error::NotAdmissible(w.to_string()));
        }
        Ok(Composition::from_word_unchecked(w))
    }

    /// Any word starting with 1 (or empty).
    pub fn from_word_unchecked(w: Word) -> Composition {
        let mut parts = Vec::new();
        for a in w.letters() {
            if a == 1 {
                parts.push(1);
            } else {
                *parts.last_mut().expect("word must start with 1") += 1;
            }
        }
        Composition(parts)
    }

    /// `(-1)^r`.
    pub fn sign(&self) -> i64 {
        if self.0.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "z({})", parts.join(","))
    }
}

/// Finite ℚ-combination of `ζ_w`.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct MzvExpr {
    terms: BTreeMap<Word, Q>,
}

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

impl MzvExpr {
    pub fn zero() -> MzvExpr {
        MzvExpr::default()
    }

    pub fn one() -> MzvExpr {
        MzvExpr::rational(Q::one())
    }

    pub fn rational(q: Q) -> MzvExpr {
        let mut e = MzvExpr::zero();
        e.add_term(Word::EMPTY, q);
        e
    }

    pub fn integer(n: i64) -> MzvExpr {
        MzvExpr::rational(qi(n))
    }

    /// The raw symbol `ζ_w` (not regularized, not reduced).
    pub fn symbol(w: Word) -> MzvExpr {
        let mut e = MzvExpr::zero();
        e.add_term(w, Q::one());
        e
    }

    /// The reduced value of `ζ_w` for any word (regularized when needed).
    pub fn zeta_word(w: Word) -> MzvExpr {
        MzvExpr::symbol(w).reduce()
    }

    /// The reduced value of `ζ(n_1,…,n_r)`.
    pub fn zeta(parts: &[u32]) -> MzvExpr {
        let c = Composition(parts.to_vec());
        MzvExpr::zeta_word(c.to_word()).scale(&qi(c.sign()))
    }

    pub fn from_word_poly(p: &WordPoly) -> MzvExpr {
        let mut e = MzvExpr::zero();
        for (w, c) in p.iter() {
            e.add_term(*w, c.clone());
        }
        e
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

    pub fn add_scaled(&mut self, other: &MzvExpr, c: &Q) {
        for (w, d) in &other.terms {
            self.add_term(*w, d * c);
        }
    }

    pub fn add_assign(&mut self, other: &MzvExpr) {
        for (w, d) in &other.terms {
            self.add_term(*w, d.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &MzvExpr) {
        for (w, d) in &other.terms {
            self.add_term(*w, -d.clone());
        }
    }

    #[must_use]
    pub fn scale(&self, c: &Q) -> MzvExpr {
        if c.is_zero() {
            return MzvExpr::zero();
        }
        MzvExpr { terms: self.terms.iter().map(|(w, d)| (*w, d * c)).collect() }
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

    /// `Some(q)` when the expression is a rational constant.
    pub fn as_rational(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => self.terms.get(&Word::EMPTY).cloned(),
            _ => None,
        }
    }

    pub fn max_weight(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    /// Homogeneous when all words have one length.
    pub fn homogeneous_weight(&self) -> Option<usize> {
        let mut ws = self.terms.keys().map(|w| w.len());
        let first = ws.next()?;
        ws.all(|k| k == first).then_some(first)
    }

    pub fn graded(&self, k: usize) -> MzvExpr {
        MzvExpr { terms: self.terms.iter().filter(|(w, _)| w.len() == k).map(|(w, c)| (*w, c.clone())).collect() }
    }

    /// Rewrites every word into admissible words using `ζ_0 = ζ_1 = 0` and the shuffle product.
    pub fn regularize(&self) -> MzvExpr {
        let mut out = MzvExpr::zero();
        for (w, c) in &self.terms {
            if w.is_admissible() {
                out.add_term(*w, c.clone());
            } else {
                for (v, d) in regularize_word(*w).iter() {
                    out.add_term(*v, d * c);
                }
            }
        }
        out
    }

    /// Word-level product: shuffle then regularize (no reduction).
    pub fn product(&self, other: &MzvExpr) -> MzvExpr {
        let mut raw = MzvExpr::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                let ab = a * b;
                for (w, n) in shuffle_counts(*u, *v) {
                    raw.add_term(w, &ab * qi(n as i64));
                }
            }
        }
        raw.regularize()
    }

    /// Canonical form over the surviving words of each weight up to the weight cap;
    /// words above the cap are only regularized.
    pub fn reduce(&self) -> MzvExpr {
        let mut out = MzvExpr::zero();
        for (w, c) in &self.regularize().terms {
            if w.is_empty() {
                out.add_term(*w, c.clone());
                continue;
            }
            match reducer::reduced_word(*w) {
                Some(e) => out.add_scaled(&e, c),
                None => out.add_term(*w, c.clone()),
            }
        }
        out
    }

    /// Like [`MzvExpr::reduce`] but fails when a weight exceeds `max_weight` or the cap.
    pub fn reduce_checked(&self, max_weight: usize) -> Result<MzvExpr, Error> {
        let k = self.max_weight();
        let cap = weight_cap().min(max_weight);
        if k > cap {
            return Err(Error::WeightCap { weight: k, cap });
        }
        Ok(self.reduce())
    }

    /// True when every word is a surviving word of its weight (or above the cap).
    pub fn is_reduced(&self) -> bool {
        self.terms.keys().all(|w| w.is_empty() || reducer::is_free_word(*w))
    }

    /// Product of reduced expressions, reduced.
    pub fn mul_reduced(&self, other: &MzvExpr) -> MzvExpr {
        if self.is_zero() || other.is_zero() {
            return MzvExpr::zero();
        }
        if let Some(q) = self.as_rational() {
            return other.scale(&q);
        }
        if let Some(q) = other.as_rational() {
            return self.scale(&q);
        }
        let mut out = MzvExpr::zero();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                let ab = a * b;
                if u.is_empty() {
                    out.add_term(*v, ab);
                } else if v.is_empty() {
                    out.add_term(*u, ab);
                } else {
                    out.add_scaled(&word_product_reduced(*u, *v), &ab);
                }
            }
        }
        out
    }

    pub fn neg(&self) -> MzvExpr {
        self.scale(&-Q::one())
    }

    /// Polynomial form in generators, for display and for mod-product projections.
    pub fn to_monomials(&self) -> Vec<(Monomial, Q)> {
        report::to_monomials(self)
    }

    /// Drops every product of MZVs of positive weight (including `ζ(2)^n`, `n ≥ 2`)
    /// and the rational constant.
    pub fn mod_products(&self) -> MzvExpr {
        report::mod_products(self)
    }

    /// Drops every monomial containing a factor of weight in `[2, n]`.
    pub fn mod_ideal(&self, n: usize) -> MzvExpr {
        report::mod_ideal(self, n)
    }

    /// Human-readable form in generators, e.g. `-11/2*z(5)+3*z(2)*z(3)`.
    pub fn to_report_string(&self) -> String {
        report::format(self)
    }

    /// Symbol form `zeta[w]` for every word.
    pub fn to_word_string(&self) -> String {
        let mut s = String::new();
        for (i, (w, c)) in self.terms.iter().enumerate() {
            let atom = if w.is_empty() { None } else { Some(format!("zeta[{w}]")) };
            push_term(&mut s, i == 0, c, atom.as_deref());
        }
        if s.is_empty() {
            s.push('0');
        }
        s
    }
}

/// Appends `±c*atom` in the expression grammar.
pub(crate) fn push_term(s: &mut String, first: bool, c: &Q, atom: Option<&str>) {
    let neg = c.is_negative();
    if neg {
        s.push('-');
    } else if !first {
        s.push('+');
    }
    let a = c.abs();
    match atom {
        None => s.push_str(&a.to_string()),
        Some(t) => {
            if !a.is_one() {
                s.push_str(&a.to_string());
                s.push('*');
            }
            s.push_str(t);
        }
    }
}

impl fmt::Display for MzvExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_report_string())
    }
}

impl fmt::Debug for MzvExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_word_string())
    }
}

impl std::ops::Add<&MzvExpr> for &MzvExpr {
    type Output = MzvExpr;
    fn add(self, rhs: &MzvExpr) -> MzvExpr {
        let mut e = self.clone();
        e.add_assign(rhs);
        e
    }
}

impl std::ops::Sub<&MzvExpr> for &MzvExpr {
    type Output = MzvExpr;
    fn sub(self, rhs: &MzvExpr) -> MzvExpr {
        let mut e = self.clone();
        e.sub_assign(rhs);
        e
    }
}

impl std::ops::Mul<&MzvExpr> for &MzvExpr {
    type Output = MzvExpr;
    /// Reduced product.
    fn mul(self, rhs: &MzvExpr) -> MzvExpr {
        self.mul_reduced(rhs)
    }
}

impl std::ops::Neg for &MzvExpr {
    type Output = MzvExpr;
    fn neg(self) -> MzvExpr {
        self.scale(&-Q::one())
    }
}

fn regularize_memo() -> &'static Mutex<HashMap<Word, Arc<WordPoly>>> {
    static MEMO: OnceLock<Mutex<HashMap<Word, Arc<WordPoly>>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `ζ_w` as a combination of admissible words.
pub fn regularize_word(w: Word) -> Arc<WordPoly> {
    if let Some(p) = regularize_memo().lock().unwrap().get(&w) {
        return p.clone();
    }
    let p = Arc::new(regularize_word_uncached(w));
    regularize_memo().lock().unwrap().insert(w, p.clone());
    p
}

fn regularize_word_uncached(w: Word) -> WordPoly {
    if w.is_admissible() {
        return WordPoly::word(w);
    }
    let mut out = WordPoly::zero();
    if w.last() == Some(1) {
        // ζ_v · ζ_{1^m} = 0 and v1^m occurs once in v ⧢ 1^m
        let m = (0..w.len()).rev().take_while(|&i| w.get(i) == 1).count();
        let v = w.prefix(w.len() - m);
        if v.is_empty() {
            return out;
        }
        for (x, n) in shuffle_counts(v, Word::repeat(1, m)) {
            if x != w {
                out.add_scaled(&regularize_word(x), &qi(-(n as i64)));
            }
        }
    } else {
        let m = (0..w.len()).take_while(|&i| w.get(i) == 0).count();
        let v = w.suffix_from(m);
        if v.is_empty() {
            return out;
        }
        for (x, n) in shuffle_counts(Word::repeat(0, m), v) {
            if x != w {
                out.add_scaled(&regularize_word(x), &qi(-(n as i64)));
            }
        }
    }
    out
}

fn product_memo() -> &'static Mutex<HashMap<(Word, Word), Arc<MzvExpr>>> {
    static MEMO: OnceLock<Mutex<HashMap<(Word, Word), Arc<MzvExpr>>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

fn word_product_reduced(u: Word, v: Word) -> Arc<MzvExpr> {
    let key = if u <= v { (u, v) } else { (v, u) };
    if let Some(e) = product_memo().lock().unwrap().get(&key) {
        return e.clone();
    }
    let e = Arc::new(MzvExpr::symbol(u).product(&MzvExpr::symbol(v)).reduce());
    product_memo().lock().unwrap().insert(key, e.clone());
    e
}

/// Clears memoized products and reductions (after changing the weight cap).
pub fn clear_memos() {
    product_memo().lock().unwrap().clear();
    reducer::clear_tables();
    report::clear();
}

/// Word form of `ζ(a)·ζ(b)` expanded by the quasi-shuffle (stuffle) product.
pub fn stuffle_product(a: &Composition, b: &Composition) -> MzvExpr {
    let mut out = MzvExpr::zero();
    for (c, n) in stuffle_compositions(&a.0, &b.0) {
        let comp = Composition(c);
        out.add_term(comp.to_word(), qi(n * comp.sign()));
    }
    out
}

/// Quasi-shuffle of two index sequences with multiplicities.
pub fn stuffle_compositions(a: &[u32], b: &[u32]) -> HashMap<Vec<u32>, i64> {
    let mut memo = HashMap::new();
    stuffle_rec(a, b, &mut memo)
}

fn stuffle_rec<'a>(
    a: &'a [u32],
    b: &'a [u32],
    memo: &mut HashMap<(&'a [u32], &'a [u32]), HashMap<Vec<u32>, i64>>,
) -> HashMap<Vec<u32>, i64> {
    if a.is_empty() || b.is_empty() {
        let mut m = HashMap::new();
        m.insert(if a.is_empty() { b.to_vec() } else { a.to_vec() }, 1);
        return m;
    }
    if let Some(m) = memo.get(&(a, b)) {
        return m.clone();
    }
    let mut out: HashMap<Vec<u32>, i64> = HashMap::new();
    let mut add = |head: u32, tail: HashMap<Vec<u32>, i64>| {
        for (t, n) in tail {
            let mut c = Vec::with_capacity(t.len() + 1);
            c.push(head);
            c.extend(t);
            *out.entry(c).or_default() += n;
        }
    };
    add(a[0], stuffle_rec(&a[1..], b, memo));
    add(b[0], stuffle_rec(a, &b[1..], memo));
    add(a[0] + b[0], stuffle_rec(&a[1..], &b[1..], memo));
    memo.insert((a, b), out.clone());
    out
}

/// Duality: `ζ_w = (-1)^{|w|} ζ_{w'}` with `w'` the reversed word with letters exchanged.
pub fn duality(w: Word) -> Result<(i64, Word), Error> {
    if !w.is_admissible() || w.is_empty() {
        return Err(Error::NotAdmissible(w.to_string()));
    }
    Ok((if w.len() % 2 == 0 { 1 } else { -1 }, w.reverse().swap01()))
}

/// `(sign, composition)` with `ζ_w = sign·ζ(composition)`.
pub fn word_to_composition(w: Word) -> Result<(i64, Composition), Error> {
    let c = Composition::from_word(w)?;
    Ok((c.sign(), c))
}

/// `(sign, word)` with `ζ(c) = sign·ζ_word`.
pub fn composition_to_word(c: &Composition) -> (i64, Word) {
    (c.sign(), c.to_word())
}

/// Rational product test helper: `zagier`-style closed forms use binomials.
pub(crate) fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn raw(pairs: &[(&str, i64)]) -> MzvExpr {
        let mut e = MzvExpr::zero();
        for (s, n) in pairs {
            e.add_term(w(s), qi(*n));
        }
        e
    }

    #[test]
    fn composition_conversion() {
        assert_eq!(word_to_composition(w("10")).unwrap(), (-1, Composition(vec![2])));
        assert_eq!(word_to_composition(w("100")).unwrap(), (-1, Composition(vec![3])));
        assert_eq!(word_to_composition(w("1010")).unwrap(), (1, Composition(vec![2, 2])));
        assert!(matches!(word_to_composition(w("01")), Err(Error::NotAdmissible(_))));
        assert_eq!(composition_to_word(&Composition(vec![1, 2])), (1, w("110")));
    }

    #[test]
    fn regularization_examples() {
        assert!(MzvExpr::symbol(w("0")).regularize().is_zero());
        assert!(MzvExpr::symbol(w("1")).regularize().is_zero());
        assert_eq!(MzvExpr::symbol(w("01")).regularize(), raw(&[("10", -1)]));
        assert_eq!(MzvExpr::symbol(w("101")).regularize(), raw(&[("110", -2)]));
        let e = raw(&[("0110", 3), ("11", 2), ("100", 1)]);
        assert_eq!(e.regularize().regularize(), e.regularize());
    }

    #[test]
    fn word_products() {
        assert_eq!(MzvExpr::one().product(&raw(&[("10", 1)])), raw(&[("10", 1)]));
        let p = MzvExpr::symbol(w("10")).product(&MzvExpr::symbol(w("10")));
        assert_eq!(p, raw(&[("1010", 2), ("1100", 4)]));
        let p = MzvExpr::symbol(w("10")).product(&MzvExpr::symbol(w("100")));
        let mass: Q = p.iter().map(|(_, c)| c.clone()).sum();
        assert_eq!(mass, qi(10));
    }

    #[test]
    fn stuffle_examples() {
        let two = Composition(vec![2]);
        let three = Composition(vec![3]);
        let e = stuffle_product(&two, &two);
        assert_eq!(e, raw(&[("1010", 2), ("1000", -1)]));
        let e = stuffle_product(&two, &three);
        assert_eq!(e, raw(&[("10100", 1), ("10010", 1), ("10000", -1)]));
        assert_eq!(stuffle_product(&Composition(vec![]), &two), raw(&[("10", -1)]));
    }

    #[test]
    fn duality_examples() {
        assert_eq!(duality(w("100")).unwrap(), (-1, w("110")));
        assert_eq!(duality(w("10")).unwrap(), (1, w("10")));
        assert_eq!(duality(w("1100")).unwrap(), (1, w("1100")));
        for k in 2..8 {
            for x in Word::all_of_len(k - 2) {
                let u = Word::letter(1).concat(x).push(0);
                let (s1, d) = duality(u).unwrap();
                let (s2, back) = duality(d).unwrap();
                assert_eq!(back, u);
                assert_eq!(s1 * s2, 1);
            }
        }
    }

    #[test]
    fn reductions() {
        let z2 = MzvExpr::zeta(&[2]);
        let z4 = MzvExpr::zeta(&[4]);
        assert_eq!(&z2 * &z2, z4.scale(&Q::new(5.into(), 2.into())));
        assert_eq!(MzvExpr::zeta(&[1, 2]), MzvExpr::zeta(&[3]));
        let z23 = MzvExpr::zeta(&[2, 3]);
        let rhs = &MzvExpr::zeta(&[5]).scale(&Q::new((-11).into(), 2.into()))
            + &(&z2 * &MzvExpr::zeta(&[3])).scale(&qi(3));
        assert_eq!(z23, rhs);
        assert_eq!(z23.to_report_string(), "-11/2*z(5)+3*z(2)*z(3)");
        assert_eq!((&z2 * &z2).to_report_string(), "5/2*z(4)");
        assert_eq!(MzvExpr::zeta_word(w("100")).to_report_string(), "-z(3)");
    }

    #[test]
    fn dimensions_to_eight() {
        for (k, found, expected) in dimension_check(8).unwrap() {
            assert_eq!(found, expected, "weight {k}");
        }
    }

    #[test]
    fn stuffle_agrees_with_shuffle_after_reduction() {
        for a in 2..=6usize {
            for b in 2..=(8 - a) {
                for u in Word::all_of_len(a - 2).map(|x| Word::letter(1).concat(x).push(0)) {
                    for v in Word::all_of_len(b - 2).map(|x| Word::letter(1).concat(x).push(0)) {
                        let cu = Composition::from_word(u).unwrap();
                        let cv = Composition::from_word(v).unwrap();
                        let sh = MzvExpr::symbol(u).product(&MzvExpr::symbol(v)).reduce();
                        let st = stuffle_product(&cu, &cv).reduce().scale(&qi(cu.sign() * cv.sign()));
                        assert_eq!(sh, st, "{u} {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn mod_products_drops_products() {
        let z3 = MzvExpr::zeta(&[3]);
        let e = &(&z3 * &z3) + &MzvExpr::zeta(&[3, 5]);
        let m = e.mod_products();
        assert!(!m.is_zero());
        assert_eq!(m.to_report_string(), "z(3,5)");
        let e = &MzvExpr::zeta(&[2, 3]) + &MzvExpr::integer(4);
        assert_eq!(e.mod_products().to_report_string(), "-11/2*z(5)");
        assert!((&MzvExpr::zeta(&[2]) * &MzvExpr::zeta(&[2])).mod_products().is_zero());
    }
}
