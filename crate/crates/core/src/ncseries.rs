//! Truncated noncommutative power series in `x0, x1` with MZV coefficients.
//!
//! Coefficients are kept reduced so equality is coefficientwise equality of values.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::mzv::MzvExpr;
use crate::words::{shuffle_counts, Word};
use crate::{Error, Q};

#[derive(Clone, PartialEq, Eq)]
pub struct NcSeries {
    cap: usize,
    coeffs: BTreeMap<Word, MzvExpr>,
}

/// Outcome of a Lie or group-like test with the first failing pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LieReport {
    pub ok: bool,
    pub failing_pair: Option<(Word, Word)>,
}

impl NcSeries {
    pub fn zero(cap: usize) -> NcSeries {
        NcSeries { cap, coeffs: BTreeMap::new() }
    }

    pub fn one(cap: usize) -> NcSeries {
        NcSeries::monomial(cap, Word::EMPTY, MzvExpr::one())
    }

    pub fn letter(cap: usize, a: u8) -> NcSeries {
        NcSeries::monomial(cap, Word::letter(a), MzvExpr::one())
    }

    pub fn monomial(cap: usize, w: Word, c: MzvExpr) -> NcSeries {
        let mut s = NcSeries::zero(cap);
        s.add_term(w, &c);
        s
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn coeff(&self, w: Word) -> MzvExpr {
        self.coeffs.get(&w).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &MzvExpr)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, w: Word, c: &MzvExpr) {
        if w.len() > self.cap || c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(w).or_default();
        e.add_assign(c);
        if e.is_zero() {
            self.coeffs.remove(&w);
        }
    }

    pub fn add(&self, other: &NcSeries) -> NcSeries {
        let mut s = self.clone();
        for (w, c) in &other.coeffs {
            s.add_term(*w, c);
        }
        s
    }

    pub fn sub(&self, other: &NcSeries) -> NcSeries {
        self.add(&other.scale_q(&-Q::one()))
    }

    pub fn scale_q(&self, q: &Q) -> NcSeries {
        if q.is_zero() {
            return NcSeries::zero(self.cap);
        }
        NcSeries { cap: self.cap, coeffs: self.coeffs.iter().map(|(w, c)| (*w, c.scale(q))).collect() }
    }

    pub fn scale(&self, c: &MzvExpr) -> NcSeries {
        let mut s = NcSeries::zero(self.cap);
        for (w, d) in &self.coeffs {
            s.add_term(*w, &d.mul_reduced(c));
        }
        s
    }

    /// Homogeneous part of word length `n`.
    pub fn length_part(&self, n: usize) -> NcSeries {
        NcSeries {
            cap: self.cap,
            coeffs: self.coeffs.iter().filter(|(w, _)| w.len() == n).map(|(w, c)| (*w, c.clone())).collect(),
        }
    }

    pub fn truncate(&self, cap: usize) -> NcSeries {
        NcSeries {
            cap,
            coeffs: self.coeffs.iter().filter(|(w, _)| w.len() <= cap).map(|(w, c)| (*w, c.clone())).collect(),
        }
    }

    /// Concatenation product truncated at the common cap.
    pub fn mul(&self, other: &NcSeries) -> Result<NcSeries, Error> {
        if self.cap != other.cap {
            return Err(Error::CapMismatch(self.cap, other.cap));
        }
        Ok(self.mul_trunc(other))
    }

    fn mul_trunc(&self, other: &NcSeries) -> NcSeries {
        let mut s = NcSeries::zero(self.cap);
        for (u, a) in &self.coeffs {
            for (v, b) in &other.coeffs {
                if u.len() + v.len() <= self.cap {
                    s.add_term(u.concat(*v), &a.mul_reduced(b));
                }
            }
        }
        s
    }

    pub fn bracket(&self, other: &NcSeries) -> Result<NcSeries, Error> {
        Ok(self.mul(other)?.sub(&other.mul(self)?))
    }

    /// Inverse by the geometric series in `S - S_ε`.
    pub fn inverse(&self) -> Result<NcSeries, Error> {
        let c0 = self.coeff(Word::EMPTY);
        let q = c0.as_rational().filter(|q| !q.is_zero()).ok_or_else(|| Error::NotInvertible(c0.to_string()))?;
        let qinv = Q::one() / q;
        // S = c0 (1 + T)  ⇒  S^{-1} = c0^{-1} Σ (-T)^n
        let mut t = self.scale_q(&qinv);
        t.coeffs.remove(&Word::EMPTY);
        let neg_t = t.scale_q(&-Q::one());
        let mut acc = NcSeries::one(self.cap);
        let mut power = NcSeries::one(self.cap);
        for _ in 0..self.cap {
            power = power.mul_trunc(&neg_t);
            if power.is_empty() {
                break;
            }
            acc = acc.add(&power);
        }
        Ok(acc.scale_q(&qinv))
    }

    /// `S̃`: every word reversed.
    pub fn reverse(&self) -> NcSeries {
        NcSeries { cap: self.cap, coeffs: self.coeffs.iter().map(|(w, c)| (w.reverse(), c.clone())).collect() }
    }

    /// `S(-x0,-x1)`.
    pub fn negate_letters(&self) -> NcSeries {
        NcSeries {
            cap: self.cap,
            coeffs: self
                .coeffs
                .iter()
                .map(|(w, c)| (*w, if w.len() % 2 == 0 { c.clone() } else { c.neg() }))
                .collect(),
        }
    }

    /// Letter exchange `x0 ↔ x1`.
    pub fn swap_letters(&self) -> NcSeries {
        NcSeries { cap: self.cap, coeffs: self.coeffs.iter().map(|(w, c)| (w.swap01(), c.clone())).collect() }
    }

    /// Continuous homomorphism `x0 ↦ img0`, `x1 ↦ img1`; images must have no constant term.
    pub fn substitute(&self, img0: &NcSeries, img1: &NcSeries) -> Result<NcSeries, Error> {
        if !img0.coeff(Word::EMPTY).is_zero() || !img1.coeff(Word::EMPTY).is_zero() {
            return Err(Error::Invalid("substitution image has a constant term".into()));
        }
        let imgs = [img0.truncate(self.cap), img1.truncate(self.cap)];
        let terms: Vec<(Word, &MzvExpr)> = self.coeffs.iter().map(|(w, c)| (*w, c)).collect();
        Ok(subst_rec(&terms, 0, &imgs, self.cap))
    }

    /// Friedrichs test: `(S | u ⧢ v) = 0` for nonempty `u, v`.
    pub fn lie_check(&self) -> LieReport {
        for n in 2..=self.cap {
            for m in 1..=n / 2 {
                for u in Word::all_of_len(m) {
                    for v in Word::all_of_len(n - m) {
                        let mut acc = MzvExpr::zero();
                        for (w, k) in shuffle_counts(u, v) {
                            if let Some(c) = self.coeffs.get(&w) {
                                acc.add_scaled(c, &Q::from_integer((k as i64).into()));
                            }
                        }
                        if !acc.is_zero() {
                            return LieReport { ok: false, failing_pair: Some((u, v)) };
                        }
                    }
                }
            }
        }
        LieReport { ok: true, failing_pair: None }
    }

    /// `S_{u⧢v} = S_u S_v` for all `|u| + |v| ≤ cap`.
    pub fn group_like_check(&self) -> LieReport {
        if self.coeff(Word::EMPTY) != MzvExpr::one() {
            return LieReport { ok: false, failing_pair: Some((Word::EMPTY, Word::EMPTY)) };
        }
        for n in 2..=self.cap {
            for m in 1..=n / 2 {
                for u in Word::all_of_len(m) {
                    for v in Word::all_of_len(n - m) {
                        let mut lhs = MzvExpr::zero();
                        for (w, k) in shuffle_counts(u, v) {
                            if let Some(c) = self.coeffs.get(&w) {
                                lhs.add_scaled(c, &Q::from_integer((k as i64).into()));
                            }
                        }
                        if lhs != self.coeff(u).mul_reduced(&self.coeff(v)) {
                            return LieReport { ok: false, failing_pair: Some((u, v)) };
                        }
                    }
                }
            }
        }
        LieReport { ok: true, failing_pair: None }
    }

    /// Coefficients on standard Lyndon brackets of a Lie series (letters ordered `x0 < x1`).
    pub fn lyndon_coordinates(&self) -> Result<Vec<(Word, MzvExpr)>, Error> {
        let mut rest = self.clone();
        let mut out = Vec::new();
        let mut brackets: HashMap<Word, NcSeries> = HashMap::new();
        while let Some(w) = rest.coeffs.keys().min_by(|a, b| lex_key(**a).cmp(&lex_key(**b))).copied() {
            if !crate::words::is_lyndon(w) {
                return Err(Error::NotLyndon(w.to_string()));
            }
            let c = rest.coeff(w);
            let p = lyndon_series(w, self.cap, &mut brackets);
            rest = rest.sub(&p.scale(&c));
            out.push((w, c));
        }
        Ok(out)
    }

    /// One line per word: `<word> : <value>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (w, c) in &self.coeffs {
            s.push_str(&format!("{w} : {c}\n"));
        }
        s
    }
}

fn lex_key(w: Word) -> (Vec<u8>, usize) {
    (w.letters().collect(), w.len())
}

fn lyndon_series(w: Word, cap: usize, memo: &mut HashMap<Word, NcSeries>) -> NcSeries {
    if let Some(s) = memo.get(&w) {
        return s.clone();
    }
    let s = if w.len() == 1 {
        NcSeries::letter(cap, w.get(0))
    } else {
        let split = (1..w.len()).find(|&i| crate::words::is_lyndon(w.suffix_from(i))).unwrap();
        let a = lyndon_series(w.prefix(split), cap, memo);
        let b = lyndon_series(w.suffix_from(split), cap, memo);
        a.bracket(&b).unwrap()
    };
    memo.insert(w, s.clone());
    s
}

fn subst_rec(terms: &[(Word, &MzvExpr)], depth: usize, imgs: &[NcSeries; 2], budget: usize) -> NcSeries {
    let cap = imgs[0].cap;
    let mut out = NcSeries::zero(cap);
    let mut parts: [Vec<(Word, &MzvExpr)>; 2] = [Vec::new(), Vec::new()];
    for &(w, c) in terms {
        if w.len() == depth {
            out.add_term(Word::EMPTY, c);
        } else if w.len() - depth <= budget {
            parts[w.get(depth) as usize].push((w, c));
        }
    }
    for a in 0..2 {
        if parts[a].is_empty() || budget == 0 {
            continue;
        }
        let tail = subst_rec(&parts[a], depth + 1, imgs, budget - 1);
        for (u, x) in &imgs[a].coeffs {
            for (v, y) in &tail.coeffs {
                if u.len() + v.len() <= budget {
                    out.add_term(u.concat(*v), &x.mul_reduced(y));
                }
            }
        }
    }
    out
}

impl fmt::Display for NcSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.dump())
    }
}

impl fmt::Debug for NcSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NcSeries(cap {}) {{ {} }}", self.cap, self.dump().trim_end().replace('\n', "; "))
    }
}

fn memo<K: std::hash::Hash + Eq + Clone, V: Clone>(
    slot: &'static OnceLock<Mutex<HashMap<K, Arc<V>>>>,
    key: K,
    f: impl FnOnce() -> V,
) -> Arc<V> {
    let m = slot.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = m.lock().unwrap().get(&key) {
        return v.clone();
    }
    let v = Arc::new(f());
    m.lock().unwrap().insert(key, v.clone());
    v
}

/// `Z = Σ ζ_w w`, the generating series of regularized MZVs.
pub fn associator(cap: usize) -> Arc<NcSeries> {
    static SLOT: OnceLock<Mutex<HashMap<usize, Arc<NcSeries>>>> = OnceLock::new();
    memo(&SLOT, cap, || {
        let mut s = NcSeries::one(cap);
        for n in 1..=cap {
            for w in Word::all_of_len(n) {
                s.add_term(w, &MzvExpr::zeta_word(w));
            }
        }
        s
    })
}

/// `x1 ↦ x1'` companion letter making the generating series single-valued.
pub fn x1_prime(cap: usize) -> Arc<NcSeries> {
    static SLOT: OnceLock<Mutex<HashMap<usize, Arc<NcSeries>>>> = OnceLock::new();
    memo(&SLOT, cap, || {
        let z = associator(cap);
        let zinv = z.inverse().expect("group-like");
        let x1 = NcSeries::letter(cap, 1);
        let f = z.mul_trunc(&x1).mul_trunc(&zinv).sub(&x1);
        let neg_x0 = NcSeries::letter(cap, 0).scale_q(&-Q::one());
        let mut cur = x1.clone();
        loop {
            let g = f.substitute(&neg_x0, &cur.scale_q(&-Q::one())).expect("no constant term");
            let next = x1.add(&f).add(&g);
            if next == cur {
                return cur;
            }
            cur = next;
        }
    })
}

/// Results of the structural identities satisfied by `x1'` at the given cap.
pub fn x1_prime_identities(cap: usize) -> Vec<(&'static str, bool)> {
    let xp = x1_prime(cap);
    let x0 = NcSeries::letter(cap, 0);
    let x1 = NcSeries::letter(cap, 1);
    let neg = |s: &NcSeries| s.scale_q(&-Q::one());
    let mut out = Vec::new();

    let lhs = xp.negate_letters();
    out.push(("negated letters give minus the reversal", lhs == neg(&xp.reverse())));

    let lhs = xp.reverse().substitute(&x0, &xp).unwrap();
    out.push(("reversal evaluated at x1' returns x1", lhs == x1));

    let m = neg(&x0).sub(&x1);
    let lhs = xp.substitute(&x0, &m).unwrap();
    out.push(("x1 -> -x0-x1 gives -x0-x1'", lhs == neg(&x0).sub(&xp)));

    let z = associator(cap);
    let xz = |a: &NcSeries, b: &NcSeries| z.substitute(a, b).unwrap();
    let build_x = |a: &NcSeries, b: &NcSeries, c: &NcSeries| {
        xz(a, b).mul_trunc(&xz(b, c)).mul_trunc(&xz(c, a))
    };
    let x = build_x(&x0, &m, &x1);
    let x_rev = x.reverse().substitute(&x0, &xp).unwrap();
    out.push(("hexagon product is single-valued", x_rev.mul_trunc(&x) == NcSeries::one(cap)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn poly(cap: usize, terms: &[(&str, i64)]) -> NcSeries {
        let mut s = NcSeries::zero(cap);
        for (t, n) in terms {
            s.add_term(w(t), &MzvExpr::integer(*n));
        }
        s
    }

    #[test]
    fn products_and_inverse() {
        let a = poly(3, &[("ε", 1), ("0", 1)]);
        let b = poly(3, &[("ε", 1), ("1", 1)]);
        assert_eq!(a.mul(&b).unwrap(), poly(3, &[("ε", 1), ("0", 1), ("1", 1), ("01", 1)]));
        assert_eq!(poly(3, &[("0", 1)]).mul(&poly(3, &[("000", 1)])).unwrap(), NcSeries::zero(3));
        assert_eq!(a.inverse().unwrap(), poly(3, &[("ε", 1), ("0", -1), ("00", 1), ("000", -1)]));
        assert!(matches!(a.mul(&poly(4, &[])), Err(Error::CapMismatch(3, 4))));
        assert!(matches!(poly(3, &[("0", 1)]).inverse(), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn group_like_examples() {
        let mut e = NcSeries::one(4);
        let mut f = Q::one();
        for n in 1..=4 {
            f /= Q::from_integer(n.into());
            e.add_term(Word::repeat(0, n), &MzvExpr::rational(f.clone()));
        }
        assert!(e.group_like_check().ok);
        let r = poly(3, &[("ε", 1), ("01", 1)]).group_like_check();
        assert_eq!(r.failing_pair, Some((w("0"), w("1"))));
    }

    #[test]
    fn associator_properties() {
        let z = associator(6);
        assert_eq!(z.coeff(Word::EMPTY), MzvExpr::one());
        assert!(z.coeff(w("0")).is_zero());
        assert_eq!(z.coeff(w("10")), MzvExpr::zeta(&[2]).neg());
        assert!(z.group_like_check().ok);
        let inv = z.reverse().negate_letters();
        assert_eq!(z.mul(&inv).unwrap(), NcSeries::one(6));
        assert_eq!(z.inverse().unwrap(), inv);
    }

    #[test]
    fn substitution_examples() {
        let s = poly(3, &[("01", 1)]);
        let x0 = NcSeries::letter(3, 0);
        let m = poly(3, &[("0", -1), ("1", -1)]);
        assert_eq!(s.substitute(&x0, &m).unwrap(), poly(3, &[("00", -1), ("01", -1)]));
        let z = associator(4);
        let x1 = NcSeries::letter(4, 1);
        assert_eq!(z.substitute(&x1, &NcSeries::letter(4, 0)).unwrap(), z.swap_letters());
    }

    #[test]
    fn x1_prime_low_lengths() {
        let xp = x1_prime(6);
        for n in 0..=3 {
            let expect = if n == 1 { NcSeries::letter(6, 1) } else { NcSeries::zero(6) };
            assert_eq!(xp.length_part(n), expect);
        }
        let l = |a: u8| NcSeries::letter(6, a);
        let br = |a: &NcSeries, b: &NcSeries| a.bracket(b).unwrap();
        let x01 = br(&l(0), &l(1));
        let t1 = br(&br(&x01, &l(1)), &l(1));
        let t2 = br(&l(0), &br(&x01, &l(1)));
        let expect = t1.sub(&t2).scale(&MzvExpr::zeta(&[3]).scale(&Q::from_integer(2.into())));
        assert_eq!(xp.length_part(4), expect);
        assert_eq!(expect.len(), 8);
        assert!(xp.lie_check().ok);
        for (w, c) in xp.iter() {
            assert_eq!(c.homogeneous_weight(), Some(w.len() - 1), "{w}");
        }
    }

    #[test]
    fn x1_prime_zeta5_brackets() {
        let xp = x1_prime(6).length_part(6);
        let coords = xp.lyndon_coordinates().unwrap();
        let with_z5 = coords.iter().filter(|(_, c)| !c.mod_products().is_zero()).count();
        assert_eq!(with_z5, 8);
    }

    #[test]
    fn x1_prime_identities_hold() {
        for (name, ok) in x1_prime_identities(6) {
            assert!(ok, "{name}");
        }
    }
}
