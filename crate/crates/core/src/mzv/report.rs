//! Polynomial presentation of reduced MZVs.
//!
//! Per weight a basis of monomials in generators is chosen greedily: products of
//! earlier generators first, then `ζ(k)`, then compositions with odd parts `≥ 3`
//! (by depth, then lexicographically), then any convergent composition.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Zero};

use super::reducer::{table, weight_cap};
use super::{push_term, Composition, MzvExpr};
use crate::words::Word;
use crate::Q;

/// A generator `ζ(c)` with its reduced value.
#[derive(Clone, Debug)]
pub struct Generator {
    pub composition: Composition,
    pub weight: usize,
    pub value: MzvExpr,
}

/// Product of generators: `(generator index, exponent)` sorted by index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(pub Vec<(usize, u32)>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    fn mul_gen(&self, g: usize) -> Monomial {
        let mut f = self.0.clone();
        match f.iter_mut().find(|(i, _)| *i == g) {
            Some((_, e)) => *e += 1,
            None => {
                f.push((g, 1));
                f.sort();
            }
        }
        Monomial(f)
    }
}

struct WeightBasis {
    monomials: Vec<Monomial>,
    free: Vec<Word>,
    /// Row `i`: coordinates of free word `i` in `monomials`.
    inverse: Vec<Vec<Q>>,
}

/// The generators and per-weight monomial bases built so far.
#[derive(Default)]
pub struct ReportBasis {
    pub generators: Vec<Generator>,
    weights: HashMap<usize, WeightBasis>,
    values: HashMap<Monomial, MzvExpr>,
}

fn state() -> &'static Mutex<ReportBasis> {
    static S: OnceLock<Mutex<ReportBasis>> = OnceLock::new();
    S.get_or_init(|| Mutex::new(ReportBasis::default()))
}

pub(super) fn clear() {
    *state().lock().unwrap() = ReportBasis::default();
}

fn coords(free: &[Word], e: &MzvExpr) -> Vec<Q> {
    free.iter().map(|w| e.coeff(*w)).collect()
}

/// Incremental row echelon form for independence tests.
struct Echelon {
    rows: Vec<(usize, Vec<Q>)>,
}

impl Echelon {
    fn insert(&mut self, mut v: Vec<Q>) -> bool {
        for (p, r) in &self.rows {
            if !v[*p].is_zero() {
                let f = v[*p].clone() / &r[*p];
                for (x, y) in v.iter_mut().zip(r) {
                    *x -= &f * y;
                }
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            Some(p) => {
                self.rows.push((p, v));
                true
            }
            None => false,
        }
    }
}

fn invert(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero()).expect("basis matrix is invertible");
        a.swap(c, p);
        let inv = Q::one() / &a[c][c];
        for x in a[c].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                let pivot = a[c].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Convergent compositions of `k` in generator preference order.
fn candidate_compositions(k: usize) -> Vec<Composition> {
    fn rec(rest: usize, cur: &mut Vec<u32>, out: &mut Vec<Composition>) {
        if rest == 0 {
            if cur.last().is_some_and(|&n| n >= 2) {
                out.push(Composition(cur.clone()));
            }
            return;
        }
        for n in 1..=rest {
            cur.push(n as u32);
            rec(rest - n, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    rec(k, &mut Vec::new(), &mut all);
    let class = |c: &Composition| {
        if c.depth() == 1 {
            0
        } else if c.0.iter().all(|&n| n >= 3 && n % 2 == 1) {
            1
        } else {
            2
        }
    };
    all.sort_by(|a, b| (class(a), a.depth(), &a.0).cmp(&(class(b), b.depth(), &b.0)));
    all
}

impl ReportBasis {
    fn monomial_value(&mut self, m: &Monomial) -> MzvExpr {
        if let Some(v) = self.values.get(m) {
            return v.clone();
        }
        let mut v = MzvExpr::one();
        for &(g, e) in &m.0 {
            for _ in 0..e {
                v = v.mul_reduced(&self.generators[g].value);
            }
        }
        self.values.insert(m.clone(), v.clone());
        v
    }

    fn monomial_weight(&self, m: &Monomial) -> usize {
        m.0.iter().map(|&(g, e)| self.generators[g].weight * e as usize).sum()
    }

    /// Products of at least two generators of total weight `k`.
    fn products(&self, k: usize) -> Vec<Monomial> {
        fn rec(gens: &[Generator], start: usize, rest: usize, cur: Monomial, out: &mut Vec<Monomial>) {
            if rest == 0 {
                if cur.degree() >= 2 {
                    out.push(cur);
                }
                return;
            }
            for g in start..gens.len() {
                if gens[g].weight <= rest {
                    rec(gens, g, rest - gens[g].weight, cur.mul_gen(g), out);
                }
            }
        }
        let mut out = Vec::new();
        rec(&self.generators, 0, k, Monomial::default(), &mut out);
        out.sort_by(|a, b| (a.degree(), &a.0).cmp(&(b.degree(), &b.0)));
        out
    }

    fn ensure(&mut self, k: usize) {
        for j in 2..=k {
            if !self.weights.contains_key(&j) {
                self.build(j);
            }
        }
    }

    fn build(&mut self, k: usize) {
        let t = table(k).expect("weight within cap");
        let free = t.free.clone();
        let d = free.len();
        let mut ech = Echelon { rows: Vec::new() };
        let mut chosen: Vec<(Monomial, Vec<Q>)> = Vec::new();
        for m in self.products(k) {
            if chosen.len() == d {
                break;
            }
            let v = coords(&free, &self.monomial_value(&m));
            if ech.insert(v.clone()) {
                chosen.push((m, v));
            }
        }
        for c in candidate_compositions(k) {
            if chosen.len() == d {
                break;
            }
            let value = MzvExpr::zeta(&c.0);
            let v = coords(&free, &value);
            if ech.insert(v.clone()) {
                let g = self.generators.len();
                self.generators.push(Generator { composition: c, weight: k, value });
                let m = Monomial(vec![(g, 1)]);
                chosen.push((m, v));
            }
        }
        assert_eq!(chosen.len(), d, "generators span weight {k}");
        let m: Vec<Vec<Q>> = chosen.iter().map(|(_, v)| v.clone()).collect();
        let inverse = if d == 0 { Vec::new() } else { invert(&m) };
        let monomials = chosen.into_iter().map(|(m, _)| m).collect();
        self.weights.insert(k, WeightBasis { monomials, free, inverse });
    }

    fn expand(&mut self, e: &MzvExpr) -> (Vec<(Monomial, Q)>, MzvExpr) {
        let e = if e.is_reduced() { e.clone() } else { e.reduce() };
        let cap = weight_cap();
        let mut out: BTreeMap<Monomial, Q> = BTreeMap::new();
        let mut raw = MzvExpr::zero();
        let mut by_weight: BTreeMap<usize, MzvExpr> = BTreeMap::new();
        for (w, c) in e.iter() {
            if w.is_empty() {
                out.insert(Monomial::default(), c.clone());
            } else if w.len() > cap {
                raw.add_term(*w, c.clone());
            } else {
                by_weight.entry(w.len()).or_default().add_term(*w, c.clone());
            }
        }
        if let Some(&kmax) = by_weight.keys().last() {
            self.ensure(kmax);
        }
        for (k, part) in by_weight {
            let b = &self.weights[&k];
            let v = coords(&b.free, &part);
            for (i, m) in b.monomials.iter().enumerate() {
                let a: Q = v.iter().zip(&b.inverse).map(|(x, row)| x * &row[i]).sum();
                if !a.is_zero() {
                    out.insert(m.clone(), a);
                }
            }
        }
        (out.into_iter().collect(), raw)
    }

    fn zeta2_index(&mut self) -> Option<usize> {
        self.generators.iter().position(|g| g.composition.0 == [2])
    }

    /// `q` with `ζ(2)^n = q·ζ(2n)`, when `2n` is within the cap.
    fn even_ratio(&mut self, n: u32) -> Option<Q> {
        let k = 2 * n as usize;
        if k > weight_cap() {
            return None;
        }
        let (ms, _) = self.expand(&MzvExpr::zeta(&[k as u32]));
        match ms.as_slice() {
            [(_, r)] => Some(Q::one() / r),
            _ => None,
        }
    }
}

pub(super) fn to_monomials(e: &MzvExpr) -> Vec<(Monomial, Q)> {
    state().lock().unwrap().expand(e).0
}

/// Generator list as currently built (generators up to weight `k` are ensured).
pub fn generators(k: usize) -> Vec<Generator> {
    let mut s = state().lock().unwrap();
    s.ensure(k.min(weight_cap()));
    s.generators.clone()
}

pub(super) fn mod_products(e: &MzvExpr) -> MzvExpr {
    let mut s = state().lock().unwrap();
    let (ms, raw) = s.expand(e);
    let mut out = raw;
    for (m, c) in ms {
        if let [(g, 1)] = m.0.as_slice() {
            out.add_scaled(&s.generators[*g].value, &c);
        }
    }
    out
}

pub(super) fn mod_ideal(e: &MzvExpr, n: usize) -> MzvExpr {
    let mut s = state().lock().unwrap();
    let (ms, raw) = s.expand(e);
    let mut out = raw;
    for (m, c) in ms {
        let small = m.0.iter().any(|&(g, _)| (2..=n).contains(&s.generators[g].weight));
        if !small {
            let v = s.monomial_value(&m);
            out.add_scaled(&v, &c);
        }
    }
    out
}

pub(super) fn format(e: &MzvExpr) -> String {
    let mut s = state().lock().unwrap();
    let (ms, raw) = s.expand(e);
    let z2 = s.zeta2_index();
    let mut terms: Vec<((usize, usize, Monomial), Q, Option<String>)> = Vec::new();
    for (m, c) in ms {
        let weight = s.monomial_weight(&m);
        let mut coeff = c;
        let mut factors: Vec<String> = Vec::new();
        for &(g, exp) in &m.0 {
            if Some(g) == z2 && exp >= 2 {
                if let Some(q) = s.even_ratio(exp) {
                    coeff *= q;
                    factors.push(format!("z({})", 2 * exp));
                    continue;
                }
            }
            let name = s.generators[g].composition.to_string();
            factors.push(if exp == 1 { name } else { format!("{name}^{exp}") });
        }
        let atom = (!factors.is_empty()).then(|| factors.join("*"));
        terms.push(((weight, factors.len(), m), coeff, atom));
    }
    for (w, c) in raw.iter() {
        terms.push(((w.len(), usize::MAX, Monomial::default()), c.clone(), Some(format!("zeta[{w}]"))));
    }
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::new();
    for (i, (_, c, atom)) in terms.iter().enumerate() {
        push_term(&mut out, i == 0, c, atom.as_deref());
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_order() {
        let c: Vec<Vec<u32>> = candidate_compositions(8).into_iter().take(3).map(|c| c.0).collect();
        assert_eq!(c, vec![vec![8], vec![3, 5], vec![5, 3]]);
    }
}
