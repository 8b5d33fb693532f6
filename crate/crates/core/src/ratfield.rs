//! Rational prefactors times single-valued polylogarithms.
//!
//! An [`AExpr`] is `Σ z^i (z-1)^k z̄^j (z̄-1)^l · S` in partial-fraction normal form:
//! per variable the prefactor is either `x^i` (any `i`) or `(x-1)^k` with `k < 0`.
//! Expansions at `0`, `1` and `∞` are computed pairwise from series of the
//! holomorphic iterated integrals. At `1` and `∞` the associator connects the
//! base points, and at `∞` the imaginary unit is tracked symbolically through
//! `iπ` with `(iπ)² = -6ζ(2)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::mzv::MzvExpr;
use crate::ncseries::{associator, NcSeries};
use crate::svmp::{Mobius, Point, SvExpr, Var};
use crate::words::Word;
use crate::{Error, Q};

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `x^zero · (x-1)^one` in one variable, normalized: `one ≤ 0` and `one < 0 ⇒ zero = 0`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Pole {
    pub zero: i32,
    pub one: i32,
}

impl Pole {
    pub const ONE: Pole = Pole { zero: 0, one: 0 };

    /// `(x - b)^m` for the normalized forms.
    fn as_power(self) -> (u8, i32) {
        if self.one < 0 {
            (1, self.one)
        } else {
            (0, self.zero)
        }
    }

    fn from_power(b: u8, m: i32) -> Pole {
        if b == 1 {
            Pole { zero: 0, one: m }
        } else {
            Pole { zero: m, one: 0 }
        }
    }
}

/// Holomorphic and antiholomorphic prefactor.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Prefactor {
    pub hol: Pole,
    pub anti: Pole,
}

/// `x^i (x-1)^k` as a combination of normalized poles.
pub fn partial_fractions(i: i32, k: i32) -> Arc<Vec<(Pole, Q)>> {
    static MEMO: OnceLock<Mutex<HashMap<(i32, i32), Arc<Vec<(Pole, Q)>>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = memo.lock().unwrap().get(&(i, k)) {
        return v.clone();
    }
    let mut acc: BTreeMap<Pole, Q> = BTreeMap::new();
    let mut push = |p: Pole, c: Q| {
        let e = acc.entry(p).or_insert_with(Q::zero);
        *e += c;
    };
    if k >= 0 {
        // (x-1)^k = Σ C(k,j) x^j (-1)^{k-j}
        for j in 0..=k {
            let sign = if (k - j) % 2 == 0 { 1 } else { -1 };
            push(Pole { zero: i + j, one: 0 }, Q::from_integer(crate::mzv::binomial(k as u64, j as u64) * sign));
        }
    } else if i == 0 {
        push(Pole { zero: 0, one: k }, Q::one());
    } else if i > 0 {
        // x^i = ((x-1)+1)^i
        for j in 0..=i {
            let c = Q::from_integer(crate::mzv::binomial(i as u64, j as u64));
            for (p, d) in partial_fractions(0, k + j).iter() {
                push(*p, &c * d);
            }
        }
    } else {
        // 1 = x - (x-1)
        for (p, d) in partial_fractions(i + 1, k).iter() {
            push(*p, d.clone());
        }
        for (p, d) in partial_fractions(i, k + 1).iter() {
            push(*p, -d.clone());
        }
    }
    let v: Vec<(Pole, Q)> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    let v = Arc::new(v);
    memo.lock().unwrap().insert((i, k), v.clone());
    v
}

/// Element of the bi-differential algebra generated by single-valued polylogarithms.
#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct AExpr {
    terms: BTreeMap<Prefactor, SvExpr>,
}

impl AExpr {
    pub fn zero() -> AExpr {
        AExpr::default()
    }

    pub fn one() -> AExpr {
        AExpr::from_sv(SvExpr::one())
    }

    pub fn from_sv(s: SvExpr) -> AExpr {
        let mut e = AExpr::zero();
        e.add_normal(Prefactor::default(), &s);
        e
    }

    pub fn constant(c: MzvExpr) -> AExpr {
        AExpr::from_sv(SvExpr::constant(c))
    }

    /// `z^i z̄^j (z-1)^k (z̄-1)^l · s` with arbitrary integer exponents.
    pub fn monomial(i: i32, j: i32, k: i32, l: i32, s: &SvExpr) -> AExpr {
        let mut e = AExpr::zero();
        e.add_raw(i, j, k, l, s);
        e
    }

    /// `z - z̄`.
    pub fn z_minus_zb() -> AExpr {
        let one = SvExpr::one();
        AExpr::monomial(1, 0, 0, 0, &one).sub(&AExpr::monomial(0, 1, 0, 0, &one))
    }

    pub fn add_raw(&mut self, i: i32, j: i32, k: i32, l: i32, s: &SvExpr) {
        if s.is_zero() {
            return;
        }
        let hs = partial_fractions(i, k);
        let as_ = partial_fractions(j, l);
        for (hp, hc) in hs.iter() {
            for (ap, ac) in as_.iter() {
                self.add_normal(Prefactor { hol: *hp, anti: *ap }, &s.scale_q(&(hc * ac)));
            }
        }
    }

    fn add_normal(&mut self, p: Prefactor, s: &SvExpr) {
        if s.is_zero() {
            return;
        }
        let e = self.terms.entry(p).or_default();
        e.add_assign(s);
        if e.is_zero() {
            self.terms.remove(&p);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Prefactor, &SvExpr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: Prefactor) -> SvExpr {
        self.terms.get(&p).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn add(&self, other: &AExpr) -> AExpr {
        let mut e = self.clone();
        e.add_assign(other);
        e
    }

    pub fn add_assign(&mut self, other: &AExpr) {
        for (p, s) in &other.terms {
            self.add_normal(*p, s);
        }
    }

    pub fn sub(&self, other: &AExpr) -> AExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> AExpr {
        self.scale_q(&-Q::one())
    }

    pub fn scale_q(&self, q: &Q) -> AExpr {
        if q.is_zero() {
            return AExpr::zero();
        }
        AExpr { terms: self.terms.iter().map(|(p, s)| (*p, s.scale_q(q))).collect() }
    }

    pub fn scale(&self, c: &MzvExpr) -> AExpr {
        let mut e = AExpr::zero();
        for (p, s) in &self.terms {
            e.add_normal(*p, &s.scale(c));
        }
        e
    }

    pub fn mul(&self, other: &AExpr) -> AExpr {
        let mut e = AExpr::zero();
        for (p1, s1) in &self.terms {
            for (p2, s2) in &other.terms {
                let s = s1.mul(s2);
                e.add_raw(
                    p1.hol.zero + p2.hol.zero,
                    p1.anti.zero + p2.anti.zero,
                    p1.hol.one + p2.hol.one,
                    p1.anti.one + p2.anti.one,
                    &s,
                );
            }
        }
        e
    }

    pub fn mul_sv(&self, s: &SvExpr) -> AExpr {
        let mut e = AExpr::zero();
        for (p, t) in &self.terms {
            e.add_normal(*p, &t.mul(s));
        }
        e
    }

    /// Exchange of `z` and `z̄`.
    pub fn swap(&self) -> AExpr {
        AExpr {
            terms: self.terms.iter().map(|(p, s)| (Prefactor { hol: p.anti, anti: p.hol }, s.conj())).collect(),
        }
    }

    pub fn weight(&self) -> usize {
        self.terms.values().map(SvExpr::weight).max().unwrap_or(0)
    }

    /// `∂_z` or `∂_z̄` by the product rule.
    pub fn derive(&self, var: Var) -> AExpr {
        if var == Var::Antihol {
            return self.swap().derive(Var::Hol).swap();
        }
        let mut e = AExpr::zero();
        for (p, s) in &self.terms {
            let (i, j, k, l) = (p.hol.zero, p.anti.zero, p.hol.one, p.anti.one);
            if i != 0 {
                e.add_raw(i - 1, j, k, l, &s.scale_q(&qi(i as i64)));
            }
            if k != 0 {
                e.add_raw(i, j, k - 1, l, &s.scale_q(&qi(k as i64)));
            }
            let [n0, n1] = s.derive(Var::Hol);
            e.add_raw(i - 1, j, k, l, &n0);
            e.add_raw(i, j, k - 1, l, &n1);
        }
        e
    }

    /// A primitive in the chosen variable. The logarithmic parts are the
    /// single-valued integrals from `base`; other powers are integrated by parts.
    pub fn integrate(&self, var: Var, base: Point) -> Result<AExpr, Error> {
        if var == Var::Hol {
            return Ok(self.swap().integrate(Var::Antihol, base)?.swap());
        }
        let mut out = AExpr::zero();
        for (p, s) in &self.terms {
            let (b, m) = p.anti.as_power();
            let mut part = AExpr::zero();
            for ((u, v), c) in s.iter() {
                part.add_assign(&anti_pair_primitive(b, m, *u, *v).scale(c));
            }
            if m == -1 && base != Point::Zero {
                // shift the single-valued integral to the requested basepoint
                let log_part = part.coeff(Prefactor::default());
                let v = log_part.reg_limit(base)?;
                part.add_normal(Prefactor::default(), &SvExpr::constant(v.neg()));
            }
            for (q, t) in &part.terms {
                out.add_raw(p.hol.zero, q.anti.zero, p.hol.one, q.anti.one, t);
            }
        }
        Ok(out)
    }

    /// `F(f(z))`; polylogarithmic parts must be single-valued.
    pub fn s3_transform(&self, f: Mobius) -> Result<AExpr, Error> {
        let mut out = AExpr::zero();
        for (p, s) in &self.terms {
            let t = s.s3_transform(f)?;
            let mut piece = AExpr::from_sv(t);
            let pre = mobius_prefactor(p.hol, f).mul(&mobius_prefactor(p.anti, f).swap());
            piece = piece.mul(&pre);
            out.add_assign(&piece);
        }
        Ok(out)
    }

    /// Laurent–log expansion at a point up to power `order` in both variables.
    pub fn expand_at(&self, point: Point, order: i32) -> Result<ExpansionBlock, Error> {
        expand(self, point, order)
    }

    /// `res_a = c_{0,-1,0}`, or `c_{0,0,-1}` for the antiholomorphic residue.
    pub fn residue(&self, point: Point, var: Var) -> Result<MzvExpr, Error> {
        let b = self.expand_at(point, 1)?;
        Ok(match var {
            Var::Hol => b.coeff(0, -1, 0),
            Var::Antihol => b.coeff(0, 0, -1),
        })
    }

    /// `(1/π)∫ f d²z = res_∞F - res_0F - res_1F` for an antiholomorphic primitive `F`,
    /// together with the convergence criterion read off the expansions of `F`.
    pub fn integrate_plane(&self) -> Result<PlaneIntegral, Error> {
        let f = self.integrate(Var::Antihol, Point::Zero)?;
        plane_from_primitive(&f)
    }
}

/// Value and convergence of a plane integral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneIntegral {
    pub value: MzvExpr,
    pub convergent: bool,
}

/// Plane integral from a given antiholomorphic primitive.
pub fn plane_from_primitive(f: &AExpr) -> Result<PlaneIntegral, Error> {
    let mut value = MzvExpr::zero();
    let mut convergent = true;
    for (point, sign) in [(Point::Infinity, 1i64), (Point::Zero, -1), (Point::One, -1)] {
        let b = f.expand_at(point, 1)?;
        value.add_scaled(&b.coeff(0, -1, 0), &qi(sign));
        for ((k, m, n), c) in &b.coeffs {
            if c.is_zero() || *n != *m + 1 {
                continue;
            }
            let bad = match point {
                Point::Infinity => *m > -1 || (*m == -1 && *k != 0),
                _ => *m < -1 || (*m == -1 && *k != 0),
            };
            if bad {
                convergent = false;
            }
        }
    }
    Ok(PlaneIntegral { value, convergent })
}

/// The rational factor `p(f(z))` for a one-variable pole `p`, as an `AExpr` in `z`.
fn mobius_prefactor(p: Pole, f: Mobius) -> AExpr {
    // track x^i (x-1)^k with a sign through the generator steps
    let mut terms: Vec<(i32, i32, i64)> = vec![(p.zero, p.one, 1)];
    let steps: &[u8] = match f {
        Mobius::Id => &[],
        Mobius::OneMinusZ => &[0],
        Mobius::ZOverZMinusOne => &[1],
        Mobius::OneOverZ => &[1, 0, 1],
        Mobius::OneOverOneMinusZ => &[0, 1],
        Mobius::ZMinusOneOverZ => &[1, 0],
    };
    for &s in steps {
        terms = terms
            .into_iter()
            .map(|(i, k, c)| {
                if s == 0 {
                    // x ↦ 1-x: x^i (x-1)^k ↦ (-1)^{i+k} (x-1)^i x^k
                    let sign = if (i + k).rem_euclid(2) == 0 { 1 } else { -1 };
                    (k, i, c * sign)
                } else {
                    // x ↦ x/(x-1): x^i (x-1)^k ↦ x^i (x-1)^{-i-k}
                    (i, -i - k, c)
                }
            })
            .collect();
    }
    let mut e = AExpr::zero();
    for (i, k, c) in terms {
        e.add_raw(i, 0, k, 0, &SvExpr::constant(MzvExpr::integer(c)));
    }
    e
}

/// `∫ (z̄-b)^m L_u(z̄) L_v(z) dz̄`, antiholomorphic prefactors only.
fn anti_pair_primitive(b: u8, m: i32, u: Word, v: Word) -> Arc<AExpr> {
    static MEMO: OnceLock<Mutex<HashMap<(u8, i32, Word, Word), Arc<AExpr>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(e) = memo.lock().unwrap().get(&(b, m, u, v)) {
        return e.clone();
    }
    let mut out = AExpr::zero();
    if m == -1 {
        let s = SvExpr::term(u, v, MzvExpr::one()).antihol_integrate(b);
        out = AExpr::from_sv(s);
    } else {
        // (z̄-b)^{m+1}/(m+1) S - ∫ (z̄-b)^{m+1}/(m+1) ∂_z̄ S
        let inv = Q::one() / qi(m as i64 + 1);
        let p = Pole::from_power(b, m + 1);
        out.add_raw(0, p.zero, 0, p.one, &SvExpr::term(u, v, MzvExpr::rational(inv.clone())));
        if !u.is_empty() {
            let (u1, c) = u.pop();
            // (z̄-b)^{m+1} (z̄-c)^{-1}
            let (j, l) = match (b, c) {
                (0, 0) => (m, 0),
                (0, 1) => (m + 1, -1),
                (1, 0) => (-1, m + 1),
                _ => (0, m),
            };
            for (q, d) in partial_fractions(j, l).iter() {
                let (b2, m2) = q.as_power();
                let sub = anti_pair_primitive(b2, m2, u1, v);
                out.add_assign(&sub.scale_q(&(-(d * &inv))));
            }
        }
    }
    let out = Arc::new(out);
    memo.lock().unwrap().insert((b, m, u, v), out.clone());
    out
}

impl fmt::Display for AExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (p, s) in &self.terms {
            let mut pre = Vec::new();
            let fmt_pow = |name: &str, e: i32| if e == 1 { name.to_string() } else { format!("{name}^{e}") };
            if p.hol.zero != 0 {
                pre.push(fmt_pow("z", p.hol.zero));
            }
            if p.hol.one != 0 {
                pre.push(fmt_pow("(z-1)", p.hol.one));
            }
            if p.anti.zero != 0 {
                pre.push(fmt_pow("zb", p.anti.zero));
            }
            if p.anti.one != 0 {
                pre.push(fmt_pow("(zb-1)", p.anti.one));
            }
            let body = s.to_string();
            let body = if s.len() > 1 || body.starts_with('-') { format!("({body})") } else { body };
            if pre.is_empty() {
                parts.push(body);
            } else if body == "1" {
                parts.push(pre.join("*"));
            } else {
                parts.push(format!("{}*{body}", pre.join("*")));
            }
        }
        if parts.is_empty() {
            return f.write_str("0");
        }
        f.write_str(&parts.join("+"))
    }
}

impl fmt::Debug for AExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Numerator `g` of `g/(z-z̄)` with `g(z̄ ↔ z) = -g`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BElement {
    pub numerator: AExpr,
}

impl BElement {
    pub fn new(numerator: AExpr) -> Result<BElement, Error> {
        if numerator.swap() != numerator.neg() {
            return Err(Error::Invalid("numerator is not antisymmetric".into()));
        }
        Ok(BElement { numerator })
    }

    /// Limit of `g/(z-z̄)` at `0` or `1`.
    pub fn value_at(&self, point: Point) -> Result<MzvExpr, Error> {
        if point == Point::Infinity {
            return Err(Error::Invalid("limits of B-elements are taken at 0 or 1".into()));
        }
        let b = self.numerator.expand_at(point, 2)?;
        let value = b.coeff(0, 1, 0);
        for ((k, m, n), c) in &b.coeffs {
            if c.is_zero() || m + n > 1 {
                continue;
            }
            let allowed = *k == 0 && ((*m, *n) == (1, 0) || (*m, *n) == (0, 1));
            if !allowed {
                return Err(Error::DivergentLimit);
            }
        }
        Ok(value)
    }
}

/// `c_{k,m,n}` of `Σ c (ln x x̄)^k x^m x̄^n` with `x = z`, `z-1` or `z` at infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionBlock {
    pub point: Point,
    pub order: i32,
    pub coeffs: BTreeMap<(u32, i32, i32), MzvExpr>,
}

impl ExpansionBlock {
    pub fn coeff(&self, k: u32, m: i32, n: i32) -> MzvExpr {
        self.coeffs.get(&(k, m, n)).cloned().unwrap_or_default()
    }

    /// `point, k, m, n, coeff` rows.
    pub fn to_csv(&self) -> String {
        let p = match self.point {
            Point::Zero => "0",
            Point::One => "1",
            Point::Infinity => "inf",
        };
        let mut s = String::new();
        for ((k, m, n), c) in &self.coeffs {
            s.push_str(&format!("{p}, {k}, {m}, {n}, {c}\n"));
        }
        s
    }
}

/// `a + b·iπ` with MZV coefficients.
#[derive(Clone, PartialEq, Eq, Default, Debug)]
struct Cx {
    re: MzvExpr,
    im: MzvExpr,
}

impl Cx {
    fn real(re: MzvExpr) -> Cx {
        Cx { re, im: MzvExpr::zero() }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn add_assign(&mut self, o: &Cx) {
        self.re.add_assign(&o.re);
        self.im.add_assign(&o.im);
    }

    fn scale_q(&self, q: &Q) -> Cx {
        Cx { re: self.re.scale(q), im: self.im.scale(q) }
    }

    fn mul(&self, o: &Cx) -> Cx {
        let mut re = self.re.mul_reduced(&o.re);
        if !self.im.is_zero() && !o.im.is_zero() {
            let pi2 = MzvExpr::zeta(&[2]).scale(&qi(6));
            re.sub_assign(&self.im.mul_reduced(&o.im).mul_reduced(&pi2));
        }
        let mut im = self.re.mul_reduced(&o.im);
        im.add_assign(&self.im.mul_reduced(&o.re));
        Cx { re, im }
    }
}

/// One-variable Laurent–log series `Σ c (ln x)^k x^m`.
type Series<C> = BTreeMap<(u32, i32), C>;

fn add_series_term(s: &mut Series<Q>, k: u32, m: i32, c: Q) {
    if c.is_zero() {
        return;
    }
    let e = s.entry((k, m)).or_insert_with(Q::zero);
    *e += c;
    if e.is_zero() {
        s.remove(&(k, m));
    }
}

/// `∫ (ln x)^k x^{p-1} dx` without integration constant, added with factor `c`.
fn integrate_power(out: &mut Series<Q>, k: u32, p: i32, c: &Q) {
    if p == 0 {
        add_series_term(out, k + 1, 0, c / qi(k as i64 + 1));
        return;
    }
    let pq = qi(p as i64);
    let mut f = c / &pq;
    for j in 0..=k {
        add_series_term(out, k - j, p, f.clone());
        // next term: multiply by -(k-j)/p
        f = -f * qi((k - j) as i64) / &pq;
    }
}

/// Letter forms: letter `a` is `α_a dx/x + β_a dx/(x-1)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Family {
    /// `x0 ↦ dx/x`, `x1 ↦ dx/(x-1)`.
    Standard,
    /// `x0 ↦ -dx/x`, `x1 ↦ -dx/x + dx/(x-1)`.
    AtInfinity,
}

impl Family {
    fn forms(self, a: u8) -> (i64, i64) {
        match (self, a) {
            (Family::Standard, 0) => (1, 0),
            (Family::Standard, _) => (0, 1),
            (Family::AtInfinity, 0) => (-1, 0),
            (Family::AtInfinity, _) => (-1, 1),
        }
    }
}

/// Series at 0 of the regularized iterated integral of `w` in a letter family, to power `order`.
fn l_series(family: Family, w: Word, order: i32) -> Arc<Series<Q>> {
    static MEMO: OnceLock<Mutex<HashMap<(Family, Word, i32), Arc<Series<Q>>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = memo.lock().unwrap().get(&(family, w, order)) {
        return s.clone();
    }
    let mut out = Series::new();
    if w.is_empty() {
        out.insert((0, 0), Q::one());
    } else {
        let (w1, a) = w.pop();
        let prev = l_series(family, w1, order);
        let (alpha, beta) = family.forms(a);
        for ((k, m), c) in prev.iter() {
            if alpha != 0 {
                integrate_power(&mut out, *k, *m, &(c * qi(alpha)));
            }
            if beta != 0 {
                // 1/(x-1) = -Σ x^n
                for n in 0..=(order - m).max(-1) {
                    integrate_power(&mut out, *k, m + n + 1, &(c * qi(-beta)));
                }
            }
        }
        out.retain(|(_, m), _| *m <= order);
    }
    let out = Arc::new(out);
    memo.lock().unwrap().insert((family, w, order), out.clone());
    out
}

/// Connection constants `C` with `L(x) = Σ C_{w1} · series(w2)` at the given point.
struct Connection {
    family: Family,
    /// `(C|w)` for the holomorphic and the antiholomorphic variable.
    hol: HashMap<Word, Cx>,
    anti: HashMap<Word, Cx>,
}

fn connection(point: Point, cap: usize) -> Connection {
    match point {
        Point::Zero => {
            let mut one = HashMap::new();
            one.insert(Word::EMPTY, Cx::real(MzvExpr::one()));
            Connection { family: Family::Standard, hol: one.clone(), anti: one }
        }
        Point::One => {
            let z = associator(cap);
            let m: HashMap<Word, Cx> = z.iter().map(|(w, c)| (*w, Cx::real(c.clone()))).collect();
            Connection { family: Family::Standard, hol: m.clone(), anti: m }
        }
        Point::Infinity => {
            let (re, im) = infinity_connection(cap);
            let mut hol = HashMap::new();
            let mut anti = HashMap::new();
            for (w, c) in re.iter() {
                hol.entry(*w).or_insert_with(Cx::default).re = c.clone();
                anti.entry(*w).or_insert_with(Cx::default).re = c.clone();
            }
            for (w, c) in im.iter() {
                hol.entry(*w).or_insert_with(Cx::default).im = c.clone();
                anti.entry(*w).or_insert_with(Cx::default).im = c.neg();
            }
            Connection { family: Family::AtInfinity, hol, anti }
        }
    }
}

/// `Z · e^{-iπ x1} · Z_{x1,-x0-x1}` split into real part and `iπ` part.
fn infinity_connection(cap: usize) -> (Arc<NcSeries>, Arc<NcSeries>) {
    type Pair = (Arc<NcSeries>, Arc<NcSeries>);
    static MEMO: OnceLock<Mutex<HashMap<usize, Pair>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = memo.lock().unwrap().get(&cap) {
        return p.clone();
    }
    let z = associator(cap);
    let x1 = NcSeries::letter(cap, 1);
    let m = NcSeries::letter(cap, 0).add(&x1).scale_q(&-Q::one());
    let z2 = z.substitute(&x1, &m).expect("no constant term");
    // e^{-iπ x1} = Σ (-iπ)^n x1^n / n!, (iπ)^2 = -6ζ(2)
    let pi2 = MzvExpr::zeta(&[2]).scale(&qi(6));
    let mut e_re = NcSeries::zero(cap);
    let mut e_im = NcSeries::zero(cap);
    let mut fact = Q::one();
    let mut pow = MzvExpr::one();
    for n in 0..=cap {
        if n > 0 {
            fact *= qi(n as i64);
        }
        let w = Word::repeat(1, n);
        // (-iπ)^n = (-1)^n (iπ)^n; (iπ)^{2j} = (-π²)^j, (iπ)^{2j+1} = (-π²)^j iπ
        let sign = if n % 2 == 0 { 1 } else { -1 };
        let c = pow.scale(&(qi(sign) / &fact));
        if n % 2 == 0 {
            e_re.add_term(w, &c);
        } else {
            e_im.add_term(w, &c);
            pow = pow.mul_reduced(&pi2).neg();
        }
    }
    let re = z.mul(&e_re).unwrap().mul(&z2).unwrap();
    let im = z.mul(&e_im).unwrap().mul(&z2).unwrap();
    let p = (Arc::new(re), Arc::new(im));
    memo.lock().unwrap().insert(cap, p.clone());
    p
}

/// Series of `L_w` (or its conjugate) at the point, coefficients `a + b iπ`.
fn connected_series(conn: &Connection, w: Word, order: i32, anti: bool, point: Point) -> Series<Cx> {
    let table = if anti { &conn.anti } else { &conn.hol };
    let mut out: Series<Cx> = Series::new();
    for i in 0..=w.len() {
        let w1 = w.prefix(i);
        let Some(c) = table.get(&w1) else { continue };
        if c.is_zero() {
            continue;
        }
        let w2 = w.suffix_from(i);
        let w2 = if point == Point::One { w2.swap01() } else { w2 };
        for ((k, m), q) in l_series(conn.family, w2, order).iter() {
            out.entry((*k, *m)).or_default().add_assign(&c.scale_q(q));
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Binomial-type series of a normalized pole at the point, in the local variable.
fn pole_series(p: Pole, point: Point, order: i32) -> BTreeMap<i32, Q> {
    // x^i (x-1)^k expressed in y with x = y, 1-y or 1/y
    let (i, k) = (p.zero, p.one);
    let mut out = BTreeMap::new();
    // (1 - y)^e = Σ C(e, n) (-y)^n for integer e
    let one_minus = |e: i32, shift: i32, sign: i64, out: &mut BTreeMap<i32, Q>| {
        let mut c = qi(sign);
        let mut n = 0;
        loop {
            if shift + n > order {
                break;
            }
            if c.is_zero() {
                break;
            }
            *out.entry(shift + n).or_insert_with(Q::zero) += c.clone();
            // C(e, n+1)(-1)^{n+1} / (C(e, n)(-1)^n) = -(e-n)/(n+1)
            c = -c * qi((e - n) as i64) / qi(n as i64 + 1);
            n += 1;
        }
    };
    match point {
        Point::Zero => {
            // z^i (z-1)^k = (-1)^k z^i (1-z)^k
            let sign = if k.rem_euclid(2) == 0 { 1 } else { -1 };
            one_minus(k, i, sign, &mut out);
        }
        Point::One => {
            // z = 1-y: (1-y)^i (-y)^k
            let sign = if k.rem_euclid(2) == 0 { 1 } else { -1 };
            one_minus(i, k, sign, &mut out);
        }
        Point::Infinity => {
            // z = 1/y: y^{-i} y^{-k} (1-y)^k
            one_minus(k, -i - k, 1, &mut out);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn expand(e: &AExpr, point: Point, order: i32) -> Result<ExpansionBlock, Error> {
    let cap = e.terms.values().flat_map(|s| s.iter().map(|((u, v), _)| u.len().max(v.len()))).max().unwrap_or(0);
    let conn = connection(point, cap.max(1));
    let mut d: BTreeMap<(u32, u32, i32, i32), Cx> = BTreeMap::new();
    let mut hol_cache: HashMap<(Word, i32), Series<Cx>> = HashMap::new();
    let mut anti_cache: HashMap<(Word, i32), Series<Cx>> = HashMap::new();
    for (p, s) in &e.terms {
        let ph = pole_series(p.hol, point, order);
        let pa = pole_series(p.anti, point, order);
        let (Some(&lo_h), Some(&lo_a)) = (ph.keys().next(), pa.keys().next()) else { continue };
        let oh = order - lo_h;
        let oa = order - lo_a;
        // expansion of s up to (oh, oa)
        let mut sd: BTreeMap<(u32, u32, i32, i32), Cx> = BTreeMap::new();
        for ((u, v), c) in s.iter() {
            let hs = hol_cache.entry((*v, oh)).or_insert_with(|| connected_series(&conn, *v, oh, false, point));
            let hs = hs.clone();
            let as_ = anti_cache.entry((*u, oa)).or_insert_with(|| connected_series(&conn, *u, oa, true, point));
            let cc = Cx::real(c.clone());
            for ((kb, n), ca) in as_.iter() {
                let cca = cc.mul(ca);
                for ((ka, m), ch) in hs.iter() {
                    let t = cca.mul(ch);
                    sd.entry((*ka, *kb, *m, *n)).or_default().add_assign(&t);
                }
            }
        }
        for ((ka, kb, m, n), c) in sd {
            if c.is_zero() {
                continue;
            }
            for (dm, qh) in &ph {
                if m + dm > order {
                    continue;
                }
                for (dn, qa) in &pa {
                    if n + dn > order {
                        continue;
                    }
                    d.entry((ka, kb, m + dm, n + dn)).or_default().add_assign(&c.scale_q(&(qh * qa)));
                }
            }
        }
    }
    let mut coeffs = BTreeMap::new();
    for ((ka, kb, m, n), c) in d {
        if c.is_zero() {
            continue;
        }
        if !c.im.is_zero() {
            return Err(Error::NotSingleValued(format!("imaginary part in expansion at {point:?}")));
        }
        if kb != 0 {
            continue;
        }
        let (m2, n2, sign) = match point {
            Point::Zero => (m, n, 1),
            Point::One => (m, n, if (m + n).rem_euclid(2) == 0 { 1 } else { -1 }),
            Point::Infinity => (-m, -n, if ka % 2 == 0 { 1 } else { -1 }),
        };
        coeffs.insert((ka, m2, n2), c.re.scale(&qi(sign)));
    }
    Ok(ExpansionBlock { point, order, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svmp::p_basis;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn one() -> SvExpr {
        SvExpr::one()
    }

    fn poles(v: &[(Pole, Q)]) -> Vec<(i32, i32, Q)> {
        v.iter().map(|(p, c)| (p.zero, p.one, c.clone())).collect()
    }

    #[test]
    fn partial_fraction_examples() {
        assert_eq!(poles(&partial_fractions(-1, -1)), vec![(-1, 0, qi(-1)), (0, -1, qi(1))]);
        assert_eq!(
            poles(&partial_fractions(-2, -1)),
            vec![(-2, 0, qi(-1)), (-1, 0, qi(-1)), (0, -1, qi(1))]
        );
        assert_eq!(poles(&partial_fractions(1, -1)), vec![(0, -1, qi(1)), (0, 0, qi(1))]);
        assert_eq!(poles(&partial_fractions(0, 2)), vec![(0, 0, qi(1)), (1, 0, qi(-2)), (2, 0, qi(1))]);
    }

    #[test]
    fn derivative_examples() {
        let p0 = (*p_basis(w("0"))).clone();
        let e = AExpr::monomial(-1, 0, 0, 0, &p0);
        let expect = AExpr::monomial(-2, 0, 0, 0, &p0.neg()).add(&AExpr::monomial(-2, 0, 0, 0, &one()));
        assert_eq!(e.derive(Var::Hol), expect);
        assert!(AExpr::monomial(0, 3, 0, 0, &one()).derive(Var::Hol).is_zero());
        let e = AExpr::monomial(0, 0, 0, 0, &p0);
        assert_eq!(e.swap().swap(), e);
    }

    #[test]
    fn integration_examples() {
        let e = AExpr::monomial(0, 3, 0, 0, &one());
        let f = e.integrate(Var::Antihol, Point::Zero).unwrap();
        assert_eq!(f, AExpr::monomial(0, 4, 0, 0, &SvExpr::constant(MzvExpr::rational(Q::new(1.into(), 4.into())))));
        let p0 = (*p_basis(w("0"))).clone();
        let e = AExpr::monomial(0, -2, 0, 0, &p0);
        let f = e.integrate(Var::Antihol, Point::Zero).unwrap();
        assert_eq!(f.derive(Var::Antihol), e);
        let l0b = SvExpr::antihol(w("0"));
        let f = AExpr::monomial(0, -2, 0, 0, &l0b).integrate(Var::Antihol, Point::Zero).unwrap();
        assert_eq!(f, AExpr::monomial(0, -1, 0, 0, &l0b.add(&one()).neg()));
        for x in (0..=3).flat_map(Word::all_of_len) {
            for a in 0..2 {
                let e = AExpr::monomial(0, 0, 0, -(a as i32), &(*p_basis(x)).clone());
                let e = if a == 0 { AExpr::monomial(0, -1, 0, 0, &(*p_basis(x)).clone()) } else { e };
                let f = e.integrate(Var::Antihol, Point::Zero).unwrap();
                assert_eq!(f, AExpr::from_sv((*p_basis(x)).antihol_integrate(a)));
            }
        }
    }

    #[test]
    fn integrate_then_derive() {
        let p = (*p_basis(w("01"))).clone();
        for (i, j, k, l) in [(0, 0, 0, 0), (-2, 1, 0, -1), (1, -2, -1, 0), (0, 0, -2, -2), (2, 2, 0, 0)] {
            let e = AExpr::monomial(i, j, k, l, &p);
            for var in [Var::Hol, Var::Antihol] {
                let f = e.integrate(var, Point::Zero).unwrap();
                assert_eq!(f.derive(var), e, "{i} {j} {k} {l} {var:?}");
            }
        }
    }

    #[test]
    fn expansion_examples() {
        let p0 = AExpr::from_sv((*p_basis(w("0"))).clone());
        let b = p0.expand_at(Point::Zero, 3).unwrap();
        assert_eq!(b.coeffs.len(), 1);
        assert_eq!(b.coeff(1, 0, 0), MzvExpr::one());
        let inv = AExpr::monomial(0, 0, -1, 0, &one());
        let b = inv.expand_at(Point::Infinity, 5).unwrap();
        for m in -5..=-1 {
            assert_eq!(b.coeff(0, m, 0), MzvExpr::one(), "{m}");
        }
        // L_{01}(z) + L_{10}(z̄) + L_0(z̄)L_1(z) at 0
        let b = AExpr::from_sv((*p_basis(w("01"))).clone()).expand_at(Point::Zero, 2).unwrap();
        assert_eq!(b.coeff(1, 1, 0), MzvExpr::integer(-1));
        assert_eq!(b.coeff(0, 1, 0), MzvExpr::integer(1));
    }

    #[test]
    fn residue_examples() {
        let inv_z = AExpr::monomial(-1, 0, 0, 0, &one());
        assert_eq!(inv_z.residue(Point::Zero, Var::Hol).unwrap(), MzvExpr::one());
        assert_eq!(inv_z.residue(Point::Infinity, Var::Hol).unwrap(), MzvExpr::one());
        let p0z = AExpr::monomial(-1, 0, 0, 0, &(*p_basis(w("0"))).clone());
        assert!(p0z.residue(Point::Zero, Var::Hol).unwrap().is_zero());
    }

    #[test]
    fn expansions_at_one_and_infinity_match_transforms() {
        for x in (1..=4).flat_map(Word::all_of_len) {
            let e = AExpr::monomial(1, -1, 0, -1, &(*p_basis(x)).clone());
            for (point, f) in [(Point::One, Mobius::OneMinusZ), (Point::Infinity, Mobius::OneOverZ)] {
                let direct = e.expand_at(point, 2).unwrap();
                let moved = e.s3_transform(f).unwrap().expand_at(Point::Zero, 3).unwrap();
                for ((k, m, n), c) in &direct.coeffs {
                    let (m0, n0, sign) = match point {
                        Point::One => (*m, *n, if (m + n).rem_euclid(2) == 0 { 1 } else { -1 }),
                        _ => (-m, -n, if k % 2 == 0 { 1 } else { -1 }),
                    };
                    if m0 > 2 || n0 > 2 {
                        continue;
                    }
                    assert_eq!(*c, moved.coeff(*k, m0, n0).scale(&qi(sign)), "{x} {point:?} {k} {m} {n}");
                }
            }
        }
    }

    fn d_numerator() -> SvExpr {
        p_basis(w("01")).sub(&p_basis(w("10")))
    }

    #[test]
    fn bloch_wigner_powers() {
        let n = d_numerator();
        let n2 = n.mul(&n);
        // D = N/(4i): D^2 = -N^2/16, D^3 = i N^3/64 (odd powers vanish), D^4 = N^4/256
        let d2 = AExpr::from_sv(n2.scale_q(&Q::new((-1).into(), 16.into())));
        let r = d2.integrate_plane().unwrap();
        assert_eq!(r.value, MzvExpr::zeta(&[3]).scale(&Q::new(1.into(), 2.into())));
        assert!(!r.convergent);
        let d3 = AExpr::from_sv(n2.mul(&n));
        assert!(d3.integrate_plane().unwrap().value.is_zero());
        let d4 = AExpr::from_sv(n2.mul(&n2).scale_q(&Q::new(1.into(), 256.into())));
        let r = d4.integrate_plane().unwrap();
        let expect = &(&MzvExpr::zeta(&[3]).scale(&Q::new(9.into(), 2.into()))
            - &MzvExpr::zeta(&[5]).scale(&Q::new(27.into(), 4.into())))
            + &MzvExpr::zeta(&[7]).scale(&Q::new(189.into(), 32.into()));
        assert_eq!(r.value, expect);
        assert!(r.convergent);
    }

    #[test]
    fn b_element_limits() {
        let g = BElement::new(AExpr::z_minus_zb()).unwrap();
        assert_eq!(g.value_at(Point::Zero).unwrap(), MzvExpr::one());
        assert_eq!(g.value_at(Point::One).unwrap(), MzvExpr::one());
        // f_2 = 4iD/(z-z̄): numerator P_01 - P_10 has a log at 0
        let f2 = BElement::new(AExpr::from_sv(d_numerator())).unwrap();
        assert_eq!(f2.value_at(Point::Zero), Err(Error::DivergentLimit));
        assert!(BElement::new(AExpr::one()).is_err());
    }

    #[test]
    fn primitive_choice_is_irrelevant() {
        let n = d_numerator();
        let f = AExpr::from_sv(n.mul(&n).mul(&n).mul(&n)).integrate(Var::Antihol, Point::Zero).unwrap();
        let base = plane_from_primitive(&f).unwrap();
        for (i, k) in [(3, 0), (-1, 0), (0, -1), (-2, 0), (0, -3), (1, 0)] {
            let g = f.add(&AExpr::monomial(i, 0, k, 0, &SvExpr::constant(MzvExpr::integer(7))));
            assert_eq!(plane_from_primitive(&g).unwrap().value, base.value, "{i} {k}");
        }
    }
}
