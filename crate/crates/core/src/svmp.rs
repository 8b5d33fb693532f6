//! Single-valued multiple polylogarithms.
//!
//! An [`SvExpr`] is a combination `Σ c·L_u(z̄)·L_v(z)` with MZV coefficients.
//! The basis functions `P_w` are built by holomorphic integration,
//! `P_{wa} = ∫_0 P_w dz/(z-a)`. A pure antiholomorphic correction restores
//! single-valuedness after each naive integration, and it is computed pairwise
//! from the commutator of holomorphic and antiholomorphic integration.
//! A second construction from the generating series with `x1'` is kept for
//! cross-validation at low weight.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::mzv::MzvExpr;
use crate::ncseries::{x1_prime, NcSeries};
use crate::words::{expand_letter2, shuffle_counts, SeqWord, Word};
use crate::{Error, Q};

/// `Σ c·L_u(z̄)·L_v(z)`, keyed by `(u, v)`.
#[derive(Clone, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct SvExpr {
    terms: BTreeMap<(Word, Word), MzvExpr>,
}

/// Differentiation or integration variable.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Var {
    Hol,
    Antihol,
}

/// Regularized evaluation point / integration basepoint.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Point {
    Zero,
    One,
    Infinity,
}

/// Algorithm for antiholomorphic integration.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Default)]
pub enum AntiAlgorithm {
    #[default]
    Commutator,
    X1Prime,
}

/// The six Möbius maps permuting `{0, 1, ∞}`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Mobius {
    Id,
    OneMinusZ,
    ZOverZMinusOne,
    OneOverZ,
    OneOverOneMinusZ,
    ZMinusOneOverZ,
}

impl Mobius {
    pub const ALL: [Mobius; 6] = [
        Mobius::Id,
        Mobius::OneMinusZ,
        Mobius::ZOverZMinusOne,
        Mobius::OneOverZ,
        Mobius::OneOverOneMinusZ,
        Mobius::ZMinusOneOverZ,
    ];

    /// Generator sequence: applying `τ = 1-z` and `σ = z/(z-1)` in this order to a function.
    fn steps(self) -> &'static [Step] {
        match self {
            Mobius::Id => &[],
            Mobius::OneMinusZ => &[Step::Tau],
            Mobius::ZOverZMinusOne => &[Step::Sigma],
            Mobius::OneOverZ => &[Step::Sigma, Step::Tau, Step::Sigma],
            Mobius::OneOverOneMinusZ => &[Step::Tau, Step::Sigma],
            Mobius::ZMinusOneOverZ => &[Step::Sigma, Step::Tau],
        }
    }

    /// Image of a point of `ℂ ∪ {∞}` given as `Some(z)` or `None` for infinity.
    pub fn apply_point(self, z: Option<(f64, f64)>) -> Option<(f64, f64)> {
        let div = |a: (f64, f64), b: (f64, f64)| {
            let d = b.0 * b.0 + b.1 * b.1;
            if d == 0.0 {
                None
            } else {
                Some(((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d))
            }
        };
        match (self, z) {
            (Mobius::Id, z) => z,
            (Mobius::OneMinusZ, Some(z)) => Some((1.0 - z.0, -z.1)),
            (Mobius::OneMinusZ, None) => None,
            (Mobius::ZOverZMinusOne, Some(z)) => div(z, (z.0 - 1.0, z.1)),
            (Mobius::ZOverZMinusOne, None) => Some((1.0, 0.0)),
            (Mobius::OneOverZ, Some(z)) => div((1.0, 0.0), z),
            (Mobius::OneOverZ, None) => Some((0.0, 0.0)),
            (Mobius::OneOverOneMinusZ, Some(z)) => div((1.0, 0.0), (1.0 - z.0, -z.1)),
            (Mobius::OneOverOneMinusZ, None) => Some((0.0, 0.0)),
            (Mobius::ZMinusOneOverZ, Some(z)) => div((z.0 - 1.0, z.1), z),
            (Mobius::ZMinusOneOverZ, None) => Some((1.0, 0.0)),
        }
    }
}

impl FromStr for Mobius {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mobius, Error> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Ok(match t.as_str() {
            "z" => Mobius::Id,
            "1-z" => Mobius::OneMinusZ,
            "z/(z-1)" => Mobius::ZOverZMinusOne,
            "1/z" => Mobius::OneOverZ,
            "1/(1-z)" => Mobius::OneOverOneMinusZ,
            "(z-1)/z" => Mobius::ZMinusOneOverZ,
            _ => return Err(Error::Parse(format!("unknown transformation {s}"))),
        })
    }
}

impl fmt::Display for Mobius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mobius::Id => "z",
            Mobius::OneMinusZ => "1-z",
            Mobius::ZOverZMinusOne => "z/(z-1)",
            Mobius::OneOverZ => "1/z",
            Mobius::OneOverOneMinusZ => "1/(1-z)",
            Mobius::ZMinusOneOverZ => "(z-1)/z",
        })
    }
}

#[derive(Clone, Copy)]
enum Step {
    Tau,
    Sigma,
}

/// Coefficients on the basis `P_w`.
pub type PCoeffs = BTreeMap<Word, MzvExpr>;

impl SvExpr {
    pub fn zero() -> SvExpr {
        SvExpr::default()
    }

    pub fn one() -> SvExpr {
        SvExpr::constant(MzvExpr::one())
    }

    pub fn constant(c: MzvExpr) -> SvExpr {
        SvExpr::term(Word::EMPTY, Word::EMPTY, c)
    }

    /// `c·L_u(z̄)·L_v(z)`.
    pub fn term(u: Word, v: Word, c: MzvExpr) -> SvExpr {
        let mut e = SvExpr::zero();
        e.add_term(u, v, &c);
        e
    }

    /// `L_v(z)`.
    pub fn hol(v: Word) -> SvExpr {
        SvExpr::term(Word::EMPTY, v, MzvExpr::one())
    }

    /// `L_u(z̄)`.
    pub fn antihol(u: Word) -> SvExpr {
        SvExpr::term(u, Word::EMPTY, MzvExpr::one())
    }

    pub fn add_term(&mut self, u: Word, v: Word, c: &MzvExpr) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry((u, v)).or_default();
        e.add_assign(c);
        if e.is_zero() {
            self.terms.remove(&(u, v));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Word, Word), &MzvExpr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, u: Word, v: Word) -> MzvExpr {
        self.terms.get(&(u, v)).cloned().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &SvExpr) -> SvExpr {
        let mut e = self.clone();
        e.add_assign(other);
        e
    }

    pub fn add_assign(&mut self, other: &SvExpr) {
        for ((u, v), c) in &other.terms {
            self.add_term(*u, *v, c);
        }
    }

    pub fn sub(&self, other: &SvExpr) -> SvExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> SvExpr {
        self.scale_q(&-Q::one())
    }

    pub fn scale_q(&self, q: &Q) -> SvExpr {
        if q.is_zero() {
            return SvExpr::zero();
        }
        SvExpr { terms: self.terms.iter().map(|(k, c)| (*k, c.scale(q))).collect() }
    }

    pub fn scale(&self, c: &MzvExpr) -> SvExpr {
        if let Some(q) = c.as_rational() {
            return self.scale_q(&q);
        }
        let mut e = SvExpr::zero();
        for ((u, v), d) in &self.terms {
            e.add_term(*u, *v, &d.mul_reduced(c));
        }
        e
    }

    /// Product, expanding `L_u L_{u'}` by the shuffle product in each variable.
    pub fn mul(&self, other: &SvExpr) -> SvExpr {
        let mut e = SvExpr::zero();
        for ((u1, v1), c1) in &self.terms {
            for ((u2, v2), c2) in &other.terms {
                let c = c1.mul_reduced(c2);
                let su = shuffle_counts(*u1, *u2);
                let sv = shuffle_counts(*v1, *v2);
                for (u, nu) in &su {
                    for (v, nv) in &sv {
                        e.add_term(*u, *v, &c.scale(&Q::from_integer(((nu * nv) as i64).into())));
                    }
                }
            }
        }
        e
    }

    /// Complex conjugation: `L_u(z̄)L_v(z) ↦ L_v(z̄)L_u(z)`.
    pub fn conj(&self) -> SvExpr {
        SvExpr { terms: self.terms.iter().map(|((u, v), c)| ((*v, *u), c.clone())).collect() }
    }

    /// Largest `|u| + |v| + weight(c)`.
    pub fn weight(&self) -> usize {
        self.terms.iter().map(|((u, v), c)| u.len() + v.len() + c.max_weight()).max().unwrap_or(0)
    }

    /// Total weight when every term has the same one.
    pub fn homogeneous_weight(&self) -> Option<usize> {
        let mut ws = self.terms.iter().map(|((u, v), c)| c.homogeneous_weight().map(|k| k + u.len() + v.len()));
        let first = ws.next()??;
        ws.all(|k| k == Some(first)).then_some(first)
    }

    /// Numerators of `∂ = N_0/(x-0) + N_1/(x-1)` with `x` the chosen variable.
    pub fn derive(&self, var: Var) -> [SvExpr; 2] {
        let mut out = [SvExpr::zero(), SvExpr::zero()];
        for ((u, v), c) in &self.terms {
            match var {
                Var::Hol if !v.is_empty() => {
                    let (v1, a) = v.pop();
                    out[a as usize].add_term(*u, v1, c);
                }
                Var::Antihol if !u.is_empty() => {
                    let (u1, b) = u.pop();
                    out[b as usize].add_term(u1, *v, c);
                }
                _ => {}
            }
        }
        out
    }

    /// The single-valued primitive in `z` of `self/(z-a)` vanishing at 0.
    /// Only meaningful when `self` is single-valued.
    pub fn hol_integrate(&self, a: u8) -> SvExpr {
        let mut e = SvExpr::zero();
        for ((u, v), c) in &self.terms {
            e.add_term(*u, v.push(a), c);
            for (x, g) in antihol_correction(*u, *v, a).iter() {
                e.add_term(*x, Word::EMPTY, &c.mul_reduced(g));
            }
        }
        e
    }

    /// The single-valued primitive in `z̄` of `self/(z̄-b)` vanishing at 0.
    pub fn antihol_integrate(&self, b: u8) -> SvExpr {
        self.conj().hol_integrate(b).conj()
    }

    /// Regularized value at `z = 0` or `z = 1` (any expression), or at `∞` (single-valued only).
    pub fn reg_limit(&self, point: Point) -> Result<MzvExpr, Error> {
        match point {
            Point::Zero => Ok(self.coeff(Word::EMPTY, Word::EMPTY)),
            Point::One => {
                let mut out = MzvExpr::zero();
                for ((u, v), c) in &self.terms {
                    out.add_assign(&c.mul_reduced(&zeta_pair(*u, *v)));
                }
                Ok(out)
            }
            Point::Infinity => {
                let p = self.to_p_basis()?;
                let mut out = MzvExpr::zero();
                for (w, c) in &p {
                    for (w2, m) in sigma_images(*w) {
                        out.add_assign(&c.mul_reduced(&p_value_at_one(w2)).scale(&Q::from_integer(m.into())));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Coefficients on the `P_w` basis; fails when the expression is not single-valued.
    pub fn to_p_basis(&self) -> Result<PCoeffs, Error> {
        let mut coeffs = PCoeffs::new();
        for ((u, v), c) in &self.terms {
            if u.is_empty() {
                coeffs.insert(*v, c.clone());
            }
        }
        if from_p_basis(&coeffs) != *self {
            return Err(Error::NotSingleValued(self.to_string()));
        }
        Ok(coeffs)
    }

    pub fn is_single_valued(&self) -> bool {
        self.to_p_basis().is_ok()
    }

    /// `F(f(z))` for single-valued `F`.
    pub fn s3_transform(&self, f: Mobius) -> Result<SvExpr, Error> {
        let mut p = self.to_p_basis()?;
        for step in f.steps() {
            p = match step {
                Step::Tau => tau_coeffs(&p),
                Step::Sigma => sigma_coeffs(&p),
            };
        }
        Ok(from_p_basis(&p))
    }

    /// Integration with a choice of variable, pole, basepoint and antiholomorphic algorithm.
    pub fn integrate(&self, var: Var, a: u8, base: Point, alg: AntiAlgorithm) -> Result<SvExpr, Error> {
        let p = self.to_p_basis()?;
        let f = match (var, alg) {
            (Var::Hol, _) | (Var::Antihol, AntiAlgorithm::Commutator) => {
                if var == Var::Hol {
                    self.hol_integrate(a)
                } else {
                    self.antihol_integrate(a)
                }
            }
            (Var::Antihol, AntiAlgorithm::X1Prime) => {
                let mut out = SvExpr::zero();
                for (w, c) in &p {
                    out.add_assign(&antihol_integrate_x1prime(*w, a).scale(c));
                }
                out
            }
        };
        match base {
            Point::Zero => Ok(f),
            _ => {
                let v = f.reg_limit(base)?;
                Ok(f.sub(&SvExpr::constant(v)))
            }
        }
    }

    /// Printable form on the `P_w` basis when single-valued.
    pub fn to_p_string(&self) -> Result<String, Error> {
        let p = self.to_p_basis()?;
        let mut s = String::new();
        for (i, (w, c)) in p.iter().enumerate() {
            let atom = if w.is_empty() { None } else { Some(format!("P[{w}]")) };
            push_coeff_term(&mut s, i == 0, c, atom.as_deref());
        }
        if s.is_empty() {
            s.push('0');
        }
        Ok(s)
    }
}

/// Appends `coefficient*atom`, parenthesizing compound coefficients.
pub(crate) fn push_coeff_term(s: &mut String, first: bool, c: &MzvExpr, atom: Option<&str>) {
    if let Some(q) = c.as_rational() {
        crate::mzv::push_term(s, first, &q, atom);
        return;
    }
    let cs = c.to_report_string();
    let single = !cs[1..].contains(['+', '-']);
    if !first && !cs.starts_with('-') {
        s.push('+');
    }
    match (single, atom) {
        (true, None) => s.push_str(&cs),
        (true, Some(a)) => {
            s.push_str(&cs);
            s.push('*');
            s.push_str(a);
        }
        (false, None) => {
            if !first && cs.starts_with('-') {
                s.push('+');
            }
            s.push_str(&format!("({cs})"));
        }
        (false, Some(a)) => {
            if !first && cs.starts_with('-') {
                s.push('+');
            }
            s.push_str(&format!("({cs})*{a}"));
        }
    }
}

impl fmt::Display for SvExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (i, ((u, v), c)) in self.terms.iter().enumerate() {
            let mut atoms = Vec::new();
            if !u.is_empty() {
                atoms.push(format!("Lb[{u}]"));
            }
            if !v.is_empty() {
                atoms.push(format!("L[{v}]"));
            }
            let atom = (!atoms.is_empty()).then(|| atoms.join("*"));
            push_coeff_term(&mut s, i == 0, c, atom.as_deref());
        }
        if s.is_empty() {
            s.push('0');
        }
        f.write_str(&s)
    }
}

impl fmt::Debug for SvExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn zeta_pair(u: Word, v: Word) -> MzvExpr {
    MzvExpr::zeta_word(u).mul_reduced(&MzvExpr::zeta_word(v))
}

type AntiPart = BTreeMap<Word, MzvExpr>;

fn add_anti(a: &mut AntiPart, w: Word, c: &MzvExpr) {
    if c.is_zero() {
        return;
    }
    let e = a.entry(w).or_default();
    e.add_assign(c);
    if e.is_zero() {
        a.remove(&w);
    }
}

/// Antiholomorphic part `Ĝ` of the holomorphic integral of `L_u(z̄)L_v(z)/(z-a)`.
fn antihol_correction(u: Word, v: Word, a: u8) -> Arc<AntiPart> {
    static MEMO: OnceLock<Mutex<HashMap<(Word, Word, u8), Arc<AntiPart>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(g) = memo.lock().unwrap().get(&(u, v, a)) {
        return g.clone();
    }
    let mut out = AntiPart::new();
    if u.is_empty() {
        if v.is_empty() {
            out.insert(Word::letter(a), MzvExpr::one());
        } else if a == 1 {
            add_anti(&mut out, Word::letter(1), &MzvExpr::zeta_word(v));
        }
    } else {
        let (u1, b) = u.pop();
        let prev = antihol_correction(u1, v, a);
        for (x, c) in prev.iter() {
            add_anti(&mut out, x.push(b), c);
        }
        let mut k = if a == 1 { zeta_pair(u, v) } else { MzvExpr::zero() };
        if b == 1 {
            // value at 1 of the integral of the shorter term
            k.sub_assign(&zeta_pair(u1, v.push(a)));
            for (x, c) in prev.iter() {
                k.sub_assign(&c.mul_reduced(&MzvExpr::zeta_word(*x)));
            }
        }
        add_anti(&mut out, Word::letter(1), &k);
    }
    let out = Arc::new(out);
    memo.lock().unwrap().insert((u, v, a), out.clone());
    out
}

/// The basis function `P_w`.
pub fn p_basis(w: Word) -> Arc<SvExpr> {
    static MEMO: OnceLock<Mutex<HashMap<Word, Arc<SvExpr>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = memo.lock().unwrap().get(&w) {
        return p.clone();
    }
    let p = if w.is_empty() {
        SvExpr::one()
    } else {
        let (w1, a) = w.pop();
        p_basis(w1).hol_integrate(a)
    };
    let p = Arc::new(p);
    memo.lock().unwrap().insert(w, p.clone());
    p
}

/// `P_w(1)`.
pub fn p_value_at_one(w: Word) -> MzvExpr {
    static MEMO: OnceLock<Mutex<HashMap<Word, MzvExpr>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = memo.lock().unwrap().get(&w) {
        return v.clone();
    }
    let v = p_basis(w).reg_limit(Point::One).expect("finite point");
    memo.lock().unwrap().insert(w, v.clone());
    v
}

/// All `P_w` with `|w| ≤ cap`.
pub fn build_p_basis(cap: usize) -> BTreeMap<Word, Arc<SvExpr>> {
    (0..=cap).flat_map(Word::all_of_len).map(|w| (w, p_basis(w))).collect()
}

pub fn from_p_basis(p: &PCoeffs) -> SvExpr {
    let mut e = SvExpr::zero();
    for (w, c) in p {
        e.add_assign(&p_basis(*w).scale(c));
    }
    e
}

fn add_p(p: &mut PCoeffs, w: Word, c: &MzvExpr) {
    if c.is_zero() {
        return;
    }
    let e = p.entry(w).or_default();
    e.add_assign(c);
    if e.is_zero() {
        p.remove(&w);
    }
}

/// `(w', m)` with `(w'(x0, -x0-x1) | w) = m ≠ 0`.
fn sigma_images(w: Word) -> Vec<(Word, i64)> {
    let mut out = vec![(Word::EMPTY, 1i64)];
    for a in w.letters() {
        let mut next = Vec::with_capacity(out.len() * 2);
        for (x, m) in out {
            if a == 0 {
                next.push((x.push(0), m));
            }
            next.push((x.push(1), -m));
        }
        out = next;
    }
    out
}

/// `P_w(z/(z-1)) = Σ_{w'} (w'(x0,-x0-x1) | w) P_{w'}(z)`.
fn sigma_coeffs(p: &PCoeffs) -> PCoeffs {
    let mut out = PCoeffs::new();
    for (w, c) in p {
        for (w2, m) in sigma_images(*w) {
            add_p(&mut out, w2, &c.scale(&Q::from_integer(m.into())));
        }
    }
    out
}

/// `P_w(1-z) = Σ_{w=uv} P_u(1) P_{swap(v)}(z)`.
fn tau_coeffs(p: &PCoeffs) -> PCoeffs {
    let mut out = PCoeffs::new();
    for (w, c) in p {
        for i in 0..=w.len() {
            let u = w.prefix(i);
            let v = w.suffix_from(i);
            let val = p_value_at_one(u);
            add_p(&mut out, v.swap01(), &c.mul_reduced(&val));
        }
    }
    out
}

/// `P⁰_w = Σ_{uv=w} L_ũ(z̄)L_v(z)`, letter 2 expanded as `1 - 0`.
pub fn p_zero(w: &SeqWord) -> SvExpr {
    let mut e = SvExpr::zero();
    for (x, c) in expand_letter2(w).iter() {
        let c = MzvExpr::rational(c.clone());
        for i in 0..=x.len() {
            e.add_term(x.prefix(i).reverse(), x.suffix_from(i), &c);
        }
    }
    e
}

/// `c_{bwa} = (1+(-1)^{|w|})(δ_{a,1}ζ_{bw} - δ_{b,1}ζ_{wa})`, extended linearly in letter 2.
pub fn c_constant(w: &SeqWord) -> Result<MzvExpr, Error> {
    if w.len() < 2 {
        return Err(Error::Invalid(format!("c constant needs length at least 2, got {w}")));
    }
    let mut out = MzvExpr::zero();
    for (x, q) in expand_letter2(w).iter() {
        let n = x.len();
        if (n - 2) % 2 == 1 {
            continue;
        }
        let (b, a) = (x.get(0), x.get(n - 1));
        let mut t = MzvExpr::zero();
        if a == 1 {
            t.add_assign(&MzvExpr::zeta_word(x.prefix(n - 1)));
        }
        if b == 1 {
            t.sub_assign(&MzvExpr::zeta_word(x.suffix_from(1)));
        }
        out.add_scaled(&t, &(q * Q::from_integer(2.into())));
    }
    Ok(out)
}

/// Coefficient of `L_1(z̄)` in `P_w`.
pub fn c_extracted(w: Word) -> MzvExpr {
    p_basis(w).coeff(Word::letter(1), Word::EMPTY)
}

/// `[∫dz/(z-a), ∫dz̄/(z̄-b)] P = k·P_1`; returns `k` after checking the identity.
pub fn commutator_defect(p: &SvExpr, a: u8, b: u8) -> Result<MzvExpr, Error> {
    let at = |e: &SvExpr, x: u8| e.reg_limit(if x == 0 { Point::Zero } else { Point::One });
    let anti = p.antihol_integrate(b);
    let hol = p.hol_integrate(a);
    let lhs = anti.hol_integrate(a).sub(&hol.antihol_integrate(b));
    let k = &at(&anti, a)? - &at(&hol, b)?;
    if lhs != p_basis(Word::letter(1)).scale(&k) {
        return Err(Error::Invalid(format!("commutator identity fails: {lhs}")));
    }
    Ok(k)
}

/// `P_w` for all `|w| ≤ cap` from the generating series `L̃_{x0,x1'}(z̄) L_{x0,x1}(z)`.
pub fn p_basis_generating(cap: usize) -> BTreeMap<Word, SvExpr> {
    let xp = x1_prime(cap);
    let x0 = NcSeries::letter(cap, 0);
    // t[u] = ũ(x0, x1'), built by t[ub] = Y(b)·t[u]
    let mut t: HashMap<Word, NcSeries> = HashMap::new();
    t.insert(Word::EMPTY, NcSeries::one(cap));
    for n in 1..=cap {
        for u in Word::all_of_len(n) {
            let (u1, b) = u.pop();
            let y = if b == 0 { &x0 } else { &*xp };
            let s = y.mul(&t[&u1]).expect("same cap");
            t.insert(u, s);
        }
    }
    let mut out: BTreeMap<Word, SvExpr> = BTreeMap::new();
    for w in (0..=cap).flat_map(Word::all_of_len) {
        out.insert(w, SvExpr::zero());
    }
    for (u, s) in &t {
        for (w1, c) in s.iter() {
            for w in (0..=cap - w1.len()).flat_map(Word::all_of_len) {
                out.get_mut(&w1.concat(w)).unwrap().add_term(*u, w, c);
            }
        }
    }
    out
}

/// `∫_0 P_w dz̄/(z̄-a)` by the `x1'` recursion.
pub fn antihol_integrate_x1prime(w: Word, a: u8) -> SvExpr {
    static MEMO: OnceLock<Mutex<HashMap<(Word, u8), SvExpr>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(e) = memo.lock().unwrap().get(&(w, a)) {
        return e.clone();
    }
    let aw = w.prepend(a);
    let xp = x1_prime(aw.len().max(1));
    let mut out = (*p_basis(aw)).clone();
    for i in 4..=aw.len() {
        let u = aw.prefix(i);
        let c = xp.coeff(u);
        if c.is_zero() {
            continue;
        }
        let v = aw.suffix_from(i);
        out = out.sub(&antihol_integrate_x1prime(v, 1).scale(&c));
    }
    memo.lock().unwrap().insert((w, a), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn sw(s: &str) -> SeqWord {
        s.parse().unwrap()
    }

    fn pair(u: &str, v: &str) -> SvExpr {
        SvExpr::term(w(u), w(v), MzvExpr::one())
    }

    fn z(parts: &[u32]) -> MzvExpr {
        MzvExpr::zeta(parts)
    }

    #[test]
    fn low_weight_basis() {
        let p01 = &*p_basis(w("01"));
        assert_eq!(*p01, pair("10", "ε").add(&pair("0", "1")).add(&pair("ε", "01")));
        assert_eq!(*p01, p_zero(&sw("01")));
        assert_eq!(*p_basis(w("0")), pair("0", "ε").add(&pair("ε", "0")));
        // P_{000} = (L_0(z) + L_0(z̄))^3 / 6
        let l = pair("0", "ε").add(&pair("ε", "0"));
        let cube = l.mul(&l).mul(&l).scale_q(&Q::new(1.into(), 6.into()));
        assert_eq!(*p_basis(w("000")), cube);
        for x in (0..=3).flat_map(Word::all_of_len) {
            assert_eq!(*p_basis(x), p_zero(&x.into()), "{x}");
        }
    }

    #[test]
    fn weight_four_constants() {
        let p = p_basis(w("0011"));
        let expect = p_zero(&sw("0011")).add(&SvExpr::term(w("1"), Word::EMPTY, z(&[3]).scale(&Q::from_integer((-2).into()))));
        assert_eq!(*p, expect);
        assert_eq!(c_constant(&sw("0011")).unwrap(), z(&[3]).scale(&Q::from_integer((-2).into())));
        assert_eq!(c_constant(&sw("1010")).unwrap(), z(&[3]).scale(&Q::from_integer((-4).into())));
        assert!(c_constant(&sw("001")).unwrap().is_zero());
        assert!(c_constant(&sw("1")).is_err());
    }

    #[test]
    fn c_constants_match_basis_modulo_products() {
        for n in 2..=7 {
            for x in Word::all_of_len(n) {
                let c = c_constant(&x.into()).unwrap();
                assert_eq!(c_extracted(x).mod_ideal(n - 2), c.mod_ideal(n - 2), "{x}");
                let ext_rev = c_extracted(x.reverse()).neg();
                assert_eq!(c_extracted(x).mod_ideal(n - 2), ext_rev.mod_ideal(n - 2), "{x}");
                let rev = c_constant(&x.reverse().into()).unwrap();
                assert_eq!(c.mod_ideal(n - 2), rev.neg().mod_ideal(n - 2), "{x}");
                let d = p_basis(x).sub(&p_zero(&x.into())).sub(&SvExpr::term(w("1"), Word::EMPTY, c_extracted(x)));
                for (_, coeff) in d.iter() {
                    assert!(coeff.mod_ideal(n - 2).is_zero(), "{x}");
                }
            }
        }
    }

    #[test]
    fn derivatives() {
        let [n0, n1] = p_basis(w("01")).derive(Var::Hol);
        assert!(n0.is_zero());
        assert_eq!(n1, *p_basis(w("0")));
        let [n0, n1] = p_basis(w("0011")).derive(Var::Antihol);
        assert_eq!(n0, p_zero(&sw("011")));
        assert_eq!(n1, SvExpr::constant(z(&[3]).scale(&Q::from_integer((-2).into()))));
        assert!(pair("01", "ε").derive(Var::Hol).iter().all(SvExpr::is_zero));
    }

    #[test]
    fn basis_differential_equations() {
        for x in (1..=6).flat_map(Word::all_of_len) {
            let (x1, a) = x.pop();
            let d = p_basis(x).derive(Var::Hol);
            assert_eq!(d[a as usize], *p_basis(x1));
            assert!(d[1 - a as usize].is_zero());
            if !x.is_zeros() {
                assert!(p_basis(x).reg_limit(Point::Zero).unwrap().is_zero());
            }
            assert_eq!(p_basis(x).homogeneous_weight(), Some(x.len()), "{x}");
        }
    }

    #[test]
    fn antiholomorphic_integration_examples() {
        for x in (0..=2).flat_map(Word::all_of_len) {
            for a in 0..2 {
                assert_eq!(p_basis(x).antihol_integrate(a), *p_basis(x.prepend(a)));
            }
        }
        for x in Word::all_of_len(3) {
            for a in 0..2 {
                let ax = x.prepend(a);
                let c = c_constant(&ax.into()).unwrap();
                let expect = p_basis(ax).sub(&p_basis(w("1")).scale(&c));
                assert_eq!(p_basis(x).antihol_integrate(a), expect, "{ax}");
            }
        }
    }

    #[test]
    fn integration_roundtrip() {
        for x in (1..=5).flat_map(Word::all_of_len) {
            let p = p_basis(x);
            for a in 0..2u8 {
                let f = p.antihol_integrate(a);
                assert_eq!(f.derive(Var::Antihol)[a as usize], *p);
                assert!(f.derive(Var::Antihol)[1 - a as usize].is_zero());
                assert!(f.is_single_valued());
                assert!(f.reg_limit(Point::Zero).unwrap().is_zero());
            }
            let [n0, n1] = p.derive(Var::Antihol);
            let back = n0.antihol_integrate(0).add(&n1.antihol_integrate(1));
            assert_eq!(back, *p);
        }
    }

    #[test]
    fn algorithms_agree() {
        let gen = p_basis_generating(6);
        for (x, e) in &gen {
            assert_eq!(*e, *p_basis(*x), "P_{x}");
        }
        for x in (0..=5).flat_map(Word::all_of_len) {
            for a in 0..2 {
                assert_eq!(antihol_integrate_x1prime(x, a), p_basis(x).antihol_integrate(a), "{x} {a}");
            }
        }
    }

    #[test]
    fn shuffle_homomorphism() {
        for n in 1..=5 {
            for m in 1..=(5 - n).min(n) {
                for u in Word::all_of_len(n) {
                    for v in Word::all_of_len(m) {
                        let mut rhs = SvExpr::zero();
                        for (x, k) in shuffle_counts(u, v) {
                            rhs.add_assign(&p_basis(x).scale_q(&Q::from_integer((k as i64).into())));
                        }
                        assert_eq!(p_basis(u).mul(&p_basis(v)), rhs, "{u} {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn regularized_limits() {
        assert!(p_basis(w("01")).reg_limit(Point::One).unwrap().is_zero());
        assert!(p_basis(w("11")).reg_limit(Point::One).unwrap().is_zero());
        // P_0(∞) and P_1(∞) are regularized logs of |z|^2 and |z-1|^2
        assert!(p_basis(w("0")).reg_limit(Point::Infinity).unwrap().is_zero());
        let d = p_basis(w("01")).sub(&p_basis(w("10")));
        assert!(d.reg_limit(Point::Infinity).unwrap().is_zero());
        // P_{001}(1/z) relation: value at ∞ equals value at 0 of P_{001}(1/z)
        for x in (1..=4).flat_map(Word::all_of_len) {
            let inv = p_basis(x).s3_transform(Mobius::OneOverZ).unwrap();
            assert_eq!(inv.reg_limit(Point::Zero).unwrap(), p_basis(x).reg_limit(Point::Infinity).unwrap(), "{x}");
        }
    }

    #[test]
    fn mobius_transforms() {
        let p0 = p_basis(w("0"));
        let p1 = p_basis(w("1"));
        assert_eq!(p0.s3_transform(Mobius::OneMinusZ).unwrap(), *p1);
        assert_eq!(p1.s3_transform(Mobius::ZOverZMinusOne).unwrap(), p1.neg());
        assert_eq!(p0.s3_transform(Mobius::ZOverZMinusOne).unwrap(), p0.sub(&p1));
        assert_eq!(p0.s3_transform(Mobius::OneOverZ).unwrap(), p0.neg());
        let d = p_basis(w("01")).sub(&p_basis(w("10")));
        assert_eq!(d.s3_transform(Mobius::OneMinusZ).unwrap(), d.neg());
        assert_eq!(d.s3_transform(Mobius::OneOverZ).unwrap(), d.neg());
        for x in (1..=4).flat_map(Word::all_of_len) {
            let p = p_basis(x);
            assert_eq!(p.s3_transform(Mobius::Id).unwrap(), *p);
            for f in [Mobius::OneMinusZ, Mobius::ZOverZMinusOne] {
                let twice = p.s3_transform(f).unwrap().s3_transform(f).unwrap();
                assert_eq!(twice, *p, "{x} {f}");
            }
            let once = p.s3_transform(Mobius::OneOverZ).unwrap().s3_transform(Mobius::OneOverZ).unwrap();
            assert_eq!(once, *p, "{x}");
            let thrice = p
                .s3_transform(Mobius::OneOverOneMinusZ)
                .unwrap()
                .s3_transform(Mobius::OneOverOneMinusZ)
                .unwrap()
                .s3_transform(Mobius::OneOverOneMinusZ)
                .unwrap();
            assert_eq!(thrice, *p, "{x}");
        }
    }

    #[test]
    fn commutator_defects() {
        for x in (0..=4).flat_map(Word::all_of_len) {
            let p = p_basis(x);
            assert!(commutator_defect(&p, 0, 0).unwrap().is_zero());
            for a in 0..2 {
                for b in 0..2 {
                    commutator_defect(&p, a, b).unwrap();
                }
            }
        }
        assert!(commutator_defect(&SvExpr::one(), 1, 1).unwrap().is_zero());
        assert!(commutator_defect(&p_basis(w("0")), 1, 1).unwrap().is_zero());
    }

    #[test]
    fn basepoints() {
        let p = p_basis(w("01"));
        for base in [Point::One, Point::Infinity] {
            let f = p.integrate(Var::Hol, 0, base, AntiAlgorithm::Commutator).unwrap();
            assert!(f.reg_limit(base).unwrap().is_zero());
            assert_eq!(f.derive(Var::Hol)[0], *p);
        }
        let not_sv = pair("ε", "1");
        assert!(matches!(not_sv.integrate(Var::Hol, 0, Point::Zero, AntiAlgorithm::Commutator), Err(Error::NotSingleValued(_))));
    }
}
