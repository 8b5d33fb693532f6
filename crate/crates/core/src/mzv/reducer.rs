//! Double-shuffle elimination per weight.
//!
//! Columns are duality classes of admissible words; rows are regularized
//! shuffle-minus-stuffle relations and Hoffman rows. Elimination runs modulo
//! word-sized primes, the reduced row echelon form is lifted by CRT and rational
//! reconstruction, and the lift is confirmed on an independent prime.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{duality, stuffle_compositions, Composition, MzvExpr};
use crate::words::{shuffle_counts, Word};
use crate::{Error, Q};

static WEIGHT_CAP: AtomicUsize = AtomicUsize::new(12);

pub fn weight_cap() -> usize {
    WEIGHT_CAP.load(Ordering::Relaxed)
}

/// Sets the largest weight that is reduced; above it words are only regularized.
pub fn set_weight_cap(cap: usize) {
    if cap != WEIGHT_CAP.swap(cap, Ordering::Relaxed) {
        super::clear_memos();
    }
}

fn cache_slot() -> &'static RwLock<Option<PathBuf>> {
    static SLOT: OnceLock<RwLock<Option<PathBuf>>> = OnceLock::new();
    SLOT.get_or_init(|| {
        let dir = std::env::var_os("GFPERIOD_CACHE")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".gfperiod-cache"));
        RwLock::new(Some(dir))
    })
}

pub fn cache_dir() -> Option<PathBuf> {
    cache_slot().read().unwrap().clone()
}

/// `None` disables the on-disk cache.
pub fn set_cache_dir(dir: Option<PathBuf>) {
    *cache_slot().write().unwrap() = dir;
}

/// Coefficient of `t^k` in `1/(1-t^2-t^3)`.
pub fn expected_dimension(k: usize) -> usize {
    let mut d = vec![1usize, 0, 1];
    while d.len() <= k {
        let n = d.len();
        d.push(d[n - 2] + d[n - 3]);
    }
    d[k]
}

/// Reduced form of every admissible word of one weight.
#[derive(Debug)]
pub struct WeightTable {
    pub weight: usize,
    pub free: Vec<Word>,
    reduced: HashMap<Word, Arc<MzvExpr>>,
}

impl WeightTable {
    pub fn dimension(&self) -> usize {
        self.free.len()
    }

    pub fn reduce_word(&self, w: Word) -> Option<&Arc<MzvExpr>> {
        self.reduced.get(&w)
    }

    /// Coordinates of a reduced homogeneous expression in `free`.
    pub fn coordinates(&self, e: &MzvExpr) -> Vec<Q> {
        self.free.iter().map(|w| e.coeff(*w)).collect()
    }
}

fn tables() -> &'static Mutex<HashMap<usize, Arc<WeightTable>>> {
    static T: OnceLock<Mutex<HashMap<usize, Arc<WeightTable>>>> = OnceLock::new();
    T.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(super) fn clear_tables() {
    tables().lock().unwrap().clear();
}

/// The table of weight `k`, built or loaded on first use.
pub fn table(k: usize) -> Result<Arc<WeightTable>, Error> {
    let cap = weight_cap();
    if k > cap {
        return Err(Error::WeightCap { weight: k, cap });
    }
    if let Some(t) = tables().lock().unwrap().get(&k) {
        return Ok(t.clone());
    }
    static BUILD: Mutex<()> = Mutex::new(());
    let _guard = BUILD.lock().unwrap();
    if let Some(t) = tables().lock().unwrap().get(&k) {
        return Ok(t.clone());
    }
    let t = Arc::new(load_or_build(k));
    tables().lock().unwrap().insert(k, t.clone());
    Ok(t)
}

pub(super) fn reduced_word(w: Word) -> Option<Arc<MzvExpr>> {
    let t = table(w.len()).ok()?;
    t.reduce_word(w).cloned()
}

pub(super) fn is_free_word(w: Word) -> bool {
    match table(w.len()) {
        Ok(t) => t.free.binary_search(&w).is_ok(),
        Err(_) => true,
    }
}

/// `(weight, surviving words, expected dimension)` for every weight up to `max_weight`.
pub fn dimension_check(max_weight: usize) -> Result<Vec<(usize, usize, usize)>, Error> {
    (0..=max_weight)
        .map(|k| {
            let found = if k == 0 { 1 } else { table(k)?.dimension() };
            Ok((k, found, expected_dimension(k)))
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RelationKind {
    /// Shuffle product minus stuffle product of two convergent words.
    DoubleShuffle,
    /// `ζ_1 ⧢ ζ_w` against `ζ(1) * ζ(c)` with the divergent term cancelled.
    Hoffman,
    Duality,
}

/// All relations of one weight, each as a word combination equal to zero.
#[derive(Clone, Debug)]
pub struct RelationSystem {
    pub weight: usize,
    pub rows: Vec<(RelationKind, MzvExpr)>,
}

fn admissible_words(k: usize) -> Vec<Word> {
    if k < 2 {
        return Vec::new();
    }
    Word::all_of_len(k - 2).map(|x| Word::letter(1).concat(x).push(0)).collect()
}

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn stuffle_words(cu: &Composition, cv: &Composition, e: &mut MzvExpr, scale: i64) {
    for (c, n) in stuffle_compositions(&cu.0, &cv.0) {
        let comp = Composition(c);
        e.add_term(comp.to_word(), qi(scale * n * comp.sign()));
    }
}

/// The relation rows of weight `k` in word form.
pub fn relation_system(k: usize) -> RelationSystem {
    let mut rows = Vec::new();
    for a in 2..=k / 2 {
        let left = admissible_words(a);
        let right = admissible_words(k - a);
        for &u in &left {
            for &v in &right {
                if a == k - a && v < u {
                    continue;
                }
                let mut e = MzvExpr::zero();
                for (x, n) in shuffle_counts(u, v) {
                    e.add_term(x, qi(n as i64));
                }
                let cu = Composition::from_word_unchecked(u);
                let cv = Composition::from_word_unchecked(v);
                stuffle_words(&cu, &cv, &mut e, -cu.sign() * cv.sign());
                if !e.is_zero() {
                    rows.push((RelationKind::DoubleShuffle, e));
                }
            }
        }
    }
    for w in admissible_words(k - 1) {
        let w1 = w.push(1);
        let mut e = MzvExpr::zero();
        for (x, n) in shuffle_counts(Word::letter(1), w) {
            if x != w1 {
                e.add_term(x, qi(n as i64));
            }
        }
        let c = Composition::from_word_unchecked(w);
        let mut st = MzvExpr::zero();
        stuffle_words(&Composition(vec![1]), &c, &mut st, 1);
        let sign = if c.depth() % 2 == 0 { 1 } else { -1 };
        for (x, q) in st.iter() {
            if *x != w1 {
                e.add_term(*x, q * qi(sign));
            }
        }
        if !e.is_zero() {
            rows.push((RelationKind::Hoffman, e));
        }
    }
    for w in admissible_words(k) {
        let (s, d) = duality(w).expect("admissible");
        if w < d {
            let mut e = MzvExpr::symbol(w);
            e.add_term(d, qi(-s));
            rows.push((RelationKind::Duality, e));
        }
    }
    RelationSystem { weight: k, rows }
}

/// Duality representative: lower depth, then smaller word.
fn representative(w: Word) -> (Word, i64) {
    let (s, d) = duality(w).expect("admissible");
    let key = |x: Word| (x.count_ones(), x);
    if key(d) < key(w) {
        (d, s)
    } else {
        (w, 1)
    }
}

struct Columns {
    cols: Vec<Word>,
    index: HashMap<Word, usize>,
}

fn columns(k: usize) -> Columns {
    let mut cols: Vec<Word> = admissible_words(k).into_iter().filter(|&w| representative(w).0 == w).collect();
    // deeper words on the left so low-depth words survive as free columns
    cols.sort_by_key(|w| (std::cmp::Reverse(w.count_ones()), *w));
    let index = cols.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    Columns { cols, index }
}

fn integer_rows(k: usize, cols: &Columns) -> Vec<Vec<(usize, i64)>> {
    let mut out = Vec::new();
    for (kind, e) in relation_system(k).rows {
        if kind == RelationKind::Duality {
            continue;
        }
        let mut row: BTreeMap<usize, i64> = BTreeMap::new();
        for (w, c) in e.iter() {
            let (r, s) = representative(*w);
            let n = c.to_integer().to_i64().expect("small integer row");
            *row.entry(cols.index[&r]).or_default() += s * n;
        }
        let row: Vec<(usize, i64)> = row.into_iter().filter(|(_, n)| *n != 0).collect();
        if !row.is_empty() {
            out.push(row);
        }
    }
    out
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn primes() -> impl Iterator<Item = u64> {
    (1u64 << 30..1u64 << 31).rev().filter(|&n| is_prime(n))
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * a % p;
        }
        a = a * a % p;
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

struct ModElim {
    pivots: Vec<usize>,
    used_rows: Vec<usize>,
    /// `rref[i][j]`: entry of pivot row `i` at free column `free[j]`.
    rref: Vec<Vec<u64>>,
    free: Vec<usize>,
}

fn eliminate(rows: &[Vec<(usize, i64)>], subset: Option<&[usize]>, ncols: usize, p: u64) -> ModElim {
    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut used_rows = Vec::new();
    let all: Vec<usize>;
    let order: &[usize] = match subset {
        Some(s) => s,
        None => {
            all = (0..rows.len()).collect();
            &all
        }
    };
    let pi = p as i64;
    for &ri in order {
        let mut r = vec![0u64; ncols];
        for &(c, n) in &rows[ri] {
            r[c] = n.rem_euclid(pi) as u64;
        }
        let mut pivot = None;
        for c in 0..ncols {
            if r[c] == 0 {
                continue;
            }
            match pivot_of_col[c] {
                Some(b) => {
                    let f = p - r[c];
                    let br = &basis[b];
                    for j in c..ncols {
                        if br[j] != 0 {
                            r[j] = (r[j] + f * br[j]) % p;
                        }
                    }
                }
                None => {
                    pivot = Some(c);
                    break;
                }
            }
        }
        if let Some(c) = pivot {
            let inv = inv_mod(r[c], p);
            for x in r.iter_mut().skip(c) {
                *x = *x * inv % p;
            }
            pivot_of_col[c] = Some(basis.len());
            basis.push(r);
            used_rows.push(ri);
        }
    }
    let mut pivots: Vec<usize> = (0..ncols).filter(|&c| pivot_of_col[c].is_some()).collect();
    pivots.sort_unstable();
    // back substitution, rightmost pivot first
    for &c in pivots.iter().rev() {
        let b = pivot_of_col[c].unwrap();
        let pivot_row = basis[b].clone();
        for &c2 in pivots.iter().filter(|&&c2| c2 < c) {
            let b2 = pivot_of_col[c2].unwrap();
            let f = basis[b2][c];
            if f == 0 {
                continue;
            }
            let f = p - f;
            let r = &mut basis[b2];
            for j in c..ncols {
                if pivot_row[j] != 0 {
                    r[j] = (r[j] + f * pivot_row[j]) % p;
                }
            }
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|&c| pivot_of_col[c].is_none()).collect();
    let rref = pivots
        .iter()
        .map(|&c| {
            let r = &basis[pivot_of_col[c].unwrap()];
            free.iter().map(|&f| r[f]).collect()
        })
        .collect();
    ModElim { pivots, used_rows, rref, free }
}

fn rational_reconstruct(x: &BigInt, m: &BigInt) -> Option<Q> {
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), x.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.is_zero() || t1.abs() > bound || !r1.gcd(&t1).is_one() {
        return None;
    }
    Some(Q::new(r1, t1))
}

fn q_mod(q: &Q, p: u64) -> Option<u64> {
    let pb = BigInt::from(p);
    let d = q.denom().mod_floor(&pb).to_u64()?;
    if d == 0 {
        return None;
    }
    let n = q.numer().mod_floor(&pb).to_u64()?;
    Some(n * inv_mod(d, p) % p)
}

/// Exact RREF entries `(pivot columns, free columns, entries)`.
fn solve(rows: &[Vec<(usize, i64)>], ncols: usize, full: bool) -> (Vec<usize>, Vec<usize>, Vec<Vec<Q>>) {
    let mut ps = primes();
    let p0 = ps.next().unwrap();
    let first = eliminate(rows, None, ncols, p0);
    let subset = (!full).then(|| first.used_rows.clone());
    let mut modulus = BigInt::from(p0);
    let mut acc: Vec<Vec<BigInt>> =
        first.rref.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    for p in ps {
        let e = eliminate(rows, subset.as_deref(), ncols, p);
        if e.pivots != first.pivots {
            if e.pivots.len() > first.pivots.len() {
                // the first prime was unlucky: its rows may not span
                return solve(rows, ncols, true);
            }
            continue;
        }
        if let Some(qs) = try_lift(&acc, &modulus) {
            let agrees =
                qs.iter().zip(&e.rref).all(|(qr, er)| qr.iter().zip(er).all(|(q, &x)| q_mod(q, p) == Some(x)));
            if agrees {
                return (first.pivots, first.free, qs);
            }
        }
        let pb = BigInt::from(p);
        let m_inv = BigInt::from(inv_mod((&modulus % &pb).to_u64().unwrap(), p));
        for (ar, er) in acc.iter_mut().zip(&e.rref) {
            for (a, &x) in ar.iter_mut().zip(er) {
                let t = ((BigInt::from(x) - &*a).mod_floor(&pb) * &m_inv).mod_floor(&pb);
                *a += &modulus * t;
            }
        }
        modulus *= pb;
    }
    unreachable!("prime supply exhausted")
}

fn try_lift(acc: &[Vec<BigInt>], m: &BigInt) -> Option<Vec<Vec<Q>>> {
    acc.iter().map(|r| r.iter().map(|x| rational_reconstruct(x, m)).collect()).collect()
}

fn build(k: usize) -> WeightTable {
    let cols = columns(k);
    let n = cols.cols.len();
    let rows = integer_rows(k, &cols);
    let (pivots, free_cols, entries) = if rows.is_empty() {
        (Vec::new(), (0..n).collect(), Vec::new())
    } else {
        solve(&rows, n, false)
    };
    let mut free: Vec<Word> = free_cols.iter().map(|&c| cols.cols[c]).collect();
    free.sort();
    let mut rep_value: HashMap<Word, MzvExpr> = HashMap::new();
    for &c in &free_cols {
        rep_value.insert(cols.cols[c], MzvExpr::symbol(cols.cols[c]));
    }
    for (i, &c) in pivots.iter().enumerate() {
        let mut e = MzvExpr::zero();
        for (j, &f) in free_cols.iter().enumerate() {
            e.add_term(cols.cols[f], -entries[i][j].clone());
        }
        rep_value.insert(cols.cols[c], e);
    }
    finish(k, free, &rep_value)
}

fn finish(k: usize, free: Vec<Word>, rep_value: &HashMap<Word, MzvExpr>) -> WeightTable {
    let reduced = admissible_words(k)
        .into_iter()
        .map(|w| {
            let (r, s) = representative(w);
            (w, Arc::new(rep_value[&r].scale(&qi(s))))
        })
        .collect();
    WeightTable { weight: k, free, reduced }
}

const CACHE_HEADER: &str = "gfperiod-mzv-table v1";

fn cache_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("mzv-weight-{k}.txt"))
}

fn load_or_build(k: usize) -> WeightTable {
    let dir = cache_dir();
    if let Some(dir) = &dir {
        if let Some(t) = load(&cache_path(dir, k), k) {
            return t;
        }
    }
    let t = build(k);
    if let Some(dir) = &dir {
        let _ = store(dir, k, &t);
    }
    t
}

fn load(path: &Path, k: usize) -> Option<WeightTable> {
    let text = fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    if lines.next()? != CACHE_HEADER {
        return None;
    }
    if lines.next()?.strip_prefix("weight ")?.parse::<usize>().ok()? != k {
        return None;
    }
    let free: Vec<Word> = parse_words(lines.next()?.strip_prefix("free")?)?;
    let mut rep_value: HashMap<Word, MzvExpr> = free.iter().map(|w| (*w, MzvExpr::symbol(*w))).collect();
    for line in lines {
        let (lhs, rhs) = line.split_once('=')?;
        let w: Word = lhs.trim().parse().ok()?;
        let mut e = MzvExpr::zero();
        for tok in rhs.split_whitespace() {
            let (c, v) = tok.split_once(':')?;
            let v: Word = v.parse().ok()?;
            if free.binary_search(&v).is_err() {
                return None;
            }
            e.add_term(v, c.parse().ok()?);
        }
        rep_value.insert(w, e);
    }
    let complete = admissible_words(k).into_iter().all(|w| rep_value.contains_key(&representative(w).0));
    complete.then(|| finish(k, free, &rep_value))
}

fn parse_words(s: &str) -> Option<Vec<Word>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

fn store(dir: &Path, k: usize, t: &WeightTable) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, k);
    let lock = dir.join(format!("mzv-weight-{k}.lock"));
    let Ok(_) = fs::OpenOptions::new().write(true).create_new(true).open(&lock) else {
        return Ok(());
    };
    let result = (|| {
        let tmp = dir.join(format!("mzv-weight-{k}.tmp.{}", std::process::id()));
        let mut f = fs::File::create(&tmp)?;
        writeln!(f, "{CACHE_HEADER}")?;
        writeln!(f, "weight {k}")?;
        let free: Vec<String> = t.free.iter().map(|w| w.to_string()).collect();
        writeln!(f, "free {}", free.join(" "))?;
        let mut reps: Vec<Word> = admissible_words(k).into_iter().filter(|&w| representative(w).0 == w).collect();
        reps.sort();
        for w in reps {
            if t.free.binary_search(&w).is_ok() {
                continue;
            }
            let e = &t.reduced[&w];
            let toks: Vec<String> = e.iter().map(|(v, c)| format!("{c}:{v}")).collect();
            writeln!(f, "{w} = {}", toks.join(" "))?;
        }
        f.sync_all()?;
        fs::rename(&tmp, &path)
    })();
    let _ = fs::remove_file(&lock);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_dimensions() {
        let d: Vec<usize> = (0..=12).map(expected_dimension).collect();
        assert_eq!(d, vec![1, 0, 1, 1, 1, 2, 2, 3, 4, 5, 7, 9, 12]);
    }

    #[test]
    fn reconstruction() {
        let m = BigInt::from(1_000_000_007u64) * BigInt::from(998_244_353u64);
        let q = Q::new(BigInt::from(-355), BigInt::from(113));
        let pb = [1_000_000_007u64, 998_244_353u64];
        let r: Vec<u64> = pb.iter().map(|&p| q_mod(&q, p).unwrap()).collect();
        let inv = BigInt::from(inv_mod(pb[0] % pb[1], pb[1]));
        let t = ((BigInt::from(r[1]) - BigInt::from(r[0])).mod_floor(&BigInt::from(pb[1])) * inv)
            .mod_floor(&BigInt::from(pb[1]));
        let x = BigInt::from(r[0]) + BigInt::from(pb[0]) * t;
        assert_eq!(rational_reconstruct(&x, &m), Some(q));
    }

    #[test]
    fn relation_rows_vanish_after_reduction() {
        for k in 2..=8 {
            for (kind, row) in relation_system(k).rows {
                assert!(row.reduce().is_zero(), "weight {k} {kind:?} row {row:?}");
            }
        }
    }
}
