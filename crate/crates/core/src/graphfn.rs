//! Four-dimensional graphical functions and periods.
//!
//! Graphs carry the labels `0`, `1`, `z`, `∞`. A graphical function is stored as
//! the antisymmetric numerator `g` of `f = g/(z-z̄)`. Construction peels the edge
//! at `z` with the append-edge integral, permutes labels with the `S₄` symmetry of
//! completed graphs, and turns components without `z` into periods through plane
//! integrals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::mzv::{binomial, MzvExpr};
use crate::numeric::{mzv_numeric, NumericContext, Real};
use crate::ratfield::{AExpr, BElement, Pole};
use crate::svmp::{Mobius, Point, SvExpr, Var};
use crate::words::{expand_letter2, SeqWord};
use crate::{Error, Q};

fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// External vertex labels.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Label {
    Zero,
    One,
    Z,
    Inf,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Zero, Label::One, Label::Z, Label::Inf];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Zero => "0",
            Label::One => "1",
            Label::Z => "z",
            Label::Inf => "inf",
        }
    }

    fn from_name(s: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.name() == s || (s == "∞" && *l == Label::Inf))
    }
}

/// Weighted edge between vertex indices.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GfEdge {
    pub u: usize,
    pub v: usize,
    pub w: i64,
}

/// Graph with labelled external vertices and integer edge weights.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GfGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<GfEdge>,
    pub labels: [Option<usize>; 4],
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    u: String,
    v: String,
    w: i64,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<String>,
    edges: Vec<EdgeJson>,
    #[serde(default)]
    labels: BTreeMap<String, String>,
}

/// Outcome of power counting.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Convergence {
    Convergent,
    Infrared(Vec<String>),
    Ultraviolet(Vec<String>),
}

impl Convergence {
    pub fn is_convergent(&self) -> bool {
        *self == Convergence::Convergent
    }
}

impl fmt::Display for Convergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convergence::Convergent => f.write_str("convergent"),
            Convergence::Infrared(v) => write!(f, "infrared divergent subgraph {{{}}}", v.join(",")),
            Convergence::Ultraviolet(v) => write!(f, "ultraviolet divergent subgraph {{{}}}", v.join(",")),
        }
    }
}

/// A permutation of the four labels: the vertex labelled `a` gets label `self.0[a]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct LabelPerm(pub [Label; 4]);

impl LabelPerm {
    pub const IDENTITY: LabelPerm = LabelPerm(Label::ALL);

    pub fn transposition(a: Label, b: Label) -> LabelPerm {
        let mut p = Label::ALL;
        p.swap(a.index(), b.index());
        LabelPerm(p)
    }

    pub fn apply(self, a: Label) -> Label {
        self.0[a.index()]
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(self, other: LabelPerm) -> LabelPerm {
        LabelPerm(Label::ALL.map(|a| self.apply(other.apply(a))))
    }

    pub fn all() -> Vec<LabelPerm> {
        let mut out = Vec::new();
        let mut idx = [0usize, 1, 2, 3];
        permutations(&mut idx, 0, &mut |p| out.push(LabelPerm(p.map(|i| Label::ALL[i]))));
        out.sort_by_key(|p| *p != LabelPerm::IDENTITY);
        out
    }

    /// The substitution `φ(σ)` with `f_Γ(z) = f_{σΓ}(φ(σ)(z))` for completed `Γ`.
    pub fn mobius(self) -> Mobius {
        // find the Möbius image y such that the cross-ratios of the relabelled points agree
        let z = (0.3141, 0.7183);
        let cr = |p: [Option<(f64, f64)>; 4]| cross_ratio(p[0], p[1], p[2], p[3]);
        let target = cr([Some((0.0, 0.0)), Some((1.0, 0.0)), Some(z), None]);
        for m in Mobius::ALL {
            let y = m.apply_point(Some(z));
            let pos = |l: Label| match l {
                Label::Zero => Some((0.0, 0.0)),
                Label::One => Some((1.0, 0.0)),
                Label::Z => y,
                Label::Inf => None,
            };
            let c = cr(Label::ALL.map(|a| pos(self.apply(a))));
            if let (Some(a), Some(b)) = (c, target) {
                if (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 {
                    return m;
                }
            }
        }
        unreachable!("every label permutation induces a Möbius map")
    }
}

fn permutations(a: &mut [usize; 4], k: usize, f: &mut impl FnMut([usize; 4])) {
    if k == a.len() {
        f(*a);
        return;
    }
    for i in k..a.len() {
        a.swap(k, i);
        permutations(a, k + 1, f);
        a.swap(k, i);
    }
}

/// `[c,a][b,d] / ([b,a][c,d])` on projective points, `None` meaning `∞`.
fn cross_ratio(
    a: Option<(f64, f64)>,
    b: Option<(f64, f64)>,
    c: Option<(f64, f64)>,
    d: Option<(f64, f64)>,
) -> Option<(f64, f64)> {
    type C = (f64, f64);
    let hom = |p: Option<C>| -> (C, C) {
        match p {
            Some(x) => (x, (1.0, 0.0)),
            None => ((1.0, 0.0), (0.0, 0.0)),
        }
    };
    let mul = |x: C, y: C| (x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0);
    let det = |p: (C, C), q: (C, C)| {
        let a = mul(p.0, q.1);
        let b = mul(p.1, q.0);
        (a.0 - b.0, a.1 - b.1)
    };
    let (a, b, c, d) = (hom(a), hom(b), hom(c), hom(d));
    let num = mul(det(c, a), det(b, d));
    let den = mul(det(b, a), det(c, d));
    let n = den.0 * den.0 + den.1 * den.1;
    if n < 1e-300 {
        return None;
    }
    Some(((num.0 * den.0 + num.1 * den.1) / n, (num.1 * den.0 - num.0 * den.1) / n))
}

impl GfGraph {
    /// Builds a graph from named vertices, `(u, v, w)` edges and label assignments.
    pub fn new(vertices: &[&str], edges: &[(&str, &str, i64)], labels: &[(Label, &str)]) -> Result<GfGraph, Error> {
        let json = GraphJson {
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            edges: edges.iter().map(|(u, v, w)| EdgeJson { u: u.to_string(), v: v.to_string(), w: *w }).collect(),
            labels: labels.iter().map(|(l, v)| (l.name().to_string(), v.to_string())).collect(),
        };
        GfGraph::from_json_value(json)
    }

    pub fn from_json(s: &str) -> Result<GfGraph, Error> {
        let json: GraphJson = serde_json::from_str(s).map_err(|e| Error::Parse(format!("graph JSON: {e}")))?;
        GfGraph::from_json_value(json)
    }

    fn from_json_value(json: GraphJson) -> Result<GfGraph, Error> {
        let mut index = HashMap::new();
        for (i, v) in json.vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate vertex {v}")));
            }
        }
        let find = |v: &str| index.get(v).copied().ok_or_else(|| Error::Invalid(format!("unknown vertex {v}")));
        let mut edges = Vec::new();
        for e in &json.edges {
            let (u, v) = (find(&e.u)?, find(&e.v)?);
            if u == v {
                return Err(Error::Invalid(format!("self-loop at {}", e.u)));
            }
            edges.push(GfEdge { u, v, w: e.w });
        }
        let mut labels = [None; 4];
        for (name, v) in &json.labels {
            let l = Label::from_name(name).ok_or_else(|| Error::Invalid(format!("unknown label {name}")))?;
            labels[l.index()] = Some(find(v)?);
        }
        let set: BTreeSet<usize> = labels.iter().flatten().copied().collect();
        if set.len() != labels.iter().flatten().count() {
            return Err(Error::Invalid("labels must be injective".into()));
        }
        Ok(GfGraph { vertices: json.vertices, edges, labels })
    }

    pub fn to_json(&self) -> String {
        let json = GraphJson {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson { u: self.vertices[e.u].clone(), v: self.vertices[e.v].clone(), w: e.w })
                .collect(),
            labels: Label::ALL
                .iter()
                .filter_map(|l| self.labels[l.index()].map(|v| (l.name().to_string(), self.vertices[v].clone())))
                .collect(),
        };
        serde_json::to_string(&json).expect("graph serializes")
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn label(&self, l: Label) -> Option<usize> {
        self.labels[l.index()]
    }

    pub fn label_of(&self, v: usize) -> Option<Label> {
        Label::ALL.into_iter().find(|l| self.labels[l.index()] == Some(v))
    }

    /// Weighted valency.
    pub fn valency(&self, v: usize) -> i64 {
        self.edges.iter().filter(|e| e.u == v || e.v == v).map(|e| e.w).sum()
    }

    /// Total weight between two vertices.
    pub fn weight(&self, a: usize, b: usize) -> i64 {
        self.edges.iter().filter(|e| (e.u, e.v) == (a, b) || (e.u, e.v) == (b, a)).map(|e| e.w).sum()
    }

    /// All four labels present, internal valency 4, external valency 0.
    pub fn is_completed(&self) -> bool {
        self.labels.iter().all(Option::is_some)
            && (0..self.vertices.len())
                .all(|v| self.valency(v) == if self.label_of(v).is_some() { 0 } else { 4 })
    }

    /// The unique completion in four dimensions: edges to a vertex `∞` fix internal
    /// valencies to 4, then the edges `z∞`, `01`, `0∞`, `1∞` make external valencies 0.
    pub fn complete(&self) -> Result<GfGraph, Error> {
        for l in [Label::Zero, Label::One, Label::Z] {
            if self.label(l).is_none() {
                return Err(Error::Invalid(format!("completion needs label {}", l.name())));
            }
        }
        let mut g = self.clone();
        let inf = match g.label(Label::Inf) {
            Some(v) => v,
            None => {
                let mut name = "inf".to_string();
                while g.vertex(&name).is_some() {
                    name.push('\'');
                }
                g.vertices.push(name);
                let v = g.vertices.len() - 1;
                g.labels[Label::Inf.index()] = Some(v);
                v
            }
        };
        let push = |g: &mut GfGraph, u: usize, v: usize, w: i64| {
            if w != 0 {
                g.edges.push(GfEdge { u, v, w });
            }
        };
        for v in 0..g.vertices.len() {
            if g.label_of(v).is_none() {
                let w = 4 - g.valency(v);
                push(&mut g, v, inf, w);
            }
        }
        let [l0, l1, lz] = [Label::Zero, Label::One, Label::Z].map(|l| g.label(l).unwrap());
        let nz = g.valency(lz);
        push(&mut g, lz, inf, -nz);
        let (n0, n1, ninf) = (g.valency(l0), g.valency(l1), g.valency(inf));
        push(&mut g, l0, l1, (-n0 - n1 + ninf) / 2);
        push(&mut g, l0, inf, (-n0 + n1 - ninf) / 2);
        push(&mut g, l1, inf, (n0 - n1 - ninf) / 2);
        Ok(g)
    }

    /// Power counting of the integral over unlabelled vertices; edges at `∞` are ignored.
    pub fn check_convergence(&self) -> Convergence {
        let inf = self.label(Label::Inf);
        let verts: Vec<usize> = (0..self.vertices.len()).filter(|v| Some(*v) != inf).collect();
        let internal: Vec<usize> = verts.iter().copied().filter(|v| self.label_of(*v).is_none()).collect();
        let edges: Vec<GfEdge> =
            self.edges.iter().copied().filter(|e| Some(e.u) != inf && Some(e.v) != inf).collect();
        let names = |s: &[usize]| s.iter().map(|v| self.vertices[*v].clone()).collect::<Vec<_>>();
        for s in subsets(&internal) {
            let n: i64 = edges.iter().filter(|e| s.contains(&e.u) || s.contains(&e.v)).map(|e| e.w).sum();
            if 2 * n <= 4 * s.len() as i64 {
                return Convergence::Infrared(names(&s));
            }
        }
        for t in subsets(&verts) {
            if t.len() < 2 || t.iter().filter(|v| self.label_of(**v).is_some()).count() > 1 {
                continue;
            }
            let n: i64 = edges.iter().filter(|e| t.contains(&e.u) && t.contains(&e.v)).map(|e| e.w).sum();
            if n > 0 && 2 * n >= 4 * (t.len() as i64 - 1) {
                return Convergence::Ultraviolet(names(&t));
            }
        }
        Convergence::Convergent
    }

    /// Relabels by `σ` and returns the substitution relating the completed functions.
    pub fn permute_labels(&self, sigma: LabelPerm) -> (GfGraph, Mobius) {
        let mut g = self.clone();
        for l in Label::ALL {
            g.labels[sigma.apply(l).index()] = self.labels[l.index()];
        }
        (g, sigma.mobius())
    }

    /// The graph of `f_w`: a chain attached to `0`/`1` by the letters, `z` after the last vertex.
    pub fn sequential(w: &SeqWord) -> GfGraph {
        let mut g = GfGraph::sequential_chain(w);
        g.vertices.push("z".into());
        let z = g.vertices.len() - 1;
        g.labels[Label::Z.index()] = Some(z);
        if !w.is_empty() {
            g.edges.push(GfEdge { u: z - 1, v: z, w: 1 });
        }
        g
    }

    /// The sequential graph `G_w` with labels `0` and `1` only.
    pub fn sequential_chain(w: &SeqWord) -> GfGraph {
        let mut g = GfGraph { vertices: vec!["0".into(), "1".into()], edges: Vec::new(), labels: [Some(0), Some(1), None, None] };
        for (i, &a) in w.letters().iter().enumerate() {
            g.vertices.push(format!("x{}", i + 1));
            let v = g.vertices.len() - 1;
            if i > 0 {
                g.edges.push(GfEdge { u: v - 1, v, w: 1 });
            }
            if a != 1 {
                g.edges.push(GfEdge { u: 0, v, w: 1 });
            }
            if a != 0 {
                g.edges.push(GfEdge { u: 1, v, w: 1 });
            }
        }
        g
    }

    /// Completion of a graph without labels: one new vertex joined to every vertex of
    /// valency below 4, so that all valencies become 4.
    pub fn complete_vacuum(&self) -> Result<GfGraph, Error> {
        let deficits: Vec<(usize, i64)> =
            (0..self.vertices.len()).map(|v| (v, 4 - self.valency(v))).filter(|(_, d)| *d != 0).collect();
        if deficits.iter().any(|(_, d)| *d < 0) || deficits.iter().map(|(_, d)| d).sum::<i64>() != 4 {
            return Err(Error::Invalid("graph has no φ⁴ completion".into()));
        }
        let mut g = self.clone();
        let mut name = "inf".to_string();
        while g.vertex(&name).is_some() {
            name.push('\'');
        }
        g.vertices.push(name);
        let inf = g.vertices.len() - 1;
        for (v, d) in deficits {
            g.edges.push(GfEdge { u: v, v: inf, w: d });
        }
        g.labels = [None; 4];
        Ok(g)
    }

    /// Completion for a graph whose external vertices are `0`, `1`, `∞` only (no `z`):
    /// internal vertices get edges to `∞`, then the triangle `01`, `0∞`, `1∞`.
    pub fn complete_period_graph(&self) -> Result<GfGraph, Error> {
        let mut g = self.clone();
        let mut name = "z".to_string();
        while g.vertex(&name).is_some() {
            name.push('\'');
        }
        g.vertices.push(name);
        let z = g.vertices.len() - 1;
        g.labels[Label::Z.index()] = Some(z);
        let mut c = g.complete()?;
        c.vertices.remove(z);
        c.labels[Label::Z.index()] = None;
        c.edges.retain(|e| e.u != z && e.v != z);
        for e in &mut c.edges {
            e.u -= (e.u > z) as usize;
            e.v -= (e.v > z) as usize;
        }
        for l in c.labels.iter_mut().flatten() {
            *l -= (*l > z) as usize;
        }
        Ok(c)
    }
}

fn subsets(set: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (1u64..(1u64 << set.len()))
        .map(move |mask| set.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| *v).collect())
}

impl fmt::Display for GfGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

// ---------------------------------------------------------------------------
// Internal graph form: slots 0..4 are the labels 0, 1, z, ∞; internal vertices follow.

const Z: usize = 2;
const INF: usize = 3;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
struct Core {
    n: usize,
    w: BTreeMap<(usize, usize), i64>,
}

impl Core {
    fn from_graph(g: &GfGraph) -> Result<Core, Error> {
        let mut map = vec![usize::MAX; g.vertices.len()];
        for l in Label::ALL {
            match g.label(l) {
                Some(v) => map[v] = l.index(),
                None => return Err(Error::Invalid(format!("label {} missing", l.name()))),
            }
        }
        let mut n = 0;
        for m in map.iter_mut() {
            if *m == usize::MAX {
                *m = 4 + n;
                n += 1;
            }
        }
        let mut c = Core { n, w: BTreeMap::new() };
        for e in &g.edges {
            c.add(map[e.u], map[e.v], e.w);
        }
        Ok(c)
    }

    fn add(&mut self, a: usize, b: usize, w: i64) {
        let key = (a.min(b), a.max(b));
        let e = self.w.entry(key).or_insert(0);
        *e += w;
        if *e == 0 {
            self.w.remove(&key);
        }
    }

    fn weight(&self, a: usize, b: usize) -> i64 {
        self.w.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    fn valency(&self, v: usize) -> i64 {
        self.w.iter().filter(|((a, b), _)| *a == v || *b == v).map(|(_, w)| *w).sum()
    }

    fn internal(&self) -> std::ops::Range<usize> {
        4..4 + self.n
    }

    /// Internal neighbours of a vertex with their weights.
    fn internal_edges(&self, v: usize) -> Vec<(usize, i64)> {
        self.w
            .iter()
            .filter_map(|((a, b), w)| {
                if *a == v && *b >= 4 {
                    Some((*b, *w))
                } else if *b == v && *a >= 4 {
                    Some((*a, *w))
                } else {
                    None
                }
            })
            .collect()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..4 + self.n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for (a, b) in self.w.keys() {
            if *a >= 4 && *b >= 4 {
                let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
                parent[ra] = rb;
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in self.internal() {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    /// The component on `verts` with its edges to the labels; label-label edges dropped.
    fn sub(&self, verts: &[usize]) -> Core {
        let mut map = HashMap::new();
        for (i, v) in verts.iter().enumerate() {
            map.insert(*v, 4 + i);
        }
        let m = |v: usize| if v < 4 { Some(v) } else { map.get(&v).copied() };
        let mut c = Core { n: verts.len(), w: BTreeMap::new() };
        for ((a, b), w) in &self.w {
            if *a < 4 && *b < 4 {
                continue;
            }
            if let (Some(x), Some(y)) = (m(*a), m(*b)) {
                c.add(x, y, *w);
            }
        }
        c
    }

    /// Adds `z∞` and the triangle on `0, 1, ∞` so that external valencies vanish.
    fn complete_labels(&self) -> Core {
        let mut c = self.clone();
        let nz = c.valency(Z);
        c.add(Z, INF, -nz);
        let (n0, n1, ninf) = (c.valency(0), c.valency(1), c.valency(INF));
        c.add(0, 1, (-n0 - n1 + ninf) / 2);
        c.add(0, INF, (-n0 + n1 - ninf) / 2);
        c.add(1, INF, (n0 - n1 - ninf) / 2);
        c
    }

    fn permute(&self, sigma: LabelPerm) -> Core {
        let m = |v: usize| if v < 4 { sigma.apply(Label::ALL[v]).index() } else { v };
        let mut c = Core { n: self.n, w: BTreeMap::new() };
        for ((a, b), w) in &self.w {
            c.add(m(*a), m(*b), *w);
        }
        c
    }

    /// Moves internal vertex `v` into the (edge-free) slot `z`.
    fn relabel_z(&self, v: usize) -> Core {
        let m = |x: usize| {
            if x == v {
                Z
            } else if x > v {
                x - 1
            } else {
                x
            }
        };
        let mut c = Core { n: self.n - 1, w: BTreeMap::new() };
        for ((a, b), w) in &self.w {
            if *a == Z || *b == Z {
                continue;
            }
            c.add(m(*a), m(*b), *w);
        }
        c
    }

    /// Canonical form under permutations of internal vertices.
    fn canonical(&self) -> Core {
        if self.n == 0 {
            return self.clone();
        }
        let colors = self.refine(vec![0; self.n]);
        let mut best: Option<Core> = None;
        self.search(colors, &mut best);
        best.expect("at least one leaf")
    }

    fn signature(&self, v: usize, colors: &[u64]) -> (u64, Vec<(u64, i64)>) {
        let mut nb: Vec<(u64, i64)> = Vec::new();
        for ((a, b), w) in &self.w {
            let other = if *a == v {
                *b
            } else if *b == v {
                *a
            } else {
                continue;
            };
            let c = if other < 4 { other as u64 } else { 4 + colors[other - 4] };
            nb.push((c, *w));
        }
        nb.sort();
        (colors[v - 4], nb)
    }

    fn refine(&self, mut colors: Vec<u64>) -> Vec<u64> {
        loop {
            let sigs: Vec<_> = self.internal().map(|v| self.signature(v, &colors)).collect();
            let distinct: BTreeSet<_> = sigs.iter().cloned().collect();
            let rank: BTreeMap<_, u64> = distinct.into_iter().enumerate().map(|(i, s)| (s, i as u64)).collect();
            let next: Vec<u64> = sigs.iter().map(|s| rank[s]).collect();
            let before = colors.iter().collect::<BTreeSet<_>>().len();
            let after = next.iter().collect::<BTreeSet<_>>().len();
            colors = next;
            if after == before {
                return colors;
            }
        }
    }

    fn search(&self, colors: Vec<u64>, best: &mut Option<Core>) {
        let mut count: BTreeMap<u64, usize> = BTreeMap::new();
        for c in &colors {
            *count.entry(*c).or_default() += 1;
        }
        let Some((&cell, _)) = count.iter().find(|(_, n)| **n > 1) else {
            let c = self.relabel_internal(&colors);
            if best.as_ref().map_or(true, |b| c < *b) {
                *best = Some(c);
            }
            return;
        };
        for v in 0..self.n {
            if colors[v] != cell {
                continue;
            }
            let mut next: Vec<u64> = colors.iter().map(|c| 2 * c + 1).collect();
            next[v] = 2 * cell;
            let refined = self.refine(next);
            self.search(refined, best);
        }
    }

    fn relabel_internal(&self, colors: &[u64]) -> Core {
        let m = |x: usize| if x < 4 { x } else { 4 + colors[x - 4] as usize };
        let mut c = Core { n: self.n, w: BTreeMap::new() };
        for ((a, b), w) in &self.w {
            c.add(m(*a), m(*b), *w);
        }
        c
    }
}

// ---------------------------------------------------------------------------
// Append-edge operator and sequential functions.

fn prefactor_monomial(zero: i32, one: i32, c: &MzvExpr) -> AExpr {
    AExpr::monomial(zero, zero, one, one, &SvExpr::constant(c.clone()))
}

/// `f_{G₁} = -(1/(2(z-z̄))) (∫₀dz∫₀dz̄ + ∫₀dz̄∫₀dz) (z-z̄) f_G` for `f_G = g/(z-z̄)`.
pub fn append_edge(f: &BElement) -> Result<BElement, Error> {
    let mut out = SvExpr::zero();
    for (p, s) in f.numerator.iter() {
        let pole = |q: Pole| match (q.zero, q.one) {
            (-1, 0) => Some(0u8),
            (0, -1) => Some(1u8),
            _ => None,
        };
        let (Some(a), Some(b)) = (pole(p.hol), pole(p.anti)) else {
            return Err(Error::NotAppendable(format!("prefactor {}", AExpr::monomial(p.hol.zero, p.anti.zero, p.hol.one, p.anti.one, &SvExpr::one()))));
        };
        let t = s.antihol_integrate(b).hol_integrate(a).add(&s.hol_integrate(a).antihol_integrate(b));
        out.add_assign(&t);
    }
    let g = AExpr::from_sv(out.scale_q(&(-Q::one() / qi(2))));
    BElement::new(g)
}

/// `-(1/(z-z̄)) ∂_z ∂_z̄ (z-z̄) f`, the inverse of [`append_edge`].
pub fn edge_operator(f: &BElement) -> BElement {
    BElement { numerator: f.numerator.derive(Var::Antihol).derive(Var::Hol).neg() }
}

/// `1/(zz̄)`, `1/((z-1)(z̄-1))` or `1/(zz̄(z-1)(z̄-1))` for the letters `0`, `1`, `2`.
pub fn letter_factor(a: u8) -> AExpr {
    let one = MzvExpr::one();
    match a {
        0 => prefactor_monomial(-1, 0, &one),
        1 => prefactor_monomial(0, -1, &one),
        _ => prefactor_monomial(-1, -1, &one),
    }
}

/// `f_I = 1/(zz̄(z-1)(z̄-1))` as a B-element.
pub fn f_i() -> BElement {
    BElement { numerator: AExpr::z_minus_zb().mul(&letter_factor(2)) }
}

/// The sequential function `f_w`.
pub fn sequential_function(w: &SeqWord) -> Result<BElement, Error> {
    if w.letters().first() != Some(&2) {
        return Err(Error::DivergentWord);
    }
    static MEMO: OnceLock<Mutex<HashMap<SeqWord, BElement>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(f) = memo.lock().unwrap().get(w) {
        return Ok(f.clone());
    }
    let n = w.len();
    let prev = if n == 1 {
        BElement { numerator: AExpr::z_minus_zb() }
    } else {
        sequential_function(&SeqWord::new(w.letters()[..n - 1].to_vec()))?
    };
    let h = BElement { numerator: prev.numerator.mul(&letter_factor(w.letters()[n - 1])) };
    let f = append_edge(&h)?;
    memo.lock().unwrap().insert(w.clone(), f.clone());
    Ok(f)
}

/// `g(φ(z)) (cz+d)(cz̄+d)/det` for `φ(z) = (az+b)/(cz+d)`.
fn transform_numerator(g: &AExpr, m: Mobius) -> Result<AExpr, Error> {
    let (sign, zero, one) = match m {
        Mobius::Id => return Ok(g.clone()),
        Mobius::OneMinusZ => (-1, 0, 0),
        Mobius::ZOverZMinusOne => (-1, 0, 1),
        Mobius::OneOverZ => (-1, 1, 0),
        Mobius::OneOverOneMinusZ => (1, 0, 1),
        Mobius::ZMinusOneOverZ => (1, 1, 0),
    };
    Ok(g.s3_transform(m)?.mul(&prefactor_monomial(zero, one, &MzvExpr::integer(sign))))
}

/// `f(φ(z))` for a B-element.
pub fn transform_b(f: &BElement, m: Mobius) -> Result<BElement, Error> {
    Ok(BElement { numerator: transform_numerator(&f.numerator, m)? })
}

// ---------------------------------------------------------------------------
// Construction.

type Memo<T> = OnceLock<Mutex<HashMap<Core, Result<T, Error>>>>;

fn memo_get<T: Clone>(memo: &'static Memo<T>, key: &Core) -> Option<Result<T, Error>> {
    memo.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap().get(key).cloned()
}

fn memo_put<T: Clone>(memo: &'static Memo<T>, key: Core, v: &Result<T, Error>) {
    memo.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap().insert(key, v.clone());
}

/// Numerator of the function of a graph: label edges at `z` become rational factors,
/// components away from `z` become periods, the component at `z` is constructed.
fn function_of(core: &Core) -> Result<AExpr, Error> {
    static MEMO: Memo<AExpr> = OnceLock::new();
    let key = core.canonical();
    if let Some(r) = memo_get(&MEMO, &key) {
        return r;
    }
    let r = function_uncached(&key);
    memo_put(&MEMO, key, &r);
    r
}

fn function_uncached(core: &Core) -> Result<AExpr, Error> {
    let pieces = split_at_z(core)?;
    let mut g = match pieces.z_parts.as_slice() {
        [] => AExpr::z_minus_zb(),
        [h] => h.clone(),
        _ => return Err(Error::NotConstructible("z joins two components".into())),
    };
    g = g.mul(&pieces.factor);
    Ok(g)
}

struct Pieces {
    /// Label factor times the constants of components away from `z`.
    factor: AExpr,
    /// Numerators of the components meeting `z`.
    z_parts: Vec<AExpr>,
}

fn split_at_z(core: &Core) -> Result<Pieces, Error> {
    let (a, b) = (core.weight(0, Z), core.weight(1, Z));
    let mut c = MzvExpr::one();
    let mut z_parts = Vec::new();
    for comp in core.components() {
        let sub = core.sub(&comp);
        if sub.internal_edges(Z).is_empty() {
            let p = component_period(&sub)?;
            c = c.mul_reduced(&p);
        } else {
            z_parts.push(z_component(&sub)?);
        }
    }
    Ok(Pieces { factor: prefactor_monomial(-(a as i32), -(b as i32), &c), z_parts })
}

/// A connected component meeting `z`, with internal valencies 4.
fn z_component(core: &Core) -> Result<AExpr, Error> {
    static MEMO: Memo<AExpr> = OnceLock::new();
    let key = core.canonical();
    if let Some(r) = memo_get(&MEMO, &key) {
        return r;
    }
    let r = z_component_uncached(&key);
    memo_put(&MEMO, key, &r);
    r
}

fn z_component_uncached(core: &Core) -> Result<AExpr, Error> {
    let full = core.complete_labels();
    let mut last = Error::NotConstructible("no label permutation exposes an appendable edge".into());
    let mut candidates: Vec<(usize, LabelPerm)> = Vec::new();
    for sigma in LabelPerm::all() {
        let pc = full.permute(sigma);
        let ze = pc.internal_edges(Z);
        let rank = match ze.as_slice() {
            [(_, 1)] => 0,
            [] => 1,
            _ => continue,
        };
        candidates.push((rank, sigma));
    }
    candidates.sort_by_key(|(r, s)| (*r, *s != LabelPerm::IDENTITY));
    for (_, sigma) in candidates {
        let attempt = if sigma == LabelPerm::IDENTITY {
            let (v, _) = full.internal_edges(Z)[0];
            let below = full.relabel_z(v);
            function_of(&below).and_then(|g| append_edge(&BElement { numerator: g })).map(|f| f.numerator)
        } else {
            function_of(&full.permute(sigma)).and_then(|g| transform_numerator(&g, sigma.mobius()))
        };
        match attempt {
            Ok(g) => return Ok(g),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// The period of a component without `z`, integrating one of its vertices as `z`.
fn component_period(core: &Core) -> Result<MzvExpr, Error> {
    static MEMO: Memo<MzvExpr> = OnceLock::new();
    let key = core.canonical();
    if let Some(r) = memo_get(&MEMO, &key) {
        return r;
    }
    let mut order: Vec<usize> = key.internal().collect();
    order.sort_by_key(|v| std::cmp::Reverse(key.components_without(*v)));
    let mut r = Err(Error::NotConstructible("no vertex gives a constructible period".into()));
    for v in order {
        r = period_with_z(&key.relabel_z(v));
        if r.is_ok() {
            break;
        }
    }
    memo_put(&MEMO, key, &r);
    r
}

impl Core {
    /// Balance score of the components left after moving `v` to `z`.
    fn components_without(&self, v: usize) -> (bool, usize) {
        let comps = self.relabel_z(v).components();
        (comps.len() <= 2, comps.iter().map(Vec::len).min().unwrap_or(0))
    }
}

/// `(1/π²)∫d⁴z ∏f_i(z)·(label factors)` as `-(1/2)·(1/π)∫ (z-z̄)² … d²z`.
fn period_with_z(core: &Core) -> Result<MzvExpr, Error> {
    let pieces = split_at_z(core)?;
    let x = match pieces.z_parts.as_slice() {
        [] => AExpr::z_minus_zb().mul(&AExpr::z_minus_zb()),
        [h] => AExpr::z_minus_zb().mul(h),
        [h1, h2] => h1.mul(h2),
        _ => return Err(Error::NotConstructible("more than two components".into())),
    };
    let x = x.mul(&pieces.factor);
    let plane = x.integrate_plane()?;
    if !plane.convergent {
        return Err(Error::Divergent("plane integral".into()));
    }
    Ok(plane.value.scale(&(-Q::one() / qi(2))))
}

/// The completed graphical function of a graph with labels `0, 1, z` (completed if needed).
pub fn construct_graphical_function(g: &GfGraph) -> Result<BElement, Error> {
    let g = g.complete()?;
    let conv = g.check_convergence();
    if !conv.is_convergent() {
        return Err(Error::Divergent(conv.to_string()));
    }
    let core = Core::from_graph(&g)?;
    Ok(BElement { numerator: function_of(&core)? })
}

// ---------------------------------------------------------------------------
// Periods.

/// Exact period with its reduction, numeric value and construction notes.
#[derive(Clone, Debug)]
pub struct PeriodResult {
    pub value: MzvExpr,
    pub reduced: MzvExpr,
    pub numeric: Real,
    pub provenance: Vec<String>,
}

impl PeriodResult {
    fn new(value: MzvExpr, provenance: Vec<String>) -> PeriodResult {
        let reduced = value.reduce();
        let numeric = mzv_numeric(&reduced, &NumericContext::default());
        PeriodResult { value, reduced, numeric, provenance }
    }
}

/// Subsets of a completed graph violating `2N < 4(V-1)` for `2 ≤ V ≤ |Γ|-2`.
pub fn check_primitive(g: &GfGraph) -> Convergence {
    let n = g.vertices.len();
    for mask in 1u64..(1u64 << n) {
        let t: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if t.len() < 2 || t.len() + 2 > n {
            continue;
        }
        let e: i64 = g.edges.iter().filter(|e| t.contains(&e.u) && t.contains(&e.v)).map(|e| e.w).sum();
        if 2 * e >= 4 * (t.len() as i64 - 1) {
            return Convergence::Ultraviolet(t.iter().map(|v| g.vertices[*v].clone()).collect());
        }
    }
    Convergence::Convergent
}

/// Period of a completed primitive graph by integrating over the vertex labelled `z`.
/// Without labels, 4-subsets are tried in order of component balance.
pub fn period_of_graph(g: &GfGraph, labels: Option<[usize; 4]>) -> Result<PeriodResult, Error> {
    let n = g.vertices.len();
    let fixed: Vec<usize> = (0..n).filter(|v| g.valency(*v) != 4).collect();
    let valid = (fixed.is_empty() || (fixed.len() == 3 && fixed.iter().all(|v| g.valency(*v) == 0)))
        && (0..n).all(|v| g.valency(v) == 4 || fixed.contains(&v));
    if !valid {
        return Err(Error::Invalid("period needs a completed graph".into()));
    }
    let prim = check_primitive(g);
    if !prim.is_convergent() {
        return Err(Error::Divergent(prim.to_string()));
    }
    let choices: Vec<[usize; 4]> = match labels {
        Some(l) => vec![l],
        None => label_choices(g, &fixed),
    };
    let mut last = Error::NotConstructible("no labelling".into());
    for l in choices {
        let mut h = g.clone();
        h.labels = l.map(Some);
        let core = Core::from_graph(&h)?;
        let comps = core.components().len();
        if comps > 2 {
            last = Error::NotConstructible(format!("{comps} components"));
            continue;
        }
        match period_with_z(&core) {
            Ok(v) => {
                let names = Label::ALL.map(|a| format!("{}={}", a.name(), g.vertices[l[a.index()]]));
                let prov = vec![format!("labels {}", names.join(" ")), format!("components {comps}")];
                return Ok(PeriodResult::new(v, prov));
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn label_choices(g: &GfGraph, fixed: &[usize]) -> Vec<[usize; 4]> {
    let n = g.vertices.len();
    let mut out: Vec<((bool, usize), [usize; 4])> = Vec::new();
    let mut consider = |l: [usize; 4]| {
        let mut h = g.clone();
        h.labels = l.map(Some);
        if let Ok(core) = Core::from_graph(&h) {
            let comps = core.components();
            if comps.len() <= 2 {
                let min = comps.iter().map(Vec::len).min().unwrap_or(0);
                out.push(((comps.len() == 2, min), l));
            }
        }
    };
    if fixed.len() == 3 {
        for z in (0..n).filter(|v| !fixed.contains(v)) {
            consider([fixed[0], fixed[1], z, fixed[2]]);
        }
    } else {
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for z in (0..n).filter(|v| ![a, b, c].contains(v)) {
                        consider([a, b, z, c]);
                    }
                }
            }
        }
    }
    out.sort_by(|x, y| y.0.cmp(&x.0));
    out.into_iter().map(|(_, l)| l).collect()
}

fn check_seq_period_word(w: &SeqWord) -> Result<(), Error> {
    let l = w.letters();
    if l.len() < 2 || l[0] != 2 || l[l.len() - 1] != 2 {
        return Err(Error::Invalid(format!("period word must begin and end with 2: {w}")));
    }
    Ok(())
}

/// `P(G_w) = f_{u1}(0)` for `w = u2`.
pub fn sequential_period(w: &SeqWord) -> Result<PeriodResult, Error> {
    check_seq_period_word(w)?;
    let mut u = w.letters().to_vec();
    *u.last_mut().unwrap() = 1;
    let u = SeqWord::new(u);
    let f = sequential_function(&u)?;
    let value = f.value_at(Point::Zero)?;
    let weight = 2 * w.len() - 1;
    if value.homogeneous_weight() != Some(weight) {
        return Err(Error::Invalid(format!("period of {w} is not homogeneous of weight {weight}")));
    }
    Ok(PeriodResult::new(value, vec![format!("f_{u}(0)")]))
}

/// `P(G_w) = f_{u0}(1)` for `w = u2`.
pub fn sequential_period_at_one(w: &SeqWord) -> Result<PeriodResult, Error> {
    check_seq_period_word(w)?;
    let mut u = w.letters().to_vec();
    *u.last_mut().unwrap() = 0;
    let u = SeqWord::new(u);
    let value = sequential_function(&u)?.value_at(Point::One)?;
    Ok(PeriodResult::new(value, vec![format!("f_{u}(1)")]))
}

/// The sequential word whose period is the zig-zag period `P(Z_n)`, `n ≥ 3`.
pub fn zigzag_word(n: usize) -> Result<SeqWord, Error> {
    if n < 3 {
        return Err(Error::Invalid(format!("zig-zag needs n ≥ 3, got {n}")));
    }
    let mut l = vec![2];
    for _ in 0..(n - 3) / 2 {
        l.extend([0, 1]);
    }
    if n % 2 == 0 {
        l.push(0);
    }
    l.push(2);
    Ok(SeqWord::new(l))
}

/// `P(Z_n) = 4 (2n-2)!/(n!(n-1)!) (1 - (1-(-1)^n)/2^{2n-3}) ζ(2n-3)`.
pub fn zigzag_closed_form(n: usize) -> Result<MzvExpr, Error> {
    if n < 3 {
        return Err(Error::Invalid(format!("zig-zag needs n ≥ 3, got {n}")));
    }
    let n64 = n as u64;
    let catalan = Q::new(binomial(2 * n64 - 2, n64 - 1), BigInt::from(n64));
    let odd = if n % 2 == 1 { Q::new(BigInt::from(2), BigInt::one() << (2 * n - 3)) } else { Q::zero() };
    let c = qi(4) * catalan * (Q::one() - odd);
    Ok(MzvExpr::zeta(&[2 * n as u32 - 3]).scale(&c))
}

/// `ζ(2^a, 3, 2^b) ≡ 2(-1)^r [C(2r, 2a+2) - (1 - 2^{-2r}) C(2r, 2b+1)] ζ(2r+1)` modulo products.
pub fn zagier_mod_products(a: usize, b: usize) -> MzvExpr {
    let r = (a + b + 1) as u64;
    let t = Q::one() - Q::new(BigInt::one(), BigInt::one() << (2 * r));
    let bracket = Q::from_integer(binomial(2 * r, 2 * a as u64 + 2)) - t * Q::from_integer(binomial(2 * r, 2 * b as u64 + 1));
    let sign = if r % 2 == 0 { 2 } else { -2 };
    MzvExpr::zeta(&[2 * r as u32 + 1]).scale(&(bracket * qi(sign)))
}

/// `2(-1)^{|w|}(ζ_{w̃01w0} - ζ_{w̃10w0})`, letters 2 expanded, singular words regularized.
pub fn period_mod_products(w: &SeqWord) -> MzvExpr {
    let rev = w.reverse();
    let word = |mid: [u8; 2]| {
        let mut l = rev.letters().to_vec();
        l.extend(mid);
        l.extend(w.letters());
        l.push(0);
        MzvExpr::from_word_poly(&expand_letter2(&SeqWord::new(l)))
    };
    let sign = if w.len() % 2 == 0 { 2 } else { -2 };
    (&word([0, 1]) - &word([1, 0])).scale(&qi(sign)).reduce()
}

/// Zig-zag periods modulo products as the two `ζ(2…,3,2…)` terms.
pub fn zigzag_mod_products_terms(n: usize) -> Result<[(i64, usize, usize); 2], Error> {
    if n < 4 {
        return Err(Error::Invalid(format!("needs n ≥ 4, got {n}")));
    }
    Ok(if n % 2 == 1 {
        [(2, (n - 3) / 2, (n - 3) / 2), (-2, (n - 5) / 2, (n - 1) / 2)]
    } else {
        [(2, (n - 4) / 2, (n - 2) / 2), (-2, (n - 2) / 2, (n - 4) / 2)]
    })
}

/// `ζ(2^a, 3, 2^b)`.
pub fn zeta_2_3_2(a: usize, b: usize) -> MzvExpr {
    let mut parts = vec![2u32; a];
    parts.push(3);
    parts.extend(std::iter::repeat(2).take(b));
    MzvExpr::zeta(&parts)
}

/// Sequential words that are planar duals of primitive φ⁴ graphs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Phi4Class {
    ZigZag(usize),
    A(usize, usize),
    B(usize, usize),
    None,
}

impl fmt::Display for Phi4Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi4Class::ZigZag(n) => write!(f, "zigzag({n})"),
            Phi4Class::A(m, n) => write!(f, "A({m},{n})"),
            Phi4Class::B(m, n) => write!(f, "B({m},{n})"),
            Phi4Class::None => f.write_str("none"),
        }
    }
}

pub fn classify_phi4_word(w: &SeqWord) -> Phi4Class {
    let l = w.letters();
    if l.len() < 2 || l[0] != 2 || l[l.len() - 1] != 2 {
        return Phi4Class::None;
    }
    let inner = &l[1..l.len() - 1];
    let alternating = |s: &[u8]| s.iter().all(|a| *a < 2) && s.windows(2).all(|p| p[0] != p[1]);
    let twos: Vec<usize> = (0..inner.len()).filter(|i| inner[*i] == 2).collect();
    match twos.as_slice() {
        [] if alternating(inner) => Phi4Class::ZigZag(inner.len() + 3),
        [i] => {
            let (x, y) = (&inner[..*i], &inner[i + 1..]);
            if !alternating(x) || !alternating(y) {
                return Phi4Class::None;
            }
            let (m, n) = (x.len(), y.len());
            match (x.last(), y.first()) {
                (Some(a), Some(b)) if a == b => Phi4Class::B(m, n),
                _ => Phi4Class::A(m, n),
            }
        }
        _ => Phi4Class::None,
    }
}
