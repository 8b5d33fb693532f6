use gfperiod_core::graphfn::{
    construct_graphical_function, sequential_function, transform_b, GfGraph, Label, LabelPerm,
};
use gfperiod_core::mzv::MzvExpr;
use gfperiod_core::numeric::{eval_l, NumericContext};
use gfperiod_core::ratfield::{plane_from_primitive, AExpr};
use gfperiod_core::svmp::{p_basis, Point, SvExpr, Var};
use gfperiod_core::words::{antipode, deconcatenations, shuffle};
use gfperiod_core::{SeqWord, Word, WordPoly, Q};
use num_bigint::BigInt;
use proptest::prelude::*;

fn word(max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..2, 0..=max).prop_map(|l| Word::from_letters(&l))
}

fn nonempty_word(max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..2, 1..=max).prop_map(|l| Word::from_letters(&l))
}

fn binomial(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::from(1), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn small_q() -> impl Strategy<Value = Q> {
    (-6i64..7, 1i64..5).prop_map(|(p, q)| Q::new(p.into(), q.into()))
}

fn mzv_symbols() -> impl Strategy<Value = MzvExpr> {
    prop::collection::vec((nonempty_word(6), small_q()), 1..4).prop_map(|ts| {
        let mut e = MzvExpr::zero();
        for (w, c) in ts {
            e.add_term(w, c);
        }
        e
    })
}

fn sv_expr() -> impl Strategy<Value = SvExpr> {
    prop::collection::vec((word(3), word(3), -3i64..4), 1..4).prop_map(|ts| {
        let mut e = SvExpr::zero();
        for (u, v, c) in ts {
            e.add_term(u, v, &MzvExpr::integer(c));
        }
        e
    })
}

fn a_expr() -> impl Strategy<Value = AExpr> {
    prop::collection::vec(((-2i32..2, -2i32..2, -2i32..1, -2i32..1), sv_expr()), 1..3).prop_map(|ts| {
        let mut e = AExpr::zero();
        for ((i, j, k, l), s) in ts {
            e.add_assign(&AExpr::monomial(i, j, k, l, &s));
        }
        e
    })
}

fn seq_word(max: usize) -> impl Strategy<Value = SeqWord> {
    prop::collection::vec(0u8..3, 0..max).prop_map(|rest| {
        let mut l = vec![2u8];
        l.extend(rest);
        SeqWord::new(l)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shuffle_commutative_associative(u in word(4), v in word(4), x in word(4)) {
        prop_assert_eq!(shuffle(u, v), shuffle(v, u));
        let left = shuffle(u, v).shuffle(&WordPoly::word(x));
        let right = WordPoly::word(u).shuffle(&shuffle(v, x));
        prop_assert_eq!(left, right);
    }

    #[test]
    fn shuffle_mass(u in word(6), v in word(6)) {
        let mass = shuffle(u, v).mass();
        prop_assert_eq!(mass, Q::from_integer(binomial(u.len() + v.len(), u.len())));
    }

    #[test]
    fn antipode_identity(w in nonempty_word(5)) {
        let mut total = WordPoly::zero();
        for (a, b) in deconcatenations(w) {
            total.add_scaled(&antipode(a).shuffle(&WordPoly::word(b)), &Q::from_integer(1.into()));
        }
        prop_assert!(total.is_zero());
    }

    #[test]
    fn regularization_is_idempotent_and_linear(a in mzv_symbols(), b in mzv_symbols(), c in small_q()) {
        let r = a.regularize();
        prop_assert_eq!(r.regularize(), r.clone());
        let lhs = (&a + &b.scale(&c)).regularize();
        prop_assert_eq!(lhs, &r + &b.regularize().scale(&c));
    }

    #[test]
    fn mod_ideal_is_a_ring_congruence(a in mzv_symbols(), b in mzv_symbols(), c in mzv_symbols(), n in 2usize..5) {
        let (a, b, c) = (a.reduce(), b.reduce(), c.reduce());
        let lhs = a.mul_reduced(&(&b + &c)).mod_ideal(n);
        let rhs = (&a.mod_ideal(n).mul_reduced(&b.mod_ideal(n)) + &a.mod_ideal(n).mul_reduced(&c.mod_ideal(n))).mod_ideal(n);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn mixed_partials_commute(w in nonempty_word(5)) {
        let p = AExpr::from_sv((*p_basis(w)).clone());
        prop_assert_eq!(p.derive(Var::Hol).derive(Var::Antihol), p.derive(Var::Antihol).derive(Var::Hol));
    }

    #[test]
    fn swap_is_an_involution(a in a_expr()) {
        prop_assert_eq!(a.swap().swap(), a);
    }

    #[test]
    fn derive_after_integrate(a in a_expr(), hol in any::<bool>()) {
        let var = if hol { Var::Hol } else { Var::Antihol };
        let f = a.integrate(var, Point::Zero).unwrap();
        prop_assert_eq!(f.derive(var), a);
    }

    #[test]
    fn plane_value_ignores_holomorphic_terms(i in -3i32..3, k in -3i32..0, c in -5i64..6) {
        let n = p_basis("01".parse().unwrap()).sub(&p_basis("10".parse().unwrap()));
        let f = AExpr::from_sv(n.mul(&n).mul(&n).mul(&n)).integrate(Var::Antihol, Point::Zero).unwrap();
        let base = plane_from_primitive(&f).unwrap();
        let g = f.add(&AExpr::monomial(i, 0, 0, 0, &SvExpr::constant(MzvExpr::integer(c))))
            .add(&AExpr::monomial(0, 0, k, 0, &SvExpr::constant(MzvExpr::integer(c))));
        prop_assert_eq!(plane_from_primitive(&g).unwrap().value, base.value);
    }

    #[test]
    fn sequential_functions_are_antisymmetric(w in seq_word(5)) {
        let f = sequential_function(&w).unwrap();
        prop_assert_eq!(f.numerator.swap(), f.numerator.neg());
    }

    #[test]
    fn completion_is_idempotent(edges in prop::collection::vec((0usize..6, 0usize..6, 1i64..3), 1..9)) {
        let names = ["0", "1", "z", "a", "b", "c"];
        let edges: Vec<_> = edges.into_iter().filter(|(u, v, _)| u != v).map(|(u, v, w)| (names[u], names[v], w)).collect();
        let g = GfGraph::new(&names, &edges, &[(Label::Zero, "0"), (Label::One, "1"), (Label::Z, "z")]).unwrap();
        let c = g.complete().unwrap();
        prop_assert!(c.is_completed());
        prop_assert_eq!(c.complete().unwrap(), c);
    }

    #[test]
    fn label_permutation_invariance(w in seq_word(3), k in 0usize..24) {
        let g = GfGraph::sequential(&w).complete().unwrap();
        let f = construct_graphical_function(&g).unwrap();
        let sigma = LabelPerm::all()[k];
        let (h, m) = g.permute_labels(sigma);
        let fh = construct_graphical_function(&h).unwrap();
        prop_assert_eq!(transform_b(&fh, m).unwrap(), f);
    }

    #[test]
    fn numeric_shuffle_consistency(u in nonempty_word(3), v in nonempty_word(3), x in -0.4f64..0.4, y in 0.05f64..0.4) {
        let ctx = NumericContext::new(20);
        let z = ctx.complex(x, y);
        let lhs = &eval_l(u, &z).unwrap() * &eval_l(v, &z).unwrap();
        let mut rhs = ctx.complex(0.0, 0.0);
        for (w, c) in shuffle(u, v).iter() {
            rhs = &rhs + &eval_l(*w, &z).unwrap().scale_q(c);
        }
        prop_assert!((&lhs - &rhs).abs_f64() < 1e-12);
    }
}
