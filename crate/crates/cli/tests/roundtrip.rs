use gfperiod_cli::{parse_expression, Value};
use gfperiod_core::mzv::MzvExpr;
use gfperiod_core::ratfield::{AExpr, BElement};
use gfperiod_core::svmp::SvExpr;
use gfperiod_core::{Word, Q};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..2, 0..4).prop_map(|l| Word::from_letters(&l))
}

fn mzv() -> impl Strategy<Value = MzvExpr> {
    let atom = prop_oneof![
        Just(vec![2u32]),
        Just(vec![3]),
        Just(vec![5]),
        Just(vec![2, 3]),
        Just(vec![3, 3]),
        Just(vec![1, 2]),
    ];
    prop::collection::vec((atom, -5i64..6, 1i64..4), 0..3).prop_map(|ts| {
        let mut e = MzvExpr::zero();
        for (c, p, q) in ts {
            e.add_assign(&MzvExpr::zeta(&c).scale(&Q::new(p.into(), q.into())));
        }
        e
    })
}

fn sv() -> impl Strategy<Value = SvExpr> {
    prop::collection::vec((word(), word(), mzv()), 1..3).prop_map(|ts| {
        let mut e = SvExpr::zero();
        for (u, v, c) in ts {
            e.add_term(u, v, &(&c + &MzvExpr::integer(1)));
        }
        e
    })
}

fn aexpr() -> impl Strategy<Value = AExpr> {
    prop::collection::vec(((-2i32..2, -2i32..2, -2i32..1, -2i32..1), sv()), 1..3).prop_map(|ts| {
        let mut e = AExpr::zero();
        for ((i, j, k, l), s) in ts {
            e.add_assign(&AExpr::monomial(i, j, k, l, &s));
        }
        e
    })
}

fn roundtrip(v: Value) -> Result<(), TestCaseError> {
    let v = v.normalize();
    let printed = v.to_string();
    let back = parse_expression(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
    prop_assert_eq!(back, v, "{}", printed);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mzv_roundtrip(e in mzv()) {
        roundtrip(Value::Mzv(e))?;
    }

    #[test]
    fn sv_roundtrip(e in sv()) {
        roundtrip(Value::Sv(e))?;
    }

    #[test]
    fn a_roundtrip(e in aexpr()) {
        roundtrip(Value::A(e))?;
    }

    #[test]
    fn b_roundtrip(e in aexpr()) {
        let g = e.sub(&e.swap());
        prop_assume!(!g.is_zero());
        roundtrip(Value::B(BElement::new(g).unwrap()))?;
    }
}
