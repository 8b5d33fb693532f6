use criterion::{criterion_group, criterion_main, Criterion};
use gfperiod_core::graphfn::{append_edge, letter_factor, sequential_function};
use gfperiod_core::mzv::MzvExpr;
use gfperiod_core::numeric::{eval_l, NumericContext};
use gfperiod_core::ratfield::{AExpr, BElement};
use gfperiod_core::svmp::p_basis;
use gfperiod_core::{SeqWord, Word};
use std::hint::black_box;

fn bench_append_edge(c: &mut Criterion) {
    let w: SeqWord = "2012".parse().unwrap();
    let f = BElement { numerator: sequential_function(&w).unwrap().numerator.mul(&letter_factor(0)) };
    c.bench_function("append_edge f_2012 * letter 0", |b| b.iter(|| append_edge(black_box(&f)).unwrap()));
}

fn bench_integrate_plane(c: &mut Criterion) {
    let n = p_basis("01".parse().unwrap()).sub(&p_basis("10".parse().unwrap()));
    let d4 = AExpr::from_sv(n.mul(&n).mul(&n).mul(&n));
    c.bench_function("integrate_plane D4", |b| b.iter(|| black_box(&d4).integrate_plane().unwrap()));
}

fn bench_reduce(c: &mut Criterion) {
    let e = MzvExpr::zeta(&[3, 5]).mul_reduced(&MzvExpr::zeta(&[2, 2]));
    c.bench_function("reduce z(3,5)*z(2,2)", |b| b.iter(|| black_box(&e).reduce()));
}

fn bench_eval_l(c: &mut Criterion) {
    let ctx = NumericContext::new(40);
    let z = ctx.complex(0.3, 0.4);
    let w: Word = "00101".parse().unwrap();
    c.bench_function("eval_l 00101", |b| b.iter(|| eval_l(black_box(w), &z).unwrap()));
}

criterion_group!(benches, bench_append_edge, bench_integrate_plane, bench_reduce, bench_eval_l);
criterion_main!(benches);
