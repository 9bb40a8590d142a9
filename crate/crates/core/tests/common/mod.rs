#![allow(dead_code)]

use dirac_split::{Complex64, Mesh, SchemeParams, SpinorField};
use proptest::prelude::*;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn amplitude(max: f64) -> impl Strategy<Value = Complex64> {
    (-max..max, -max..max).prop_map(|(a, b)| Complex64::new(a, b))
}

/// Fields with up to `max_len` cells and entries bounded by `max`.
pub fn field(max_len: usize, max: f64) -> impl Strategy<Value = SpinorField> {
    (
        prop::sample::select(vec![0.25, 0.125, 1.0 / 64.0]),
        -20i64..20,
        prop::collection::vec((amplitude(max), amplitude(max)), 1..=max_len),
    )
        .prop_map(|(tau, j0, cells)| {
            let mesh = Mesh::new(tau, j0, j0 + cells.len() as i64 - 1).unwrap();
            let (u, v) = cells.into_iter().unzip();
            SpinorField::new(mesh, u, v, 0).unwrap()
        })
}

pub fn params(max: f64) -> impl Strategy<Value = SchemeParams> {
    (0.0..max, 0.0..max, 0.0..max).prop_map(|(m, a, b)| SchemeParams::new(m, a, b).unwrap())
}

pub fn p115() -> SchemeParams {
    SchemeParams::new(1.0, 1.0, 0.5).unwrap()
}

/// `Q` by the explicit double sum over ordered pairs.
pub fn q_double_loop(a: &SpinorField, b: &SpinorField, lo: i64, hi: i64) -> f64 {
    let mut q = 0.0;
    for j in lo..=hi {
        let uj = (a.u_at(j) - b.u_at(j)).norm_sqr();
        let pj = a.u_at(j).norm_sqr() + b.u_at(j).norm_sqr();
        for k in j + 1..=hi {
            let vk = (a.v_at(k) - b.v_at(k)).norm_sqr();
            let wk = a.v_at(k).norm_sqr() + b.v_at(k).norm_sqr();
            q += uj * wk + vk * pj;
        }
    }
    q
}
