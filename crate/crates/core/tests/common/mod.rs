#![allow(dead_code)]

use std::path::PathBuf;

use padic_theta::io::GroupSpec;
use padic_theta::localfield::LocalFieldElement as El;
use padic_theta::projline::{Divisor0, ProjPoint};
use padic_theta::schottky::SchottkyGroup;
use rand::Rng;

pub fn fixture(name: &str) -> GroupSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"));
    GroupSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn group(name: &str, prec: i64) -> SchottkyGroup {
    fixture(name).build(prec).unwrap()
}

/// A random finite point of the open fundamental domain, drawn from
/// `a / p^s` with `a` below `p^8` and `s` in `0..=2`.
pub fn random_point<R: Rng>(g: &SchottkyGroup, rng: &mut R) -> ProjPoint {
    let f = g.field();
    let n = g.precision();
    let p = f.prime() as i64;
    loop {
        let a = rng.gen_range(0..p.pow(8));
        let s = rng.gen_range(0..=2);
        let x = El::from_int(f, a, n).mul(&El::pi_pow(f, -s * f.ramification() as i64, n + 8));
        let z = ProjPoint::Finite(x.reduce_to(n));
        if g.letters().iter().all(|&l| !g.ball(l).closure().contains(&z)) {
            return z;
        }
    }
}

/// `(a) - (b)` with distinct random points of `F°`.
pub fn random_divisor<R: Rng>(g: &SchottkyGroup, rng: &mut R) -> Divisor0 {
    loop {
        let a = random_point(g, rng);
        let b = random_point(g, rng);
        if !a.same(&b) {
            return Divisor0::elementary(a, b).unwrap();
        }
    }
}

/// A pair of random divisors with disjoint supports.
pub fn random_pair<R: Rng>(g: &SchottkyGroup, rng: &mut R) -> (Divisor0, Divisor0) {
    loop {
        let d = random_divisor(g, rng);
        let e = random_divisor(g, rng);
        if !d.support_meets(&e) {
            return (d, e);
        }
    }
}

/// `ord(x - y)`, or the smaller precision when they agree.
pub fn agreement(x: &El, y: &El) -> i64 {
    x.sub(y).ord_or_prec()
}

/// `ord(x/y - 1)`.
pub fn rel_agreement(x: &El, y: &El) -> i64 {
    let one = El::one(x.field(), x.precision());
    x.div(y).unwrap().sub(&one).ord_or_prec()
}
