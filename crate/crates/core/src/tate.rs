//! Truncated power series on the closed unit disk `{ord(t) >= 0}`.
//!
//! Every series handled here has integral coefficients, so they live in the
//! fixed-point ring `O_K / pi^N`: a coefficient is `x0 + x1*pi` with `x0`,
//! `x1` integers reduced modulo powers of `p`. Inner loops accumulate
//! unreduced products and reduce once per output coefficient.
//!
//! Operations are exact modulo `t^(cap+1)`; the only approximation is the
//! dropped tail, whose guaranteed valuation is carried along as `tail`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::localfield::{Field, LocalFieldElement as El};
use crate::projline::Moebius;

/// `O_K / pi^N`.
#[derive(Debug)]
pub struct TateRing {
    field: Field,
    n: i64,
    two: bool,
    m0: BigInt,
    m1: BigInt,
    /// `c*p` for `pi^2 = c*p`.
    cp: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Fx {
    a: BigInt,
    b: BigInt,
}

impl Fx {
    fn zero() -> Self {
        Fx { a: BigInt::zero(), b: BigInt::zero() }
    }

    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl TateRing {
    pub fn new(field: &Field, n: i64) -> Arc<Self> {
        let (k0, k1) = field.moduli(n.max(1));
        let two = field.ramification() == 2;
        let m0 = field.p_pow(k0).clone();
        let m1 = field.p_pow(k1).clone();
        let cp = if two { field.c_residue(k0.max(1)) * BigInt::from(field.prime()) } else { BigInt::zero() };
        Arc::new(TateRing { field: field.clone(), n, two, m0, m1, cp })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Absolute precision of every coefficient, in units of `v(pi)`.
    pub fn precision(&self) -> i64 {
        self.n
    }

    fn reduce(&self, a: BigInt, b: BigInt) -> Fx {
        Fx {
            a: a.mod_floor(&self.m0),
            b: if self.two { b.mod_floor(&self.m1) } else { BigInt::zero() },
        }
    }

    /// The element and the number of its digits that are known.
    fn lift(&self, x: &El) -> Result<(Fx, i64)> {
        let (a, b, known) = x.to_integral(self.n)?;
        Ok((Fx { a, b }, known))
    }

    fn to_el(&self, x: &Fx) -> El {
        El::from_integral(&self.field, x.a.clone(), x.b.clone(), self.n)
    }

    fn lift_int(&self, k: &BigInt) -> Fx {
        self.reduce(k.clone(), BigInt::zero())
    }

    /// `acc += x*y` without reduction.
    fn mul_into(&self, acc: &mut (BigInt, BigInt), x: &Fx, y: &Fx) {
        acc.0 += &x.a * &y.a;
        if self.two {
            if !x.b.is_zero() && !y.b.is_zero() {
                acc.0 += &self.cp * (&x.b * &y.b);
            }
            acc.1 += &x.a * &y.b + &x.b * &y.a;
        }
    }

    fn mul(&self, x: &Fx, y: &Fx) -> Fx {
        let mut acc = (BigInt::zero(), BigInt::zero());
        self.mul_into(&mut acc, x, y);
        self.reduce(acc.0, acc.1)
    }

    fn add(&self, x: &Fx, y: &Fx) -> Fx {
        self.reduce(&x.a + &y.a, &x.b + &y.b)
    }

    fn sub(&self, x: &Fx, y: &Fx) -> Fx {
        self.reduce(&x.a - &y.a, &x.b - &y.b)
    }

    fn one(&self) -> Fx {
        self.reduce(BigInt::one(), BigInt::zero())
    }
}

/// A Möbius map `t ↦ (a t + b)/(1 + c t)` of the closed unit disk into
/// itself, with integral `a`, `b` and `ord(c) > 0`.
#[derive(Clone, Debug)]
pub struct UnitMoebius {
    ring: Arc<TateRing>,
    a: Fx,
    b: Fx,
    c: Fx,
    valid: i64,
}

impl UnitMoebius {
    pub fn new(ring: &Arc<TateRing>, m: &Moebius) -> Result<Self> {
        let ord_c = m.c.ord().unwrap_or(i64::MAX);
        let ord_d = m.d.ord().ok_or_else(|| Error::OutOfDomain("Moebius map has its pole at 0".into()))?;
        if ord_c <= ord_d {
            return Err(Error::OutOfDomain("Moebius map has a pole on the closed unit disk".into()));
        }
        let a = m.a.div(&m.d)?;
        let b = m.b.div(&m.d)?;
        let c = m.c.div(&m.d)?;
        if a.ord_or_prec() < 0 || b.ord_or_prec() < 0 {
            return Err(Error::OutOfDomain("Moebius map leaves the closed unit disk".into()));
        }
        let (a, va) = ring.lift(&a)?;
        let (b, vb) = ring.lift(&b)?;
        let (c, vc) = ring.lift(&c)?;
        Ok(UnitMoebius { ring: ring.clone(), a, b, c, valid: va.min(vb).min(vc) })
    }

    /// Digits of the coefficients that are known.
    pub fn valid(&self) -> i64 {
        self.valid
    }

    /// The expansion `(a t + b) Σ (-c t)^k`.
    pub fn series(&self, cap: usize, tail: i64) -> TateSeries {
        let r = &self.ring;
        let mut coeffs = vec![Fx::zero(); cap + 1];
        coeffs[0] = self.b.clone();
        if cap >= 1 {
            let neg_c = r.sub(&Fx::zero(), &self.c);
            let mut lead = r.sub(&self.a, &r.mul(&self.b, &self.c));
            for slot in coeffs.iter_mut().skip(1) {
                if lead.is_zero() {
                    break;
                }
                *slot = lead.clone();
                lead = r.mul(&lead, &neg_c);
            }
        }
        TateSeries { ring: r.clone(), coeffs, cap, tail, valid: self.valid }
    }

    /// `(M t)^k` for `k = 0..=cap`, each truncated at `cap`.
    pub fn powers(&self, cap: usize, tail: i64) -> Vec<TateSeries> {
        let mut out = Vec::with_capacity(cap + 1);
        out.push(TateSeries::one(&self.ring, cap, tail));
        for k in 1..=cap {
            let mut next = out[k - 1].clone();
            next.valid = next.valid.min(self.valid);
            next.mul_linear(&self.a, &self.b);
            next.div_one_plus(&self.c);
            out.push(next);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TateSeries {
    ring: Arc<TateRing>,
    coeffs: Vec<Fx>,
    cap: usize,
    tail: i64,
    /// Absolute precision actually known, at most the ring precision.
    valid: i64,
}

impl TateSeries {
    pub fn one(ring: &Arc<TateRing>, cap: usize, tail: i64) -> Self {
        let mut coeffs = vec![Fx::zero(); cap + 1];
        coeffs[0] = ring.one();
        TateSeries { ring: ring.clone(), coeffs, cap, tail, valid: ring.n }
    }

    /// Series from integral coefficients, padded or cut to degree `cap`.
    pub fn from_elements(ring: &Arc<TateRing>, coeffs: &[El], cap: usize, tail: i64) -> Result<Self> {
        let mut out = vec![Fx::zero(); cap + 1];
        let mut valid = ring.n;
        for (slot, c) in out.iter_mut().zip(coeffs) {
            let (x, known) = ring.lift(c)?;
            *slot = x;
            valid = valid.min(known);
        }
        Ok(TateSeries { ring: ring.clone(), coeffs: out, cap, tail, valid })
    }

    /// `(1 + q t)^n = Σ binom(n, k) q^k t^k` for integral `q`.
    pub fn linear_power(ring: &Arc<TateRing>, q: &El, n: i64, cap: usize, tail: i64) -> Result<Self> {
        let (q, known) = ring.lift(q)?;
        let mut s = TateSeries::one(ring, cap, tail);
        s.valid = known;
        let mut binom = BigInt::one();
        let mut qk = ring.one();
        for k in 1..=cap {
            binom = binom * BigInt::from(n - k as i64 + 1) / BigInt::from(k as i64);
            qk = ring.mul(&qk, &q);
            if binom.is_zero() || qk.is_zero() {
                break;
            }
            s.coeffs[k] = ring.mul(&ring.lift_int(&binom), &qk);
        }
        Ok(s)
    }

    pub fn ring(&self) -> &Arc<TateRing> {
        &self.ring
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Absolute precision to which the coefficients are known.
    pub fn valid(&self) -> i64 {
        self.valid
    }

    /// Guaranteed valuation of every dropped coefficient.
    pub fn tail(&self) -> i64 {
        self.tail
    }

    pub fn coefficient(&self, k: usize) -> El {
        self.ring.to_el(&self.coeffs[k]).reduce_to(self.valid)
    }

    pub fn coefficients(&self) -> Vec<El> {
        self.coeffs.iter().map(|c| self.ring.to_el(c)).collect()
    }

    /// Index of the last nonzero coefficient.
    pub fn effective_degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    /// In place `self *= a t + b`.
    fn mul_linear(&mut self, a: &Fx, b: &Fx) {
        let r = self.ring.clone();
        for k in (0..=self.cap).rev() {
            let mut acc = (BigInt::zero(), BigInt::zero());
            r.mul_into(&mut acc, &self.coeffs[k], b);
            if k > 0 {
                r.mul_into(&mut acc, &self.coeffs[k - 1], a);
            }
            self.coeffs[k] = r.reduce(acc.0, acc.1);
        }
    }

    /// In place `self /= 1 + c t`.
    fn div_one_plus(&mut self, c: &Fx) {
        let r = self.ring.clone();
        for k in 1..=self.cap {
            let mut acc = (self.coeffs[k].a.clone(), self.coeffs[k].b.clone());
            let neg = Fx { a: -&self.coeffs[k - 1].a, b: -&self.coeffs[k - 1].b };
            r.mul_into(&mut acc, &neg, c);
            self.coeffs[k] = r.reduce(acc.0, acc.1);
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cap = self.cap.min(other.cap);
        let r = &self.ring;
        let mut acc = vec![(BigInt::zero(), BigInt::zero()); cap + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(cap + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(cap + 1 - i) {
                if !b.is_zero() {
                    r.mul_into(&mut acc[i + j], a, b);
                }
            }
        }
        let coeffs = acc.into_iter().map(|(a, b)| r.reduce(a, b)).collect();
        TateSeries { ring: r.clone(), coeffs, cap, tail: self.tail.min(other.tail), valid: self.valid.min(other.valid) }
    }

    /// `self(M(t))` for a series `M` with integral coefficients, by Horner
    /// in the series ring.
    pub fn compose(&self, m: &TateSeries) -> TateSeries {
        let mut h = TateSeries::one(&self.ring, self.cap, self.tail.min(m.tail));
        h.valid = self.valid.min(m.valid);
        h.coeffs[0] = self.coeffs[self.cap].clone();
        for k in (0..self.cap).rev() {
            h = h.mul(m);
            h.coeffs[0] = self.ring.add(&h.coeffs[0], &self.coeffs[k]);
        }
        h
    }

    /// `Σ_k a_k P_k` for precomputed powers `P_k = (M t)^k`.
    pub fn compose_with_powers(&self, powers: &[TateSeries]) -> TateSeries {
        let r = &self.ring;
        let cap = self.cap;
        let mut acc = vec![(BigInt::zero(), BigInt::zero()); cap + 1];
        let mut tail = self.tail;
        let mut valid = self.valid;
        for (k, ak) in self.coeffs.iter().enumerate() {
            if ak.is_zero() {
                continue;
            }
            tail = tail.min(powers[k].tail);
            valid = valid.min(powers[k].valid);
            for (n, c) in powers[k].coeffs.iter().enumerate().take(cap + 1) {
                if !c.is_zero() {
                    r.mul_into(&mut acc[n], ak, c);
                }
            }
        }
        let coeffs = acc.into_iter().map(|(a, b)| r.reduce(a, b)).collect();
        TateSeries { ring: r.clone(), coeffs, cap, tail, valid }
    }

    /// `self(M t)` for a Möbius map of the unit disk into itself.
    pub fn compose_moebius(&self, m: &Moebius) -> Result<Self> {
        let um = UnitMoebius::new(&self.ring, m)?;
        Ok(self.compose_with_powers(&um.powers(self.cap, self.tail)))
    }

    /// Value at `t` with `ord(t) >= 0`.
    pub fn eval(&self, t: &El) -> Result<El> {
        if t.ord_or_prec() < 0 {
            return Err(Error::OutOfDomain(format!("{t} lies outside the closed unit disk")));
        }
        let r = &self.ring;
        let (t, known) = r.lift(t)?;
        let mut acc = self.coeffs[self.cap].clone();
        for k in (0..self.cap).rev() {
            acc = r.add(&r.mul(&acc, &t), &self.coeffs[k]);
        }
        Ok(r.to_el(&acc).reduce_to(self.valid.min(known)))
    }

    pub fn derivative(&self) -> Self {
        let r = &self.ring;
        let mut coeffs = vec![Fx::zero(); self.cap + 1];
        for k in 1..=self.cap {
            coeffs[k - 1] = r.mul(&self.coeffs[k], &r.lift_int(&BigInt::from(k)));
        }
        TateSeries { ring: r.clone(), coeffs, cap: self.cap, tail: self.tail, valid: self.valid }
    }

    /// Multiplies by an integral scalar.
    pub fn scaled(&self, s: &El) -> Result<Self> {
        let r = &self.ring;
        let (s, known) = r.lift(s)?;
        let coeffs = self.coeffs.iter().map(|c| r.mul(c, &s)).collect();
        Ok(TateSeries { ring: r.clone(), coeffs, cap: self.cap, tail: self.tail, valid: self.valid.min(known) })
    }

    /// Divides by the constant term, which must be a unit, and returns it.
    pub fn normalize_constant(&mut self) -> Result<El> {
        let a0 = self.coefficient(0);
        if a0.ord() != Some(0) {
            return Err(Error::Degenerate(format!("constant term {a0} is not a unit")));
        }
        let (inv, known) = self.ring.lift(&a0.inv()?)?;
        self.valid = self.valid.min(known);
        let r = self.ring.clone();
        for c in &mut self.coeffs {
            *c = r.mul(c, &inv);
        }
        Ok(a0)
    }

    /// True when the series is exactly 1 at working precision.
    pub fn is_one(&self) -> bool {
        self.coeffs[0] == self.ring.one() && self.coeffs[1..].iter().all(Fx::is_zero)
    }

    /// `ord` of the Gauss norm, `None` for the zero series.
    pub fn gauss_ord(&self) -> Option<i64> {
        self.coeffs.iter().filter_map(|c| self.ring.to_el(c).ord()).min()
    }

    /// `ord` of the Gauss norm of `self - 1`.
    pub fn distance_from_one(&self) -> Option<i64> {
        let r = &self.ring;
        let c0 = r.to_el(&r.sub(&self.coeffs[0], &r.one())).ord();
        std::iter::once(c0).chain(self.coeffs[1..].iter().map(|c| r.to_el(c).ord())).flatten().min()
    }
}

/// Valuation profile `[v(a0), v(a1), ...] tail≥T`, `*` for zero, trailing
/// zeros omitted.
impl fmt::Display for TateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = self.effective_degree().map_or(0, |d| d + 1);
        let parts: Vec<String> = self.coeffs[..end]
            .iter()
            .map(|c| self.ring.to_el(c).ord().map_or("*".to_string(), |o| o.to_string()))
            .collect();
        write!(f, "[{}] tail≥{}", parts.join(", "), self.tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::FieldDescriptor;

    const N: i64 = 30;

    fn setup(p: u64) -> (Field, Arc<TateRing>) {
        let f = FieldDescriptor::qp(p).unwrap();
        let r = TateRing::new(&f, N);
        (f, r)
    }

    #[test]
    fn small_products() {
        let (f, r) = setup(3);
        let el = |n| El::from_int(&f, n, N);
        let a = TateSeries::linear_power(&r, &el(3), 1, 10, N).unwrap();
        let b = TateSeries::linear_power(&r, &el(-3), 1, 10, N).unwrap();
        let p = a.mul(&b);
        // (1 + 3t)(1 - 3t) = 1 - 9t^2
        assert_eq!(p.to_string(), format!("[0, *, 2] tail≥{N}"));
        assert!(p.coefficient(2).approx_eq(&el(-9)));
        assert!(a.mul(&TateSeries::one(&r, 10, N)).coefficient(1).approx_eq(&el(3)));
        let inv = TateSeries::linear_power(&r, &el(6), -3, 20, N).unwrap();
        let fwd = TateSeries::linear_power(&r, &el(6), 3, 20, N).unwrap();
        assert!(inv.mul(&fwd).is_one());
    }

    #[test]
    fn gauss_norm_is_multiplicative() {
        let (f, r) = setup(5);
        let el = |n| El::from_int(&f, n, N);
        let a = TateSeries::from_elements(&r, &[el(5), el(25), el(10)], 8, N).unwrap();
        let b = TateSeries::from_elements(&r, &[el(125), el(1), el(50)], 8, N).unwrap();
        assert_eq!(a.mul(&b).gauss_ord(), Some(a.gauss_ord().unwrap() + b.gauss_ord().unwrap()));
    }

    #[test]
    fn moebius_expansion() {
        let (f, r) = setup(3);
        let el = |n| El::from_int(&f, n, N);
        // t/(3t + 1) = t - 3t^2 + 9t^3 - ...
        let m = Moebius::new(el(1), el(0), el(3), el(1)).unwrap();
        let um = UnitMoebius::new(&r, &m).unwrap();
        let s = um.series(40, N);
        assert!(s.coefficient(1).approx_eq(&el(1)));
        assert!(s.coefficient(2).approx_eq(&el(-3)));
        assert!(s.coefficient(3).approx_eq(&el(9)));
        let one = el(1);
        let direct = El::from_rational(&f, &1.into(), &4.into(), N).unwrap();
        assert!(s.eval(&one).unwrap().approx_eq(&direct));
        let bad = Moebius::new(el(1), el(0), el(1), el(1)).unwrap();
        assert!(UnitMoebius::new(&r, &bad).is_err());
        let big = Moebius::new(el(1), el(0), el(0), el(3)).unwrap();
        assert!(UnitMoebius::new(&r, &big).is_err());
    }

    #[test]
    fn composition_laws() {
        let (f, r) = setup(3);
        let el = |n| El::from_int(&f, n, N);
        let cap = 40;
        let g = TateSeries::linear_power(&r, &el(3), -2, cap, N)
            .unwrap()
            .mul(&TateSeries::linear_power(&r, &el(9), 1, cap, N).unwrap());
        let m1 = Moebius::new(el(3), el(1), el(9), el(1)).unwrap();
        let m2 = Moebius::new(el(1), el(3), el(3), el(1)).unwrap();
        let s1 = UnitMoebius::new(&r, &m1).unwrap().series(cap, N);
        let s2 = UnitMoebius::new(&r, &m2).unwrap().series(cap, N);
        // Horner and cached powers agree
        let h = g.compose(&s1);
        let p = g.compose_moebius(&m1).unwrap();
        for k in 0..=cap {
            assert!(h.coefficient(k).approx_eq(&p.coefficient(k)));
        }
        // (G∘M1)∘M2 = G∘(M1∘M2)
        let lhs = h.compose(&s2);
        let rhs = g.compose(&s1.compose(&s2));
        for t in [0, 1, 2, 5] {
            assert!(lhs.eval(&el(t)).unwrap().approx_eq(&rhs.eval(&el(t)).unwrap()));
        }
        // agreement with pointwise evaluation
        for t in [0, 1, 2, 13] {
            let t = el(t);
            let mt = m1.a.mul(&t).add(&m1.b).div(&m1.c.mul(&t).add(&m1.d)).unwrap();
            assert!(g.eval(&mt).unwrap().approx_eq(&p.eval(&t).unwrap()));
        }
        // identity and (1 + t)∘(3t)
        let id = UnitMoebius::new(&r, &Moebius::identity(&f, N)).unwrap().series(cap, N);
        assert!(g.compose(&id).coefficients().iter().zip(g.coefficients()).all(|(a, b)| a.approx_eq(&b)));
        let one_t = TateSeries::from_elements(&r, &[el(1), el(1)], 5, N).unwrap();
        let three_t = TateSeries::from_elements(&r, &[el(0), el(3)], 5, N).unwrap();
        assert_eq!(one_t.compose(&three_t).to_string(), format!("[0, 1] tail≥{N}"));
    }

    #[test]
    fn derivative_eval_and_domain() {
        let (f, r) = setup(5);
        let el = |n| El::from_int(&f, n, N);
        // 1 + 5t + 25t^2
        let s = TateSeries::from_elements(&r, &[el(1), el(5), el(25)], 10, N).unwrap();
        assert!(s.eval(&el(0)).unwrap().approx_eq(&el(1)));
        let d = s.derivative();
        assert!(d.coefficient(0).approx_eq(&el(5)));
        assert!(d.coefficient(1).approx_eq(&el(50)));
        // finite difference at t = 2, h = 5^8
        let t = el(2);
        let h = El::pi_pow(&f, 8, N);
        let fd = s.eval(&t.add(&h)).unwrap().sub(&s.eval(&t).unwrap()).div(&h).unwrap();
        assert!(fd.sub(&d.eval(&t).unwrap()).ord_or_prec() >= 8 - 1);
        let big = El::from_rational(&f, &1.into(), &5.into(), N).unwrap();
        assert!(s.eval(&big).is_err());
        let mut u = s.scaled(&el(2)).unwrap();
        assert!(u.normalize_constant().unwrap().approx_eq(&el(2)));
        assert!(u.coefficient(1).approx_eq(&el(5)));
    }
}
