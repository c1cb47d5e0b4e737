//! Capped-precision arithmetic in `Q_p` and quadratic Eisenstein extensions.
//!
//! Every element is stored as `p^shift * (u0 + u1*pi)` with `u0`, `u1`
//! reduced modulo the powers of `p` that the absolute precision allows, and
//! with the mantissa `u0 + u1*pi` not divisible by `p`. Over `Q_p` the
//! second component is always zero and `pi = p`.
//!
//! Precision is absolute and measured in powers of the uniformizer: an
//! element with precision `N` is known modulo `pi^N`. Valuations are kept as
//! integers in units of `v(pi) = 1/e` and reported as exact rationals.

use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact valuation, normalized so that `v(p) = 1`.
pub type Valuation = Ratio<i64>;

/// A prime `p`, a ramification index `e` and, for `e = 2`, the Eisenstein
/// relation `pi^2 = c*p` with `c` a `p`-adic unit.
pub struct FieldDescriptor {
    p: u64,
    p_big: BigInt,
    e: u32,
    c: Option<BigRational>,
    powers: Box<[OnceLock<BigInt>]>,
    c_cache: RwLock<Option<(usize, BigInt)>>,
}

pub type Field = Arc<FieldDescriptor>;

impl fmt::Debug for FieldDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.c {
            None => write!(f, "Q_{}", self.p),
            Some(c) => write!(f, "Q_{}(pi), pi^2 = {}*{}", self.p, c, self.p),
        }
    }
}

impl PartialEq for FieldDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.e == other.e && self.c == other.c
    }
}

impl Eq for FieldDescriptor {}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest supported exponent of `p` in residues.
const POWER_TABLE: usize = 1 << 14;

/// `|n| mod p` without allocating.
fn mod_small(n: &BigInt, p: u64) -> u64 {
    let mut r: u128 = 0;
    for d in n.magnitude().iter_u64_digits().rev() {
        r = ((r << 64) | d as u128) % p as u128;
    }
    r as u64
}

/// `v_p(n)` for nonzero `n`, and the `p`-free part.
fn split_p(n: &BigInt, p: u64) -> (i64, BigInt) {
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(&BigInt::from(p));
        if !r.is_zero() {
            return (v, m);
        }
        m = q;
        v += 1;
    }
}

impl FieldDescriptor {
    /// The field `Q_p`.
    pub fn qp(p: u64) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("{p} is not prime")));
        }
        Ok(Arc::new(Self::build(p, 1, None)))
    }

    /// The totally ramified extension `Q_p(pi)` with `pi^2 = c*p`.
    #[cfg(feature = "eisenstein")]
    pub fn eisenstein(p: u64, c: BigRational) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("{p} is not prime")));
        }
        if c.is_zero() {
            return Err(Error::InvalidField("Eisenstein constant is zero".into()));
        }
        let (vn, _) = split_p(c.numer(), p);
        let (vd, _) = split_p(c.denom(), p);
        if vn != vd {
            return Err(Error::InvalidField(format!(
                "Eisenstein constant {c} is not a {p}-adic unit"
            )));
        }
        Ok(Arc::new(Self::build(p, 2, Some(c))))
    }

    fn build(p: u64, e: u32, c: Option<BigRational>) -> Self {
        FieldDescriptor {
            p,
            p_big: BigInt::from(p),
            e,
            c,
            powers: (0..POWER_TABLE).map(|_| OnceLock::new()).collect(),
            c_cache: RwLock::new(None),
        }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn ramification(&self) -> u32 {
        self.e
    }

    pub fn eisenstein_constant(&self) -> Option<&BigRational> {
        self.c.as_ref()
    }

    /// `p^k`, cached. Precisions are limited to the table size.
    pub(crate) fn p_pow(&self, k: usize) -> &BigInt {
        let slot = self
            .powers
            .get(k)
            .unwrap_or_else(|| panic!("p^{k} exceeds the supported precision of {POWER_TABLE} digits"));
        slot.get_or_init(|| num_traits::pow(self.p_big.clone(), k))
    }

    /// `c mod p^k` for the Eisenstein constant.
    pub(crate) fn c_residue(&self, k: usize) -> BigInt {
        let c = self.c.as_ref().expect("c_residue on an unramified field");
        {
            let cache = self.c_cache.read().expect("c cache poisoned");
            if let Some((kk, val)) = cache.as_ref() {
                if *kk >= k {
                    return val.mod_floor(self.p_pow(k));
                }
            }
        }
        let kk = (2 * k).max(64);
        let m = self.p_pow(kk);
        let den_inv = c
            .denom()
            .mod_floor(m)
            .modinv(m)
            .expect("c is a unit");
        let val = (c.numer() * den_inv).mod_floor(m);
        let out = val.mod_floor(self.p_pow(k));
        *self.c_cache.write().expect("c cache poisoned") = Some((kk, val));
        out
    }

    /// Residue moduli exponents `(k0, k1)` for a mantissa with relative
    /// precision `rel` (in units of `pi`).
    pub(crate) fn moduli(&self, rel: i64) -> (usize, usize) {
        if rel <= 0 {
            return (0, 0);
        }
        if self.e == 1 {
            (rel as usize, 0)
        } else {
            (((rel + 1) / 2) as usize, (rel / 2) as usize)
        }
    }
}

/// An element of `Q_p` or `Q_p(pi)` known modulo `pi^prec`.
#[derive(Clone)]
pub struct LocalFieldElement {
    field: Field,
    shift: i64,
    u0: BigInt,
    u1: BigInt,
    prec: i64,
    zero: bool,
}

impl LocalFieldElement {
    fn raw(field: &Field, shift: i64, u0: BigInt, u1: BigInt, prec: i64) -> Self {
        let e = field.e as i64;
        let mut shift = shift;
        let mut u0 = u0;
        let mut u1 = u1;
        loop {
            let rel = prec - e * shift;
            let (k0, k1) = field.moduli(rel);
            if k0 == 0 {
                return Self::zero(field, prec);
            }
            u0 = u0.mod_floor(field.p_pow(k0));
            u1 = if k1 == 0 {
                BigInt::zero()
            } else {
                u1.mod_floor(field.p_pow(k1))
            };
            if u0.is_zero() && u1.is_zero() {
                return Self::zero(field, prec);
            }
            let p = field.p;
            let d0 = u0.is_zero() || mod_small(&u0, p) == 0;
            let d1 = u1.is_zero() || mod_small(&u1, p) == 0;
            if d0 && d1 {
                let (v0, r0) = if u0.is_zero() {
                    (i64::MAX, BigInt::zero())
                } else {
                    split_p(&u0, p)
                };
                let (v1, r1) = if u1.is_zero() {
                    (i64::MAX, BigInt::zero())
                } else {
                    split_p(&u1, p)
                };
                let v = v0.min(v1);
                u0 = if u0.is_zero() { r0 } else { r0 * field.p_pow((v0 - v) as usize) };
                u1 = if u1.is_zero() { r1 } else { r1 * field.p_pow((v1 - v) as usize) };
                shift += v;
                continue;
            }
            return LocalFieldElement { field: field.clone(), shift, u0, u1, prec, zero: false };
        }
    }

    /// Zero known modulo `pi^prec`.
    pub fn zero(field: &Field, prec: i64) -> Self {
        LocalFieldElement {
            field: field.clone(),
            shift: 0,
            u0: BigInt::zero(),
            u1: BigInt::zero(),
            prec,
            zero: true,
        }
    }

    pub fn one(field: &Field, prec: i64) -> Self {
        Self::from_int(field, 1, prec)
    }

    pub fn from_int(field: &Field, n: i64, prec: i64) -> Self {
        Self::from_bigint(field, &BigInt::from(n), prec)
    }

    pub fn from_bigint(field: &Field, n: &BigInt, prec: i64) -> Self {
        if n.is_zero() {
            return Self::zero(field, prec);
        }
        let (v, unit) = split_p(n, field.p);
        Self::raw(field, v, unit, BigInt::zero(), prec)
    }

    /// Image of `num/den` with absolute precision `prec`.
    pub fn from_rational(field: &Field, num: &BigInt, den: &BigInt, prec: i64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Self::zero(field, prec));
        }
        let (vn, un) = split_p(num, field.p);
        let (vd, ud) = split_p(den, field.p);
        let v = vn - vd;
        let rel = prec - field.e as i64 * v;
        let (k0, _) = field.moduli(rel);
        if k0 == 0 {
            return Ok(Self::zero(field, prec));
        }
        let m = field.p_pow(k0);
        let inv = ud.mod_floor(m).modinv(m).expect("p-free denominator is invertible");
        Ok(Self::raw(field, v, un * inv, BigInt::zero(), prec))
    }

    pub fn from_big_rational(field: &Field, q: &BigRational, prec: i64) -> Result<Self> {
        Self::from_rational(field, q.numer(), q.denom(), prec)
    }

    /// The uniformizer `pi` (equal to `p` over `Q_p`).
    pub fn uniformizer(field: &Field, prec: i64) -> Self {
        if field.e == 1 {
            Self::raw(field, 1, BigInt::one(), BigInt::zero(), prec)
        } else {
            Self::raw(field, 0, BigInt::zero(), BigInt::one(), prec)
        }
    }

    /// `pi^k` for any integer `k`.
    pub fn pi_pow(field: &Field, k: i64, prec: i64) -> Self {
        if field.e == 1 {
            return Self::raw(field, k, BigInt::one(), BigInt::zero(), prec);
        }
        let pi = Self::uniformizer(field, prec + k.abs() + 2);
        let mut x = pi.pow(k).expect("pi is invertible");
        x.prec = x.prec.min(prec);
        x.reduce_to(prec)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Absolute precision, in units of `v(pi)`.
    pub fn precision(&self) -> i64 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Valuation in units of `v(pi)`; `None` for zero to precision.
    pub fn ord(&self) -> Option<i64> {
        if self.zero {
            return None;
        }
        let e = self.field.e as i64;
        let extra = if e == 2 && (self.u0.is_zero() || mod_small(&self.u0, self.field.p) == 0) {
            1
        } else {
            0
        };
        Some(e * self.shift + extra)
    }

    /// Valuation lower bound used for precision bookkeeping: the exact
    /// valuation, or the precision for zero.
    pub fn ord_or_prec(&self) -> i64 {
        self.ord().unwrap_or(self.prec)
    }

    /// Exact valuation with `v(p) = 1`; `None` stands for `+infinity`.
    pub fn valuation(&self) -> Option<Valuation> {
        self.ord().map(|o| Ratio::new(o, self.field.e as i64))
    }

    /// Number of known digits after the leading one.
    pub fn relative_precision(&self) -> i64 {
        match self.ord() {
            Some(o) => self.prec - o,
            None => 0,
        }
    }

    /// Exact multiplication by `p^j`.
    pub fn mul_p_pow(&self, j: i64) -> Self {
        let mut x = self.clone();
        x.prec += self.field.e as i64 * j;
        if !x.zero {
            x.shift += j;
        }
        x
    }

    /// An integral element as `x0 + x1*pi` with `x0`, `x1` reduced modulo
    /// the moduli for absolute precision `n`, together with the number of
    /// digits actually known (`min(n, precision)`). Fails when the element
    /// is not integral.
    pub(crate) fn to_integral(&self, n: i64) -> Result<(BigInt, BigInt, i64)> {
        let known = self.prec.min(n);
        let (k0, k1) = self.field.moduli(known);
        if self.zero || known <= 0 {
            return Ok((BigInt::zero(), BigInt::zero(), known));
        }
        if self.ord_or_prec() < 0 {
            return Err(Error::OutOfDomain(format!("{self} is not integral")));
        }
        let s = self.field.p_pow(self.shift as usize);
        let x0 = (&self.u0 * s).mod_floor(self.field.p_pow(k0));
        let x1 = if k1 == 0 { BigInt::zero() } else { (&self.u1 * s).mod_floor(self.field.p_pow(k1)) };
        Ok((x0, x1, known))
    }

    /// Inverse of [`LocalFieldElement::to_integral`].
    pub(crate) fn from_integral(field: &Field, x0: BigInt, x1: BigInt, n: i64) -> Self {
        Self::raw(field, 0, x0, x1, n)
    }

    /// Drops precision to `prec` (never raises it).
    pub fn reduce_to(&self, prec: i64) -> Self {
        if prec >= self.prec {
            return self.clone();
        }
        if self.zero {
            return Self::zero(&self.field, prec);
        }
        Self::raw(&self.field, self.shift, self.u0.clone(), self.u1.clone(), prec)
    }

    /// Raises the claimed precision, treating the stored digits as exact.
    /// Only meaningful for elements known to be exact (e.g. parsed rationals).
    pub fn lift_precision(&self, prec: i64) -> Self {
        let mut x = self.clone();
        x.prec = x.prec.max(prec);
        x
    }

    fn check_field(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.field, &other.field) || *self.field == *other.field {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        Ok(self.add_unchecked(other))
    }

    fn add_unchecked(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        if self.zero {
            return other.reduce_to(prec);
        }
        if other.zero {
            return self.reduce_to(prec);
        }
        let f = &self.field;
        let s = self.shift.min(other.shift);
        let (a0, a1) = self.scaled_mantissa(s);
        let (b0, b1) = other.scaled_mantissa(s);
        Self::raw(f, s, a0 + b0, a1 + b1, prec)
    }

    fn scaled_mantissa(&self, s: i64) -> (BigInt, BigInt) {
        let d = (self.shift - s) as usize;
        if d == 0 {
            (self.u0.clone(), self.u1.clone())
        } else {
            let m = self.field.p_pow(d);
            (&self.u0 * m, &self.u1 * m)
        }
    }

    pub fn neg(&self) -> Self {
        if self.zero {
            return self.clone();
        }
        Self::raw(&self.field, self.shift, -&self.u0, -&self.u1, self.prec)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        Ok(self.add_unchecked(&other.neg()))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let prec = (self.prec + other.ord_or_prec()).min(other.prec + self.ord_or_prec());
        if self.zero || other.zero {
            return Self::zero(&self.field, prec);
        }
        let f = &self.field;
        let shift = self.shift + other.shift;
        if f.e == 1 {
            // a product of p-adic units is a unit: only the residue changes
            let rel = prec - shift;
            if rel <= 0 {
                return Self::zero(f, prec);
            }
            let u0 = (&self.u0 * &other.u0) % f.p_pow(rel as usize);
            return LocalFieldElement { field: f.clone(), shift, u0, u1: BigInt::zero(), prec, zero: false };
        }
        let rel = prec - 2 * shift;
        let (k0, _) = f.moduli(rel);
        let c = f.c_residue(k0.max(1));
        let pc = c * &f.p_big;
        let u0 = &self.u0 * &other.u0 + pc * (&self.u1 * &other.u1);
        let u1 = &self.u0 * &other.u1 + &self.u1 * &other.u0;
        Self::raw(f, shift, u0, u1, prec)
    }

    /// Multiplicative inverse; fails on zero to precision.
    pub fn inv(&self) -> Result<Self> {
        let ord = self.ord().ok_or(Error::DivisionByZero)?;
        let f = &self.field;
        let rel = self.prec - ord;
        let prec = -ord + rel;
        if f.e == 1 {
            let (k0, _) = f.moduli(rel);
            let m = f.p_pow(k0);
            let inv = self.u0.modinv(m).expect("unit mantissa");
            return Ok(Self::raw(f, -self.shift, inv, BigInt::zero(), prec));
        }
        let t: i64 = if ord % 2 == 0 { 0 } else { 1 };
        let shift = -self.shift - t;
        let (k0, _) = f.moduli(prec - 2 * shift);
        let k = k0 + 2;
        let m = f.p_pow(k + 1);
        let c = f.c_residue(k + 1);
        let norm = (&self.u0 * &self.u0 - c * &f.p_big * &self.u1 * &self.u1).mod_floor(m);
        let norm = if t == 1 { norm / &f.p_big } else { norm };
        let mk = f.p_pow(k);
        let ninv = norm.mod_floor(mk).modinv(mk).expect("norm is a unit");
        let u0 = &self.u0 * &ninv;
        let u1 = -(&self.u1 * &ninv);
        Ok(Self::raw(f, shift, u0, u1, prec))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        let inv = other.inv()?;
        Ok(self.mul_unchecked(&inv))
    }

    /// Integer power; negative exponents invert.
    pub fn pow(&self, n: i64) -> Result<Self> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let mut result = Self::one(&self.field, self.prec.max(0) + self.ord_or_prec().abs() * n.max(1));
        let mut base = self.clone();
        let mut k = n;
        let mut first = true;
        while k > 0 {
            if k & 1 == 1 {
                if first {
                    result = base.clone();
                    first = false;
                } else {
                    result = result.mul_unchecked(&base);
                }
            }
            k >>= 1;
            if k > 0 {
                base = base.mul_unchecked(&base);
            }
        }
        Ok(result)
    }

    /// Equality modulo `pi^min(N1, N2)`.
    pub fn approx_eq(&self, other: &Self) -> bool {
        match self.try_sub(other) {
            Ok(d) => d.is_zero(),
            Err(_) => false,
        }
    }

    /// `v(self - other)` in units of `pi`, or the common precision when they
    /// agree to precision.
    pub fn ord_of_difference(&self, other: &Self) -> i64 {
        self.sub(other).ord_or_prec()
    }

    /// `pi`-adic digits `d_k` (each in `0..p`) with `self = sum d_k pi^(start+k)`,
    /// up to the precision. Returns `None` for zero.
    pub fn digits(&self) -> Option<(i64, Vec<u64>)> {
        let start = self.ord()?;
        let f = &self.field;
        let mut out = Vec::new();
        if f.e == 1 {
            let mut u = self.u0.clone();
            for _ in start..self.prec {
                let (q, r) = u.div_rem(&f.p_big);
                out.push(r.to_u64().expect("digit fits"));
                u = q;
            }
            return Some((start, out));
        }
        let pi_inv = Self::uniformizer(f, self.prec + 4).inv().expect("pi invertible");
        let mut w = self.mul_unchecked(&Self::pi_pow(f, -start, self.prec - start + 4));
        w = w.reduce_to(self.prec - start);
        for _ in start..self.prec {
            let d = if w.is_zero() || w.ord().unwrap_or(1) > 0 {
                0
            } else {
                (&w.u0 % f.p).to_u64().expect("digit fits")
            };
            out.push(d);
            let dd = Self::from_int(f, d as i64, w.prec);
            w = w.sub(&dd).mul_unchecked(&pi_inv);
        }
        Some((start, out))
    }

    /// First `n` digits of the expansion together with the leading
    /// valuation; a compact fingerprint of the value.
    pub fn fingerprint(&self, n: usize) -> String {
        match self.digits() {
            None => format!("0+O({})", self.prec),
            Some((start, ds)) => {
                let body: String = ds
                    .iter()
                    .take(n)
                    .map(|d| std::char::from_digit((*d % 36) as u32, 36).unwrap_or('?'))
                    .collect();
                format!("v{start}:{body}")
            }
        }
    }

    /// The digit expansion as a finite sum without the `O(...)` term, in a
    /// form accepted by [`parse_scalar`].
    pub fn to_terms_string(&self) -> String {
        let base = if self.field.e == 1 { self.field.p.to_string() } else { "pi".to_string() };
        let Some((start, ds)) = self.digits() else {
            return "0".into();
        };
        let terms: Vec<String> = ds
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != 0)
            .map(|(k, d)| format!("{d}*{base}^{}", start + k as i64))
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" + ")
        }
    }

    /// The value as an exact rational when it lies in `Q_p`: the integer
    /// residue `p^shift * u0`. Intended for tests and diagnostics.
    pub fn to_rational_residue(&self) -> Option<BigRational> {
        if self.zero {
            return Some(BigRational::zero());
        }
        if !self.u1.is_zero() {
            return None;
        }
        let r = BigRational::from_integer(self.u0.clone());
        Some(if self.shift >= 0 {
            r * BigRational::from_integer(self.field.p_pow(self.shift as usize).clone())
        } else {
            r / BigRational::from_integer(self.field.p_pow((-self.shift) as usize).clone())
        })
    }
}

// Operator sugar for same-field arithmetic. Mixing fields is a programming
// error here; the `try_*` methods report it instead.
impl LocalFieldElement {
    pub fn add(&self, other: &Self) -> Self {
        self.try_add(other).expect("field mismatch")
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.try_sub(other).expect("field mismatch")
    }
    pub fn mul(&self, other: &Self) -> Self {
        self.try_mul(other).expect("field mismatch")
    }
    pub fn div(&self, other: &Self) -> Result<Self> {
        self.try_div(other)
    }
}

impl fmt::Debug for LocalFieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LocalFieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = if self.field.e == 1 { self.field.p.to_string() } else { "pi".to_string() };
        let mut terms = Vec::new();
        if let Some((start, ds)) = self.digits() {
            for (k, d) in ds.iter().enumerate() {
                if *d == 0 {
                    continue;
                }
                let exp = start + k as i64;
                let t = match (exp, *d) {
                    (0, d) => d.to_string(),
                    (1, 1) => base.clone(),
                    (1, d) => format!("{d}*{base}"),
                    (e, 1) => format!("{base}^{e}"),
                    (e, d) => format!("{d}*{base}^{e}"),
                };
                terms.push(t);
            }
        }
        terms.push(format!("O({base}^{})", self.prec));
        write!(f, "{}", terms.join(" + "))
    }
}

/// A parsed scalar: a finite sum of `coefficient * pi^k` with rational
/// coefficients. Over `Q_p`, `pi` means `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarExpr {
    pub terms: Vec<(BigRational, i64)>,
}

impl ScalarExpr {
    pub fn from_rational(q: BigRational) -> Self {
        ScalarExpr { terms: vec![(q, 0)] }
    }

    /// Exact rational value when no `pi` term is present.
    pub fn as_rational(&self) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for (c, k) in &self.terms {
            if *k != 0 {
                return None;
            }
            acc += c;
        }
        Some(acc)
    }

    pub fn to_element(&self, field: &Field, prec: i64) -> Result<LocalFieldElement> {
        let mut acc = LocalFieldElement::zero(field, prec);
        for (c, k) in &self.terms {
            let x = LocalFieldElement::from_big_rational(field, c, prec - *k + 2)?;
            let term = if *k == 0 {
                x
            } else {
                x.mul(&LocalFieldElement::pi_pow(field, *k, prec + k.abs() + 2))
            };
            acc = acc.add(&term.reduce_to(prec.max(term.ord_or_prec().min(prec))));
        }
        Ok(acc.reduce_to(prec))
    }
}

/// Parses scalar shorthand: sums and differences of terms such as `47`,
/// `-25/24`, `6560*3^-8`, `3^6`, `2*pi^3` or `pi`.
pub fn parse_scalar(s: &str) -> Result<ScalarExpr> {
    let bad = |msg: &str| Error::Parse(format!("scalar '{s}': {msg}"));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(bad("empty"));
    }
    // Split on top-level + and - that are not exponent signs.
    let bytes = compact.as_bytes();
    let mut pieces: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut neg = false;
    for (i, &b) in bytes.iter().enumerate() {
        let ch = b as char;
        let after_caret = i > 0 && bytes[i - 1] == b'^';
        if (ch == '+' || ch == '-') && !after_caret && !(i > 0 && bytes[i - 1] == b'/') {
            if !cur.is_empty() {
                pieces.push((neg, std::mem::take(&mut cur)));
            } else if i > 0 {
                return Err(bad("dangling operator"));
            }
            neg = ch == '-';
        } else {
            cur.push(ch);
        }
    }
    if cur.is_empty() {
        return Err(bad("trailing operator"));
    }
    pieces.push((neg, cur));

    let mut terms = Vec::new();
    for (neg, piece) in pieces {
        let (coef, pik) = parse_term(&piece).map_err(|m| bad(&m))?;
        terms.push((if neg { -coef } else { coef }, pik));
    }
    Ok(ScalarExpr { terms })
}

fn parse_int(s: &str) -> std::result::Result<BigInt, String> {
    s.parse::<BigInt>().map_err(|_| format!("bad integer '{s}'"))
}

fn parse_exp(s: &str) -> std::result::Result<i64, String> {
    s.parse::<i64>().map_err(|_| format!("bad exponent '{s}'"))
}

/// One product of factors separated by `*`, optionally with a `/den`.
fn parse_term(s: &str) -> std::result::Result<(BigRational, i64), String> {
    let mut coef = BigRational::one();
    let mut pik = 0i64;
    for factor in s.split('*') {
        if factor.is_empty() {
            return Err("empty factor".into());
        }
        if let Some(rest) = factor.strip_prefix("pi") {
            if rest.is_empty() {
                pik += 1;
            } else if let Some(k) = rest.strip_prefix('^') {
                pik += parse_exp(k)?;
            } else {
                return Err(format!("bad factor '{factor}'"));
            }
        } else if let Some((base, exp)) = factor.split_once('^') {
            let b = parse_int(base)?;
            let k = parse_exp(exp)?;
            let pw = num_traits::pow(b, k.unsigned_abs() as usize);
            if k >= 0 {
                coef *= BigRational::from_integer(pw);
            } else {
                if pw.is_zero() {
                    return Err("zero to a negative power".into());
                }
                coef /= BigRational::from_integer(pw);
            }
        } else if let Some((n, d)) = factor.split_once('/') {
            let n = parse_int(n)?;
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err("zero denominator".into());
            }
            coef *= BigRational::new(n, d);
        } else {
            coef *= BigRational::from_integer(parse_int(factor)?);
        }
    }
    Ok((coef, pik))
}

/// Parses a rational valuation such as `2`, `-3` or `1/2`.
pub fn parse_valuation(s: &str) -> Result<Valuation> {
    let t = s.trim();
    let r = if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| Error::Parse(format!("valuation '{s}'")))?;
        let d: i64 = d.trim().parse().map_err(|_| Error::Parse(format!("valuation '{s}'")))?;
        if d == 0 {
            return Err(Error::Parse(format!("valuation '{s}': zero denominator")));
        }
        Ratio::new(n, d)
    } else {
        Ratio::from_integer(t.parse::<i64>().map_err(|_| Error::Parse(format!("valuation '{s}'")))?)
    };
    Ok(r)
}

/// `v_p` of a nonzero integer; used by fixtures and tests.
pub fn int_valuation(n: &BigInt, p: u64) -> Option<i64> {
    if n.is_zero() {
        None
    } else {
        Some(split_p(&n.abs(), p).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q3() -> Field {
        FieldDescriptor::qp(3).unwrap()
    }

    fn q5() -> Field {
        FieldDescriptor::qp(5).unwrap()
    }

    fn rat(f: &Field, n: i64, d: i64, prec: i64) -> LocalFieldElement {
        LocalFieldElement::from_rational(f, &BigInt::from(n), &BigInt::from(d), prec).unwrap()
    }

    fn v(n: i64) -> Option<Valuation> {
        Some(Ratio::from_integer(n))
    }

    #[test]
    fn from_rational_valuations() {
        let f = q3();
        let one = rat(&f, 1, 1, 20);
        assert_eq!(one.valuation(), v(0));
        assert_eq!(rat(&f, 6560, 6561, 20).valuation(), v(-8));
        assert_eq!(rat(&q5(), 25, 24, 20).valuation(), v(2));
        assert!(LocalFieldElement::from_rational(&f, &BigInt::from(1), &BigInt::from(0), 20).is_err());
    }

    #[test]
    fn paper_entry_valuation() {
        let f = q3();
        let x = parse_scalar("4939*3^-2").unwrap().to_element(&f, 20).unwrap();
        assert_eq!(x.valuation(), v(-2));
    }

    #[test]
    fn strict_triangle_cases() {
        let f = q3();
        let three = rat(&f, 3, 1, 20);
        let sum = three.add(&three);
        assert_eq!(sum.valuation(), v(1));
        assert!(sum.approx_eq(&rat(&f, 6, 1, 20)));
        let one = rat(&f, 1, 1, 20);
        assert_eq!(one.add(&three).valuation(), v(0));
        let g = q5();
        let d = rat(&g, 47, 24, 20).sub(&rat(&g, 3, 1, 20));
        assert_eq!(d.valuation(), v(2));
        assert!(d.approx_eq(&rat(&g, -25, 24, 20)));
    }

    #[test]
    fn precision_propagation() {
        let f = q3();
        let a = rat(&f, 9, 1, 10); // v = 2, known mod 3^10
        let b = rat(&f, 1, 3, 12); // v = -1, known mod 3^12
        assert_eq!(a.add(&b).precision(), 10);
        // min(10 + (-1), 12 + 2)
        assert_eq!(a.mul(&b).precision(), 9);
        let q = a.div(&b).unwrap();
        assert_eq!(q.valuation(), v(3));
        // relative precision min(8, 13)
        assert_eq!(q.relative_precision(), 8);
        // cancellation loses digits
        let c = rat(&f, 1 + 3i64.pow(5), 1, 20).sub(&rat(&f, 1, 1, 20));
        assert_eq!(c.valuation(), v(5));
        assert_eq!(c.precision(), 20);
    }

    #[test]
    fn zero_to_precision() {
        let f = q3();
        let a = rat(&f, 3i64.pow(12), 1, 10);
        assert!(a.is_zero());
        assert_eq!(a.valuation(), None);
        assert!(a.inv().is_err());
        let one = rat(&f, 1, 1, 10);
        assert!(one.div(&a).is_err());
    }

    #[test]
    fn field_mismatch() {
        let a = rat(&q3(), 1, 1, 10);
        let b = rat(&q5(), 1, 1, 10);
        assert!(matches!(a.try_add(&b), Err(Error::FieldMismatch)));
    }

    #[test]
    fn display_and_digits() {
        let f = q3();
        let x = rat(&f, 7, 1, 4); // 1 + 2*3
        assert_eq!(x.to_string(), "1 + 2*3 + O(3^4)");
        let y = rat(&f, 1, 9, 3);
        assert_eq!(y.to_string(), "3^-2 + O(3^3)");
        assert_eq!(LocalFieldElement::zero(&f, 5).to_string(), "O(3^5)");
        let minus_one = rat(&f, -1, 1, 3);
        assert_eq!(minus_one.digits().unwrap().1, vec![2, 2, 2]);
    }

    #[test]
    fn parser_forms() {
        let e = parse_scalar("2*3^6 + 2*3^10 + 2*3^12").unwrap();
        assert_eq!(
            e.as_rational().unwrap(),
            BigRational::from_integer(BigInt::from(2 * 729 + 2 * 59049 + 2 * 531441))
        );
        let e = parse_scalar("-25/24").unwrap();
        assert_eq!(e.as_rational().unwrap(), BigRational::new((-25).into(), 24.into()));
        let e = parse_scalar("6560*3^-8").unwrap();
        assert_eq!(e.as_rational().unwrap(), BigRational::new(6560.into(), 6561.into()));
        assert!(parse_scalar("").is_err());
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("2*").is_err());
        assert!(parse_scalar("3 +").is_err());
        let e = parse_scalar("1 + pi").unwrap();
        assert_eq!(e.terms.len(), 2);
        assert_eq!(parse_valuation("1/2").unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn pi_is_p_over_qp() {
        let f = q3();
        let x = parse_scalar("2*pi^2").unwrap().to_element(&f, 10).unwrap();
        assert!(x.approx_eq(&rat(&f, 18, 1, 10)));
    }

    #[cfg(feature = "eisenstein")]
    #[test]
    fn eisenstein_basics() {
        let f = FieldDescriptor::eisenstein(3, BigRational::from_integer(1.into())).unwrap();
        let pi = LocalFieldElement::uniformizer(&f, 20);
        assert_eq!(pi.valuation(), Some(Ratio::new(1, 2)));
        let pi2 = pi.mul(&pi);
        assert!(pi2.approx_eq(&LocalFieldElement::from_int(&f, 3, 20)));
        assert_eq!(pi2.valuation(), v(1));
        let x = LocalFieldElement::from_int(&f, 2, 20).add(&pi);
        let y = x.inv().unwrap();
        assert!(x.mul(&y).approx_eq(&LocalFieldElement::one(&f, 20)));
        let z = pi.add(&LocalFieldElement::from_int(&f, 3, 20)).inv().unwrap();
        assert_eq!(z.valuation(), Some(Ratio::new(-1, 2)));
        assert!(z.mul(&pi.add(&LocalFieldElement::from_int(&f, 3, 20))).approx_eq(&LocalFieldElement::one(&f, 18)));
        assert!(FieldDescriptor::eisenstein(3, BigRational::from_integer(3.into())).is_err());
        let s = pi.to_string();
        assert!(s.starts_with("pi^1") || s.starts_with("pi + "), "{s}");
    }
}
