//! The projective line over a local field: points, Möbius maps, balls and
//! the cross-ratio pairing on degree-zero divisors.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::localfield::{parse_scalar, Field, LocalFieldElement as El, Valuation};

#[derive(Clone, Debug)]
pub enum ProjPoint {
    Finite(El),
    Infinity,
}

impl ProjPoint {
    pub fn finite(x: El) -> Self {
        ProjPoint::Finite(x)
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, ProjPoint::Infinity)
    }

    pub fn as_finite(&self) -> Option<&El> {
        match self {
            ProjPoint::Finite(x) => Some(x),
            ProjPoint::Infinity => None,
        }
    }

    /// Equality to shared precision; infinity only equals infinity.
    pub fn same(&self, other: &Self) -> bool {
        match (self, other) {
            (ProjPoint::Infinity, ProjPoint::Infinity) => true,
            (ProjPoint::Finite(a), ProjPoint::Finite(b)) => a.approx_eq(b),
            _ => false,
        }
    }
}

impl PartialEq for ProjPoint {
    fn eq(&self, other: &Self) -> bool {
        self.same(other)
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjPoint::Finite(x) => write!(f, "{x}"),
            ProjPoint::Infinity => write!(f, "oo"),
        }
    }
}

/// An element of `PGL_2(K)` given by a representative matrix.
#[derive(Clone, Debug)]
pub struct Moebius {
    pub a: El,
    pub b: El,
    pub c: El,
    pub d: El,
}

impl Moebius {
    pub fn new(a: El, b: El, c: El, d: El) -> Result<Self> {
        let g = Moebius { a, b, c, d };
        if g.det().is_zero() {
            return Err(Error::Degenerate("singular Moebius matrix".into()));
        }
        Ok(g)
    }

    pub fn identity(field: &Field, prec: i64) -> Self {
        Moebius {
            a: El::one(field, prec),
            b: El::zero(field, prec),
            c: El::zero(field, prec),
            d: El::one(field, prec),
        }
    }

    pub fn from_rationals(field: &Field, m: [[&BigRational; 2]; 2], prec: i64) -> Result<Self> {
        let el = |q: &BigRational| El::from_big_rational(field, q, prec);
        Self::new(el(m[0][0])?, el(m[0][1])?, el(m[1][0])?, el(m[1][1])?)
    }

    pub fn field(&self) -> &Field {
        self.a.field()
    }

    pub fn det(&self) -> El {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }

    pub fn trace(&self) -> El {
        self.a.add(&self.d)
    }

    /// Matrix product `self * other`, i.e. the map `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Moebius {
            a: self.a.mul(&other.a).add(&self.b.mul(&other.c)),
            b: self.a.mul(&other.b).add(&self.b.mul(&other.d)),
            c: self.c.mul(&other.a).add(&self.d.mul(&other.c)),
            d: self.c.mul(&other.b).add(&self.d.mul(&other.d)),
        }
    }

    /// The adjugate, which represents the inverse in `PGL_2`.
    pub fn inverse(&self) -> Self {
        Moebius { a: self.d.clone(), b: self.b.neg(), c: self.c.neg(), d: self.a.clone() }
    }

    /// Scales the representative by a power of `p` so that its largest entry
    /// has valuation in `[0, 1)`.
    pub fn normalized(&self) -> Self {
        let e = self.field().ramification() as i64;
        let m = [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .filter_map(|x| x.ord())
            .min()
            .unwrap_or(0);
        let j = m.div_euclid(e);
        if j == 0 {
            return self.clone();
        }
        Moebius {
            a: self.a.mul_p_pow(-j),
            b: self.b.mul_p_pow(-j),
            c: self.c.mul_p_pow(-j),
            d: self.d.mul_p_pow(-j),
        }
    }

    pub fn apply(&self, z: &ProjPoint) -> ProjPoint {
        match z {
            ProjPoint::Infinity => {
                if self.c.is_zero() {
                    ProjPoint::Infinity
                } else {
                    ProjPoint::Finite(self.a.div(&self.c).expect("c is nonzero"))
                }
            }
            ProjPoint::Finite(z) => {
                let den = self.c.mul(z).add(&self.d);
                if den.is_zero() {
                    return ProjPoint::Infinity;
                }
                let num = self.a.mul(z).add(&self.b);
                ProjPoint::Finite(num.div(&den).expect("den is nonzero"))
            }
        }
    }

    /// `g^{-1}(∞)`.
    pub fn pole(&self) -> ProjPoint {
        if self.c.is_zero() {
            ProjPoint::Infinity
        } else {
            ProjPoint::Finite(self.d.neg().div(&self.c).expect("c is nonzero"))
        }
    }

    /// `g'(P) = det/(cP+d)^2`, and `det/c^2` at infinity.
    pub fn derivative_factor(&self, p: &ProjPoint) -> Result<El> {
        let den = match p {
            ProjPoint::Infinity => self.c.clone(),
            ProjPoint::Finite(z) => self.c.mul(z).add(&self.d),
        };
        if den.is_zero() {
            return Err(Error::Degenerate("derivative at the pole".into()));
        }
        self.det().div(&den.mul(&den))
    }

    /// Equality in `PGL_2`: the two representatives are proportional.
    pub fn projectively_eq(&self, other: &Self) -> bool {
        let x = [&self.a, &self.b, &self.c, &self.d];
        let y = [&other.a, &other.b, &other.c, &other.d];
        for i in 0..4 {
            for j in (i + 1)..4 {
                if !x[i].mul(y[j]).approx_eq(&x[j].mul(y[i])) {
                    return false;
                }
            }
        }
        true
    }

    /// Hyperbolic in the sense that the eigenvalues have distinct absolute
    /// values: `|tr|^2 > |det|`.
    pub fn is_hyperbolic(&self) -> bool {
        let det = self.det().ord().expect("nonsingular");
        match self.trace().ord() {
            None => false,
            Some(t) => 2 * t < det,
        }
    }
}

/// A ball of `P^1(K)`. The disk part is `{z : ord(z - center) > radius}`
/// when open and `>=` when closed, with `radius` in units of `v(pi)`
/// (so the metric radius is `|pi|^radius`). A complement ball is the
/// complement of the disk with the opposite closedness, plus infinity.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: El,
    pub radius: i64,
    pub complement: bool,
    pub closed: bool,
}

impl Ball {
    pub fn disk(center: El, radius: i64, closed: bool) -> Self {
        Ball { center, radius, complement: false, closed }
    }

    /// `P^1 \ B(center, radius)` (closed) or `P^1 \ B(center, radius^+)` (open).
    pub fn complement_of(center: El, radius: i64, closed: bool) -> Self {
        Ball { center, radius, complement: true, closed }
    }

    pub fn field(&self) -> &Field {
        self.center.field()
    }

    /// Radius as `v_p`-valuation: the metric radius is `p^-radius_valuation`.
    pub fn radius_valuation(&self) -> Valuation {
        Ratio::new(self.radius, self.field().ramification() as i64)
    }

    /// Same set with the opposite side: `P^1` minus this ball.
    pub fn complement(&self) -> Self {
        Ball {
            center: self.center.clone(),
            radius: self.radius,
            complement: !self.complement,
            closed: !self.closed,
        }
    }

    /// The associated closed ball `B^+`.
    pub fn closure(&self) -> Self {
        let mut b = self.clone();
        b.closed = true;
        b
    }

    /// Threshold `t` of the underlying disk `{ord(z - c) >= t}`: the ball is
    /// that disk, or its complement.
    fn threshold(&self) -> i64 {
        // A disk is open iff the ball is (open, proper) or (closed, complement).
        let open_disk = self.closed == self.complement;
        if open_disk {
            self.radius + 1
        } else {
            self.radius
        }
    }

    fn disk_contains(&self, z: &El) -> bool {
        z.ord_of_difference(&self.center) >= self.threshold()
    }

    pub fn contains(&self, z: &ProjPoint) -> bool {
        match z {
            ProjPoint::Infinity => self.complement,
            ProjPoint::Finite(x) => self.disk_contains(x) != self.complement,
        }
    }

    /// Set equality.
    pub fn same_set(&self, other: &Self) -> bool {
        self.complement == other.complement
            && self.threshold() == other.threshold()
            && self.disk_contains(&other.center)
    }

    /// `self ⊆ other` as sets.
    pub fn is_subset(&self, other: &Self) -> bool {
        let (t1, t2) = (self.threshold(), other.threshold());
        let d = self.center.ord_of_difference(&other.center);
        match (self.complement, other.complement) {
            (false, false) => t1 >= t2 && d >= t2,
            (false, true) => d < t1.min(t2),
            (true, false) => false,
            (true, true) => t2 >= t1 && d >= t1,
        }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        let (t1, t2) = (self.threshold(), other.threshold());
        let d = self.center.ord_of_difference(&other.center);
        match (self.complement, other.complement) {
            (false, false) => d < t1.min(t2),
            (false, true) => t1 >= t2 && d >= t2,
            (true, false) => t2 >= t1 && d >= t1,
            (true, true) => false,
        }
    }

    /// `g(self)`. Complement balls go through the complementary disk.
    pub fn image(&self, g: &Moebius) -> Result<Ball> {
        if self.complement {
            return Ok(self.complement().image(g)?.complement());
        }
        let lost = || Error::Precision("derivative vanishes to working precision".into());
        let pole = g.pole();
        if self.contains(&pole) {
            let ginf = g.apply(&ProjPoint::Infinity);
            let center = ginf.as_finite().cloned().ok_or_else(|| {
                Error::Degenerate("pole inside a disk but g(oo) = oo".into())
            })?;
            let dinf = g.derivative_factor(&ProjPoint::Infinity)?;
            let r = dinf.ord().ok_or_else(lost)? - self.radius;
            Ok(Ball { center, radius: r, complement: true, closed: self.closed })
        } else {
            let p = ProjPoint::Finite(self.center.clone());
            let gp = g.apply(&p);
            let center = gp.as_finite().cloned().ok_or_else(|| {
                Error::Degenerate("center mapped to infinity".into())
            })?;
            let dp = g.derivative_factor(&p)?;
            let r = self.radius + dp.ord().ok_or_else(lost)?;
            Ok(Ball { center, radius: r, complement: false, closed: self.closed })
        }
    }

    /// Image of the sphere `∂B`, which is again a sphere `∂B'` unless the
    /// pole of `g` lies on `∂B`. Returns the ball `B'` whose boundary it is.
    pub fn boundary_image(&self, g: &Moebius) -> Result<Ball> {
        let disk = if self.complement { self.complement() } else { self.clone() };
        if let ProjPoint::Finite(pole) = g.pole() {
            if pole.ord_of_difference(&disk.center) == disk.radius {
                return Err(Error::Degenerate(
                    "pole of the map lies on the boundary sphere".into(),
                ));
            }
        }
        disk.image(g)
    }

    fn radius_string(&self) -> String {
        let f = self.field();
        let p = f.prime();
        let v = self.radius_valuation();
        if v.is_integer() {
            format!("{p}^{}", -v.to_integer())
        } else {
            format!("{p}^-({}/{})", v.numer(), v.denom())
        }
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Printed in the form of the paper: a complement ball P^1 \ B(a, r^+)
        // is written "P1 - B(a, r)+".
        let disk_closed = self.closed != self.complement;
        let body = format!("B({}, {})", self.center.to_terms_string(), self.radius_string());
        let plus = if disk_closed { "+" } else { "" };
        if self.complement {
            write!(f, "P1 - {body}{plus}")
        } else {
            write!(f, "{body}{plus}")
        }
    }
}

/// Parses `B(c, p^-v)`, `B(c, p^-v)+`, `P1 - B(c, p^-v)` or
/// `P1 - B(c, p^-v)+`. The radius may also be given as a plain power of `p`
/// such as `1/9`, or as `p^-(a/b)` over a ramified field.
pub fn parse_ball(s: &str, field: &Field, prec: i64) -> Result<Ball> {
    let bad = |m: &str| Error::Parse(format!("ball '{s}': {m}"));
    let mut t = s.trim();
    let mut complement = false;
    if let Some(rest) = t.strip_prefix("P1") {
        let rest = rest.trim_start();
        let rest = rest
            .strip_prefix('-')
            .or_else(|| rest.strip_prefix('\\'))
            .ok_or_else(|| bad("expected '-' after P1"))?;
        t = rest.trim_start();
        complement = true;
    }
    let closed_disk = t.ends_with('+');
    let t = t.trim_end_matches('+').trim_end();
    let inner = t
        .strip_prefix("B(")
        .and_then(|x| x.strip_suffix(')'))
        .ok_or_else(|| bad("expected B(center, radius)"))?;
    let (c, r) = inner.rsplit_once(',').ok_or_else(|| bad("missing radius"))?;
    let center = parse_scalar(c)?.to_element(field, prec)?;
    let rv = parse_radius(r.trim(), field.prime()).map_err(|m| bad(&m))?;
    let e = field.ramification() as i64;
    let scaled = rv * Ratio::from_integer(e);
    if !scaled.is_integer() {
        return Err(bad("radius not in the value group"));
    }
    let radius = scaled.to_integer();
    // The disk of the written form is closed iff '+'; the ball's own
    // closedness flips for complements.
    let closed = closed_disk != complement;
    Ok(Ball { center, radius, complement, closed })
}

/// Valuation `v` of a radius written as `p^-v`.
fn parse_radius(r: &str, p: u64) -> std::result::Result<Valuation, String> {
    let prefix = format!("{p}^");
    if let Some(exp) = r.strip_prefix(&prefix) {
        let exp = exp.trim();
        let (neg, body) = match exp.strip_prefix('-') {
            Some(b) => (true, b.trim()),
            None => (false, exp),
        };
        let body = body.trim_start_matches('(').trim_end_matches(')');
        let v = crate::localfield::parse_valuation(body).map_err(|e| e.to_string())?;
        return Ok(if neg { v } else { -v });
    }
    let q = parse_scalar(r)
        .map_err(|e| e.to_string())?
        .as_rational()
        .ok_or("radius must be rational")?;
    if !q.is_positive() {
        return Err("radius must be positive".into());
    }
    // q = p^k exactly
    let pb = BigInt::from(p);
    let (mut n, mut d) = (q.numer().clone(), q.denom().clone());
    let mut k = 0i64;
    while (&n % &pb).is_zero() {
        n /= &pb;
        k += 1;
    }
    while (&d % &pb).is_zero() {
        d /= &pb;
        k -= 1;
    }
    if !n.is_one() || !d.is_one() {
        return Err(format!("radius {q} is not a power of {p}"));
    }
    Ok(Ratio::from_integer(-k))
}

/// A degree-zero divisor with pairwise distinct support.
#[derive(Clone, Debug, Default)]
pub struct Divisor0 {
    terms: Vec<(ProjPoint, i64)>,
}

impl Divisor0 {
    /// Merges equal points, drops zero multiplicities and checks the degree.
    pub fn new(terms: Vec<(ProjPoint, i64)>) -> Result<Self> {
        let merged = Self::merge(terms);
        let deg: i64 = merged.iter().map(|(_, m)| m).sum();
        if deg != 0 {
            return Err(Error::InvalidDivisor(format!("degree {deg}, expected 0")));
        }
        Ok(Divisor0 { terms: merged })
    }

    fn merge(terms: Vec<(ProjPoint, i64)>) -> Vec<(ProjPoint, i64)> {
        let mut out: Vec<(ProjPoint, i64)> = Vec::with_capacity(terms.len());
        for (p, m) in terms {
            if let Some(slot) = out.iter_mut().find(|(q, _)| q.same(&p)) {
                slot.1 += m;
            } else {
                out.push((p, m));
            }
        }
        out.retain(|(_, m)| *m != 0);
        out
    }

    /// `(a) - (b)`.
    pub fn elementary(a: ProjPoint, b: ProjPoint) -> Result<Self> {
        Self::new(vec![(a, 1), (b, -1)])
    }

    pub fn zero() -> Self {
        Divisor0 { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[(ProjPoint, i64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut all = self.terms.clone();
        all.extend(other.terms.iter().cloned());
        Divisor0 { terms: Self::merge(all) }
    }

    pub fn negated(&self) -> Self {
        Divisor0 { terms: self.terms.iter().map(|(p, m)| (p.clone(), -m)).collect() }
    }

    pub fn scaled(&self, k: i64) -> Self {
        if k == 0 {
            return Self::zero();
        }
        Divisor0 { terms: self.terms.iter().map(|(p, m)| (p.clone(), m * k)).collect() }
    }

    pub fn transform(&self, g: &Moebius) -> Self {
        Divisor0 { terms: Self::merge(self.terms.iter().map(|(p, m)| (g.apply(p), *m)).collect()) }
    }

    pub fn support_meets(&self, other: &Self) -> bool {
        self.terms.iter().any(|(p, _)| other.terms.iter().any(|(q, _)| p.same(q)))
    }

    pub fn contains_infinity(&self) -> bool {
        self.terms.iter().any(|(p, _)| p.is_infinity())
    }
}

/// Numerator and denominator of `prod (x - y)^(m n)` over finite pairs.
fn pairing_parts(d: &Divisor0, e: &Divisor0, field: &Field, prec: i64) -> (El, El) {
    let mut num = El::one(field, prec);
    let mut den = El::one(field, prec);
    for (x, m) in d.terms() {
        let Some(x) = x.as_finite() else { continue };
        for (y, n) in e.terms() {
            let Some(y) = y.as_finite() else { continue };
            let k = m * n;
            let diff = x.sub(y);
            let pw = diff.pow(k.abs()).expect("nonnegative power");
            if k > 0 {
                num = num.mul(&pw);
            } else {
                den = den.mul(&pw);
            }
        }
    }
    (num, den)
}

/// The pairing `(D, E)` obtained by extending the cross-ratio
/// bi-multiplicatively. Factors at infinity cancel because both divisors
/// have degree zero.
pub fn pair_divisors(d: &Divisor0, e: &Divisor0, field: &Field, prec: i64) -> Result<El> {
    if d.support_meets(e) {
        return Err(Error::InvalidDivisor("divisor supports overlap".into()));
    }
    let (num, den) = pairing_parts(d, e, field, prec);
    num.div(&den)
}

/// `(z, w; a, b) = (z-a)/(z-b) * (w-b)/(w-a)`, extended to coincident
/// points and to infinity.
pub fn cross_ratio(z: &ProjPoint, w: &ProjPoint, a: &ProjPoint, b: &ProjPoint) -> Result<ProjPoint> {
    #[derive(PartialEq)]
    enum Rule {
        Zero,
        One,
        Inf,
    }
    let pairs = [(z, w), (a, b), (z, a), (w, b), (z, b), (w, a)];
    if pairs.iter().filter(|(x, y)| x.same(y)).count() >= 2 {
        return Err(Error::Degenerate("cross-ratio undefined for these coincidences".into()));
    }
    let mut fired = Vec::new();
    if z.same(w) || a.same(b) {
        fired.push(Rule::One);
    }
    if z.same(a) || w.same(b) {
        fired.push(Rule::Zero);
    }
    if z.same(b) || w.same(a) {
        fired.push(Rule::Inf);
    }
    if fired.contains(&Rule::Zero) && fired.contains(&Rule::Inf) {
        return Err(Error::Degenerate("cross-ratio undefined for these coincidences".into()));
    }
    if fired.contains(&Rule::Zero) {
        let f = [z, w, a, b].iter().find_map(|p| p.as_finite()).map(|x| x.field().clone());
        let f = f.ok_or_else(|| Error::Degenerate("all points at infinity".into()))?;
        return Ok(ProjPoint::Finite(El::zero(&f, i64::MAX / 4)));
    }
    if fired.contains(&Rule::Inf) {
        return Ok(ProjPoint::Infinity);
    }
    if fired.contains(&Rule::One) {
        let f = [z, w, a, b].iter().find_map(|p| p.as_finite()).map(|x| x.field().clone());
        let f = f.ok_or_else(|| Error::Degenerate("all points at infinity".into()))?;
        let prec = [z, w, a, b]
            .iter()
            .filter_map(|p| p.as_finite().map(|x| x.precision()))
            .min()
            .unwrap_or(0);
        return Ok(ProjPoint::Finite(El::one(&f, prec)));
    }
    let first = [z, w, a, b].iter().find_map(|p| p.as_finite()).expect("distinct points");
    let field = first.field().clone();
    let prec = [z, w, a, b]
        .iter()
        .filter_map(|p| p.as_finite().map(|x| x.precision()))
        .min()
        .unwrap_or(0);
    let dd = Divisor0 { terms: vec![(z.clone(), 1), (w.clone(), -1)] };
    let ee = Divisor0 { terms: vec![(a.clone(), 1), (b.clone(), -1)] };
    let (num, den) = pairing_parts(&dd, &ee, &field, prec);
    Ok(ProjPoint::Finite(num.div(&den)?))
}

/// Exact rational `v` as an `i64` in units of `v(pi)`; helper for callers
/// holding valuations.
pub fn valuation_to_ord(v: Valuation, e: u32) -> Option<i64> {
    let s = v * Ratio::from_integer(e as i64);
    if s.is_integer() {
        s.to_integer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::FieldDescriptor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const N: i64 = 30;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn el(f: &Field, n: i64, d: i64) -> El {
        El::from_big_rational(f, &q(n, d), N).unwrap()
    }

    fn pt(f: &Field, n: i64) -> ProjPoint {
        ProjPoint::Finite(el(f, n, 1))
    }

    fn mat(f: &Field, a: i64, b: i64, c: i64, d: i64) -> Moebius {
        Moebius::new(el(f, a, 1), el(f, b, 1), el(f, c, 1), el(f, d, 1)).unwrap()
    }

    #[test]
    fn apply_examples() {
        let f = FieldDescriptor::qp(5).unwrap();
        let id = Moebius::identity(&f, N);
        assert!(id.apply(&pt(&f, 7)).same(&pt(&f, 7)));
        let g2 = mat(&f, 15625, 0, 0, 1);
        assert!(g2.apply(&pt(&f, 1)).same(&pt(&f, 15625)));
        let g1 = mat(&f, 73, -144, 24, -47);
        let r = g1.inverse().apply(&ProjPoint::Infinity);
        assert!(r.same(&ProjPoint::Finite(el(&f, 47, 24))));
        assert!(g1.apply(&g1.pole()).is_infinity());
    }

    #[test]
    fn derivative_examples() {
        let f = FieldDescriptor::qp(5).unwrap();
        let g1 = mat(&f, 73, -144, 24, -47);
        // det = 25, (24*3 - 47)^2 = 625
        let d = g1.derivative_factor(&pt(&f, 3)).unwrap();
        assert!(d.approx_eq(&el(&f, 25, 625)));
        // finite difference with h = 5^6
        let h = el(&f, 15625, 1);
        let x = el(&f, 3, 1);
        let gx = g1.apply(&ProjPoint::Finite(x.clone()));
        let gxh = g1.apply(&ProjPoint::Finite(x.add(&h)));
        let quot = gxh.as_finite().unwrap().sub(gx.as_finite().unwrap()).div(&h).unwrap();
        assert_eq!(quot.ord(), d.ord());
        assert!(g1.derivative_factor(&g1.pole()).is_err());
    }

    #[test]
    fn ball_image_examples() {
        let f = FieldDescriptor::qp(5).unwrap();
        let g2 = mat(&f, 15625, 0, 0, 1);
        // B(0, (5^3)^+): ord >= -3
        let b = Ball::disk(el(&f, 0, 1), -3, true);
        let img = b.image(&g2).unwrap();
        assert!(img.same_set(&Ball::disk(el(&f, 0, 1), 3, true)));
        let g1 = mat(&f, 73, -144, 24, -47);
        let bm1 = parse_ball("P1 - B(3, 5^-1)", &f, N).unwrap();
        let img = bm1.image(&g1).unwrap();
        let b1p = parse_ball("B(2, 5^-1)+", &f, N).unwrap();
        assert!(img.same_set(&b1p), "{img}");
    }

    #[test]
    fn membership_and_disjointness() {
        let f3 = FieldDescriptor::qp(3).unwrap();
        let b = parse_ball("B(0, 3^-1)", &f3, N).unwrap();
        // |3| = 1/3 lies on the boundary of the open ball
        assert!(!b.contains(&pt(&f3, 3)));
        assert!(b.contains(&pt(&f3, 9)));
        assert!(!b.contains(&pt(&f3, 1)));
        assert!(!b.contains(&ProjPoint::Infinity));
        let f5 = FieldDescriptor::qp(5).unwrap();
        let b1 = parse_ball("B(2, 5^-1)+", &f5, N).unwrap();
        let bm1 = parse_ball("B(3, 5^-1)+", &f5, N).unwrap();
        assert!(b1.is_disjoint(&bm1));
        let c = parse_ball("P1 - B(0, 5^3)", &f5, N).unwrap();
        assert!(c.contains(&ProjPoint::Infinity));
        assert!(!c.is_disjoint(&c.complement().complement()));
        assert!(c.is_disjoint(&c.complement()));
    }

    #[test]
    fn parse_print_roundtrip() {
        let f = FieldDescriptor::qp(3).unwrap();
        for s in [
            "B(2*3^6 + 2*3^10 + 2*3^12, 3^-12)",
            "B(2*3^2, 3^-4)+",
            "P1 - B(0, 3^-1)+",
            "P1 - B(18, 3^-2)",
        ] {
            let b = parse_ball(s, &f, N).unwrap();
            let back = parse_ball(&b.to_string(), &f, N).unwrap();
            assert!(b.same_set(&back), "{s} -> {b}");
            assert_eq!(b.closed, back.closed);
        }
        let b = parse_ball("B(4, 1/9)", &f, N).unwrap();
        assert_eq!(b.radius, 2);
        assert!(parse_ball("B(4, 1/6)", &f, N).is_err());
        assert!(parse_ball("B(4 3^-1)", &f, N).is_err());
    }

    #[test]
    fn boundary_degeneracy() {
        let f = FieldDescriptor::qp(3).unwrap();
        // pole at 1, on the unit sphere around 0
        let g = mat(&f, 0, 1, 1, -1);
        let b = Ball::disk(el(&f, 0, 1), 0, false);
        assert!(b.boundary_image(&g).is_err());
        // the open disk itself still maps to a ball
        let img = b.image(&g).unwrap();
        assert!(img.contains(&g.apply(&pt(&f, 3))));
        assert!(!img.contains(&g.apply(&pt(&f, 2))));
    }

    #[test]
    fn cross_ratio_rules() {
        let f = FieldDescriptor::qp(5).unwrap();
        let (z, w, a, b) = (pt(&f, 2), pt(&f, 7), pt(&f, 11), pt(&f, 13));
        let one = cross_ratio(&z, &z, &a, &b).unwrap();
        assert!(one.same(&pt(&f, 1)));
        let zero = cross_ratio(&z, &w, &z, &b).unwrap();
        assert!(zero.as_finite().unwrap().is_zero());
        assert!(cross_ratio(&z, &w, &a, &z).unwrap().is_infinity());
        assert!(cross_ratio(&a, &b, &a, &b).is_err());
        let r = cross_ratio(&pt(&f, 0), &ProjPoint::Infinity, &pt(&f, 1), &pt(&f, -1)).unwrap();
        assert!(r.same(&pt(&f, -1)));
        // stabilization for large W
        let big = ProjPoint::Finite(El::pi_pow(&f, -20, N));
        let r2 = cross_ratio(&pt(&f, 0), &big, &pt(&f, 1), &pt(&f, -1)).unwrap();
        assert!(r2.as_finite().unwrap().sub(&el(&f, -1, 1)).ord().unwrap() >= 20);
    }

    fn random_point(f: &Field, rng: &mut ChaCha8Rng) -> ProjPoint {
        if rng.gen_ratio(1, 8) {
            return ProjPoint::Infinity;
        }
        let n: i64 = rng.gen_range(-100_000..100_000);
        let d: i64 = rng.gen_range(1..50);
        ProjPoint::Finite(el(f, n, d))
    }

    fn random_moebius(f: &Field, rng: &mut ChaCha8Rng) -> Moebius {
        loop {
            let e: Vec<i64> = (0..4).map(|_| rng.gen_range(-50..50)).collect();
            if e[0] * e[3] - e[1] * e[2] != 0 {
                return mat(f, e[0], e[1], e[2], e[3]);
            }
        }
    }

    #[test]
    fn cross_ratio_invariance_and_laws() {
        let f = FieldDescriptor::qp(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 40 {
            let pts: Vec<ProjPoint> = (0..6).map(|_| random_point(&f, &mut rng)).collect();
            let distinct = (0..6).all(|i| (i + 1..6).all(|j| !pts[i].same(&pts[j])));
            if !distinct {
                continue;
            }
            let g = random_moebius(&f, &mut rng);
            let r = cross_ratio(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
            let gp: Vec<ProjPoint> = pts.iter().map(|p| g.apply(p)).collect();
            let rg = cross_ratio(&gp[0], &gp[1], &gp[2], &gp[3]).unwrap();
            let (r, rg) = (r.as_finite().unwrap(), rg.as_finite().unwrap());
            assert!(r.sub(rg).ord_or_prec() >= r.ord().unwrap() + 10);

            let d1 = Divisor0::elementary(pts[0].clone(), pts[1].clone()).unwrap();
            let d2 = Divisor0::elementary(pts[4].clone(), pts[5].clone()).unwrap();
            let e = Divisor0::elementary(pts[2].clone(), pts[3].clone()).unwrap();
            let p1 = pair_divisors(&d1, &e, &f, N).unwrap();
            let p2 = pair_divisors(&d2, &e, &f, N).unwrap();
            let p12 = pair_divisors(&d1.plus(&d2), &e, &f, N).unwrap();
            assert!(p12.approx_eq(&p1.mul(&p2)));
            let s = pair_divisors(&e, &d1, &f, N).unwrap();
            assert!(s.approx_eq(&p1));
            assert!(p1.approx_eq(r));
            checked += 1;
        }
    }

    #[test]
    fn ball_image_laws() {
        let f = FieldDescriptor::qp(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let g = random_moebius(&f, &mut rng);
            let h = random_moebius(&f, &mut rng);
            let c = el(&f, rng.gen_range(-500..500), 1);
            let r = rng.gen_range(-3..4);
            let b = Ball {
                center: c,
                radius: r,
                complement: rng.gen_bool(0.5),
                closed: rng.gen_bool(0.5),
            };
            let gb = b.image(&g).unwrap();
            let back = gb.image(&g.inverse()).unwrap();
            assert!(back.same_set(&b), "{b} -> {gb} -> {back}");
            let ghb = b.image(&g.compose(&h)).unwrap();
            let g_hb = b.image(&h).unwrap().image(&g).unwrap();
            assert!(ghb.same_set(&g_hb));
            for _ in 0..5 {
                let z = random_point(&f, &mut rng);
                assert_eq!(b.contains(&z), gb.contains(&g.apply(&z)));
            }
        }
    }

    #[test]
    fn divisor_validation() {
        let f = FieldDescriptor::qp(3).unwrap();
        assert!(Divisor0::new(vec![(pt(&f, 1), 1)]).is_err());
        let d = Divisor0::new(vec![(pt(&f, 1), 1), (pt(&f, 1), -1)]).unwrap();
        assert!(d.is_zero());
        let d = Divisor0::elementary(pt(&f, 1), pt(&f, 2)).unwrap();
        assert!(pair_divisors(&d, &d, &f, N).is_err());
    }

    #[test]
    fn hyperbolicity() {
        let f = FieldDescriptor::qp(5).unwrap();
        assert!(mat(&f, 15625, 0, 0, 1).is_hyperbolic());
        assert!(!mat(&f, 1, 1, 0, 1).is_hyperbolic());
        assert!(mat(&f, 73, -144, 24, -47).is_hyperbolic());
    }
}
