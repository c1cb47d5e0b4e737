//! Theta pairings through power series on the closed unit disk.
//!
//! For each letter `i` the partial product over `Γ_k^{(i)}` (words of length
//! `k` starting with `i`) is a nonvanishing function on `P¹ ∖ B_i`. A frame
//! `τ_i` identifies that set with the closed unit disk, where the function
//! becomes a series `G_k^{(i)}(t)` normalized to constant term 1. The
//! recursion
//!
//! `G_{k+1}^{(i)}(t) = ∏_{j ≠ -i} G_k^{(j)}(M_ij t)`,  `M_ij = τ_j γ_i⁻¹ τ_i⁻¹`
//!
//! produces every length from the length-2 factors, and the words of length
//! at most one are multiplied in pointwise.

use rayon::prelude::*;

use crate::bounds::{digits_to_val, BoundsData};
use crate::error::{Error, Result};
use crate::localfield::{Field, LocalFieldElement as El};
use crate::projline::{Ball, Divisor0, Moebius, ProjPoint};
use crate::schottky::{Letter, SchottkyGroup};
use std::sync::Arc;

use crate::tate::{TateRing, TateSeries, UnitMoebius};

/// `τ_i`, mapping `P¹ ∖ B_i` onto `{ord(t) >= 0}`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub letter: Letter,
    pub tau: Moebius,
    pub tau_inv: Moebius,
    /// The point sent to 1.
    pub anchor: El,
}

fn disk_threshold(b: &Ball) -> i64 {
    if b.closed == b.complement {
        b.radius + 1
    } else {
        b.radius
    }
}

impl Frame {
    /// `τ_l(z) = k (z - p_{-l})/(z - p_l)` with `k` chosen so that the
    /// anchor `ϖ_l = p_l + π^r` on the boundary of `B_l` goes to 1.
    fn new(group: &SchottkyGroup, l: Letter) -> Result<Self> {
        let b = group.ball(l);
        let bm = group.ball(-l);
        if b.closed || b.complement || bm.complement {
            return Err(Error::NotGoodPosition(format!(
                "ball B_{l} is not an open disk; the series method needs open fundamental disks"
            )));
        }
        let f = group.field();
        let n = group.precision();
        let one = El::one(f, n);
        let (pl, pm) = (&b.center, &bm.center);
        let varpi = pl.add(&El::pi_pow(f, b.radius, n + b.radius.abs()));
        let k = varpi.sub(pl).div(&varpi.sub(pm))?;
        let tau = Moebius::new(k.clone(), k.mul(pm).neg(), one, pl.neg())?;
        let tau_inv = tau.inverse();
        let fr = Frame { letter: l, tau, tau_inv, anchor: varpi };
        fr.verify(k)?;
        Ok(fr)
    }

    fn verify(&self, k: El) -> Result<()> {
        let l = self.letter;
        let bad = |what: &str| Error::Verification(format!("frame for letter {l}: {what}"));
        let at_anchor = self.tau.apply(&ProjPoint::Finite(self.anchor.clone()));
        match at_anchor {
            ProjPoint::Finite(t) if t.sub(&El::one(t.field(), t.precision())).ord_or_prec() >= 1 => {}
            _ => return Err(bad("anchor does not map to 1")),
        }
        if k.ord_or_prec() <= 0 {
            return Err(bad("infinity does not map into the open unit disk"));
        }
        Ok(())
    }

    fn t_of(&self, z: &ProjPoint) -> Result<El> {
        match self.tau.apply(z) {
            ProjPoint::Finite(t) if t.ord_or_prec() >= 0 => Ok(t),
            _ => Err(Error::OutOfDomain(format!("point lies in B_{}", self.letter))),
        }
    }
}

/// Largest `ord(t)` over a ball of the `t`-line lying outside the closed
/// unit disk.
fn max_ord_outside_unit_disk(b: &Ball) -> Result<i64> {
    let bad = || Error::NotGoodPosition("a ball of length-2 words meets the unit disk".into());
    let m = if b.complement {
        let th = disk_threshold(&b.complement());
        if b.center.ord_or_prec() < th {
            return Err(bad());
        }
        th - 1
    } else {
        let th = disk_threshold(b);
        let oc = b.center.ord_or_prec();
        if oc >= th {
            return Err(bad());
        }
        oc
    };
    if m >= 0 {
        return Err(bad());
    }
    Ok(m)
}

/// `M_ij` for one pair, with the truncated powers `(M_ij t)^k`.
#[derive(Clone, Debug)]
struct Link {
    j: usize,
    powers: Vec<TateSeries>,
}

/// Everything about the group the fast method needs, independent of `E`.
#[derive(Clone, Debug)]
pub struct FastContext {
    original: SchottkyGroup,
    group: SchottkyGroup,
    bounds: BoundsData,
    letters: Vec<Letter>,
    frames: Vec<Frame>,
    links: Vec<Vec<Link>>,
    ring: Arc<TateRing>,
    lambda: i64,
    cap: usize,
    tail: i64,
    parallel: bool,
}

impl FastContext {
    /// Conjugates `∞` into the fundamental domain, then sets up frames and
    /// the maps `M_ij`.
    pub fn new(original: &SchottkyGroup, parallel: bool) -> Result<Self> {
        let group = original.normalize_infinity()?;
        let bounds = BoundsData::compute(&group)?;
        let letters = group.letters();
        let frames: Vec<Frame> = letters.iter().map(|&l| Frame::new(&group, l)).collect::<Result<_>>()?;
        let idx = |l: Letter| letters.iter().position(|&x| x == l).expect("letter");
        let mut lambda = i64::MAX;
        for (a, &i) in letters.iter().enumerate() {
            for &j in &letters {
                if j == -i {
                    continue;
                }
                let w = group.word(&[i, j])?;
                let b = group.gamma_ball(&w)?.closure().image(&frames[a].tau)?;
                lambda = lambda.min(-max_ord_outside_unit_disk(&b)?);
            }
        }
        let n = group.precision();
        let cap = ((n + lambda - 1) / lambda - 1).max(1) as usize;
        let tail = lambda * (cap as i64 + 1);
        let ring = TateRing::new(group.field(), n);
        let mut links = Vec::with_capacity(letters.len());
        for (a, &i) in letters.iter().enumerate() {
            let mut row = Vec::new();
            for &j in &letters {
                if j == -i {
                    continue;
                }
                let b = idx(j);
                let m = frames[b].tau.compose(group.gen(-i)).compose(&frames[a].tau_inv).normalized();
                let powers = UnitMoebius::new(&ring, &m)
                    .map_err(|e| {
                        Error::NotGoodPosition(format!("M_({i},{j}) does not preserve the unit disk: {e}"))
                    })?
                    .powers(cap, tail);
                row.push(Link { j: b, powers });
            }
            links.push(row);
        }
        Ok(FastContext { original: original.clone(), group, bounds, letters, frames, links, ring, lambda, cap, tail, parallel })
    }

    /// The group as given, before conjugation.
    pub fn original(&self) -> &SchottkyGroup {
        &self.original
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn ring(&self) -> &Arc<TateRing> {
        &self.ring
    }

    /// Guaranteed valuation of the dropped tail of every series.
    pub fn tail(&self) -> i64 {
        self.tail
    }

    /// A point of the original coordinates in this context's coordinates.
    pub fn to_local(&self, z: &ProjPoint) -> ProjPoint {
        match self.group.conjugation() {
            Some(h) => h.inverse().apply(z),
            None => z.clone(),
        }
    }

    /// The conjugated group the series live on.
    pub fn group(&self) -> &SchottkyGroup {
        &self.group
    }

    pub fn bounds(&self) -> &BoundsData {
        &self.bounds
    }

    pub fn field(&self) -> &Field {
        self.group.field()
    }

    /// Coefficient decay: `ord(a_k) >= λ k` for every `G^{(i)}`.
    pub fn lambda(&self) -> i64 {
        self.lambda
    }

    pub fn degree_cap(&self) -> usize {
        self.cap
    }

    /// Truncation length for `m` digits at every point of `F⁺`.
    pub fn nu_for_digits(&self, m: i64) -> usize {
        self.bounds.nu_worst_case(digits_to_val(m, self.field().ramification()))
    }

    /// A divisor in original coordinates moved to this context and into `F⁺`.
    pub fn prepare(&self, d: &Divisor0, variant: usize) -> Result<Divisor0> {
        Ok(self.group.reduce_divisor(&self.group.transport(d), variant)?.divisor)
    }

    /// `Θ_E` truncated at `Γ_{≤ν}`, for `E` on `F⁺` in this context's
    /// coordinates.
    pub fn series(&self, e: &Divisor0, nu: usize) -> Result<ThetaSeries> {
        for (y, _) in e.terms() {
            if !self.group.in_closed_domain(y) {
                return Err(Error::OutOfDomain("E is not supported on the fundamental domain".into()));
            }
        }
        let f = self.field().clone();
        let n = self.group.precision();
        let mut near = Vec::new();
        for (y, m) in e.terms() {
            if let ProjPoint::Finite(x) = y {
                near.push((x.clone(), *m));
            }
            for &l in &self.letters {
                if let ProjPoint::Finite(x) = self.group.gen(l).apply(y) {
                    near.push((x, *m));
                }
            }
        }
        let mut acc = vec![TateSeries::one(&self.ring, self.cap, self.tail); self.letters.len()];
        let mut steps = 1;
        if nu >= 2 {
            let mut cur = self.init_series(e)?;
            for k in 2..=nu {
                acc = self.map(|a| Ok(acc[a].mul(&cur[a])))?;
                steps = k;
                if cur.iter().all(|s| s.is_one()) {
                    break;
                }
                if k < nu {
                    cur = self.nabla_step(&cur)?;
                }
            }
        }
        let mut scale = Vec::with_capacity(acc.len());
        for (a, s) in acc.iter().enumerate() {
            let t = self.frames[a].t_of(&ProjPoint::Infinity)?;
            scale.push(s.eval(&t)?.inv()?);
        }
        Ok(ThetaSeries {
            frames: self.frames.clone(),
            series: acc,
            scale,
            near,
            e: e.clone(),
            nu,
            steps,
            field: f,
            prec: n,
        })
    }

    fn map<F>(&self, f: F) -> Result<Vec<TateSeries>>
    where
        F: Fn(usize) -> Result<TateSeries> + Send + Sync,
    {
        if self.parallel {
            (0..self.letters.len()).into_par_iter().map(f).collect()
        } else {
            (0..self.letters.len()).map(f).collect()
        }
    }

    /// `G_2^{(i)}(t) = ∏_{j ≠ -i} ∏_l (1 + q t)^{n_l}` with
    /// `q = (A α₂ - C α₁)/(B α₂ - D α₁)`, `α = γ_i γ_j y_l` and
    /// `τ_i⁻¹ = [[A, B], [C, D]]`.
    pub fn init_series(&self, e: &Divisor0) -> Result<Vec<TateSeries>> {
        let f = self.field();
        let n = self.group.precision();
        let one = El::one(f, n);
        let zero = El::zero(f, n);
        self.map(|a| {
            let i = self.letters[a];
            let ti = &self.frames[a].tau_inv;
            let mut s = TateSeries::one(&self.ring, self.cap, self.tail);
            for &j in &self.letters {
                if j == -i {
                    continue;
                }
                let g = self.group.word(&[i, j])?.matrix;
                for (y, m) in e.terms() {
                    let (y1, y2) = match y {
                        ProjPoint::Finite(x) => (x.clone(), one.clone()),
                        ProjPoint::Infinity => (one.clone(), zero.clone()),
                    };
                    let a1 = g.a.mul(&y1).add(&g.b.mul(&y2));
                    let a2 = g.c.mul(&y1).add(&g.d.mul(&y2));
                    let num = ti.a.mul(&a2).sub(&ti.c.mul(&a1));
                    let den = ti.b.mul(&a2).sub(&ti.d.mul(&a1));
                    let q = num.div(&den)?;
                    if q.ord_or_prec() < self.lambda {
                        return Err(Error::Verification(format!(
                            "zero of G_2 at ord {} inside the decay radius",
                            -q.ord_or_prec()
                        )));
                    }
                    s = s.mul(&TateSeries::linear_power(&self.ring, &q, *m, self.cap, self.tail)?);
                }
            }
            s.normalize_constant()?;
            Ok(s)
        })
    }

    /// One application of `∇`.
    pub fn nabla_step(&self, cur: &[TateSeries]) -> Result<Vec<TateSeries>> {
        self.map(|a| {
            let mut s: Option<TateSeries> = None;
            for link in &self.links[a] {
                let c = cur[link.j].compose_with_powers(&link.powers);
                s = Some(match s {
                    None => c,
                    Some(s) => s.mul(&c),
                });
            }
            let mut s = s.expect("at least one link");
            s.normalize_constant()?;
            Ok(s)
        })
    }

    /// `(D, E)` for divisors in original coordinates, truncated at `ν`.
    pub fn theta_pair_nu(&self, d: &Divisor0, e: &Divisor0, nu: usize) -> Result<El> {
        let dr = self.prepare(d, 0)?;
        let er = self.prepare(e, 1)?;
        self.series(&er, nu)?.pair_with(&dr)
    }

    /// `(D, E)` to `m` digits.
    pub fn theta_pair(&self, d: &Divisor0, e: &Divisor0, m: i64) -> Result<El> {
        self.theta_pair_nu(d, e, self.nu_for_digits(m))
    }

    /// Two distinct base points of `F°` in original coordinates.
    pub fn default_base_points(&self) -> Result<(ProjPoint, ProjPoint)> {
        let mut pts = self.original.interior_points(2).into_iter();
        match (pts.next(), pts.next()) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::OutOfDomain("could not find two interior base points".into())),
        }
    }

    /// `Q_ij = (ι(γ_i), ι(γ_j))` with the default base points.
    pub fn period_matrix(&self, m: i64) -> Result<Vec<Vec<El>>> {
        let (z0, z1) = self.default_base_points()?;
        self.period_matrix_with_base(&z0, &z1, m)
    }

    /// `Q_ij` from `D = (γ_i z0) - (z0)` and `E = (γ_j z1) - (z1)`, base
    /// points in original coordinates.
    pub fn period_matrix_with_base(&self, z0: &ProjPoint, z1: &ProjPoint, m: i64) -> Result<Vec<Vec<El>>> {
        let original = &self.original;
        let g = original.genus() as Letter;
        let nu = self.nu_for_digits(m);
        let mut rows = vec![Vec::new(); g as usize];
        for j in 1..=g {
            let e = Divisor0::elementary(original.gen(j).apply(z1), z1.clone())?;
            let th = self.series(&self.prepare(&e, 1)?, nu)?;
            for i in 1..=g {
                let d = Divisor0::elementary(original.gen(i).apply(z0), z0.clone())?;
                rows[i as usize - 1].push(th.pair_with(&self.prepare(&d, 0)?)?);
            }
        }
        Ok(rows)
    }

    /// `Θ` for `ι(γ) = (γ z0) - (z0)`, a word in the generators.
    pub fn u_gamma(&self, word: &[Letter], z0: &ProjPoint, m: i64) -> Result<ThetaSeries> {
        let g = self.original.word(word)?.matrix;
        let e = Divisor0::elementary(g.apply(z0), z0.clone())?;
        self.series(&self.prepare(&e, 1)?, self.nu_for_digits(m))
    }

    /// `u_γ(z) = ((z) - (∞), ι(γ))` in original coordinates.
    pub fn u_gamma_value(&self, word: &[Letter], z: &ProjPoint, z0: &ProjPoint, m: i64) -> Result<El> {
        let th = self.u_gamma(word, z0, m)?;
        let d = Divisor0::elementary(z.clone(), ProjPoint::Infinity)?;
        th.pair_with(&self.prepare(&d, 0)?)
    }

    /// `d/dz log u_γ(z)` in original coordinates.
    pub fn u_gamma_dlog(&self, word: &[Letter], z: &ProjPoint, z0: &ProjPoint, m: i64) -> Result<El> {
        let th = self.u_gamma(word, z0, m)?;
        let v = th.dlog(&self.to_local(z))?;
        match self.group.conjugation() {
            Some(h) => Ok(v.mul(&h.inverse().derivative_factor(z)?)),
            None => Ok(v),
        }
    }

    /// `(dlog u_{γ_1}(z) : … : dlog u_{γ_g}(z))`, base point the first
    /// default one. Meaningful as a canonical embedding for `g >= 3`.
    pub fn canonical_embedding(&self, z: &ProjPoint, m: i64) -> Result<Vec<El>> {
        let (z0, _) = self.default_base_points()?;
        (1..=self.original.genus() as Letter).map(|j| self.u_gamma_dlog(&[j], z, &z0, m)).collect()
    }
}

/// `Θ_E(z) = ∏_{γ ∈ Γ_{≤ν}} ∏_l (z - γ y_l)^{n_l}`, normalized by
/// `Θ_E(∞) = 1`.
#[derive(Clone, Debug)]
pub struct ThetaSeries {
    frames: Vec<Frame>,
    series: Vec<TateSeries>,
    scale: Vec<El>,
    near: Vec<(El, i64)>,
    e: Divisor0,
    pub nu: usize,
    /// Word length actually reached; smaller than `nu` once every further
    /// factor is 1 at working precision.
    pub steps: usize,
    field: Field,
    prec: i64,
}

impl ThetaSeries {
    pub fn series(&self) -> &[TateSeries] {
        &self.series
    }

    pub fn letters(&self) -> Vec<Letter> {
        self.frames.iter().map(|f| f.letter).collect()
    }

    fn near_part(&self, z: &El) -> Result<El> {
        let mut num = El::one(&self.field, self.prec);
        let mut den = El::one(&self.field, self.prec);
        for (x, m) in &self.near {
            let d = z.sub(x);
            if d.is_zero() {
                return Err(Error::InvalidDivisor("point meets a translate of E".into()));
            }
            let f = d.pow(m.abs())?;
            if *m > 0 {
                num = num.mul(&f);
            } else {
                den = den.mul(&f);
            }
        }
        num.div(&den)
    }

    pub fn eval(&self, z: &ProjPoint) -> Result<El> {
        let x = match z {
            ProjPoint::Infinity => {
                if self.e.contains_infinity() {
                    return Err(Error::InvalidDivisor("Θ_E at a point of E".into()));
                }
                return Ok(El::one(&self.field, self.prec));
            }
            ProjPoint::Finite(x) => x,
        };
        let mut v = self.near_part(x)?;
        for ((fr, s), c) in self.frames.iter().zip(&self.series).zip(&self.scale) {
            v = v.mul(&s.eval(&fr.t_of(z)?)?).mul(c);
        }
        Ok(v)
    }

    /// `∏_k Θ_E(z_k)^{m_k}` for `D = Σ m_k (z_k)` on `F⁺`.
    pub fn pair_with(&self, d: &Divisor0) -> Result<El> {
        let mut num = El::one(&self.field, self.prec);
        let mut den = El::one(&self.field, self.prec);
        for (z, m) in d.terms() {
            let v = self.eval(z)?.pow(m.abs())?;
            if *m > 0 {
                num = num.mul(&v);
            } else {
                den = den.mul(&v);
            }
        }
        num.div(&den)
    }

    /// `Θ_E'/Θ_E` at a finite point of `F⁺`.
    pub fn dlog(&self, z: &ProjPoint) -> Result<El> {
        let x = z
            .as_finite()
            .ok_or_else(|| Error::OutOfDomain("logarithmic derivative at infinity".into()))?;
        let mut acc = El::zero(&self.field, self.prec);
        for (y, m) in &self.near {
            let d = x.sub(y);
            if d.is_zero() {
                return Err(Error::InvalidDivisor("point meets a translate of E".into()));
            }
            acc = acc.add(&El::from_int(&self.field, *m, self.prec).div(&d)?);
        }
        for (fr, s) in self.frames.iter().zip(&self.series) {
            let t = fr.t_of(z)?;
            let ds = s.derivative().eval(&t)?;
            let v = s.eval(&t)?;
            acc = acc.add(&ds.div(&v)?.mul(&fr.tau.derivative_factor(z)?));
        }
        Ok(acc)
    }
}
