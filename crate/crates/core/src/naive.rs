//! Theta products by brute force over reduced words. This is the oracle the
//! iterative algorithm is checked against, so it stays deliberately simple.

use rayon::prelude::*;

use crate::bounds::{digits_to_val, BoundsData};
use crate::error::{Error, Result};
use crate::localfield::LocalFieldElement as El;
use crate::projline::{Divisor0, Moebius, ProjPoint};
use crate::schottky::{count_words_up_to, SchottkyGroup};

/// Refuse truncations needing more words than this.
pub const WORD_BUDGET: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct TruncatedTheta {
    pub value: El,
    pub n: usize,
    pub words: u128,
}

/// Projective coordinates `(x1 : x2)` of a point.
fn coords(z: &ProjPoint, one: &El, zero: &El) -> (El, El) {
    match z {
        ProjPoint::Finite(x) => (x.clone(), one.clone()),
        ProjPoint::Infinity => (one.clone(), zero.clone()),
    }
}

/// Accumulates `∏ [X_k, γY_l]^(m_k n_l)` with `[X, Y] = x1 y2 - x2 y1`.
/// Since both divisors have degree zero the product does not depend on the
/// representatives, and it equals the cross-ratio pairing.
struct Accumulator {
    xs: Vec<((El, El), i64)>,
    ys: Vec<((El, El), i64)>,
    num: El,
    den: El,
}

impl Accumulator {
    fn new(d: &Divisor0, e: &Divisor0, one: &El, zero: &El) -> Self {
        Accumulator {
            xs: d.terms().iter().map(|(z, m)| (coords(z, one, zero), *m)).collect(),
            ys: e.terms().iter().map(|(z, n)| (coords(z, one, zero), *n)).collect(),
            num: one.clone(),
            den: one.clone(),
        }
    }

    fn empty_like(&self) -> Self {
        Accumulator {
            xs: self.xs.clone(),
            ys: self.ys.clone(),
            num: El::one(self.num.field(), self.num.precision()),
            den: El::one(self.num.field(), self.num.precision()),
        }
    }

    fn add_word(&mut self, g: &Moebius) -> Result<()> {
        for ((y1, y2), n) in &self.ys {
            let gy1 = g.a.mul(y1).add(&g.b.mul(y2));
            let gy2 = g.c.mul(y1).add(&g.d.mul(y2));
            for ((x1, x2), m) in &self.xs {
                let br = x1.mul(&gy2).sub(&x2.mul(&gy1));
                if br.is_zero() {
                    return Err(Error::InvalidDivisor(
                        "a translate of E meets the support of D".into(),
                    ));
                }
                let k = m * n;
                let f = if k.abs() == 1 { br } else { br.pow(k.abs())? };
                if k > 0 {
                    self.num = self.num.mul(&f);
                } else {
                    self.den = self.den.mul(&f);
                }
            }
        }
        Ok(())
    }

    fn merge(&mut self, other: &Accumulator) {
        self.num = self.num.mul(&other.num);
        self.den = self.den.mul(&other.den);
    }

    fn value(&self) -> Result<El> {
        self.num.div(&self.den)
    }
}

fn check_budget(group: &SchottkyGroup, n: usize) -> Result<u128> {
    let count = count_words_up_to(group.genus() as u64, n as u32);
    if count > WORD_BUDGET {
        return Err(Error::Budget(format!(
            "truncation length {n} needs {count} words, budget is {WORD_BUDGET}"
        )));
    }
    Ok(count)
}

/// `(D, E)_{≤n} = ∏_{γ ∈ Γ_{≤n}} (D, γE)`.
pub fn theta_naive(group: &SchottkyGroup, d: &Divisor0, e: &Divisor0, n: usize) -> Result<TruncatedTheta> {
    let words = check_budget(group, n)?;
    let f = group.field();
    let prec = group.precision();
    let one = El::one(f, prec);
    let zero = El::zero(f, prec);
    let mut acc = Accumulator::new(d, e, &one, &zero);
    for len in 0..=n {
        for w in group.words_of_length(len) {
            acc.add_word(&w.matrix)?;
        }
    }
    Ok(TruncatedTheta { value: acc.value()?, n, words })
}

/// Same product, with the head classes `Γ_k^{(i)}` handled in parallel.
pub fn theta_naive_parallel(
    group: &SchottkyGroup,
    d: &Divisor0,
    e: &Divisor0,
    n: usize,
) -> Result<TruncatedTheta> {
    let words = check_budget(group, n)?;
    let f = group.field();
    let prec = group.precision();
    let one = El::one(f, prec);
    let zero = El::zero(f, prec);
    let mut acc = Accumulator::new(d, e, &one, &zero);
    acc.add_word(&Moebius::identity(f, prec))?;
    let parts: Vec<Result<Accumulator>> = group
        .letters()
        .into_par_iter()
        .map(|head| {
            let mut part = acc.empty_like();
            for len in 1..=n {
                for w in group.words_with_head(len, head) {
                    part.add_word(&w.matrix)?;
                }
            }
            Ok(part)
        })
        .collect();
    for part in parts {
        acc.merge(&part?);
    }
    Ok(TruncatedTheta { value: acc.value()?, n, words })
}

/// The pairing over an explicit list of group elements.
pub fn theta_over(group: &SchottkyGroup, d: &Divisor0, e: &Divisor0, mats: &[Moebius]) -> Result<El> {
    let f = group.field();
    let prec = group.precision();
    let one = El::one(f, prec);
    let zero = El::zero(f, prec);
    let mut acc = Accumulator::new(d, e, &one, &zero);
    for g in mats {
        acc.add_word(g)?;
    }
    acc.value()
}

/// Truncation at `ν` from the bounds for `D`, targeting `m` digits.
pub fn theta_naive_auto(
    group: &SchottkyGroup,
    bounds: &BoundsData,
    d: &Divisor0,
    e: &Divisor0,
    m: i64,
) -> Result<TruncatedTheta> {
    let nu = bounds.nu_for_divisor(digits_to_val(m, group.field().ramification()), d);
    theta_naive(group, d, e, nu)
}

/// `(D, E)_G = ∏_j (D, g_j E)_Γ` for coset representatives `g_j` of a
/// discontinuous group `G ⊇ Γ`, with any inner pairing for `Γ`.
pub fn theta_discontinuous<F>(d: &Divisor0, e: &Divisor0, cosets: &[Moebius], mut inner: F) -> Result<El>
where
    F: FnMut(&Divisor0, &Divisor0) -> Result<El>,
{
    let mut acc: Option<El> = None;
    for g in cosets {
        let v = inner(d, &e.transform(g))?;
        acc = Some(match acc {
            None => v,
            Some(a) => a.mul(&v),
        });
    }
    acc.ok_or_else(|| Error::Degenerate("no coset representatives".into()))
}
