//! Convergence data for theta products: `n(Γ)`, `ρ`, `C`, `δ`, `R_D` and the
//! truncation length `ν(ε)`. Everything is an exact valuation (`v_p`, so a
//! quantity `x` is stored as `v` with `x = p^-v`).

use std::collections::HashMap;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::localfield::{LocalFieldElement as El, Valuation};
use crate::projline::{Divisor0, ProjPoint};
use crate::schottky::{Letter, SchottkyGroup};

/// Longest word length scanned when looking for `n(Γ)`.
const MAX_N_GAMMA: usize = 12;

/// Longest block of letters tried when measuring the contraction `ρ`.
const MAX_BLOCK: usize = 3;

#[derive(Clone, Debug)]
pub struct OrbitEntry {
    pub letters: Vec<Letter>,
    pub center: El,
    pub radius_val: Valuation,
}

#[derive(Clone, Debug)]
pub struct BoundsData {
    pub n_gamma: usize,
    /// `ρ = p^-rho_val`, with `rho_val > 0`.
    pub rho_val: Valuation,
    /// `C = p^-c_val`.
    pub c_val: Valuation,
    /// `B(γ)` for `γ ∈ Γ_{n(Γ)}`.
    pub table: Vec<OrbitEntry>,
    /// Lower bound for `v_δ(z)` valid for every `z ∈ F⁺`, including `δ(∞) = 1`.
    pub worst_delta_val: Valuation,
    e: i64,
}

fn ord_to_val(ord: i64, e: i64) -> Valuation {
    Ratio::new(ord, e)
}

/// Least `n ≥ 1` such that no closed ball `B(γ)⁺` with `γ ∈ Γ_n` contains `∞`.
pub fn compute_n_gamma(group: &SchottkyGroup) -> Result<usize> {
    for n in 1..=MAX_N_GAMMA {
        let mut ok = true;
        for w in group.words_of_length(n) {
            if group.gamma_ball(&w)?.closure().contains(&ProjPoint::Infinity) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(n);
        }
    }
    Err(Error::Degenerate(format!("n(Γ) exceeds {MAX_N_GAMMA}")))
}

impl BoundsData {
    pub fn compute(group: &SchottkyGroup) -> Result<Self> {
        let n = compute_n_gamma(group)?;
        Self::compute_with_n(group, n)
    }

    pub fn compute_with_n(group: &SchottkyGroup, n: usize) -> Result<Self> {
        let e = group.field().ramification() as i64;
        let mut table = Vec::new();
        let mut radius: HashMap<Vec<Letter>, i64> = HashMap::new();
        for w in group.words_of_length(n) {
            let b = group.gamma_ball(&w)?;
            if b.complement {
                return Err(Error::Degenerate("B(γ) is not proper at length n(Γ)".into()));
            }
            radius.insert(w.letters.clone(), b.radius);
            table.push(OrbitEntry {
                letters: w.letters.clone(),
                center: b.center.clone(),
                radius_val: ord_to_val(b.radius, e),
            });
        }
        // ρ: contraction r(wγ)/r(γ) over γ ∈ Γ_n and blocks w of k letters,
        // per letter. One letter is enough for most groups; composite
        // generators can expand locally and need longer blocks.
        let mut found = None;
        let mut last = 0;
        let mut lengths: Vec<HashMap<Vec<Letter>, i64>> = vec![radius.clone()];
        for k in 1..=MAX_BLOCK {
            let mut next = HashMap::new();
            for w in group.words_of_length(n + k) {
                next.insert(w.letters.clone(), group.gamma_ball(&w)?.radius);
            }
            let rho_ord = next
                .iter()
                .map(|(w, r)| r - radius[&w[k..].to_vec()])
                .min()
                .expect("words exist");
            lengths.push(next);
            last = rho_ord;
            if rho_ord > 0 {
                found = Some((k, rho_ord));
                break;
            }
        }
        let Some((k, rho_ord)) = found else {
            return Err(Error::Verification(format!(
                "radius contraction ρ is not < 1 (v_ρ = {last}/{e} over {MAX_BLOCK} letters)"
            )));
        };
        let rho_val = Ratio::new(rho_ord, e * k as i64);
        // r(γ) ≤ C ρ^len on every length n..n+k-1, hence on all lengths ≥ n.
        let c_val = lengths[..k]
            .iter()
            .enumerate()
            .map(|(j, rs)| {
                let min_r = *rs.values().min().expect("words exist");
                ord_to_val(min_r, e) - rho_val * Ratio::from_integer((n + j) as i64)
            })
            .min()
            .expect("k >= 1");
        // For z ∈ F⁺ and c(γ) ∈ B(γ) ⊆ B_{h(γ)}: v(z - c(γ)) ≤ r_v(B_{h(γ)}).
        let max_ball = group
            .letters()
            .iter()
            .map(|&l| group.ball(l))
            .filter(|b| !b.complement)
            .map(|b| b.radius)
            .max()
            .unwrap_or(0);
        let worst_delta_val = (-ord_to_val(max_ball, e)).min(Ratio::from_integer(0));
        Ok(BoundsData { n_gamma: n, rho_val, c_val, table, worst_delta_val, e })
    }

    /// `v_δ(z) = -max_γ v(z - c(γ))`; `δ(∞) = 1`.
    pub fn delta_val(&self, z: &ProjPoint) -> Valuation {
        match z {
            ProjPoint::Infinity => Ratio::from_integer(0),
            ProjPoint::Finite(x) => {
                let m = self
                    .table
                    .iter()
                    .map(|t| x.ord_of_difference(&t.center))
                    .max()
                    .expect("table is non-empty");
                -ord_to_val(m, self.e)
            }
        }
    }

    /// `v_δ(D) = min` over the support.
    pub fn delta_of_divisor(&self, d: &Divisor0) -> Valuation {
        d.terms()
            .iter()
            .map(|(z, _)| self.delta_val(z))
            .min()
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    /// `v` of the diameter `R_D`; `None` when fewer than two finite points.
    pub fn diameter_val(&self, d: &Divisor0) -> Option<Valuation> {
        let pts: Vec<&El> = d.terms().iter().filter_map(|(z, _)| z.as_finite()).collect();
        let mut best: Option<i64> = None;
        for (k, a) in pts.iter().enumerate() {
            for b in &pts[k + 1..] {
                let o = a.ord_of_difference(b);
                best = Some(best.map_or(o, |x| x.min(o)));
            }
        }
        best.map(|o| ord_to_val(o, self.e))
    }

    /// `ν = max{2, n(Γ), ⌈(m - v_C - v_R - 2 v_δ)/v_ρ⌉}`, with the `v_R`
    /// term dropped when `R_D` is omitted. `m` is the target in `v_p` units.
    pub fn nu(&self, m: Valuation, delta_val: Valuation, diameter_val: Option<Valuation>) -> usize {
        let mut num = m - self.c_val - delta_val * Ratio::from_integer(2);
        if let Some(r) = diameter_val {
            num -= r;
        }
        let q = (num / self.rho_val).ceil().to_integer();
        q.max(2).max(self.n_gamma as i64) as usize
    }

    pub fn nu_for_divisor(&self, m: Valuation, d: &Divisor0) -> usize {
        self.nu(m, self.delta_of_divisor(d), self.diameter_val(d))
    }

    /// `ν` valid for `D = (z) - (∞)` at every `z ∈ F⁺`.
    pub fn nu_worst_case(&self, m: Valuation) -> usize {
        self.nu(m, self.worst_delta_val, None)
    }

    /// Lower bound for `v((D, γE) - 1)` at word length `len`.
    pub fn factor_bound(&self, len: usize, delta_val: Valuation, diameter_val: Option<Valuation>) -> Valuation {
        self.c_val
            + diameter_val.unwrap_or_else(|| Ratio::from_integer(0))
            + delta_val * Ratio::from_integer(2)
            + self.rho_val * Ratio::from_integer(len as i64)
    }
}

/// Target `m` given in digits of the uniformizer, as a `v_p` valuation.
pub fn digits_to_val(m: i64, e: u32) -> Valuation {
    Ratio::new(m, e as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::FieldDescriptor;
    use crate::projline::{parse_ball, Moebius};

    const N: i64 = 40;

    fn mr_group() -> SchottkyGroup {
        let f = FieldDescriptor::qp(3).unwrap();
        let el = |n: i64| El::from_int(&f, n, N);
        let mat = |a, b, c, d| Moebius::new(el(a), el(b), el(c), el(d)).unwrap();
        let gens = vec![mat(-5, 32, -8, 35), mat(-13, 80, -8, 43)];
        let balls = vec![
            (1, parse_ball("B(4, 1/9)", &f, N).unwrap()),
            (-1, parse_ball("B(1, 1/9)", &f, N).unwrap()),
            (2, parse_ball("B(5, 1/9)", &f, N).unwrap()),
            (-2, parse_ball("B(2, 1/9)", &f, N).unwrap()),
        ];
        SchottkyGroup::new(gens, balls, N).unwrap()
    }

    #[test]
    fn mr_group_constants() {
        let g = mr_group();
        let b = BoundsData::compute(&g).unwrap();
        assert_eq!(b.n_gamma, 1);
        assert!(b.rho_val > Ratio::from_integer(0));
        assert_eq!(b.rho_val, Ratio::from_integer(2));
        assert_eq!(b.c_val, Ratio::from_integer(0));
        assert_eq!(b.worst_delta_val, Ratio::from_integer(-2));
        assert_eq!(b.nu_worst_case(Ratio::from_integer(10)), 7);
    }

    #[test]
    fn radius_law() {
        let g = mr_group();
        let b = BoundsData::compute(&g).unwrap();
        for len in 1..=5 {
            for w in g.words_of_length(len) {
                let r = Ratio::new(g.gamma_ball(&w).unwrap().radius, 1);
                assert!(r >= b.c_val + b.rho_val * Ratio::from_integer(len as i64));
            }
        }
    }

    #[test]
    fn delta_and_diameter() {
        let g = mr_group();
        let f = g.field().clone();
        let b = BoundsData::compute(&g).unwrap();
        assert_eq!(b.delta_val(&ProjPoint::Infinity), Ratio::from_integer(0));
        // 0 is at distance 1 from the four centers 4,1,5,2 (mod 3: 1,1,2,2)
        let z = ProjPoint::Finite(El::from_int(&f, 0, N));
        assert_eq!(b.delta_val(&z), Ratio::from_integer(0));
        // 7 = 1 + 2*3 is at distance 1/3 from c(γ_{-1}) region
        let z7 = ProjPoint::Finite(El::from_int(&f, 7, N));
        assert!(b.delta_val(&z7) <= Ratio::from_integer(-1));
        assert!(b.delta_val(&z7) >= b.worst_delta_val);
        let d = Divisor0::elementary(z.clone(), ProjPoint::Infinity).unwrap();
        assert_eq!(b.diameter_val(&d), None);
        let d = Divisor0::elementary(z, z7).unwrap();
        assert_eq!(b.diameter_val(&d), Some(Ratio::from_integer(0)));
    }

    #[test]
    fn nu_clamps_and_is_monotone() {
        let g = mr_group();
        let b = BoundsData::compute(&g).unwrap();
        assert_eq!(b.nu_worst_case(Ratio::new(1, 100)), 3);
        assert_eq!(b.nu(Ratio::from_integer(-50), Ratio::from_integer(0), None), 2);
        let mut last = 0;
        for m in 1..40 {
            let nu = b.nu_worst_case(Ratio::from_integer(m));
            assert!(nu >= last);
            last = nu;
        }
    }
}
