//! Schottky groups in good position: generators with their fundamental
//! balls, reduced words, the balls `B(γ)`, and reduction of points and
//! divisors into the closed fundamental domain `F⁺`.

use crate::error::{Error, Result};
use crate::localfield::{Field, LocalFieldElement as El};
use crate::projline::{Ball, Divisor0, Moebius, ProjPoint};

/// A generator index in `±1..=±g`; `-i` stands for `γ_i^{-1}`.
pub type Letter = i32;

fn slot(l: Letter) -> usize {
    debug_assert!(l != 0);
    (l.unsigned_abs() as usize - 1) * 2 + usize::from(l < 0)
}

#[derive(Clone, Debug)]
pub struct SchottkyGroup {
    field: Field,
    prec: i64,
    /// `γ_l` for every letter, stored at `slot(l)`.
    mats: Vec<Moebius>,
    /// `B_l` for every letter, stored at `slot(l)`.
    balls: Vec<Ball>,
    conjugation: Option<Moebius>,
}

/// Outcome of the good-position checks, one entry per condition.
#[derive(Clone, Debug, Default)]
pub struct GoodPositionReport {
    pub disjoint: Vec<(Letter, Letter, bool)>,
    pub images: Vec<(Letter, bool)>,
    pub hyperbolic: Vec<(Letter, bool)>,
}

impl GoodPositionReport {
    pub fn passed(&self) -> bool {
        self.disjoint.iter().all(|x| x.2)
            && self.images.iter().all(|x| x.1)
            && self.hyperbolic.iter().all(|x| x.1)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, j, ok) in &self.disjoint {
            if !ok {
                out.push(format!("closed balls B({i}) and B({j}) meet"));
            }
        }
        for (i, ok) in &self.images {
            if !ok {
                out.push(format!("gamma({i}) does not map P1 - B({}) onto B({i})+", -i));
            }
        }
        for (i, ok) in &self.hyperbolic {
            if !ok {
                out.push(format!("gamma({i}) is not hyperbolic"));
            }
        }
        out
    }
}

/// A reduced word together with its matrix product.
#[derive(Clone, Debug)]
pub struct ReducedWord {
    pub letters: Vec<Letter>,
    pub matrix: Moebius,
}

impl ReducedWord {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn head(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn tail(&self) -> Option<Letter> {
        self.letters.last().copied()
    }
}

/// A divisor moved into `F⁺`, with the word used for each original point.
#[derive(Clone, Debug)]
pub struct ReducedDivisor {
    pub divisor: Divisor0,
    pub words: Vec<Vec<Letter>>,
}

/// `|Γ_{≤n}| = (g(2g-1)^n - 1)/(g-1)`, and `2n+1` for `g = 1`. Saturates
/// at `u128::MAX`.
pub fn count_words_up_to(g: u64, n: u32) -> u128 {
    if g == 1 {
        return 2 * n as u128 + 1;
    }
    let g = g as u128;
    match (2 * g - 1).checked_pow(n).and_then(|x| x.checked_mul(g)) {
        Some(x) => (x - 1) / (g - 1),
        None => u128::MAX,
    }
}

impl SchottkyGroup {
    /// Builds a group from `γ_1..γ_g` and the `2g` balls keyed by letter.
    /// No validation beyond shape; see [`SchottkyGroup::verify_good_position`].
    pub fn new(gens: Vec<Moebius>, balls: Vec<(Letter, Ball)>, prec: i64) -> Result<Self> {
        let g = gens.len();
        if g == 0 {
            return Err(Error::Parse("no generators".into()));
        }
        if balls.len() != 2 * g {
            return Err(Error::Parse(format!("expected {} balls, got {}", 2 * g, balls.len())));
        }
        let field = gens[0].field().clone();
        let mut mats = Vec::with_capacity(2 * g);
        for m in &gens {
            mats.push(m.clone());
            mats.push(m.inverse());
        }
        let mut slots: Vec<Option<Ball>> = vec![None; 2 * g];
        for (l, b) in balls {
            if l == 0 || l.unsigned_abs() as usize > g {
                return Err(Error::Parse(format!("ball index {l} out of range")));
            }
            if slots[slot(l)].replace(b).is_some() {
                return Err(Error::Parse(format!("duplicate ball index {l}")));
            }
        }
        let balls = slots.into_iter().map(|b| b.expect("all slots filled")).collect();
        Ok(SchottkyGroup { field, prec, mats, balls, conjugation: None })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn precision(&self) -> i64 {
        self.prec
    }

    pub fn genus(&self) -> usize {
        self.mats.len() / 2
    }

    /// `[1, -1, 2, -2, ...]`.
    pub fn letters(&self) -> Vec<Letter> {
        (1..=self.genus() as Letter).flat_map(|i| [i, -i]).collect()
    }

    pub fn gen(&self, l: Letter) -> &Moebius {
        &self.mats[slot(l)]
    }

    pub fn ball(&self, l: Letter) -> &Ball {
        &self.balls[slot(l)]
    }

    /// The map `h` with `self = h⁻¹ Γ_orig h`, if this group was produced by
    /// [`SchottkyGroup::normalize_infinity`].
    pub fn conjugation(&self) -> Option<&Moebius> {
        self.conjugation.as_ref()
    }

    pub fn verify_good_position(&self) -> GoodPositionReport {
        let mut rep = GoodPositionReport::default();
        let ls = self.letters();
        for (a, &i) in ls.iter().enumerate() {
            for &j in &ls[a + 1..] {
                let ok = self.ball(i).closure().is_disjoint(&self.ball(j).closure());
                rep.disjoint.push((i, j, ok));
            }
        }
        for &i in &ls {
            let src = self.ball(-i).complement();
            let ok = match src.image(self.gen(i)) {
                Ok(img) => img.same_set(&self.ball(i).closure()),
                Err(_) => false,
            };
            rep.images.push((i, ok));
        }
        for i in 1..=self.genus() as Letter {
            rep.hyperbolic.push((i, self.gen(i).is_hyperbolic()));
        }
        rep
    }

    pub fn word(&self, letters: &[Letter]) -> Result<ReducedWord> {
        let mut m = Moebius::identity(&self.field, self.prec);
        for (k, &l) in letters.iter().enumerate() {
            if l == 0 || l.unsigned_abs() as usize > self.genus() {
                return Err(Error::Parse(format!("letter {l} out of range")));
            }
            if k > 0 && letters[k - 1] == -l {
                return Err(Error::Parse("word is not reduced".into()));
            }
            m = m.compose(self.gen(l)).normalized();
        }
        Ok(ReducedWord { letters: letters.to_vec(), matrix: m })
    }

    /// All reduced words of length exactly `n`, in depth-first order grouped
    /// by head letter.
    pub fn words_of_length(&self, n: usize) -> WordIter<'_> {
        WordIter::new(self, n, None)
    }

    /// The class `Γ_n^{(i)}` of words of length `n` with head `i`.
    pub fn words_with_head(&self, n: usize, head: Letter) -> WordIter<'_> {
        WordIter::new(self, n, Some(head))
    }

    /// `B(γ) = γ(P¹ ∖ B_{-t}⁺)` where `t` is the last letter of `γ`.
    pub fn gamma_ball(&self, w: &ReducedWord) -> Result<Ball> {
        let t = w.tail().ok_or_else(|| Error::Degenerate("B(γ) of the identity".into()))?;
        self.ball(-t).closure().complement().image(&w.matrix)
    }

    /// The open fundamental balls containing `z`.
    fn containing_ball(&self, z: &ProjPoint) -> Option<Letter> {
        self.letters().into_iter().find(|&l| self.ball(l).contains(z))
    }

    pub fn in_closed_domain(&self, z: &ProjPoint) -> bool {
        self.containing_ball(z).is_none()
    }

    /// Writes `z = γ z₀` with `z₀ ∈ F⁺`, returning the letters of `γ`.
    pub fn reduce_point(&self, z: &ProjPoint) -> Result<(Vec<Letter>, ProjPoint)> {
        let cap = (4 * self.prec.max(1) as usize) * self.genus();
        let needed = self.balls.iter().map(|b| b.radius + 1).max().unwrap_or(0);
        let mut word = Vec::new();
        let mut cur = z.clone();
        loop {
            if let ProjPoint::Finite(x) = &cur {
                if x.precision() <= needed {
                    return Err(Error::Precision(format!(
                        "point lost its digits after {} reduction steps; it may lie in the limit set",
                        word.len()
                    )));
                }
            }
            let Some(l) = self.containing_ball(&cur) else { break };
            if word.len() >= cap {
                return Err(Error::OutOfDomain(format!(
                    "reduction did not terminate after {cap} steps (limit point or precision exhausted)"
                )));
            }
            cur = self.gen(-l).apply(&cur);
            word.push(l);
        }
        Ok((word, cur))
    }

    /// Anchor `w_l` on the sphere `∂B_{-l}` for `l > 0`. Different variants
    /// give different points of the same sphere.
    pub fn anchor(&self, l: Letter, variant: usize) -> El {
        let b = self.ball(-l);
        let pi = El::pi_pow(&self.field, 1, self.prec);
        let u = El::one(&self.field, self.prec).add(&El::from_int(&self.field, variant as i64, self.prec).mul(&pi));
        let r = El::pi_pow(&self.field, b.radius, self.prec + b.radius.abs());
        b.center.add(&u.mul(&r))
    }

    /// A divisor on `F⁺` in the same `Γ`-class as `d`.
    ///
    /// A point `x = γ_{l_1}⋯γ_{l_k} x₀` is replaced by `x₀` plus, for each
    /// letter, the correction `±((γ_l w_l) − (w_l))` with the anchor `w_l`
    /// on `∂B_{-l}`; the base point of each elementary step cancels since
    /// `d` has degree zero.
    pub fn reduce_divisor(&self, d: &Divisor0, variant: usize) -> Result<ReducedDivisor> {
        let g = self.genus();
        let mut counts = vec![0i64; g];
        let mut terms = Vec::new();
        let mut words = Vec::new();
        for (x, m) in d.terms() {
            let (w, x0) = self.reduce_point(x)?;
            for &l in &w {
                counts[l.unsigned_abs() as usize - 1] += m * l.signum() as i64;
            }
            terms.push((x0, *m));
            words.push(w);
        }
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let l = k as Letter + 1;
            let w = ProjPoint::Finite(self.anchor(l, variant));
            let w1 = self.gen(l).apply(&w);
            terms.push((w1, c));
            terms.push((w, -c));
        }
        Ok(ReducedDivisor { divisor: Divisor0::new(terms)?, words })
    }

    /// Conjugates so that `∞` lies in the interior of the fundamental domain
    /// and every ball is a proper disk. Returns the group unchanged when this
    /// already holds.
    pub fn normalize_infinity(&self) -> Result<SchottkyGroup> {
        let inf = ProjPoint::Infinity;
        if self.balls.iter().all(|b| !b.closure().contains(&inf)) {
            return Ok(self.clone());
        }
        let q = self
            .interior_candidates()
            .into_iter()
            .find(|q| {
                let z = ProjPoint::Finite(q.clone());
                self.balls.iter().all(|b| !b.closure().contains(&z))
            })
            .ok_or_else(|| {
                Error::OutOfDomain("no K-point found in the interior of the fundamental domain".into())
            })?;
        let f = &self.field;
        let h = Moebius::new(q, El::one(f, self.prec), El::one(f, self.prec), El::zero(f, self.prec))?;
        self.conjugate(&h)
    }

    /// `h⁻¹ Γ h`, with balls mapped by `h⁻¹`.
    pub fn conjugate(&self, h: &Moebius) -> Result<SchottkyGroup> {
        let hi = h.inverse();
        let mut mats = Vec::with_capacity(self.mats.len());
        for m in &self.mats {
            mats.push(hi.compose(m).compose(h).normalized());
        }
        let mut balls = Vec::with_capacity(self.balls.len());
        for b in &self.balls {
            balls.push(b.image(&hi)?);
        }
        let conjugation = Some(match &self.conjugation {
            Some(h0) => h0.compose(h),
            None => h.clone(),
        });
        Ok(SchottkyGroup { field: self.field.clone(), prec: self.prec, mats, balls, conjugation })
    }

    /// Moves a divisor of the original coordinates into this group's
    /// coordinates (applies `h⁻¹` for the recorded conjugation).
    pub fn transport(&self, d: &Divisor0) -> Divisor0 {
        match &self.conjugation {
            Some(h) => d.transform(&h.inverse()),
            None => d.clone(),
        }
    }

    /// Deterministic points of the open fundamental domain `F°`: midpoints
    /// of ball centers first, then small integers and powers of `π`.
    pub fn interior_points(&self, count: usize) -> Vec<ProjPoint> {
        let mut cands = Vec::new();
        if self.field.prime() != 2 {
            let half = El::from_int(&self.field, 2, self.prec).inv().expect("2 is a unit");
            for (a, x) in self.balls.iter().enumerate() {
                for y in &self.balls[a + 1..] {
                    cands.push(x.center.add(&y.center).mul(&half));
                }
            }
        }
        cands.extend(self.interior_candidates());
        let mut out: Vec<ProjPoint> = Vec::new();
        for c in cands {
            let z = ProjPoint::Finite(c);
            if out.len() == count {
                break;
            }
            if self.balls.iter().all(|b| !b.closure().contains(&z)) && !out.iter().any(|w| w.same(&z)) {
                out.push(z);
            }
        }
        out
    }

    fn interior_candidates(&self) -> Vec<El> {
        let f = &self.field;
        let n = self.prec;
        let p = f.prime() as i64;
        let mut out = Vec::new();
        for k in 0..=(2 * p) {
            out.push(El::from_int(f, k, n));
            out.push(El::from_int(f, -k, n));
        }
        for b in &self.balls {
            for k in (b.radius - 6)..=(b.radius + 2) {
                for u in 1..p.min(4) {
                    let t = El::from_int(f, u, n).mul(&El::pi_pow(f, k, n + k.abs()));
                    out.push(b.center.add(&t));
                    out.push(b.center.sub(&t));
                }
            }
        }
        for k in -20..=20 {
            out.push(El::pi_pow(f, k, n + 20));
        }
        out
    }

    /// The index-2 subgroup of even-length words, with coset
    /// representatives `{1, γ_1}`. Its free generators are `γ_1²`,
    /// `γ_jγ_1⁻¹` and `γ_1γ_j` for `j ≥ 2`; its fundamental domain is
    /// `F⁺ ∪ γ_1F⁺`.
    pub fn parity_subgroup(&self) -> Result<(SchottkyGroup, Vec<Moebius>)> {
        let g1 = self.gen(1);
        let mut gens = vec![g1.compose(g1)];
        let mut balls = vec![(1, self.ball(1).image(g1)?), (-1, self.ball(-1).clone())];
        for j in 2..=self.genus() as Letter {
            let k = gens.len() as Letter + 1;
            gens.push(self.gen(j).compose(self.gen(-1)));
            balls.push((k, self.ball(j).clone()));
            balls.push((-k, self.ball(-j).image(g1)?));
            let k = k + 1;
            gens.push(g1.compose(self.gen(j)));
            balls.push((k, self.ball(j).image(g1)?));
            balls.push((-k, self.ball(-j).clone()));
        }
        let sub = SchottkyGroup::new(gens, balls, self.prec)?;
        let reps = vec![Moebius::identity(&self.field, self.prec), g1.clone()];
        Ok((sub, reps))
    }
}

/// Depth-first enumeration of reduced words of a fixed length, reusing
/// prefix products.
pub struct WordIter<'a> {
    group: &'a SchottkyGroup,
    letters: Vec<Letter>,
    choice: Vec<usize>,
    prefix: Vec<Moebius>,
    fixed_head: bool,
    done: bool,
}

impl<'a> WordIter<'a> {
    fn new(group: &'a SchottkyGroup, n: usize, head: Option<Letter>) -> Self {
        let letters = group.letters();
        let mut it = WordIter {
            group,
            letters,
            choice: vec![0; n],
            prefix: Vec::with_capacity(n + 1),
            fixed_head: head.is_some(),
            done: false,
        };
        it.prefix.push(Moebius::identity(&group.field, group.prec));
        if n > 0 {
            if let Some(h) = head {
                match it.letters.iter().position(|&l| l == h) {
                    Some(i) => it.choice[0] = i,
                    None => it.done = true,
                }
            }
        }
        if !it.done {
            it.fill_from(usize::from(it.fixed_head));
            it.rebuild_prefix(0);
        }
        it
    }

    fn valid(&self, k: usize, c: usize) -> bool {
        k == 0 || self.letters[c] != -self.letters[self.choice[k - 1]]
    }

    /// Sets positions `k..` to their first valid choices.
    fn fill_from(&mut self, k: usize) {
        for pos in k..self.choice.len() {
            let c = (0..self.letters.len()).find(|&c| self.valid(pos, c)).expect("2g > 1 letters");
            self.choice[pos] = c;
        }
    }

    fn rebuild_prefix(&mut self, k: usize) {
        self.prefix.truncate(k + 1);
        for pos in k..self.choice.len() {
            let next = self.prefix[pos].compose(self.group.gen(self.letters[self.choice[pos]])).normalized();
            self.prefix.push(next);
        }
    }

    fn advance(&mut self) {
        let lo = usize::from(self.fixed_head);
        let mut k = self.choice.len();
        while k > lo {
            k -= 1;
            let next = (self.choice[k] + 1..self.letters.len()).find(|&c| self.valid(k, c));
            if let Some(c) = next {
                self.choice[k] = c;
                self.fill_from(k + 1);
                self.rebuild_prefix(k);
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for WordIter<'_> {
    type Item = ReducedWord;

    fn next(&mut self) -> Option<ReducedWord> {
        if self.done {
            return None;
        }
        let word = ReducedWord {
            letters: self.choice.iter().map(|&c| self.letters[c]).collect(),
            matrix: self.prefix.last().expect("prefix").clone(),
        };
        self.advance();
        Some(word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::FieldDescriptor;
    use crate::projline::parse_ball;

    const N: i64 = 40;

    fn el(f: &Field, n: i64) -> El {
        El::from_int(f, n, N)
    }

    fn mat(f: &Field, a: i64, b: i64, c: i64, d: i64) -> Moebius {
        Moebius::new(el(f, a), el(f, b), el(f, c), el(f, d)).unwrap()
    }

    fn mr_group() -> SchottkyGroup {
        let f = FieldDescriptor::qp(3).unwrap();
        let gens = vec![mat(&f, -5, 32, -8, 35), mat(&f, -13, 80, -8, 43)];
        let balls = vec![
            (1, parse_ball("B(4, 1/9)", &f, N).unwrap()),
            (-1, parse_ball("B(1, 1/9)", &f, N).unwrap()),
            (2, parse_ball("B(5, 1/9)", &f, N).unwrap()),
            (-2, parse_ball("B(2, 1/9)", &f, N).unwrap()),
        ];
        SchottkyGroup::new(gens, balls, N).unwrap()
    }

    fn free_group(g: usize) -> SchottkyGroup {
        // Only word counts matter here; the balls are placeholders.
        let f = FieldDescriptor::qp(5).unwrap();
        let mut gens = Vec::new();
        let mut balls = Vec::new();
        for i in 1..=g as i64 {
            gens.push(mat(&f, 1 + 25 * i, 5, 5, 1));
            balls.push((i as Letter, Ball::disk(el(&f, i), 1, false)));
            balls.push((-(i as Letter), Ball::disk(el(&f, -i), 1, false)));
        }
        SchottkyGroup::new(gens, balls, 10).unwrap()
    }

    #[test]
    fn mr_group_good_position() {
        let g = mr_group();
        let rep = g.verify_good_position();
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn bad_position_detected() {
        let f = FieldDescriptor::qp(3).unwrap();
        let gens = vec![mat(&f, -5, 32, -8, 35), mat(&f, -13, 80, -8, 43)];
        let balls = vec![
            (1, parse_ball("B(4, 1/9)", &f, N).unwrap()),
            (-1, parse_ball("B(1, 1/9)", &f, N).unwrap()),
            (2, parse_ball("B(5, 1/9)", &f, N).unwrap()),
            (-2, parse_ball("B(4, 1/9)", &f, N).unwrap()),
        ];
        let g = SchottkyGroup::new(gens, balls, N).unwrap();
        let rep = g.verify_good_position();
        assert!(!rep.passed());
        assert!(!rep.failures().is_empty());
    }

    #[test]
    fn word_counts() {
        for g in 2..=4usize {
            let grp = free_group(g);
            let mut total = 0u128;
            for n in 0..=4usize {
                total += grp.words_of_length(n).count() as u128;
                assert_eq!(total, count_words_up_to(g as u64, n as u32), "g={g} n={n}");
            }
        }
        assert_eq!(count_words_up_to(2, 6), 1457);
        assert_eq!(free_group(3).words_of_length(2).count(), 30);
        assert_eq!(free_group(2).words_of_length(0).count(), 1);
    }

    #[test]
    fn words_are_reduced_and_distinct() {
        let g = mr_group();
        let words: Vec<Vec<Letter>> = g.words_of_length(4).map(|w| w.letters).collect();
        assert_eq!(words.len(), 4 * 27);
        for w in &words {
            assert!(w.windows(2).all(|p| p[0] != -p[1]));
        }
        let mut sorted = words.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), words.len());
        // grouped by head, and each head class strips to length-3 words with head != -i
        for head in g.letters() {
            let class: Vec<_> = g.words_with_head(4, head).collect();
            assert_eq!(class.len(), 27);
            for w in class {
                assert_eq!(w.head(), Some(head));
                assert_ne!(w.letters[1], -head);
                let m = g.word(&w.letters).unwrap().matrix;
                assert!(m.projectively_eq(&w.matrix));
            }
        }
    }

    #[test]
    fn gamma_ball_nesting() {
        let g = mr_group();
        let mut entries = Vec::new();
        for n in 1..=4 {
            for w in g.words_of_length(n) {
                let b = g.gamma_ball(&w).unwrap();
                entries.push((w.letters.clone(), b));
            }
        }
        for (w, b) in &entries {
            if w.len() == 1 {
                assert!(b.is_subset(g.ball(w[0])));
            }
        }
        for (w1, b1) in &entries {
            for (w2, b2) in &entries {
                let prefix = w2.len() >= w1.len() && w2[..w1.len()] == w1[..];
                assert_eq!(b2.is_subset(b1), prefix, "{w1:?} {w2:?}");
            }
        }
    }

    #[test]
    fn reduce_point_cases() {
        let g = mr_group();
        let f = g.field().clone();
        let z0 = ProjPoint::Finite(el(&f, 0));
        assert!(g.in_closed_domain(&z0));
        let (w, back) = g.reduce_point(&z0).unwrap();
        assert!(w.is_empty() && back.same(&z0));
        let z = g.gen(1).apply(&z0);
        let (w, back) = g.reduce_point(&z).unwrap();
        assert_eq!(w, vec![1]);
        assert!(back.same(&z0));
        let z = g.word(&[2, 1, -2, -2]).unwrap().matrix.apply(&z0);
        let (w, back) = g.reduce_point(&z).unwrap();
        assert_eq!(w, vec![2, 1, -2, -2]);
        assert!(back.same(&z0));
        // attracting fixed point of γ_1 lies in B_1 and is fixed by γ_1^{-1}
        let fp = ProjPoint::Finite(el(&f, 4));
        assert!(g.gen(1).apply(&fp).same(&fp));
        assert!(g.reduce_point(&fp).is_err());
    }

    #[test]
    fn reduce_divisor_lands_in_domain() {
        let g = mr_group();
        let f = g.field().clone();
        let a = ProjPoint::Finite(el(&f, 0));
        let b = ProjPoint::Finite(el(&f, 3));
        let d = Divisor0::elementary(a.clone(), b.clone()).unwrap();
        let r = g.reduce_divisor(&d, 0).unwrap();
        assert_eq!(r.divisor.terms().len(), 2);
        let ga = g.gen(1).apply(&a);
        let d = Divisor0::elementary(ga, b).unwrap();
        let r = g.reduce_divisor(&d, 0).unwrap();
        assert_eq!(r.words[0], vec![1]);
        assert_eq!(r.divisor.terms().len(), 4);
        for (z, _) in r.divisor.terms() {
            assert!(g.in_closed_domain(z));
        }
        // anchors sit on the boundary spheres
        let w = g.anchor(1, 0);
        assert_eq!(w.ord_of_difference(&g.ball(-1).center), g.ball(-1).radius);
        let w1 = g.gen(1).apply(&ProjPoint::Finite(w));
        let w1 = w1.as_finite().unwrap();
        assert_eq!(w1.ord_of_difference(&g.ball(1).center), g.ball(1).radius);
        assert!(!g.anchor(1, 0).approx_eq(&g.anchor(1, 1)));
    }

    #[test]
    fn normalize_is_identity_when_infinity_is_interior() {
        let g = mr_group();
        let h = g.normalize_infinity().unwrap();
        assert!(h.conjugation().is_none());
    }

    #[test]
    fn normalize_complement_ball_group() {
        // Genus one: γ = diag(5^6, 1) with B_1 = B(0, 5^-3), B_-1 = P1 - B(0, 5^3)+.
        let f = FieldDescriptor::qp(5).unwrap();
        let gens = vec![mat(&f, 15625, 0, 0, 1)];
        let balls = vec![
            (1, parse_ball("B(0, 5^-3)", &f, N).unwrap()),
            (-1, parse_ball("P1 - B(0, 5^3)+", &f, N).unwrap()),
        ];
        let g = SchottkyGroup::new(gens, balls, N).unwrap();
        assert!(g.verify_good_position().passed());
        let h = g.normalize_infinity().unwrap();
        assert!(h.conjugation().is_some());
        assert!(h.verify_good_position().passed(), "{:?}", h.verify_good_position().failures());
        for l in h.letters() {
            assert!(!h.ball(l).complement);
            assert!(!h.ball(l).closure().contains(&ProjPoint::Infinity));
        }
    }

    #[test]
    fn parity_subgroup_is_good() {
        let g = mr_group();
        let (sub, reps) = g.parity_subgroup().unwrap();
        assert_eq!(sub.genus(), 3);
        assert_eq!(reps.len(), 2);
        let rep = sub.verify_good_position();
        assert!(rep.passed(), "{:?}", rep.failures());
    }
}
