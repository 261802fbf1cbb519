//! Closed forms for a finite dihedral group `W_I = <s, t>`: two-sided cells
//! and a-values, `deg p_{v,d_I}`, the function `F(u, v)` through the
//! `lambda` / `mu` recursions, and the degree classification of `Nf_{u,v,z}`
//! for short `z`.
//!
//! Formulas are stated with `s` the lighter generator. When the heavier one
//! comes first, the roles are swapped on entry; elements always stay in the
//! caller's labelling.

use crate::coxeter::{CoxeterSystem, Element, Gen};
use crate::error::{Error, Result};
use crate::kl::KlTable;
use crate::laurent::{Coeff, Degree, LaurentPoly};
use crate::quotient::QuotientContext;

pub struct Dihedral {
    sys: CoxeterSystem,
    m: u32,
    light: Gen,
    heavy: Gen,
    lo: u32,
    hi: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfCase {
    /// `z = e`: degree at most 0.
    Identity,
    /// `z = r`: degree at most `L(r)`; equality forces `ru < u`, `vr < v`.
    Generator { equality: bool },
    /// `z = s1 s2`, cases 1 to 5 of the classification.
    Pair(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NfClassification<C: Coeff> {
    /// `None` when the computed value fits no case.
    pub case: Option<NfCase>,
    pub degree: Degree,
    pub value: LaurentPoly<C>,
}

impl Dihedral {
    /// `W_I` of order `2m` with `L(s) = a`, `L(t) = b`.
    pub fn new(m: u32, a: u32, b: u32) -> Result<Self> {
        if m < 3 {
            return Err(Error::Domain(format!("finite dihedral closed forms need 3 <= m, got {m}")));
        }
        if a == 0 || b == 0 {
            return Err(Error::Domain("weights must be positive".into()));
        }
        if a != b && m % 2 == 1 {
            return Err(Error::Domain(format!("odd m = {m} forces equal weights")));
        }
        let sys = CoxeterSystem::dihedral(m, a, b)?;
        let (light, heavy) = if a <= b { (0, 1) } else { (1, 0) };
        Ok(Dihedral { sys, m, light, heavy, lo: a.min(b), hi: a.max(b) })
    }

    pub fn system(&self) -> &CoxeterSystem {
        &self.sys
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn light(&self) -> Gen {
        self.light
    }

    pub fn heavy(&self) -> Gen {
        self.heavy
    }

    pub fn is_equal_parameter(&self) -> bool {
        self.lo == self.hi
    }

    fn other(&self, r: Gen) -> Gen {
        1 - r
    }

    /// `w(r, n)`: length `n`, starting with `r`.
    pub fn starting_with(&self, r: Gen, n: u32) -> Element {
        let word: Vec<Gen> = (0..n).map(|i| if i % 2 == 0 { r } else { self.other(r) }).collect();
        self.sys.canonicalize(&word)
    }

    /// `w(n, r)`: length `n`, ending with `r`.
    pub fn ending_with(&self, n: u32, r: Gen) -> Element {
        self.sys.inverse(self.starting_with(r, n))
    }

    /// `w_I`.
    pub fn longest(&self) -> Element {
        self.starting_with(0, self.m)
    }

    /// `d_I = w(t, m - 1)` with `t` heavier; only for unequal weights.
    pub fn subregular(&self) -> Option<Element> {
        (!self.is_equal_parameter()).then(|| self.starting_with(self.heavy, self.m - 1))
    }

    fn counts(&self, v: Element) -> (i32, i32) {
        let word = self.sys.word(v);
        let heavy = word.iter().filter(|&&r| r == self.heavy).count() as i32;
        (word.len() as i32 - heavy, heavy)
    }

    /// `L'(v) = L(t) #t - L(s) #s` with `t` heavier.
    pub fn l_prime(&self, v: Element) -> i32 {
        let (light, heavy) = self.counts(v);
        heavy * self.hi as i32 - light * self.lo as i32
    }

    /// Two-sided cells with their a-values, in increasing order of `a`.
    pub fn cells(&self) -> Vec<(Vec<Element>, u32)> {
        let e = self.sys.identity();
        let w0 = self.longest();
        let top = w0.weight();
        let mut rest: Vec<Element> = self.sys.ball(self.m);
        match self.subregular() {
            None => {
                rest.retain(|&w| w != e && w != w0);
                vec![(vec![e], 0), (rest, self.lo), (vec![w0], top)]
            }
            Some(d) => {
                let s = self.sys.generator(self.light);
                rest.retain(|&w| w != e && w != w0 && w != d && w != s);
                vec![(vec![e], 0), (vec![s], self.lo), (rest, self.hi), (vec![d], self.l_prime(d) as u32), (vec![w0], top)]
            }
        }
    }

    /// `deg p_{v,d_I} = L'(v) - L'(d_I)`.
    pub fn deg_p_to_subregular(&self, v: Element) -> Result<i32> {
        let d = self.subregular().ok_or_else(|| Error::Domain("d_I needs unequal weights".into()))?;
        if !self.sys.bruhat_leq(v, d) {
            return Err(Error::Domain(format!("{} is not below d_I", self.sys.format_word(v))));
        }
        Ok(self.l_prime(v) - self.l_prime(d))
    }

    fn half(&self) -> i64 {
        (self.m / 2) as i64
    }

    fn xi<C: Coeff>(&self, weight: u32) -> LaurentPoly<C> {
        LaurentPoly::xi(weight)
    }

    /// `mu_0, ..., mu_{m-1}`.
    pub fn mu_table<C: Coeff>(&self) -> Vec<LaurentPoly<C>> {
        let top = self.m as usize;
        let (xa, xb) = (self.xi::<C>(self.lo), self.xi::<C>(self.hi));
        let minus_qa = -LaurentPoly::<C>::q_pow(-(self.lo as i32));
        let mut mu: Vec<LaurentPoly<C>> = Vec::with_capacity(top);
        mu.push(LaurentPoly::one());
        for i in 1..top {
            let next = if i % 2 == 0 {
                &minus_qa * &mu[i - 1]
            } else {
                &(&xb * &strided_sum(&mu, i as i64 - 1)) + &(&xa * &strided_sum(&mu, i as i64 - 3))
            };
            mu.push(next);
        }
        mu
    }

    /// `lambda_{i,j}`, defined by `T_{w(i,t)} U_{m-1} = sum_j lambda_{i,j} U_{m-1-j}`.
    pub fn lambda<C: Coeff>(&self, mu: &[LaurentPoly<C>], i: i64, j: i64) -> LaurentPoly<C> {
        if i < j {
            return LaurentPoly::zero();
        }
        if (i + j) % 2 == 0 || j == 0 {
            return mu[(i - j) as usize].clone();
        }
        let (xa, xb) = (self.xi::<C>(self.lo), self.xi::<C>(self.hi));
        let (first, second) = if i % 2 == 0 { (xa, xb) } else { (xb, xa) };
        &(&first * &strided_sum(mu, i - j - 1)) + &(&second * &strided_sum(mu, i - j - 3))
    }

    /// `F(u, v) = f_{u,v,d_I} - p_{d_I,w_I} f_{u,v,w_I}` for `u, v != w_I`.
    pub fn f_uv<C: Coeff>(&self, u: Element, v: Element) -> Result<LaurentPoly<C>> {
        if self.is_equal_parameter() {
            return Err(Error::Domain("F(u, v) needs unequal weights".into()));
        }
        let w0 = self.longest();
        if u == w0 || v == w0 {
            return Err(Error::Domain("F(u, v) is defined for u, v != w_I".into()));
        }
        let s = self.light;
        let step = -LaurentPoly::<C>::q_pow(-(self.lo as i32));
        let mut factor = LaurentPoly::<C>::one();
        let (mut u, mut v) = (u, v);
        loop {
            if self.sys.right_descent_mask(v) & (1 << s) != 0 {
                v = self.sys.mul_gen_right(v, s);
            } else if self.sys.left_descent_mask(u) & (1 << s) != 0 {
                u = self.sys.mul_gen_left(s, u);
            } else {
                break;
            }
            factor = &factor * &step;
        }
        let mu = self.mu_table::<C>();
        let j = self.half() * 2 - 1 - u.length() as i64;
        Ok(&factor * &self.lambda(&mu, v.length() as i64, j))
    }

    /// Classifies `Nf_{u,v,z}` for `z ∈ {e, s, t, st, ts}`, with the value
    /// taken from the quotient engine.
    pub fn classify_nf_degree<C: Coeff>(
        &self,
        ctx: &QuotientContext<'_, C>,
        table: &mut KlTable<C>,
        u: Element,
        v: Element,
        z: Element,
    ) -> Result<NfClassification<C>> {
        if z.length() > 2 {
            return Err(Error::Domain("z must be one of e, s, t, st, ts".into()));
        }
        let sys = &self.sys;
        let value = ctx.nf_const(table, u, v, z)?;
        let degree = value.degree();
        let deg = degree.finite().unwrap_or(i32::MIN);
        let word = sys.word(z);
        let case = match word.as_slice() {
            [] => (deg <= 0).then_some(NfCase::Identity),
            [r] => {
                let bound = sys.weight(*r) as i32;
                let descents = sys.left_descent_mask(u) & (1 << r) != 0 && sys.right_descent_mask(v) & (1 << r) != 0;
                if deg < bound {
                    Some(NfCase::Generator { equality: false })
                } else if deg == bound && descents {
                    Some(NfCase::Generator { equality: true })
                } else {
                    None
                }
            }
            [s1, s2] => {
                let (l1, l2) = (sys.weight(*s1) as i32, sys.weight(*s2) as i32);
                let w0 = self.longest();
                let first = sys.generator(*s1);
                let last = sys.generator(*s2);
                if deg <= 0 {
                    Some(NfCase::Pair(1))
                } else if deg == l1 + l2 && u == w0 && v == w0 {
                    Some(NfCase::Pair(2))
                } else if deg == l1 && sys.left_descent_mask(u) & (1 << s1) != 0 && v == sys.mul(sys.inverse(u), last) {
                    Some(NfCase::Pair(3))
                } else if deg == l2 && sys.right_descent_mask(v) & (1 << s2) != 0 && u == sys.mul(first, sys.inverse(v)) {
                    Some(NfCase::Pair(4))
                } else if deg == (l1 - l2).abs() && deg > 0 && self.subregular().is_some_and(|d| u == d && v == d) {
                    Some(NfCase::Pair(5))
                } else {
                    None
                }
            }
            _ => unreachable!(),
        };
        Ok(NfClassification { case, degree, value })
    }
}

/// `sum_{n >= 0} mu_{start - 4n}` over nonnegative indices.
fn strided_sum<C: Coeff>(mu: &[LaurentPoly<C>], start: i64) -> LaurentPoly<C> {
    let mut acc = LaurentPoly::zero();
    let mut k = start;
    while k >= 0 {
        acc += &mu[k as usize];
        k -= 4;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hecke::f_const;
    use crate::strata::Stratification;
    use crate::{Int, Poly};

    const UNEQUAL: [(u32, u32, u32); 5] = [(4, 1, 2), (6, 1, 3), (6, 2, 3), (8, 1, 2), (4, 3, 1)];

    #[test]
    fn cell_values() {
        let a = |m, x, y| Dihedral::new(m, x, y).unwrap().cells().into_iter().map(|c| c.1).collect::<Vec<_>>();
        assert_eq!(a(3, 1, 1), vec![0, 1, 3]);
        assert_eq!(a(4, 1, 2), vec![0, 1, 2, 3, 6]);
        assert_eq!(a(6, 1, 3), vec![0, 1, 3, 7, 12]);
        assert_eq!(a(4, 2, 1), vec![0, 1, 2, 3, 6]);
        let dih = Dihedral::new(4, 1, 2).unwrap();
        let cells = dih.cells();
        assert_eq!(cells.iter().map(|c| c.0.len()).sum::<usize>(), 8);
        assert!(Dihedral::new(5, 1, 2).is_err());
    }

    #[test]
    fn relabelled_heavy_first() {
        let dih = Dihedral::new(4, 3, 1).unwrap();
        assert_eq!(dih.light(), 1);
        assert_eq!(dih.system().format_word(dih.subregular().unwrap()), "s t s");
        assert_eq!(dih.l_prime(dih.subregular().unwrap()), 2 * 3 - 1);
    }

    #[test]
    fn degree_of_p_to_subregular() {
        let dih = Dihedral::new(4, 1, 2).unwrap();
        let sys = dih.system();
        let w = |s: &str| sys.parse_word(s).unwrap();
        assert_eq!(dih.deg_p_to_subregular(w("t s t")).unwrap(), 0);
        assert_eq!(dih.deg_p_to_subregular(w("t")).unwrap(), -1);
        assert_eq!(dih.deg_p_to_subregular(w("s")).unwrap(), -4);
        assert!(matches!(dih.deg_p_to_subregular(w("s t s")), Err(Error::Domain(_))));
        for (m, a, b) in UNEQUAL {
            let dih = Dihedral::new(m, a, b).unwrap();
            let sys = dih.system();
            let d = dih.subregular().unwrap();
            let mut table = KlTable::<Int>::new(sys);
            for v in sys.lower_interval(d).iter() {
                let p = table.p(sys, *v, d).unwrap();
                assert_eq!(p.degree(), Degree::Finite(dih.deg_p_to_subregular(*v).unwrap()));
            }
        }
    }

    #[test]
    fn lambda_matches_its_defining_recursion() {
        for (m, a, b) in UNEQUAL {
            let dih = Dihedral::new(m, a, b).unwrap();
            let n = m as usize;
            let (xa, xb) = (Poly::xi(dih.lo), Poly::xi(dih.hi));
            let minus_qa = -Poly::q_pow(-(dih.lo as i32));
            let mut rec = vec![vec![Poly::zero(); n]; n];
            rec[0][0] = Poly::one();
            for i in 1..n {
                for j in 0..n {
                    rec[i][j] = if i % 2 == 0 && (j == 0 || j == n - 1) {
                        &minus_qa * &rec[i - 1][j]
                    } else if (i + j) % 2 == 0 {
                        rec[i - 1][j - 1].clone()
                    } else if i % 2 == 0 {
                        &(&xa * &rec[i - 1][j]) + &rec[i - 1][j + 1]
                    } else {
                        &(&xb * &rec[i - 1][j]) + rec[i - 1].get(j + 1).unwrap_or(&Poly::zero())
                    };
                }
            }
            let mu = dih.mu_table::<Int>();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(dih.lambda(&mu, i as i64, j as i64), rec[i][j], "m={m} i={i} j={j}");
                }
            }
            let h = (m / 2) as i32;
            for (k, p) in mu.iter().enumerate() {
                let k = k as i32;
                let expect = (k / 2) * (dih.hi - dih.lo) as i32 + if k % 2 == 1 { dih.hi as i32 } else { 0 };
                assert_eq!(p.degree(), Degree::Finite(expect));
                assert!(k < 2 * h);
            }
        }
    }

    fn engine_f(dih: &Dihedral, table: &mut KlTable<Int>, u: Element, v: Element) -> Poly {
        let sys = dih.system();
        let (d, w0) = (dih.subregular().unwrap(), dih.longest());
        let p = table.p(sys, d, w0).unwrap();
        f_const::<Int>(sys, u, v, d) - &p * &f_const::<Int>(sys, u, v, w0)
    }

    #[test]
    fn f_uv_examples() {
        let dih = Dihedral::new(4, 1, 2).unwrap();
        let sys = dih.system();
        let w = |s: &str| sys.parse_word(s).unwrap();
        assert_eq!(dih.f_uv::<Int>(w("t"), w("s t")).unwrap(), Poly::one());
        assert_eq!(dih.f_uv::<Int>(w("t"), w("t s")).unwrap(), Poly::zero());
        assert_eq!(dih.f_uv::<Int>(w("t s"), w("s t")).unwrap(), Poly::xi(1));
        assert_eq!(dih.f_uv::<Int>(w("t s t"), w("t s t")).unwrap().degree(), Degree::Finite(3));
        assert!(matches!(dih.f_uv::<Int>(dih.longest(), w("t")), Err(Error::Domain(_))));
    }

    #[test]
    fn f_uv_matches_engine() {
        for (m, a, b) in UNEQUAL {
            let dih = Dihedral::new(m, a, b).unwrap();
            let sys = dih.system();
            let mut table = KlTable::<Int>::new(sys);
            let w0 = dih.longest();
            for u in sys.ball(m).into_iter().filter(|&u| u != w0) {
                for v in sys.ball(m).into_iter().filter(|&v| v != w0) {
                    assert_eq!(dih.f_uv::<Int>(u, v).unwrap(), engine_f(&dih, &mut table, u, v));
                }
            }
        }
    }

    #[test]
    fn longest_element_products() {
        for (m, a, b) in [(3, 1, 1), (4, 1, 1), (4, 1, 2), (6, 1, 3), (6, 2, 3)] {
            let dih = Dihedral::new(m, a, b).unwrap();
            let sys = dih.system();
            let w0 = dih.longest();
            for u in sys.ball(m) {
                for v in sys.ball(m) {
                    let f = f_const::<Int>(sys, u, v, w0);
                    let meet = sys.right_descent_mask(u) & sys.left_descent_mask(v) != 0;
                    let total = u.length() + v.length();
                    if (!meet && total >= m) || (meet && total > m) {
                        let expect = u.weight() as i32 + v.weight() as i32 - w0.weight() as i32;
                        assert_eq!(f.degree(), Degree::Finite(expect));
                    }
                }
            }
        }
    }

    #[test]
    fn subregular_corollary_bound() {
        for (m, a, b) in UNEQUAL {
            let dih = Dihedral::new(m, a, b).unwrap();
            let sys = dih.system();
            let (d, w0) = (dih.subregular().unwrap(), dih.longest());
            let st = sys.canonicalize(&[dih.light, dih.heavy]);
            let bound = Degree::Finite(dih.l_prime(d) - 2 * dih.l_prime(st));
            for u in sys.ball(m).into_iter().filter(|&u| u != d && u != w0) {
                for v in sys.ball(m).into_iter().filter(|&v| v != d && v != w0) {
                    assert!(dih.f_uv::<Int>(u, v).unwrap().degree() <= bound);
                }
            }
        }
    }

    #[test]
    fn degree_ladder_below_the_top() {
        for (m, a, b) in [(3, 1, 1), (4, 1, 1), (4, 1, 2), (6, 1, 3), (6, 2, 3), (6, 1, 1)] {
            let dih = Dihedral::new(m, a, b).unwrap();
            let sys = dih.system();
            let strat = Stratification::build(sys);
            let mut table = KlTable::<Int>::new(sys);
            let w0 = dih.longest();
            let level = w0.weight() - 1;
            let ctx = QuotientContext::new(sys, &strat, level, 2 * m);
            let (lo, hi) = (dih.lo as i32, dih.hi as i32);
            for u in sys.ball(m).into_iter().filter(|&u| u != w0) {
                for v in sys.ball(m).into_iter().filter(|&v| v != w0) {
                    let deg = ctx.nt_product(&mut table, u, v).unwrap().degree();
                    let l = u.length() as i32;
                    assert!(deg <= Degree::Finite(hi + (l - 1).div_euclid(2) * (hi - lo)));
                    if sys.right_descent_mask(u) & (1 << dih.light) != 0 {
                        assert!(deg <= Degree::Finite(hi + (l - 2).div_euclid(2) * (hi - lo)));
                    }
                    if sys.right_descent_mask(u) & sys.left_descent_mask(v) == 0 {
                        assert!(deg <= Degree::Finite((l / 2) * (hi - lo)));
                    }
                    if lo < hi {
                        let d = dih.subregular().unwrap();
                        let top = Degree::Finite(dih.l_prime(d));
                        assert!(deg <= top);
                        assert_eq!(deg == top, u == d && v == d);
                    }
                }
            }
        }
    }

    #[test]
    fn nf_classification_holds() {
        for (m, a, b) in [(3, 1, 1), (4, 1, 1), (4, 1, 2), (6, 1, 3), (6, 2, 3), (8, 1, 2)] {
            let dih = Dihedral::new(m, a, b).unwrap();
            let sys = dih.system();
            let strat = Stratification::build(sys);
            let mut table = KlTable::<Int>::new(sys);
            let shorts: Vec<Element> = sys.ball(2);
            for level in strat.levels() {
                let ctx = QuotientContext::new(sys, &strat, level, 2 * m);
                let low: Vec<Element> = sys.ball(m).into_iter().filter(|w| !ctx.is_over_ideal(*w)).collect();
                for &z in shorts.iter().filter(|z| !ctx.is_over_ideal(**z)) {
                    for &u in &low {
                        for &v in &low {
                            let c = dih.classify_nf_degree(&ctx, &mut table, u, v, z).unwrap();
                            assert!(c.case.is_some(), "m={m} a={a} b={b} N={level} {:?}", c);
                        }
                    }
                }
            }
        }
        let dih = Dihedral::new(4, 1, 2).unwrap();
        let sys = dih.system();
        let strat = Stratification::build(sys);
        let mut table = KlTable::<Int>::new(sys);
        let d = dih.subregular().unwrap();
        let st = sys.parse_word("s t").unwrap();
        let ctx = QuotientContext::new(sys, &strat, 5, 8);
        let c = dih.classify_nf_degree(&ctx, &mut table, d, d, st).unwrap();
        assert_eq!((c.case, c.degree), (Some(NfCase::Pair(5)), Degree::Finite(1)));
        let ctx = QuotientContext::new(sys, &strat, 6, 8);
        let w0 = dih.longest();
        let c = dih.classify_nf_degree(&ctx, &mut table, w0, w0, st).unwrap();
        assert_eq!((c.case, c.degree), (Some(NfCase::Pair(2)), Degree::Finite(3)));
    }
}
