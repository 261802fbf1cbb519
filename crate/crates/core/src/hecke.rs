//! The Hecke algebra in the standard basis: products, the bar involution,
//! the trace and the structure constants `f_{x,y,z}`.

use std::collections::HashMap;
use std::fmt;

use crate::coxeter::{CoxeterSystem, Element, Gen};
use crate::error::{Error, Result};
use crate::laurent::{Coeff, Degree, LaurentPoly};

/// Which basis the keys of a [`HeckeElement`] index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Standard basis `T_w`.
    T,
    /// Kazhdan-Lusztig basis `C_w`.
    C,
    /// Standard basis of a truncated quotient.
    NT,
    /// Kazhdan-Lusztig basis of a truncated quotient.
    NC,
}

impl Basis {
    pub fn symbol(self) -> &'static str {
        match self {
            Basis::T => "T",
            Basis::C => "C",
            Basis::NT => "NT",
            Basis::NC => "NC",
        }
    }
}

/// A finite linear combination of basis symbols with Laurent coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct HeckeElement<C> {
    basis: Basis,
    terms: HashMap<Element, LaurentPoly<C>>,
}

impl<C: Coeff> fmt::Debug for HeckeElement<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by_key(|(w, _)| (w.length(), w.id()));
        f.debug_struct("HeckeElement").field("basis", &self.basis).field("terms", &terms).finish()
    }
}

impl<C: Coeff> HeckeElement<C> {
    pub fn zero(basis: Basis) -> Self {
        HeckeElement { basis, terms: HashMap::new() }
    }

    /// The basis element indexed by `w`.
    pub fn basis_element(basis: Basis, w: Element) -> Self {
        Self::monomial(basis, w, LaurentPoly::one())
    }

    pub fn monomial(basis: Basis, w: Element, c: LaurentPoly<C>) -> Self {
        let mut h = Self::zero(basis);
        h.add_term(w, &c);
        h
    }

    pub fn from_terms(basis: Basis, terms: impl IntoIterator<Item = (Element, LaurentPoly<C>)>) -> Self {
        let mut h = Self::zero(basis);
        for (w, c) in terms {
            h.add_term(w, &c);
        }
        h
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Reinterprets the keys in another basis.
    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Element, &LaurentPoly<C>)> {
        self.terms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = Element> + '_ {
        self.terms.keys().copied()
    }

    pub fn coefficient(&self, w: Element) -> LaurentPoly<C> {
        self.terms.get(&w).cloned().unwrap_or_default()
    }

    pub fn coefficient_ref(&self, w: Element) -> Option<&LaurentPoly<C>> {
        self.terms.get(&w)
    }

    /// `self += c * basis(w)`.
    pub fn add_term(&mut self, w: Element, c: &LaurentPoly<C>) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&w) {
            Some(x) => {
                *x += c;
                if x.is_zero() {
                    self.terms.remove(&w);
                }
            }
            None => {
                self.terms.insert(w, c.clone());
            }
        }
    }

    /// `self += factor * c * basis(w)`.
    pub fn add_term_mul(&mut self, w: Element, c: &LaurentPoly<C>, factor: &LaurentPoly<C>) {
        if c.is_zero() || factor.is_zero() {
            return;
        }
        let prod = c * factor;
        self.add_term(w, &prod);
    }

    pub fn remove(&mut self, w: Element) -> Option<LaurentPoly<C>> {
        self.terms.remove(&w)
    }

    fn check_same_basis(&self, other: &Self) {
        assert_eq!(self.basis, other.basis, "mixed basis tags in a linear combination");
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Self, factor: &LaurentPoly<C>) {
        self.check_same_basis(other);
        for (w, c) in &other.terms {
            self.add_term_mul(*w, c, factor);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.check_same_basis(other);
        for (w, c) in &other.terms {
            self.add_term(*w, c);
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        self.check_same_basis(other);
        for (w, c) in &other.terms {
            self.add_term(*w, &-c);
        }
    }

    pub fn scale(&self, factor: &LaurentPoly<C>) -> Self {
        let mut out = Self::zero(self.basis);
        out.add_scaled(self, factor);
        out
    }

    pub fn neg(&self) -> Self {
        HeckeElement { basis: self.basis, terms: self.terms.iter().map(|(w, c)| (*w, -c)).collect() }
    }

    /// Maximum coefficient degree; `NegInfinity` for zero.
    pub fn degree(&self) -> Degree {
        self.terms.values().map(|c| c.degree()).max().unwrap_or(Degree::NegInfinity)
    }

    /// Applies `q -> q^-1` to every coefficient without touching basis symbols.
    pub fn bar_coefficients(&self) -> Self {
        HeckeElement { basis: self.basis, terms: self.terms.iter().map(|(w, c)| (*w, c.bar())).collect() }
    }

    /// Terms sorted ShortLex by key.
    pub fn sorted_terms(&self, sys: &CoxeterSystem) -> Vec<(Element, LaurentPoly<C>)> {
        let mut keys: Vec<Element> = self.terms.keys().copied().collect();
        sys.sort_shortlex(&mut keys);
        keys.into_iter().map(|w| (w, self.terms[&w].clone())).collect()
    }

    /// One `coeff * T[word]` line per term, sorted ShortLex.
    pub fn format(&self, sys: &CoxeterSystem) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        self.sorted_terms(sys)
            .into_iter()
            .map(|(w, c)| {
                let coeff = if c.len() > 1 { format!("({c})") } else { c.to_string() };
                format!("{coeff} * {}[{}]", self.basis.symbol(), sys.format_word(w))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// `h * T_s` for `h` in a standard basis.
pub fn mul_gen_right<C: Coeff>(sys: &CoxeterSystem, h: &HeckeElement<C>, s: Gen) -> HeckeElement<C> {
    let xi = LaurentPoly::<C>::xi(sys.weight(s));
    let mut out = HeckeElement::zero(h.basis);
    let mut arena = sys.arena();
    for (x, c) in &h.terms {
        let xs_id = arena.mul_right(x.id(), s);
        let xs = arena.elem(xs_id);
        out.add_term(xs, c);
        if xs.length() < x.length() {
            out.add_term_mul(*x, c, &xi);
        }
    }
    out
}

/// `T_s * h` for `h` in a standard basis.
pub fn mul_gen_left<C: Coeff>(sys: &CoxeterSystem, s: Gen, h: &HeckeElement<C>) -> HeckeElement<C> {
    let xi = LaurentPoly::<C>::xi(sys.weight(s));
    let mut out = HeckeElement::zero(h.basis);
    let mut arena = sys.arena();
    for (x, c) in &h.terms {
        let sx_id = arena.mul_left(s, x.id());
        let sx = arena.elem(sx_id);
        out.add_term(sx, c);
        if sx.length() < x.length() {
            out.add_term_mul(*x, c, &xi);
        }
    }
    out
}

/// `h * T_w`.
pub fn mul_t_right<C: Coeff>(sys: &CoxeterSystem, h: &HeckeElement<C>, w: Element) -> HeckeElement<C> {
    let mut out = h.clone();
    for s in sys.word(w) {
        out = mul_gen_right(sys, &out, s);
    }
    out
}

/// Product of two standard-basis elements. Right factors are processed along
/// the prefix tree of their canonical words so that shared prefixes are
/// multiplied once.
pub fn mul_t<C: Coeff>(sys: &CoxeterSystem, h1: &HeckeElement<C>, h2: &HeckeElement<C>) -> Result<HeckeElement<C>> {
    if h1.basis != h2.basis || !matches!(h1.basis, Basis::T | Basis::NT) {
        return Err(Error::Contract(format!("standard-basis product needs matching T-type tags, got {:?} and {:?}", h1.basis, h2.basis)));
    }
    Ok(mul_t_unchecked(sys, h1, h2))
}

pub(crate) fn mul_t_unchecked<C: Coeff>(sys: &CoxeterSystem, h1: &HeckeElement<C>, h2: &HeckeElement<C>) -> HeckeElement<C> {
    let mut out = HeckeElement::zero(h1.basis);
    if h1.is_zero() || h2.is_zero() {
        return out;
    }
    let mut right: Vec<(Element, Vec<Gen>)> = h2.terms.keys().map(|&y| (y, sys.word(y))).collect();
    right.sort_by(|a, b| a.1.cmp(&b.1));
    // Stack of partial products h1 * T_{prefix}, one entry per prefix length.
    let mut stack: Vec<HeckeElement<C>> = vec![h1.clone()];
    let mut prefix: Vec<Gen> = Vec::new();
    for (y, word) in right {
        let common = prefix.iter().zip(word.iter()).take_while(|(a, b)| a == b).count();
        stack.truncate(common + 1);
        prefix.truncate(common);
        for &s in &word[common..] {
            let next = mul_gen_right(sys, stack.last().unwrap(), s);
            stack.push(next);
            prefix.push(s);
        }
        out.add_scaled(stack.last().unwrap(), &h2.terms[&y]);
    }
    out
}

/// `T_x T_y`.
pub fn mul_basis<C: Coeff>(sys: &CoxeterSystem, x: Element, y: Element) -> HeckeElement<C> {
    mul_t_right(sys, &HeckeElement::basis_element(Basis::T, x), y)
}

/// Structure constant `f_{x,y,z}`: coefficient of `T_z` in `T_x T_y`.
pub fn f_const<C: Coeff>(sys: &CoxeterSystem, x: Element, y: Element, z: Element) -> LaurentPoly<C> {
    mul_basis::<C>(sys, x, y).coefficient(z)
}

/// Trace: the coefficient of `T_e`.
pub fn tau<C: Coeff>(h: &HeckeElement<C>) -> LaurentPoly<C> {
    h.terms.iter().find(|(w, _)| w.is_identity()).map(|(_, c)| c.clone()).unwrap_or_default()
}

/// Memoized images `bar(T_w)` in the standard basis.
pub struct BarTable<C> {
    images: HashMap<Element, HeckeElement<C>>,
}

impl<C: Coeff> Default for BarTable<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<C: Coeff> BarTable<C> {
    pub fn new() -> Self {
        BarTable { images: HashMap::new() }
    }

    /// `bar(T_w) = bar(T_{ws}) (T_s - xi_s)` for `s` the last letter of `w`.
    pub fn image(&mut self, sys: &CoxeterSystem, w: Element) -> &HeckeElement<C> {
        if !self.images.contains_key(&w) {
            let value = if w.is_identity() {
                HeckeElement::basis_element(Basis::T, w)
            } else {
                let word = sys.word(w);
                let s = *word.last().unwrap();
                let prefix = sys.mul_gen_right(w, s);
                let base = self.image(sys, prefix).clone();
                let mut v = mul_gen_right(sys, &base, s);
                v.add_scaled(&base, &-LaurentPoly::<C>::xi(sys.weight(s)));
                v
            };
            self.images.insert(w, value);
        }
        &self.images[&w]
    }
}

/// The ring involution with `q -> q^-1` and `T_w -> T_{w^-1}^{-1}`.
pub fn bar_involution<C: Coeff>(sys: &CoxeterSystem, h: &HeckeElement<C>, table: &mut BarTable<C>) -> HeckeElement<C> {
    let mut out = HeckeElement::zero(h.basis);
    for (w, c) in &h.terms {
        let img = table.image(sys, *w);
        out.add_scaled(img, &c.bar());
    }
    out
}

/// The anti-automorphism `T_w -> T_{w^-1}` (coefficients untouched).
pub fn flat<C: Coeff>(sys: &CoxeterSystem, h: &HeckeElement<C>) -> HeckeElement<C> {
    HeckeElement::from_terms(h.basis, h.terms.iter().map(|(w, c)| (sys.inverse(*w), c.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::systems::*;
    use crate::{Int, Poly};
    use proptest::prelude::*;

    type H = HeckeElement<Int>;

    fn t(sys: &CoxeterSystem, w: &str) -> H {
        H::basis_element(Basis::T, sys.parse_word(w).unwrap())
    }

    fn xi(w: u32) -> Poly {
        Poly::xi(w)
    }

    #[test]
    fn quadratic_relation() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        for s in ["s", "t"] {
            let w = sys.parse_word(s).unwrap();
            let sq = mul_t(&sys, &t(&sys, s), &t(&sys, s)).unwrap();
            let mut expect = t(&sys, "e");
            expect.add_term(w, &xi(w.weight()));
            assert_eq!(sq, expect);
        }
    }

    #[test]
    fn small_dihedral_product() {
        let sys = CoxeterSystem::dihedral(3, 1, 1).unwrap();
        let prod = mul_t(&sys, &t(&sys, "s t"), &t(&sys, "t s")).unwrap();
        let mut expect = t(&sys, "e");
        expect.add_term(sys.parse_word("s").unwrap(), &xi(1));
        expect.add_term(sys.parse_word("s t s").unwrap(), &xi(1));
        assert_eq!(prod, expect);
    }

    #[test]
    fn worked_triple_product() {
        let sys = rst();
        let a = t(&sys, "r t s r");
        let b = t(&sys, "s t");
        let prod = mul_t(&sys, &mul_t(&sys, &a, &b).unwrap(), &a).unwrap();
        let mut expect = H::zero(Basis::T);
        expect.add_term(sys.parse_word("r t r s r t r s r").unwrap(), &xi(1));
        expect.add_term(sys.parse_word("t r s t s r s").unwrap(), &xi(1));
        expect.add_term(sys.parse_word("t r s t r s").unwrap(), &Poly::one());
        assert_eq!(prod, expect);
    }

    #[test]
    fn mixed_tags_are_rejected() {
        let sys = rst();
        let a = t(&sys, "r");
        let b = a.clone().with_basis(Basis::C);
        assert!(matches!(mul_t(&sys, &a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn bar_examples() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let mut table = BarTable::new();
        let s = sys.parse_word("s").unwrap();
        let tt = sys.parse_word("t").unwrap();
        let st = sys.parse_word("s t").unwrap();
        let mut expect = t(&sys, "s");
        expect.add_term(sys.identity(), &-xi(1));
        assert_eq!(bar_involution(&sys, &t(&sys, "s"), &mut table), expect);
        let mut expect = t(&sys, "s t");
        expect.add_term(s, &-xi(2));
        expect.add_term(tt, &-xi(1));
        expect.add_term(sys.identity(), &(&xi(1) * &xi(2)));
        assert_eq!(bar_involution(&sys, &H::basis_element(Basis::T, st), &mut table), expect);
        let sts = t(&sys, "s t s");
        let twice = bar_involution(&sys, &bar_involution(&sys, &sts, &mut table), &mut table);
        assert_eq!(twice, sts);
    }

    #[test]
    fn trace_examples() {
        let sys = affine_a2();
        assert!(tau(&t(&sys, "s1 s2")).is_zero());
        let sq = mul_t(&sys, &t(&sys, "s1"), &t(&sys, "s1")).unwrap();
        assert!(tau(&sq).is_one());
    }

    #[test]
    fn longest_square_degree() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let w0 = sys.parse_word("s t s t").unwrap();
        let f: Poly = f_const(&sys, w0, w0, w0);
        assert_eq!(f.degree(), Degree::Finite(6));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn associativity(i in 0usize..67, j in 0usize..67, k in 0usize..67) {
            let sys = hyperbolic_344();
            let ball = sys.ball(4);
            let (x, y, z) = (ball[i % ball.len()], ball[j % ball.len()], ball[k % ball.len()]);
            let (tx, ty, tz): (H, H, H) = (H::basis_element(Basis::T, x), H::basis_element(Basis::T, y), H::basis_element(Basis::T, z));
            let left = mul_t(&sys, &mul_t(&sys, &tx, &ty).unwrap(), &tz).unwrap();
            let right = mul_t(&sys, &tx, &mul_t(&sys, &ty, &tz).unwrap()).unwrap();
            prop_assert_eq!(left.clone(), right);
            // Cyclic symmetry of the trace.
            let mut cyc = tau(&left);
            for (a, b, c) in [(ty.clone(), tz.clone(), tx.clone()), (tz, tx, ty)] {
                let other = tau(&mul_t(&sys, &mul_t(&sys, &a, &b).unwrap(), &c).unwrap());
                prop_assert_eq!(&cyc, &other);
                cyc = other;
            }
        }
    }

    #[test]
    fn anti_automorphism_and_trace_identities() {
        let sys = right_angled_example();
        let ball = sys.ball(3);
        for &x in &ball {
            for &y in &ball {
                let prod: H = mul_basis(&sys, x, y);
                let flipped: H = mul_basis(&sys, sys.inverse(y), sys.inverse(x));
                assert_eq!(flat(&sys, &prod), flipped);
                let expect = if sys.mul(x, y).is_identity() { Poly::one() } else { Poly::zero() };
                assert_eq!(tau(&prod), expect);
                for &z in ball.iter().take(12) {
                    let triple = mul_t(&sys, &prod, &H::basis_element(Basis::T, z)).unwrap();
                    assert_eq!(tau(&triple), f_const(&sys, x, y, sys.inverse(z)));
                }
            }
        }
    }

    #[test]
    fn generic_coefficients_agree() {
        let sys = hyperbolic_344();
        let x = sys.parse_word("s3 s1 s2 s3").unwrap();
        let y = sys.parse_word("s3 s2 s1 s3").unwrap();
        let big: H = mul_basis(&sys, x, y);
        let small: HeckeElement<i64> = mul_basis(&sys, x, y);
        assert_eq!(big.len(), small.len());
        for (w, c) in small.terms() {
            assert_eq!(big.coefficient(*w).to_string(), c.to_string());
        }
    }
}
