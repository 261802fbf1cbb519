//! Sparse Laurent polynomials in one variable `q`.
//!
//! The coefficient ring is a type parameter. Anything that behaves like the
//! integers (signed, exact, parseable) qualifies; the crate root fixes the
//! arbitrary-precision choice as [`crate::Poly`].

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{FromPrimitive, Num, Signed};

/// Coefficient ring for polynomials and Hecke elements.
pub trait Coeff:
    Clone + Eq + Ord + Hash + fmt::Debug + fmt::Display + FromStr + Num + Signed + FromPrimitive + Send + Sync + 'static
{
}

impl<T> Coeff for T where
    T: Clone + Eq + Ord + Hash + fmt::Debug + fmt::Display + FromStr + Num + Signed + FromPrimitive + Send + Sync + 'static
{
}

/// Degree of a polynomial; the zero polynomial has degree `NegInfinity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    NegInfinity,
    Finite(i32),
}

impl Degree {
    pub fn finite(self) -> Option<i32> {
        match self {
            Degree::NegInfinity => None,
            Degree::Finite(d) => Some(d),
        }
    }

    /// Degree of a product.
    pub fn plus(self, other: Degree) -> Degree {
        match (self, other) {
            (Degree::Finite(a), Degree::Finite(b)) => Degree::Finite(a + b),
            _ => Degree::NegInfinity,
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInfinity => write!(f, "-inf"),
            Degree::Finite(d) => write!(f, "{d}"),
        }
    }
}

/// A Laurent polynomial stored as `(exponent, coefficient)` pairs sorted by
/// exponent, with no zero coefficient ever stored.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LaurentPoly<C> {
    terms: Vec<(i32, C)>,
}

impl<C: Coeff> Default for LaurentPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> LaurentPoly<C> {
    pub fn zero() -> Self {
        LaurentPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::monomial(0, C::one())
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(0, c)
    }

    /// `c * q^exp`.
    pub fn monomial(exp: i32, c: C) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            LaurentPoly { terms: vec![(exp, c)] }
        }
    }

    /// `q^exp`.
    pub fn q_pow(exp: i32) -> Self {
        Self::monomial(exp, C::one())
    }

    /// `q^w - q^-w`, the quadratic-relation coefficient for a generator of weight `w`.
    pub fn xi(weight: u32) -> Self {
        let w = weight as i32;
        Self::from_pairs(vec![(w, C::one()), (-w, -C::one())])
    }

    /// `q^w + q^-w`.
    pub fn q_plus_inv(weight: u32) -> Self {
        let w = weight as i32;
        Self::from_pairs(vec![(w, C::one()), (-w, C::one())])
    }

    /// Builds a polynomial from arbitrary pairs; repeated exponents are summed.
    pub fn from_pairs(mut pairs: Vec<(i32, C)>) -> Self {
        pairs.sort_by_key(|(e, _)| *e);
        let mut terms: Vec<(i32, C)> = Vec::with_capacity(pairs.len());
        for (e, c) in pairs {
            match terms.last_mut() {
                Some((le, lc)) if *le == e => *lc = lc.clone() + c,
                _ => terms.push((e, c)),
            }
        }
        terms.retain(|(_, c)| !c.is_zero());
        LaurentPoly { terms }
    }

    pub fn from_i64_pairs(pairs: &[(i32, i64)]) -> Self {
        Self::from_pairs(pairs.iter().map(|&(e, c)| (e, C::from_i64(c).expect("coefficient out of range"))).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0 == 0 && self.terms[0].1.is_one()
    }

    /// Sorted `(exponent, coefficient)` pairs.
    pub fn terms(&self) -> &[(i32, C)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(i32, C)> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Degree {
        match self.terms.last() {
            None => Degree::NegInfinity,
            Some((e, _)) => Degree::Finite(*e),
        }
    }

    /// Smallest exponent present, `None` for zero.
    pub fn low_degree(&self) -> Option<i32> {
        self.terms.first().map(|(e, _)| *e)
    }

    /// Coefficient of the top-degree term, `None` for zero.
    pub fn leading_coefficient(&self) -> Option<&C> {
        self.terms.last().map(|(_, c)| c)
    }

    pub fn coefficient_at(&self, exp: i32) -> C {
        match self.terms.binary_search_by_key(&exp, |(e, _)| *e) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => C::zero(),
        }
    }

    /// Image under `q -> q^-1`.
    pub fn bar(&self) -> Self {
        LaurentPoly { terms: self.terms.iter().rev().map(|(e, c)| (-e, c.clone())).collect() }
    }

    pub fn is_bar_invariant(&self) -> bool {
        *self == self.bar()
    }

    /// Multiplication by `q^k`.
    pub fn shift(&self, k: i32) -> Self {
        LaurentPoly { terms: self.terms.iter().map(|(e, c)| (e + k, c.clone())).collect() }
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LaurentPoly { terms: self.terms.iter().map(|(e, x)| (*e, x.clone() * c.clone())).collect() }
    }

    /// Terms with exponent `< 0`.
    pub fn negative_part(&self) -> Self {
        LaurentPoly { terms: self.terms.iter().filter(|(e, _)| *e < 0).cloned().collect() }
    }

    /// The unique bar-invariant polynomial agreeing with `self` in all
    /// exponents `>= 0`.
    pub fn symmetrize_nonnegative(&self) -> Self {
        let mut pairs = Vec::new();
        for (e, c) in &self.terms {
            if *e > 0 {
                pairs.push((*e, c.clone()));
                pairs.push((-*e, c.clone()));
            } else if *e == 0 {
                pairs.push((0, c.clone()));
            }
        }
        Self::from_pairs(pairs)
    }

    /// `self += factor * other`.
    pub fn add_mul(&mut self, other: &Self, factor: &Self) {
        if other.is_zero() || factor.is_zero() {
            return;
        }
        let prod = other * factor;
        *self += &prod;
    }

    /// `self -= factor * other`.
    pub fn sub_mul(&mut self, other: &Self, factor: &Self) {
        if other.is_zero() || factor.is_zero() {
            return;
        }
        let prod = other * factor;
        *self -= &prod;
    }

    fn merge(&self, other: &Self, negate_other: bool) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    let c = if negate_other { -b[j].1.clone() } else { b[j].1.clone() };
                    out.push((b[j].0, c));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate_other { a[i].1.clone() - b[j].1.clone() } else { a[i].1.clone() + b[j].1.clone() };
                    if !c.is_zero() {
                        out.push((a[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        LaurentPoly { terms: out }
    }

    fn product(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.terms.len() == 1 {
            let (e, c) = &self.terms[0];
            return LaurentPoly { terms: other.terms.iter().map(|(f, d)| (e + f, c.clone() * d.clone())).collect() };
        }
        if other.terms.len() == 1 {
            return other.product(self);
        }
        let lo = self.terms[0].0 + other.terms[0].0;
        let hi = self.terms.last().unwrap().0 + other.terms.last().unwrap().0;
        let mut dense = vec![C::zero(); (hi - lo + 1) as usize];
        for (e, c) in &self.terms {
            for (f, d) in &other.terms {
                let slot = &mut dense[(e + f - lo) as usize];
                *slot = slot.clone() + c.clone() * d.clone();
            }
        }
        LaurentPoly { terms: dense.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (lo + i as i32, c)).collect() }
    }
}

impl<C: Coeff> Add<&LaurentPoly<C>> for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn add(self, rhs: &LaurentPoly<C>) -> LaurentPoly<C> {
        self.merge(rhs, false)
    }
}

impl<C: Coeff> Add for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn add(self, rhs: LaurentPoly<C>) -> LaurentPoly<C> {
        self.merge(&rhs, false)
    }
}

impl<C: Coeff> Sub<&LaurentPoly<C>> for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn sub(self, rhs: &LaurentPoly<C>) -> LaurentPoly<C> {
        self.merge(rhs, true)
    }
}

impl<C: Coeff> Sub for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn sub(self, rhs: LaurentPoly<C>) -> LaurentPoly<C> {
        self.merge(&rhs, true)
    }
}

impl<C: Coeff> Mul<&LaurentPoly<C>> for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn mul(self, rhs: &LaurentPoly<C>) -> LaurentPoly<C> {
        self.product(rhs)
    }
}

impl<C: Coeff> Mul for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn mul(self, rhs: LaurentPoly<C>) -> LaurentPoly<C> {
        self.product(&rhs)
    }
}

impl<C: Coeff> Neg for &LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn neg(self) -> LaurentPoly<C> {
        LaurentPoly { terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect() }
    }
}

impl<C: Coeff> Neg for LaurentPoly<C> {
    type Output = LaurentPoly<C>;
    fn neg(self) -> LaurentPoly<C> {
        -&self
    }
}

impl<C: Coeff> AddAssign<&LaurentPoly<C>> for LaurentPoly<C> {
    fn add_assign(&mut self, rhs: &LaurentPoly<C>) {
        if rhs.is_zero() {
            return;
        }
        *self = self.merge(rhs, false);
    }
}

impl<C: Coeff> SubAssign<&LaurentPoly<C>> for LaurentPoly<C> {
    fn sub_assign(&mut self, rhs: &LaurentPoly<C>) {
        if rhs.is_zero() {
            return;
        }
        *self = self.merge(rhs, true);
    }
}

impl<C: Coeff> fmt::Display for LaurentPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if negative { '-' } else { '+' })?;
            }
            let unit = mag.is_one();
            match (*e, unit) {
                (0, _) => write!(f, "{mag}")?,
                (1, true) => write!(f, "q")?,
                (1, false) => write!(f, "{mag}*q")?,
                (_, true) => write!(f, "q^{e}")?,
                (_, false) => write!(f, "{mag}*q^{e}")?,
            }
        }
        Ok(())
    }
}

impl<C: Coeff> fmt::Debug for LaurentPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentPoly({self})")
    }
}

/// Errors from [`LaurentPoly::from_str`].
#[derive(Debug, thiserror::Error)]
#[error("cannot parse Laurent polynomial term `{0}`")]
pub struct ParsePolyError(pub String);

impl<C: Coeff> FromStr for LaurentPoly<C> {
    type Err = ParsePolyError;

    /// Parses the display form, e.g. `2*q^3 - q + 5 - q^-1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact == "0" {
            return Ok(Self::zero());
        }
        let mut pieces: Vec<(bool, String)> = Vec::new();
        let mut current = String::new();
        let mut negative = false;
        let mut prev: Option<char> = None;
        for ch in compact.chars() {
            let is_sign = (ch == '+' || ch == '-') && prev != Some('^');
            if is_sign {
                if !current.is_empty() {
                    pieces.push((negative, std::mem::take(&mut current)));
                } else if prev.is_some() {
                    return Err(ParsePolyError(compact.clone()));
                }
                negative = ch == '-';
            } else {
                current.push(ch);
            }
            prev = Some(ch);
        }
        if current.is_empty() {
            return Err(ParsePolyError(compact));
        }
        pieces.push((negative, current));
        let mut pairs = Vec::new();
        for (neg, piece) in pieces {
            let bad = || ParsePolyError(piece.clone());
            let (coef_str, mono) = match piece.find('q') {
                None => (piece.as_str(), None),
                Some(idx) => {
                    let head = piece[..idx].trim_end_matches('*');
                    (head, Some(&piece[idx + 1..]))
                }
            };
            let coef: C = if coef_str.is_empty() { C::one() } else { coef_str.parse().map_err(|_| bad())? };
            let exp: i32 = match mono {
                None => 0,
                Some("") => 1,
                Some(rest) => rest.strip_prefix('^').ok_or_else(bad)?.parse().map_err(|_| bad())?,
            };
            pairs.push((exp, if neg { -coef } else { coef }));
        }
        Ok(Self::from_pairs(pairs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    type P = LaurentPoly<BigInt>;

    fn p(pairs: &[(i32, i64)]) -> P {
        P::from_i64_pairs(pairs)
    }

    #[test]
    fn xi_squared() {
        let xi = P::xi(1);
        assert_eq!(&xi * &xi, p(&[(2, 1), (0, -2), (-2, 1)]));
    }

    #[test]
    fn q_plus_inverse_squared() {
        let a = P::q_plus_inv(3);
        assert_eq!(&a * &a, p(&[(6, 1), (0, 2), (-6, 1)]));
    }

    #[test]
    fn add_negation_is_zero() {
        let x = p(&[(3, 4), (-1, -2)]);
        assert!((&x + &(-&x)).is_zero());
    }

    #[test]
    fn degrees() {
        assert_eq!(P::zero().degree(), Degree::NegInfinity);
        assert_eq!(P::xi(2).degree(), Degree::Finite(2));
        assert_eq!(p(&[(-3, 1), (-1, 5)]).degree(), Degree::Finite(-1));
        assert!(Degree::NegInfinity < Degree::Finite(-1000));
    }

    #[test]
    fn bar_examples() {
        assert_eq!(P::q_pow(3).bar(), P::q_pow(-3));
        assert_eq!(P::xi(1).bar(), -P::xi(1));
        assert_eq!(p(&[(0, 7)]).bar(), p(&[(0, 7)]));
    }

    #[test]
    fn coefficient_lookup() {
        let x = p(&[(2, 1), (0, -2)]);
        assert_eq!(x.coefficient_at(2), BigInt::from(1));
        assert_eq!(x.coefficient_at(0), BigInt::from(-2));
        assert_eq!(P::zero().coefficient_at(5), BigInt::from(0));
    }

    #[test]
    fn display_and_parse() {
        let x = p(&[(3, 2), (1, -1), (0, 5), (-1, -1)]);
        let s = x.to_string();
        assert_eq!(s, "2*q^3 - q + 5 - q^-1");
        assert_eq!(s.parse::<P>().unwrap(), x);
        assert_eq!("0".parse::<P>().unwrap(), P::zero());
        assert_eq!("-q^-2".parse::<P>().unwrap(), p(&[(-2, -1)]));
    }

    #[test]
    fn symmetrize_keeps_nonnegative_part() {
        let x = p(&[(2, 3), (0, 1), (-1, 4)]);
        assert_eq!(x.symmetrize_nonnegative(), p(&[(2, 3), (0, 1), (-2, 3)]));
    }

    #[test]
    fn generic_over_machine_integers() {
        let a = LaurentPoly::<i64>::xi(1);
        let b = LaurentPoly::<i64>::q_plus_inv(1);
        assert_eq!(&a * &b, LaurentPoly::<i64>::from_i64_pairs(&[(2, 1), (-2, -1)]));
    }

    fn arb_poly() -> impl Strategy<Value = P> {
        prop::collection::vec((-6i32..6, -5i64..5), 0..6).prop_map(|v| p(&v))
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) - &b, a.clone());
        }

        #[test]
        fn degree_is_additive(a in arb_poly(), b in arb_poly()) {
            prop_assume!(!a.is_zero() && !b.is_zero());
            prop_assert_eq!((&a * &b).degree(), a.degree().plus(b.degree()));
        }

        #[test]
        fn bar_is_ring_homomorphism(a in arb_poly(), b in arb_poly()) {
            prop_assert_eq!((&a * &b).bar(), &a.bar() * &b.bar());
            prop_assert_eq!(a.bar().bar(), a.clone());
        }

        #[test]
        fn no_zero_coefficients_stored(a in arb_poly(), b in arb_poly()) {
            for x in [&a + &b, &a - &b, &a * &b] {
                prop_assert!(x.terms().iter().all(|(_, c)| *c != BigInt::from(0)));
            }
        }

        #[test]
        fn display_round_trip(a in arb_poly()) {
            prop_assert_eq!(a.to_string().parse::<P>().unwrap(), a);
        }
    }
}
