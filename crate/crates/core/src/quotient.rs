//! The quotient `H_{<=N}` of the Hecke algebra by the span of the `C_w`
//! with `w` above level `N`, and the decomposition
//! `NC_{bdy} = E_b NC_d F_y`.
//!
//! Quotient elements carry the `NT` tag and are supported on elements of
//! level at most `N`. Reduction eliminates over-ideal terms from the top,
//! subtracting multiples of `C_z` (which vanish in the quotient); this is
//! the rewriting `NT_z = -sum_{y<z} p_{y,z} NT_y` applied lazily.

use std::collections::HashMap;

use crate::coxeter::{CoxeterSystem, Element};
use crate::error::{Error, Result};
use crate::hecke::{bar_involution, flat, mul_t_unchecked, BarTable, Basis, HeckeElement};
use crate::kl::KlTable;
use crate::laurent::{Coeff, LaurentPoly};
use crate::strata::{BallSet, DistinguishedElement, Stratification};

pub struct QuotientContext<'a, C> {
    sys: &'a CoxeterSystem,
    strat: &'a Stratification,
    level: u32,
    radius: u32,
    bars: BarTable<C>,
}

/// `F_y`, `E_b` and `eta_d = h_{d,d,d}` for one `(b, d, y)`.
#[derive(Clone)]
pub struct NFactorPair<C> {
    pub d: DistinguishedElement,
    pub b: Element,
    pub y: Element,
    pub e_b: HeckeElement<C>,
    pub f_y: HeckeElement<C>,
    pub eta_d: LaurentPoly<C>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch<C: Coeff> {
    pub identity: &'static str,
    pub at: Element,
    pub lhs: LaurentPoly<C>,
    pub rhs: LaurentPoly<C>,
}

#[derive(Clone, Debug)]
pub struct DecompositionReport<C: Coeff> {
    pub holds: bool,
    pub eta_degree_ok: bool,
    pub mismatch: Option<Mismatch<C>>,
}

impl<'a, C: Coeff> QuotientContext<'a, C> {
    /// The quotient at level `level`; every element touched must have
    /// length at most `radius`.
    pub fn new(sys: &'a CoxeterSystem, strat: &'a Stratification, level: u32, radius: u32) -> Self {
        assert_eq!(sys.content_hash(), strat.system_hash(), "stratification of another system");
        QuotientContext { sys, strat, level, radius, bars: BarTable::new() }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn system(&self) -> &CoxeterSystem {
        self.sys
    }

    /// Whether `w` lies in `W_{>N}`.
    pub fn is_over_ideal(&self, w: Element) -> bool {
        self.strat.omega_level(self.sys, w) > self.level
    }

    fn check_ball(&self, w: Element) -> Result<()> {
        if w.length() > self.radius {
            return Err(Error::OutOfBall { element: self.sys.format_word(w), length: w.length(), radius: self.radius });
        }
        Ok(())
    }

    /// Image in the quotient of a standard-basis element.
    pub fn reduce(&self, table: &mut KlTable<C>, h: &HeckeElement<C>) -> Result<HeckeElement<C>> {
        let mut rest: HashMap<Element, LaurentPoly<C>> = HashMap::new();
        for (z, c) in h.terms() {
            self.check_ball(*z)?;
            rest.insert(*z, c.clone());
        }
        let mut out = HeckeElement::zero(Basis::NT);
        while let Some(top) = rest.keys().map(|z| z.length()).max() {
            let mut layer: Vec<Element> = rest.keys().filter(|z| z.length() == top).copied().collect();
            self.sys.sort_shortlex(&mut layer);
            for z in layer {
                let c = rest.remove(&z).unwrap();
                if !self.is_over_ideal(z) {
                    out.add_term(z, &c);
                    continue;
                }
                let col = table.column(self.sys, z)?;
                for (y, p) in col.iter() {
                    if *y == z {
                        continue;
                    }
                    let e = rest.entry(*y).or_default();
                    e.sub_mul(p, &c);
                    if e.is_zero() {
                        rest.remove(y);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `NT_w` in the basis `{NT_y : y ∈ W_{<=N}}`.
    pub fn nt_image(&self, table: &mut KlTable<C>, w: Element) -> Result<HeckeElement<C>> {
        self.reduce(table, &HeckeElement::basis_element(Basis::T, w))
    }

    /// `NC_w = sum_y p_{y,w} NT_y`; zero exactly for over-ideal `w`.
    pub fn nc_image(&self, table: &mut KlTable<C>, w: Element) -> Result<HeckeElement<C>> {
        self.check_ball(w)?;
        let c = table.kl_basis(self.sys, w)?;
        self.reduce(table, &c)
    }

    /// Product in the quotient.
    pub fn mul(&self, table: &mut KlTable<C>, x: &HeckeElement<C>, y: &HeckeElement<C>) -> Result<HeckeElement<C>> {
        if x.basis() != Basis::NT || y.basis() != Basis::NT {
            return Err(Error::Contract("quotient product needs NT-tagged factors".into()));
        }
        let prod = mul_t_unchecked(self.sys, &x.clone().with_basis(Basis::T), &y.clone().with_basis(Basis::T));
        self.reduce(table, &prod)
    }

    /// Bar involution of the quotient; the ideal is bar-stable.
    pub fn bar(&mut self, table: &mut KlTable<C>, h: &HeckeElement<C>) -> Result<HeckeElement<C>> {
        let lifted = h.clone().with_basis(Basis::T);
        let image = bar_involution(self.sys, &lifted, &mut self.bars);
        self.reduce(table, &image)
    }

    fn require_low(&self, w: Element) -> Result<()> {
        if self.is_over_ideal(w) {
            return Err(Error::Contract(format!("{} lies above level {}", self.sys.format_word(w), self.level)));
        }
        Ok(())
    }

    /// `NT_x NT_y` for `x, y` of level at most `N`.
    pub fn nt_product(&self, table: &mut KlTable<C>, x: Element, y: Element) -> Result<HeckeElement<C>> {
        self.require_low(x)?;
        self.require_low(y)?;
        self.mul(table, &HeckeElement::basis_element(Basis::NT, x), &HeckeElement::basis_element(Basis::NT, y))
    }

    /// `Nf_{x,y,z}`.
    pub fn nf_const(&self, table: &mut KlTable<C>, x: Element, y: Element, z: Element) -> Result<LaurentPoly<C>> {
        self.require_low(z)?;
        Ok(self.nt_product(table, x, y)?.coefficient(z))
    }

    /// `Ntau`: the coefficient of `NT_e`.
    pub fn n_tau(&self, h: &HeckeElement<C>) -> LaurentPoly<C> {
        h.coefficient(self.sys.identity())
    }

    /// `Nbeta_{x,y,z}`: the coefficient of `q^N` in `Nf_{x,y,z^-1}`.
    pub fn n_beta(&self, table: &mut KlTable<C>, x: Element, y: Element, z: Element) -> Result<C> {
        let f = self.nf_const(table, x, y, self.sys.inverse(z))?;
        Ok(f.coefficient_at(self.level as i32))
    }

    fn check_stratum(&self, d: &DistinguishedElement) -> Result<()> {
        if d.a_prime != self.level {
            return Err(Error::Contract(format!(
                "{} has a' = {} but the quotient is at level {}",
                self.sys.format_word(d.d),
                d.a_prime,
                self.level
            )));
        }
        Ok(())
    }

    /// Coordinates of `v` in the family `NC_d NT_{y'}`, `y' ∈ U_d`, by
    /// elimination of the leading terms `NT_{dy'}`.
    fn decompose(
        &self,
        table: &mut KlTable<C>,
        d: &DistinguishedElement,
        v: &HeckeElement<C>,
        family: &mut HashMap<Element, HeckeElement<C>>,
    ) -> Result<HashMap<Element, LaurentPoly<C>>> {
        let sys = self.sys;
        let nc_d = self.nc_image(table, d.d)?;
        let mut rest = v.clone();
        let mut coords = HashMap::new();
        while let Some(top) = rest.support().map(|z| z.length()).max() {
            let mut layer: Vec<Element> = rest.support().filter(|z| z.length() == top).collect();
            sys.sort_shortlex(&mut layer);
            for z in layer {
                let Some(c) = rest.remove(z) else { continue };
                let extension = sys.mul(sys.inverse(d.d), z);
                if !sys.is_length_additive(d.d, extension) || self.strat.omega_level(sys, z) != d.a_prime {
                    return Err(Error::InvariantViolation(format!(
                        "NT[{}] is not a leading term of the family for d = {}",
                        sys.format_word(z),
                        sys.format_word(d.d)
                    )));
                }
                if !family.contains_key(&extension) {
                    let member = self.mul(table, &nc_d, &HeckeElement::basis_element(Basis::NT, extension))?;
                    family.insert(extension, member);
                }
                let member = &family[&extension];
                for (u, p) in member.terms() {
                    if *u != z {
                        rest.add_term_mul(*u, p, &-&c);
                    }
                }
                coords.insert(extension, c);
            }
        }
        Ok(coords)
    }

    /// `F_y`: the element `NT_y + sum_{y'<y} g_{y',y} NT_{y'}` with `deg g < 0`
    /// making `NC_d F_y` bar invariant.
    pub fn f_element(&mut self, table: &mut KlTable<C>, d: &DistinguishedElement, y: Element) -> Result<HeckeElement<C>> {
        self.check_stratum(d)?;
        let sys = self.sys;
        if !sys.is_length_additive(d.d, y) || self.strat.omega_level(sys, sys.mul(d.d, y)) != d.a_prime {
            return Err(Error::Contract(format!("{} is not in U_d", sys.format_word(y))));
        }
        let mut below: Vec<Element> = sys
            .lower_interval(y)
            .iter()
            .copied()
            .filter(|&u| sys.is_length_additive(d.d, u) && self.strat.omega_level(sys, sys.mul(d.d, u)) == d.a_prime)
            .collect();
        sys.sort_shortlex(&mut below);
        let nc_d = self.nc_image(table, d.d)?;
        let mut family = HashMap::new();
        // r[u] = coordinates of bar(NC_d NT_u) = NC_d bar(NT_u).
        let mut r: HashMap<Element, HashMap<Element, LaurentPoly<C>>> = HashMap::new();
        for &u in &below {
            let bar_u = self.bar(table, &HeckeElement::basis_element(Basis::NT, u))?;
            let image = self.mul(table, &nc_d, &bar_u)?;
            let coords = self.decompose(table, d, &image, &mut family)?;
            if coords.get(&u).is_none_or(|c| !c.is_one()) || coords.keys().any(|k| !below.contains(k)) {
                return Err(Error::InvariantViolation(format!("bar of NC_d NT[{}] is not unitriangular", sys.format_word(u))));
            }
            r.insert(u, coords);
        }
        let mut g: HashMap<Element, LaurentPoly<C>> = HashMap::from([(y, LaurentPoly::one())]);
        let mut done = vec![y];
        for &u in below.iter().rev() {
            if u == y {
                continue;
            }
            let mut rhs = LaurentPoly::<C>::zero();
            for &v in &done {
                if let (Some(gv), Some(ruv)) = (g.get(&v), r[&v].get(&u)) {
                    if v != u {
                        rhs.add_mul(&gv.bar(), ruv);
                    }
                }
            }
            if rhs.bar() != -&rhs {
                return Err(Error::InvariantViolation(format!(
                    "bar-fixing right-hand side at {} is not antisymmetric",
                    sys.format_word(u)
                )));
            }
            let p = rhs.negative_part();
            if !p.is_zero() {
                g.insert(u, p);
            }
            done.push(u);
        }
        Ok(HeckeElement::from_terms(Basis::NT, g))
    }

    /// `F_y`, `E_b = flat(F_{b^-1})` and `eta_d`.
    pub fn build_factor_pair(
        &mut self,
        table: &mut KlTable<C>,
        d: &DistinguishedElement,
        b: Element,
        y: Element,
    ) -> Result<NFactorPair<C>> {
        let f_y = self.f_element(table, d, y)?;
        let e_b = flat(self.sys, &self.f_element(table, d, self.sys.inverse(b))?);
        let eta_d = table.h_const(self.sys, d.d, d.d, d.d)?;
        Ok(NFactorPair { d: d.clone(), b, y, e_b, f_y, eta_d })
    }

    /// Checks `NC_{bdy} = E_b NC_d F_y` and `NC_{bd} NC_{dy} = eta_d NC_{bdy}`.
    pub fn verify_decomposition(
        &mut self,
        table: &mut KlTable<C>,
        d: &DistinguishedElement,
        b: Element,
        y: Element,
    ) -> Result<DecompositionReport<C>> {
        let sys = self.sys;
        let pair = self.build_factor_pair(table, d, b, y)?;
        let bd = sys.mul(b, d.d);
        let dy = sys.mul(d.d, y);
        let bdy = sys.mul(bd, y);
        let nc_bdy = self.nc_image(table, bdy)?;
        let nc_d = self.nc_image(table, d.d)?;
        let left = self.mul(table, &pair.e_b, &nc_d)?;
        let rhs1 = self.mul(table, &left, &pair.f_y)?;
        let nc_bd = self.nc_image(table, bd)?;
        let nc_dy = self.nc_image(table, dy)?;
        let lhs2 = self.mul(table, &nc_bd, &nc_dy)?;
        let rhs2 = nc_bdy.scale(&pair.eta_d);
        let mismatch = first_mismatch(sys, "NC[bdy] = E_b NC[d] F_y", &nc_bdy, &rhs1)
            .or_else(|| first_mismatch(sys, "NC[bd] NC[dy] = eta_d NC[bdy]", &lhs2, &rhs2));
        let eta_degree_ok = pair.eta_d.degree().finite() == Some(d.a_prime as i32);
        Ok(DecompositionReport { holds: mismatch.is_none() && eta_degree_ok, eta_degree_ok, mismatch })
    }

    /// `U_d` and `B_d` inside the context's ball.
    pub fn extensions(&self, d: &DistinguishedElement, radius: u32) -> (BallSet, BallSet) {
        (self.strat.compute_bd(self.sys, d, radius), self.strat.compute_ud(self.sys, d, radius))
    }
}

fn first_mismatch<C: Coeff>(
    sys: &CoxeterSystem,
    identity: &'static str,
    lhs: &HeckeElement<C>,
    rhs: &HeckeElement<C>,
) -> Option<Mismatch<C>> {
    let mut keys: Vec<Element> = lhs.support().chain(rhs.support()).collect();
    sys.sort_shortlex(&mut keys);
    keys.dedup();
    keys.into_iter().find_map(|z| {
        let (l, r) = (lhs.coefficient(z), rhs.coefficient(z));
        (l != r).then_some(Mismatch { identity, at: z, lhs: l, rhs: r })
    })
}
