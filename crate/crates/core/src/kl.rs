//! Kazhdan-Lusztig basis, the constants `h_{x,y,z}`, the a-function by
//! exhaustive search, `Delta`, `n_w` and `gamma`.
//!
//! Two constructions of `C_w` are available. `BarSolve` expands `bar(T_z)`
//! for every `z <= w` and solves `p - bar(p) = rhs` downward in length.
//! `Recursive` (the default) builds `C_{sw} = C_s C_w - sum M C_z` where the
//! correction coefficients `M` are the bar-invariant polynomials that push
//! every off-diagonal coefficient into negative degree. Both produce the same
//! table; the second avoids the quadratic `bar(T_z)` store.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use crate::coxeter::{CoxeterSystem, Element, Gen};
use crate::error::{Error, Result};
use crate::hecke::{mul_t_unchecked, BarTable, Basis, HeckeElement};
use crate::laurent::{Coeff, Degree, LaurentPoly};

pub const CACHE_FORMAT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KlMethod {
    Recursive,
    BarSolve,
}

/// `y -> p_{y,w}` for one `w`.
pub type KlColumn<C> = HashMap<Element, LaurentPoly<C>>;

/// `z -> M_z` for one `(w, s)`.
pub type Corrections<C> = Arc<Vec<(Element, LaurentPoly<C>)>>;

/// Memoized Kazhdan-Lusztig polynomials of one system.
pub struct KlTable<C> {
    system_hash: String,
    method: KlMethod,
    columns: HashMap<Element, Arc<KlColumn<C>>>,
    corrections: HashMap<(Element, Gen), Corrections<C>>,
    bars: BarTable<C>,
    dirty: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AMethod {
    Oracle,
    Structural,
}

/// An a-value with an optional maximizing pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AValueRecord {
    pub w: Element,
    pub a: u32,
    pub witness: Option<(Element, Element)>,
    pub method: AMethod,
}

impl<C: Coeff> KlTable<C> {
    pub fn new(sys: &CoxeterSystem) -> Self {
        Self::with_method(sys, KlMethod::Recursive)
    }

    pub fn with_method(sys: &CoxeterSystem, method: KlMethod) -> Self {
        KlTable {
            system_hash: sys.content_hash().to_string(),
            method,
            columns: HashMap::new(),
            corrections: HashMap::new(),
            bars: BarTable::new(),
            dirty: false,
        }
    }

    pub fn method(&self) -> KlMethod {
        self.method
    }

    pub fn system_hash(&self) -> &str {
        &self.system_hash
    }

    /// Set once new columns were computed since the last save or load.
    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn contains(&self, w: Element) -> bool {
        self.columns.contains_key(&w)
    }

    fn check_system(&self, sys: &CoxeterSystem) {
        assert_eq!(self.system_hash, sys.content_hash(), "table used with a different system");
    }

    /// Computes `C_w` and everything it depends on.
    pub fn ensure(&mut self, sys: &CoxeterSystem, w: Element) -> Result<()> {
        self.check_system(sys);
        if self.columns.contains_key(&w) {
            return Ok(());
        }
        match self.method {
            KlMethod::BarSolve => {
                let col = self.bar_solve(sys, w)?;
                self.columns.insert(w, Arc::new(col));
            }
            KlMethod::Recursive => {
                let interval = sys.lower_interval(w);
                for &z in interval.iter() {
                    if !self.columns.contains_key(&z) {
                        self.build_recursive(sys, z)?;
                    }
                }
            }
        }
        self.dirty = true;
        Ok(())
    }

    /// Computes `C_w` for every `w` in the ball.
    pub fn ensure_ball(&mut self, sys: &CoxeterSystem, radius: u32) -> Result<()> {
        for w in sys.ball(radius) {
            self.ensure(sys, w)?;
        }
        Ok(())
    }

    /// The column `y -> p_{y,w}`; computes it if needed.
    pub fn column(&mut self, sys: &CoxeterSystem, w: Element) -> Result<Arc<KlColumn<C>>> {
        self.ensure(sys, w)?;
        Ok(self.columns[&w].clone())
    }

    /// A column that is already present.
    pub fn cached_column(&self, w: Element) -> Option<&Arc<KlColumn<C>>> {
        self.columns.get(&w)
    }

    /// `p_{y,w}`.
    pub fn p(&mut self, sys: &CoxeterSystem, y: Element, w: Element) -> Result<LaurentPoly<C>> {
        Ok(self.column(sys, w)?.get(&y).cloned().unwrap_or_default())
    }

    /// `C_w` in the standard basis.
    pub fn kl_basis(&mut self, sys: &CoxeterSystem, w: Element) -> Result<HeckeElement<C>> {
        let col = self.column(sys, w)?;
        Ok(HeckeElement::from_terms(Basis::T, col.iter().map(|(y, p)| (*y, p.clone()))))
    }

    fn bar_solve(&mut self, sys: &CoxeterSystem, w: Element) -> Result<KlColumn<C>> {
        let interval = sys.lower_interval(w);
        let mut col: KlColumn<C> = HashMap::new();
        col.insert(w, LaurentPoly::one());
        // Each bar(T_z), z <= w, is needed; pull them once.
        let mut images: HashMap<Element, HeckeElement<C>> = HashMap::new();
        for &z in interval.iter() {
            images.insert(z, self.bars.image(sys, z).clone());
        }
        let mut done: Vec<Element> = vec![w];
        for &y in interval.iter().rev() {
            if y == w {
                continue;
            }
            let mut rhs = LaurentPoly::<C>::zero();
            for &z in &done {
                if z.length() <= y.length() {
                    continue;
                }
                if let Some(r) = images[&z].coefficient_ref(y) {
                    rhs.add_mul(&col[&z].bar(), r);
                }
            }
            if rhs.bar() != -&rhs {
                return Err(Error::InvariantViolation(format!(
                    "bar-solve right-hand side for ({}, {}) is not antisymmetric: {rhs}",
                    sys.format_word(y),
                    sys.format_word(w)
                )));
            }
            let p = rhs.negative_part();
            if !p.is_zero() {
                col.insert(y, p);
            }
            done.push(y);
        }
        Ok(col)
    }

    fn build_recursive(&mut self, sys: &CoxeterSystem, x: Element) -> Result<()> {
        if x.is_identity() {
            let mut col = HashMap::new();
            col.insert(x, LaurentPoly::one());
            self.columns.insert(x, Arc::new(col));
            return Ok(());
        }
        let s = sys.word(x)[0];
        let w = sys.mul_gen_left(s, x);
        let cw = self.columns[&w].clone();
        let corr = self.left_corrections(sys, w, s)?;
        let weight = sys.weight(s);
        let xi = LaurentPoly::<C>::xi(weight);
        let qinv = LaurentPoly::<C>::q_pow(-(weight as i32));
        let mut col: KlColumn<C> = HashMap::new();
        let add = |col: &mut KlColumn<C>, y: Element, c: LaurentPoly<C>| {
            if c.is_zero() {
                return;
            }
            let e = col.entry(y).or_default();
            *e += &c;
            if e.is_zero() {
                col.remove(&y);
            }
        };
        for (&y, p) in cw.iter() {
            let sy = sys.mul_gen_left(s, y);
            add(&mut col, sy, p.clone());
            if sy.length() < y.length() {
                add(&mut col, y, p * &xi);
            }
            add(&mut col, y, p * &qinv);
        }
        for (z, m) in corr.iter() {
            let cz = self.columns[z].clone();
            for (&y, p) in cz.iter() {
                add(&mut col, y, -(p * m));
            }
        }
        for (y, p) in &col {
            let ok = if *y == x { p.is_one() } else { p.degree() < Degree::Finite(0) };
            if !ok {
                return Err(Error::InvariantViolation(format!(
                    "coefficient of T[{}] in C[{}] is {p}",
                    sys.format_word(*y),
                    sys.format_word(x)
                )));
            }
        }
        self.columns.insert(x, Arc::new(col));
        Ok(())
    }

    /// The polynomials `M` with `C_s C_w = C_{sw} + sum_z M_z C_z` for `sw > w`;
    /// requires every column below `w`.
    pub fn left_corrections(&mut self, sys: &CoxeterSystem, w: Element, s: Gen) -> Result<Corrections<C>> {
        if let Some(v) = self.corrections.get(&(w, s)) {
            return Ok(v.clone());
        }
        if sys.left_descent_mask(w) & (1 << s) != 0 {
            return Err(Error::Contract("left corrections need s w > w".into()));
        }
        self.ensure(sys, w)?;
        let interval = sys.lower_interval(w);
        for &z in interval.iter() {
            self.ensure(sys, z)?;
        }
        let cw = self.columns[&w].clone();
        let shift = sys.weight(s) as i32;
        let mut found: Vec<(Element, LaurentPoly<C>)> = Vec::new();
        for &y in interval.iter().rev() {
            if y == w || sys.left_descent_mask(y) & (1 << s) == 0 {
                continue;
            }
            let mut value = cw.get(&y).map(|p| p.shift(shift)).unwrap_or_default();
            for (z, m) in &found {
                if let Some(p) = self.columns[z].get(&y) {
                    value.sub_mul(p, m);
                }
            }
            let m = value.symmetrize_nonnegative();
            if !m.is_zero() {
                found.push((y, m));
            }
        }
        let arc = Arc::new(found);
        self.corrections.insert((w, s), arc.clone());
        Ok(arc)
    }

    /// Rewrites a standard-basis element in the Kazhdan-Lusztig basis,
    /// eliminating top terms by decreasing length (ShortLex among equals).
    pub fn to_c_basis(&mut self, sys: &CoxeterSystem, h: &HeckeElement<C>) -> Result<HeckeElement<C>> {
        let mut rest = h.clone();
        let mut out = HeckeElement::zero(Basis::C);
        while !rest.is_zero() {
            let top = rest.support().map(|z| z.length()).max().unwrap();
            let mut layer: Vec<Element> = rest.support().filter(|z| z.length() == top).collect();
            sys.sort_shortlex(&mut layer);
            for z in layer {
                let c = rest.remove(z).unwrap();
                let col = self.column(sys, z)?;
                for (y, p) in col.iter() {
                    if *y != z {
                        rest.add_term_mul(*y, p, &-&c);
                    }
                }
                out.add_term(z, &c);
            }
        }
        Ok(out)
    }

    /// Coefficient of `C_w` in a standard-basis element. Only terms above `w`
    /// in Bruhat order can contribute.
    pub fn c_coefficient(&mut self, sys: &CoxeterSystem, h: &HeckeElement<C>, w: Element) -> Result<LaurentPoly<C>> {
        let mut rest: HashMap<Element, LaurentPoly<C>> =
            h.terms().filter(|(z, _)| sys.bruhat_leq(w, **z)).map(|(z, c)| (*z, c.clone())).collect();
        while let Some(top) = rest.keys().filter(|z| **z != w).map(|z| z.length()).max() {
            let mut layer: Vec<Element> = rest.keys().filter(|z| z.length() == top && **z != w).copied().collect();
            sys.sort_shortlex(&mut layer);
            for z in layer {
                let c = rest.remove(&z).unwrap();
                let col = self.column(sys, z)?;
                for (y, p) in col.iter() {
                    if *y != z && y.length() >= w.length() && sys.bruhat_leq(w, *y) {
                        let e = rest.entry(*y).or_default();
                        e.sub_mul(p, &c);
                        if e.is_zero() {
                            rest.remove(y);
                        }
                    }
                }
            }
        }
        Ok(rest.remove(&w).unwrap_or_default())
    }

    /// `C_x C_y` in the standard basis.
    pub fn c_product_t(&mut self, sys: &CoxeterSystem, x: Element, y: Element) -> Result<HeckeElement<C>> {
        let cx = self.kl_basis(sys, x)?;
        let cy = self.kl_basis(sys, y)?;
        Ok(mul_t_unchecked(sys, &cx, &cy))
    }

    /// `C_x C_y = sum_z h_{x,y,z} C_z`.
    pub fn h_product(&mut self, sys: &CoxeterSystem, x: Element, y: Element) -> Result<HeckeElement<C>> {
        let prod = self.c_product_t(sys, x, y)?;
        self.to_c_basis(sys, &prod)
    }

    pub fn h_const(&mut self, sys: &CoxeterSystem, x: Element, y: Element, z: Element) -> Result<LaurentPoly<C>> {
        let prod = self.c_product_t(sys, x, y)?;
        self.c_coefficient(sys, &prod, z)
    }

    /// `(Delta(w), n_w)`: minus the degree and the leading coefficient of `p_{e,w}`.
    pub fn delta_and_n(&mut self, sys: &CoxeterSystem, w: Element) -> Result<(i32, C)> {
        let p = self.p(sys, sys.identity(), w)?;
        match (p.degree(), p.leading_coefficient()) {
            (Degree::Finite(d), Some(c)) => Ok((-d, c.clone())),
            _ => Err(Error::InvariantViolation(format!("p_(e,{}) vanishes", sys.format_word(w)))),
        }
    }

    /// `gamma_{x,y,z^-1}`: coefficient of `q^{a(z)}` in `h_{x,y,z}`.
    pub fn gamma(&mut self, sys: &CoxeterSystem, x: Element, y: Element, z: Element, a_of_z: u32) -> Result<C> {
        Ok(self.h_const(sys, x, y, z)?.coefficient_at(a_of_z as i32))
    }

    /// `C_s h` for `h` in the Kazhdan-Lusztig basis.
    pub fn left_mul_c(&mut self, sys: &CoxeterSystem, s: Gen, h: &HeckeElement<C>) -> Result<HeckeElement<C>> {
        let mut out = HeckeElement::zero(Basis::C);
        let both = LaurentPoly::<C>::q_plus_inv(sys.weight(s));
        for (&u, c) in h.terms() {
            if sys.left_descent_mask(u) & (1 << s) != 0 {
                out.add_term_mul(u, c, &both);
            } else {
                out.add_term(sys.mul_gen_left(s, u), c);
                for (z, m) in self.left_corrections(sys, u, s)?.iter() {
                    out.add_term_mul(*z, c, m);
                }
            }
        }
        Ok(out)
    }

    /// `C_x C_y` in the Kazhdan-Lusztig basis for every `x` in `xs`, built
    /// by `C_x = C_s C_{sx} - sum M C_z`. `xs` must contain every element
    /// shorter than its longest member (a ball, or a ShortLex prefix of one).
    pub fn left_products(&mut self, sys: &CoxeterSystem, xs: &[Element], y: Element) -> Result<HashMap<Element, HeckeElement<C>>> {
        let mut order = xs.to_vec();
        sys.sort_shortlex(&mut order);
        let mut out: HashMap<Element, HeckeElement<C>> = HashMap::with_capacity(order.len());
        for x in order {
            if x.is_identity() {
                out.insert(x, HeckeElement::basis_element(Basis::C, y));
                continue;
            }
            let s = sys.word(x)[0];
            let shorter = sys.mul_gen_left(s, x);
            let missing = || Error::Contract(format!("left_products: {} needs shorter elements", sys.format_word(x)));
            let base = out.get(&shorter).ok_or_else(missing)?.clone();
            let mut h = self.left_mul_c(sys, s, &base)?;
            for (z, m) in self.left_corrections(sys, shorter, s)?.iter() {
                let hz = out.get(z).ok_or_else(missing)?;
                h.add_scaled(hz, &-m);
            }
            out.insert(x, h);
        }
        Ok(out)
    }

    /// Largest `deg h_{x,y,w}` over `l(x), l(y) <= radius`; see [`Self::a_oracle_many`].
    pub fn a_oracle(&mut self, sys: &CoxeterSystem, w: Element, radius: u32) -> Result<AValueRecord> {
        let ball = sys.ball(radius);
        Ok(self.a_oracle_many(sys, &[(w, radius)], &ball)?.pop().unwrap())
    }

    /// Oracle a-values for several targets `(w, radius)` in one scan. Pairs
    /// range over `search` (a ball or a ShortLex prefix of one), cut to
    /// length `radius` per target and to `R(y) ⊆ R(w)`. The first maximizing
    /// pair in ShortLex order of `(y, x)` is recorded.
    pub fn a_oracle_many(&mut self, sys: &CoxeterSystem, targets: &[(Element, u32)], search: &[Element]) -> Result<Vec<AValueRecord>> {
        for &(w, radius) in targets {
            if radius < w.length() {
                return Err(Error::Contract(format!("a-oracle radius {radius} is below l({})", sys.format_word(w))));
            }
        }
        let top = targets.iter().map(|t| t.1).max().unwrap_or(0);
        let mut pool: Vec<Element> = search.iter().copied().filter(|x| x.length() <= top).collect();
        sys.sort_shortlex(&mut pool);
        let index: HashMap<Element, usize> = targets.iter().enumerate().map(|(i, t)| (t.0, i)).collect();
        let right_any = targets.iter().fold(0u32, |m, t| m | sys.right_descent_mask(t.0));
        let mut best: Vec<(Degree, Option<(Element, Element)>)> = vec![(Degree::NegInfinity, None); targets.len()];
        for &y in &pool {
            if sys.right_descent_mask(y) & !right_any != 0 {
                continue;
            }
            for (x, h) in self.left_products(sys, &pool, y)? {
                for (z, c) in h.terms() {
                    let Some(&i) = index.get(z) else { continue };
                    let radius = targets[i].1;
                    if x.length() > radius || y.length() > radius {
                        continue;
                    }
                    let key = (c.degree(), y, x);
                    let slot = &mut best[i];
                    let better = match slot.1 {
                        None => true,
                        Some((bx, by)) => {
                            key.0 > slot.0
                                || (key.0 == slot.0
                                    && (sys.shortlex_cmp(y, by).then_with(|| sys.shortlex_cmp(x, bx)) == std::cmp::Ordering::Less))
                        }
                    };
                    if better {
                        *slot = (key.0, Some((x, y)));
                    }
                }
            }
        }
        Ok(targets
            .iter()
            .zip(best)
            .map(|(&(w, _), (deg, witness))| AValueRecord {
                w,
                a: deg.finite().unwrap_or(0).max(0) as u32,
                witness,
                method: AMethod::Oracle,
            })
            .collect())
    }

    /// Serializes every column, sorted ShortLex.
    pub fn to_json(&self, sys: &CoxeterSystem) -> serde_json::Value {
        let mut keys: Vec<Element> = self.columns.keys().copied().collect();
        sys.sort_shortlex(&mut keys);
        let letters = |w: Element| -> Vec<String> { sys.word(w).iter().map(|&s| sys.generator_names()[s as usize].clone()).collect() };
        let records: Vec<serde_json::Value> = keys
            .into_iter()
            .map(|w| {
                let col = &self.columns[&w];
                let mut ys: Vec<Element> = col.keys().copied().collect();
                sys.sort_shortlex(&mut ys);
                let polys: Vec<serde_json::Value> = ys
                    .into_iter()
                    .map(|y| {
                        let pairs: Vec<serde_json::Value> =
                            col[&y].terms().iter().map(|(e, c)| serde_json::json!([e, c.to_string()])).collect();
                        serde_json::json!([letters(y), pairs])
                    })
                    .collect();
                serde_json::json!({"w": letters(w), "p": polys})
            })
            .collect();
        serde_json::json!({
            "format_version": CACHE_FORMAT_VERSION,
            "system_hash": self.system_hash,
            "records": records,
        })
    }

    pub fn save(&mut self, sys: &CoxeterSystem, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_json(sys)).map_err(|e| Error::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        self.dirty = false;
        Ok(())
    }

    /// Reads a table; rejects caches written for another system or format.
    pub fn from_json(sys: &CoxeterSystem, value: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::Cache(m.to_string());
        let version = value.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| bad("missing format_version"))?;
        if version != CACHE_FORMAT_VERSION {
            return Err(Error::Cache(format!("unsupported format_version {version}")));
        }
        let hash = value.get("system_hash").and_then(|v| v.as_str()).ok_or_else(|| bad("missing system_hash"))?;
        if hash != sys.content_hash() {
            return Err(Error::Cache("stale cache: system hash mismatch".into()));
        }
        let word = |v: &serde_json::Value| -> Result<Element> {
            let names = v.as_array().ok_or_else(|| bad("word must be an array"))?;
            let letters = names
                .iter()
                .map(|n| {
                    n.as_str()
                        .ok_or_else(|| bad("letter must be a string"))
                        .and_then(|n| sys.gen_index(n).map_err(|e| Error::Cache(e.to_string())))
                })
                .collect::<Result<Vec<Gen>>>()?;
            Ok(sys.canonicalize(&letters))
        };
        let mut table = KlTable::new(sys);
        for rec in value.get("records").and_then(|r| r.as_array()).ok_or_else(|| bad("missing records"))? {
            let w = word(rec.get("w").ok_or_else(|| bad("record without w"))?)?;
            let mut col = HashMap::new();
            for entry in rec.get("p").and_then(|p| p.as_array()).ok_or_else(|| bad("record without p"))? {
                let y = word(entry.get(0).ok_or_else(|| bad("entry without y"))?)?;
                let mut pairs = Vec::new();
                for pair in entry.get(1).and_then(|p| p.as_array()).ok_or_else(|| bad("entry without poly"))? {
                    let e = pair.get(0).and_then(|e| e.as_i64()).ok_or_else(|| bad("bad exponent"))?;
                    let c: C = pair.get(1).and_then(|c| c.as_str()).and_then(|c| c.parse().ok()).ok_or_else(|| bad("bad coefficient"))?;
                    pairs.push((e as i32, c));
                }
                col.insert(y, LaurentPoly::from_pairs(pairs));
            }
            table.columns.insert(w, Arc::new(col));
        }
        Ok(table)
    }

    pub fn load(sys: &CoxeterSystem, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Cache(e.to_string()))?;
        Self::from_json(sys, &value)
    }

    /// Every column currently stored.
    pub fn columns(&self) -> impl Iterator<Item = (&Element, &Arc<KlColumn<C>>)> {
        self.columns.iter()
    }
}

/// Elements `x` of a ball whose left descents lie in `mask`.
pub fn with_left_descents_in(sys: &CoxeterSystem, ball: &[Element], mask: u32) -> Vec<Element> {
    ball.iter().copied().filter(|x| sys.left_descent_mask(*x) & !mask == 0).collect()
}

/// Distinct keys, for deduplicating witness sets.
pub fn distinct(v: impl IntoIterator<Item = Element>) -> Vec<Element> {
    let mut seen = HashSet::new();
    v.into_iter().filter(|x| seen.insert(*x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::systems::*;
    use crate::hecke::bar_involution;
    use crate::{Int, Poly};

    type T = KlTable<Int>;

    fn p(pairs: &[(i32, i64)]) -> Poly {
        Poly::from_i64_pairs(pairs)
    }

    #[test]
    fn first_basis_elements() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let mut t = T::new(&sys);
        let e = sys.identity();
        assert_eq!(t.kl_basis(&sys, e).unwrap(), HeckeElement::basis_element(Basis::T, e));
        for s in ["s", "t"] {
            let w = sys.parse_word(s).unwrap();
            let c = t.kl_basis(&sys, w).unwrap();
            assert_eq!(c.len(), 2);
            assert_eq!(c.coefficient(e), Poly::q_pow(-(w.weight() as i32)));
        }
    }

    #[test]
    fn dihedral_unequal_degree_examples() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let mut t = T::new(&sys);
        let d = sys.parse_word("t s t").unwrap();
        let deg = |t: &mut T, v: &str| t.p(&sys, sys.parse_word(v).unwrap(), d).unwrap().degree();
        assert_eq!(deg(&mut t, "t"), Degree::Finite(-1));
        assert_eq!(deg(&mut t, "s"), Degree::Finite(-4));
        // p_{e,tst} = q^-5 - q^-3: positivity fails for unequal weights.
        assert_eq!(t.p(&sys, sys.identity(), d).unwrap(), p(&[(-5, 1), (-3, -1)]));
        assert_eq!(t.delta_and_n(&sys, d).unwrap(), (3, Int::from(-1)));
    }

    #[test]
    fn methods_agree_and_basis_is_bar_invariant() {
        for sys in [hyperbolic_344(), right_angled_example(), CoxeterSystem::dihedral(6, 1, 3).unwrap()] {
            let mut rec = T::new(&sys);
            let mut bar = T::with_method(&sys, KlMethod::BarSolve);
            let mut bars = BarTable::new();
            for w in sys.ball(6) {
                let c1 = rec.kl_basis(&sys, w).unwrap();
                let c2 = bar.kl_basis(&sys, w).unwrap();
                assert_eq!(c1, c2, "{}", sys.format_word(w));
                assert_eq!(bar_involution(&sys, &c1, &mut bars), c1);
                for (y, poly) in c1.terms() {
                    assert!(sys.bruhat_leq(*y, w));
                    if *y != w {
                        assert!(poly.degree() < Degree::Finite(0));
                    }
                }
            }
        }
    }

    #[test]
    fn equal_parameter_longest_element() {
        for m in [3, 4, 5, 6] {
            let sys = CoxeterSystem::dihedral(m, 2, 2).unwrap();
            let mut t = T::new(&sys);
            let w0 = sys.sphere(m).pop().unwrap();
            for y in sys.ball(m) {
                let expect = Poly::q_pow(y.weight() as i32 - w0.weight() as i32);
                assert_eq!(t.p(&sys, y, w0).unwrap(), expect);
            }
        }
    }

    #[test]
    fn generator_squares() {
        let sys = hyperbolic_344();
        let mut t = T::new(&sys);
        for s in sys.generators() {
            let w = sys.generator(s);
            let h = t.h_const(&sys, w, w, w).unwrap();
            assert_eq!(h, Poly::q_plus_inv(sys.weight(s)));
            assert_eq!(t.gamma(&sys, w, w, w, sys.weight(s)).unwrap(), Int::from(1));
            assert_eq!(t.delta_and_n(&sys, w).unwrap(), (sys.weight(s) as i32, Int::from(1)));
        }
        let e = sys.identity();
        assert_eq!(t.delta_and_n(&sys, e).unwrap(), (0, Int::from(1)));
        for y in sys.ball(3) {
            let h = t.h_product(&sys, e, y).unwrap();
            assert_eq!(h, HeckeElement::basis_element(Basis::C, y));
        }
    }

    #[test]
    fn c_coefficient_matches_full_conversion() {
        let sys = affine_a2();
        let mut t = T::new(&sys);
        let ball = sys.ball(3);
        for &x in &ball {
            for &y in ball.iter().step_by(2) {
                let full = t.h_product(&sys, x, y).unwrap();
                for &z in &ball {
                    assert_eq!(t.h_const(&sys, x, y, z).unwrap(), full.coefficient(z));
                }
            }
        }
    }

    #[test]
    fn h_symmetry_under_inversion() {
        let sys = hyperbolic_344();
        let mut t = T::new(&sys);
        let ball = sys.ball(3);
        for &x in ball.iter().step_by(3) {
            for &y in ball.iter().step_by(2) {
                let h = t.h_product(&sys, x, y).unwrap();
                let hi = t.h_product(&sys, sys.inverse(y), sys.inverse(x)).unwrap();
                assert_eq!(h.len(), hi.len());
                for (z, c) in h.terms() {
                    assert_eq!(hi.coefficient(sys.inverse(*z)), *c);
                }
            }
        }
    }

    #[test]
    fn descent_pruning_is_exact() {
        // h_{x,y,z} vanishes unless L(x) ⊆ L(z) and R(y) ⊆ R(z).
        let sys = hyperbolic_344();
        let mut t = T::new(&sys);
        let ball = sys.ball(3);
        for &x in &ball {
            for &y in &ball {
                let h = t.h_product(&sys, x, y).unwrap();
                for (z, _) in h.terms() {
                    assert_eq!(sys.left_descent_mask(x) & !sys.left_descent_mask(*z), 0);
                    assert_eq!(sys.right_descent_mask(y) & !sys.right_descent_mask(*z), 0);
                }
            }
        }
    }

    #[test]
    fn oracle_small_values() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let mut t = T::new(&sys);
        let expect = [("e", 0), ("s", 1), ("t", 2), ("s t", 2), ("t s t", 3), ("s t s", 2), ("s t s t", 6)];
        for (w, a) in expect {
            let w = sys.parse_word(w).unwrap();
            let rec = t.a_oracle(&sys, w, 4).unwrap();
            assert_eq!(rec.a, a, "{}", sys.format_word(w));
            let (x, y) = rec.witness.unwrap();
            assert_eq!(t.h_const(&sys, x, y, w).unwrap().degree(), Degree::Finite(a as i32));
        }
    }

    #[test]
    fn left_products_match_t_expansion() {
        for sys in [hyperbolic_344(), right_angled_example(), CoxeterSystem::dihedral(6, 1, 3).unwrap()] {
            let mut t = T::new(&sys);
            let ball = sys.ball(4);
            for &y in ball.iter().step_by(3) {
                let all = t.left_products(&sys, &ball, y).unwrap();
                for &x in &ball {
                    assert_eq!(all[&x], t.h_product(&sys, x, y).unwrap());
                }
            }
        }
    }

    #[test]
    fn oracle_matches_direct_scan() {
        let sys = hyperbolic_344();
        let mut t = T::new(&sys);
        let ball = sys.ball(4);
        for &w in sys.ball(2).iter() {
            let mut direct = Degree::NegInfinity;
            for &x in &ball {
                for &y in &ball {
                    direct = direct.max(t.h_const(&sys, x, y, w).unwrap().degree());
                }
            }
            assert_eq!(Degree::Finite(t.a_oracle(&sys, w, 4).unwrap().a as i32), direct);
        }
    }

    #[test]
    fn oracle_is_monotone_in_radius() {
        let sys = affine_a2();
        let mut t = T::new(&sys);
        for w in sys.ball(2) {
            let mut prev = 0;
            for r in w.length()..=4 {
                let a = t.a_oracle(&sys, w, r).unwrap().a;
                assert!(a >= prev);
                assert!(a <= 3);
                prev = a;
            }
        }
    }

    #[test]
    fn cache_round_trip_and_staleness() {
        let sys = hyperbolic_344();
        let mut t = T::new(&sys);
        t.ensure_ball(&sys, 4).unwrap();
        let json = t.to_json(&sys);
        let back = T::from_json(&sys, &json).unwrap();
        assert_eq!(back.len(), t.len());
        for (w, col) in t.columns() {
            assert_eq!(back.cached_column(*w).unwrap().as_ref(), col.as_ref());
        }
        assert_eq!(back.to_json(&sys), json);
        let other = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        assert!(matches!(T::from_json(&other, &json), Err(Error::Cache(_))));
        let mut wrong = json.clone();
        wrong["format_version"] = serde_json::json!(99);
        assert!(matches!(T::from_json(&sys, &wrong), Err(Error::Cache(_))));
    }

    #[test]
    fn xi_products_in_kl_basis() {
        // C_s T_s = q^L C_s.
        let sys = right_angled_example();
        let mut t = T::new(&sys);
        for s in sys.generators() {
            let w = sys.generator(s);
            let cs = t.kl_basis(&sys, w).unwrap();
            let prod = crate::hecke::mul_gen_right(&sys, &cs, s);
            assert_eq!(prod, cs.scale(&Poly::q_pow(sys.weight(s) as i32)));
        }
        assert_eq!(p(&[(1, 1)]), Poly::q_pow(1));
    }
}
