//! The stratification `W = ⊔ Ω_N` by distinguished factors, which gives the
//! a-function structurally.
//!
//! For complete-graph systems the distinguished set holds the longest
//! elements `w_J` of finite parabolics with `|J| <= 2` together with the
//! elements `w(t, m - 1)` of even edges with `L(s) < L(t)`. For right-angled
//! systems it holds the products of pairwise commuting generators.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use crate::coxeter::{CoxeterSystem, Element, Family, Gen, Order};
use crate::error::Result;
use crate::kl::{AMethod, AValueRecord, KlTable};
use crate::laurent::Coeff;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DistinguishedKind {
    /// Longest element of the finite parabolic `W_J`.
    LongestParabolic(Vec<Gen>),
    /// `w(t, m - 1)` in the parabolic `{s, t}` with `L(s) < L(t)`.
    Subregular { lighter: Gen, heavier: Gen },
    /// Product of pairwise commuting generators.
    CommutingClique(Vec<Gen>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DistinguishedElement {
    pub d: Element,
    pub a_prime: u32,
    pub kind: DistinguishedKind,
}

/// A set computed inside a ball; complete only up to `radius`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallSet {
    pub radius: u32,
    pub elements: Vec<Element>,
}

impl BallSet {
    pub fn contains(&self, w: Element) -> bool {
        self.elements.contains(&w)
    }
}

pub struct Stratification {
    system_hash: String,
    distinguished: Vec<DistinguishedElement>,
    n0: u32,
    levels: Mutex<HashMap<Element, usize>>,
}

/// The distinguished elements, sorted by decreasing `a'` then ShortLex.
pub fn build_distinguished(sys: &CoxeterSystem) -> Vec<DistinguishedElement> {
    let mut out = vec![DistinguishedElement {
        d: sys.identity(),
        a_prime: 0,
        kind: match sys.family() {
            Family::CompleteGraph => DistinguishedKind::LongestParabolic(Vec::new()),
            Family::RightAngled => DistinguishedKind::CommutingClique(Vec::new()),
        },
    }];
    match sys.family() {
        Family::CompleteGraph => {
            for s in sys.generators() {
                out.push(DistinguishedElement {
                    d: sys.generator(s),
                    a_prime: sys.weight(s),
                    kind: DistinguishedKind::LongestParabolic(vec![s]),
                });
            }
            for s in sys.generators() {
                for t in sys.generators().filter(|&t| t > s) {
                    let Order::Finite(m) = sys.order(s, t) else { continue };
                    let longest = sys.canonicalize(&alternating(s, t, m as usize));
                    out.push(DistinguishedElement {
                        d: longest,
                        a_prime: longest.weight(),
                        kind: DistinguishedKind::LongestParabolic(vec![s, t]),
                    });
                    let (ls, lt) = (sys.weight(s), sys.weight(t));
                    if m % 2 == 0 && ls != lt {
                        let (lighter, heavier) = if ls < lt { (s, t) } else { (t, s) };
                        let (a, b) = (ls.min(lt), ls.max(lt));
                        out.push(DistinguishedElement {
                            d: sys.canonicalize(&alternating(heavier, lighter, m as usize - 1)),
                            a_prime: b + (m / 2 - 1) * (b - a),
                            kind: DistinguishedKind::Subregular { lighter, heavier },
                        });
                    }
                }
            }
        }
        Family::RightAngled => {
            let gens: Vec<Gen> = sys.generators().collect();
            let mut cliques = Vec::new();
            grow_cliques(sys, &gens, &mut Vec::new(), 0, &mut cliques);
            for clique in cliques {
                let d = sys.canonicalize(&clique);
                out.push(DistinguishedElement { d, a_prime: d.weight(), kind: DistinguishedKind::CommutingClique(clique) });
            }
        }
    }
    out.sort_by(|x, y| y.a_prime.cmp(&x.a_prime).then_with(|| sys.shortlex_cmp(x.d, y.d)));
    out
}

fn grow_cliques(sys: &CoxeterSystem, gens: &[Gen], current: &mut Vec<Gen>, from: usize, out: &mut Vec<Vec<Gen>>) {
    for i in from..gens.len() {
        let s = gens[i];
        if current.iter().all(|&t| sys.order(s, t) == Order::Finite(2)) {
            current.push(s);
            out.push(current.clone());
            grow_cliques(sys, gens, current, i + 1, out);
            current.pop();
        }
    }
}

fn alternating(first: Gen, second: Gen, len: usize) -> Vec<Gen> {
    (0..len).map(|i| if i % 2 == 0 { first } else { second }).collect()
}

/// All `p` with `w = p v` and `l(w) = l(p) + l(v)`, ShortLex sorted.
pub fn weak_prefixes(sys: &CoxeterSystem, w: Element) -> Vec<Element> {
    let mut seen: HashSet<Element> = HashSet::from([w]);
    let mut stack = vec![w];
    while let Some(p) = stack.pop() {
        let mask = sys.right_descent_mask(p);
        for s in sys.generators().filter(|s| mask & (1 << s) != 0) {
            let q = sys.mul_gen_right(p, s);
            if seen.insert(q) {
                stack.push(q);
            }
        }
    }
    let mut out: Vec<Element> = seen.into_iter().collect();
    sys.sort_shortlex(&mut out);
    out
}

/// Whether `p = x d` with `l(p) = l(x) + l(d)`.
fn has_suffix(sys: &CoxeterSystem, p: Element, d_word: &[Gen]) -> bool {
    let mut q = p;
    for &s in d_word.iter().rev() {
        if sys.right_descent_mask(q) & (1 << s) == 0 {
            return false;
        }
        q = sys.mul_gen_right(q, s);
    }
    true
}

/// Whether `w = x d y` with lengths adding up.
pub fn contains_reduced_factor(sys: &CoxeterSystem, w: Element, d: Element) -> bool {
    if d.length() > w.length() {
        return false;
    }
    let d_word = sys.word(d);
    weak_prefixes(sys, w).into_iter().any(|p| p.length() >= d.length() && has_suffix(sys, p, &d_word))
}

/// The same test by scanning every reduced word of `w` for a contiguous
/// reduced word of `d`; fails once either word set exceeds `cap`.
pub fn contains_reduced_factor_by_words(sys: &CoxeterSystem, w: Element, d: Element, cap: usize) -> Result<bool> {
    if d.is_identity() {
        return Ok(true);
    }
    let outer = sys.all_reduced_words(w, cap)?;
    let inner: HashSet<Vec<Gen>> = sys.all_reduced_words(d, cap)?.into_iter().collect();
    let k = d.length() as usize;
    Ok(outer.iter().any(|word| word.windows(k).any(|f| inner.contains(f))))
}

impl Stratification {
    pub fn build(sys: &CoxeterSystem) -> Self {
        let distinguished = build_distinguished(sys);
        let n0 = distinguished.iter().map(|d| d.a_prime).max().unwrap_or(0);
        Stratification { system_hash: sys.content_hash().to_string(), distinguished, n0, levels: Mutex::new(HashMap::new()) }
    }

    pub fn system_hash(&self) -> &str {
        &self.system_hash
    }

    pub fn distinguished(&self) -> &[DistinguishedElement] {
        &self.distinguished
    }

    /// `D_N`.
    pub fn stratum(&self, n: u32) -> Vec<&DistinguishedElement> {
        self.distinguished.iter().filter(|d| d.a_prime == n).collect()
    }

    /// The values `a'(d)` that occur, increasing.
    pub fn levels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.distinguished.iter().map(|d| d.a_prime).collect();
        v.sort();
        v.dedup();
        v
    }

    /// `N_0 = max a'(d)`.
    pub fn n0(&self) -> u32 {
        self.n0
    }

    pub fn find(&self, d: Element) -> Option<&DistinguishedElement> {
        self.distinguished.iter().find(|x| x.d == d)
    }

    /// The distinguished factor of largest `a'` contained in `w`.
    pub fn level_witness(&self, sys: &CoxeterSystem, w: Element) -> &DistinguishedElement {
        assert_eq!(self.system_hash, sys.content_hash(), "stratification used with a different system");
        if let Some(&i) = self.levels.lock().unwrap().get(&w) {
            return &self.distinguished[i];
        }
        let prefixes = weak_prefixes(sys, w);
        let i = self
            .distinguished
            .iter()
            .position(|d| {
                let d_word = sys.word(d.d);
                prefixes.iter().any(|&p| p.length() >= d.d.length() && has_suffix(sys, p, &d_word))
            })
            .expect("the identity is a factor of everything");
        self.levels.lock().unwrap().insert(w, i);
        &self.distinguished[i]
    }

    /// The `N` with `w ∈ Ω_N`.
    pub fn omega_level(&self, sys: &CoxeterSystem, w: Element) -> u32 {
        self.level_witness(sys, w).a_prime
    }

    pub fn a_structural(&self, sys: &CoxeterSystem, w: Element) -> AValueRecord {
        AValueRecord { w, a: self.omega_level(sys, w), witness: None, method: AMethod::Structural }
    }

    /// Whether `y ∈ U_d`: `l(dy) = l(d) + l(y)` and `dy ∈ Ω_N`, `N = a'(d)`.
    pub fn in_ud(&self, sys: &CoxeterSystem, d: &DistinguishedElement, y: Element) -> bool {
        sys.is_length_additive(d.d, y) && self.omega_level(sys, sys.mul(d.d, y)) == d.a_prime
    }

    /// Whether `b ∈ B_d`: `b^-1 ∈ U_d` and every proper prefix of `bd` lies
    /// below level `a'(d)`.
    pub fn in_bd(&self, sys: &CoxeterSystem, d: &DistinguishedElement, b: Element) -> bool {
        if !self.in_ud(sys, d, sys.inverse(b)) {
            return false;
        }
        let bd = sys.mul(b, d.d);
        weak_prefixes(sys, bd).into_iter().all(|w| w == bd || self.omega_level(sys, w) < d.a_prime)
    }

    /// `U_d` inside the ball.
    pub fn compute_ud(&self, sys: &CoxeterSystem, d: &DistinguishedElement, radius: u32) -> BallSet {
        let elements = sys.ball(radius).into_iter().filter(|&y| self.in_ud(sys, d, y)).collect();
        BallSet { radius, elements }
    }

    /// `B_d` inside the ball.
    pub fn compute_bd(&self, sys: &CoxeterSystem, d: &DistinguishedElement, radius: u32) -> BallSet {
        let elements = sys.ball(radius).into_iter().filter(|&b| self.in_bd(sys, d, b)).collect();
        BallSet { radius, elements }
    }

    /// Every way of writing `w = b d y` with lengths adding up, `d ∈ D_N` for
    /// the level `N` of `w`, `b ∈ B_d` and `y ∈ U_d`. Exactly one is expected.
    pub fn decompositions(&self, sys: &CoxeterSystem, w: Element) -> Vec<(Element, &DistinguishedElement, Element)> {
        let level = self.omega_level(sys, w);
        let prefixes = weak_prefixes(sys, w);
        let mut out = Vec::new();
        for d in self.distinguished.iter().filter(|d| d.a_prime == level) {
            for &b in &prefixes {
                if b.length() + d.d.length() > w.length() {
                    continue;
                }
                let rest = sys.mul(sys.inverse(b), w);
                let y = sys.mul(sys.inverse(d.d), rest);
                if y.length() + d.d.length() == rest.length() && self.in_ud(sys, d, y) && self.in_bd(sys, d, b) {
                    out.push((b, d, y));
                }
            }
        }
        out
    }

    /// The elements `z` of the ball with `a(z) = Delta(z)`.
    pub fn distinguished_involutions_in_ball<C: Coeff>(
        &self,
        sys: &CoxeterSystem,
        table: &mut KlTable<C>,
        radius: u32,
    ) -> Result<Vec<Element>> {
        let mut out = Vec::new();
        for z in sys.ball(radius) {
            let (delta, _) = table.delta_and_n(sys, z)?;
            if delta == self.omega_level(sys, z) as i32 {
                out.push(z);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::systems::*;
    use crate::Int;
    use proptest::prelude::*;

    fn summary(sys: &CoxeterSystem, strat: &Stratification) -> Vec<(String, u32)> {
        let mut v: Vec<(String, u32)> = strat.distinguished().iter().map(|d| (sys.format_word(d.d), d.a_prime)).collect();
        v.sort();
        v
    }

    fn pairs(v: &[(&str, u32)]) -> Vec<(String, u32)> {
        let mut v: Vec<(String, u32)> = v.iter().map(|(w, a)| (w.to_string(), *a)).collect();
        v.sort();
        v
    }

    #[test]
    fn distinguished_sets() {
        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let strat = Stratification::build(&sys);
        assert_eq!(summary(&sys, &strat), pairs(&[("e", 0), ("s", 1), ("t", 2), ("s t s t", 6), ("t s t", 3)]));
        assert_eq!(strat.n0(), 6);

        let sys = affine_a2();
        let strat = Stratification::build(&sys);
        let d = summary(&sys, &strat);
        assert_eq!(d.len(), 7);
        assert_eq!(strat.levels(), vec![0, 1, 3]);
        assert!(d.contains(&("s1 s2 s1".to_string(), 3)));

        let sys = right_angled_example();
        let strat = Stratification::build(&sys);
        assert_eq!(summary(&sys, &strat), pairs(&[("e", 0), ("s1", 1), ("s3", 1), ("s2", 2), ("s1 s3", 2)]));
        assert_eq!(strat.n0(), 2);

        assert_eq!(Stratification::build(&hyperbolic_344()).n0(), 6);
    }

    #[test]
    fn subregular_weight_formula() {
        for (m, a, b) in [(4, 1, 2), (6, 1, 3), (6, 2, 3), (8, 1, 2)] {
            let sys = CoxeterSystem::dihedral(m, a, b).unwrap();
            let strat = Stratification::build(&sys);
            let d = strat.distinguished().iter().find(|d| matches!(d.kind, DistinguishedKind::Subregular { .. })).unwrap();
            assert_eq!(d.a_prime, (m / 2) * b - (m / 2 - 1) * a);
            assert_eq!(d.d.length(), m - 1);
            assert_eq!(sys.word(d.d)[0], 1);
        }
        let sys = CoxeterSystem::dihedral(6, 2, 2).unwrap();
        assert_eq!(Stratification::build(&sys).distinguished().len(), 4);
    }

    #[test]
    fn complete_graph_rank_three_parabolics_are_infinite() {
        for sys in [affine_a2(), hyperbolic_344(), rst()] {
            let sub = sys.parabolic(&[0, 1, 2]).unwrap();
            // Every finite rank-3 Coxeter group has longest element of length <= 15.
            assert!(!sub.sphere(16).is_empty());
        }
    }

    #[test]
    fn factor_examples() {
        let sys = affine_a2();
        let w = |s: &str| sys.parse_word(s).unwrap();
        assert!(contains_reduced_factor(&sys, w("s1 s2 s3"), sys.identity()));
        assert!(!contains_reduced_factor(&sys, w("s1 s2 s3"), w("s1 s2 s1")));
        assert!(contains_reduced_factor(&sys, w("s1 s2 s1"), w("s1 s2 s1")));
        assert!(contains_reduced_factor(&sys, w("s3 s2 s1 s2 s3"), w("s1 s2 s1")));

        let sys = right_angled_example();
        let w = |s: &str| sys.parse_word(s).unwrap();
        assert!(contains_reduced_factor(&sys, w("s2 s1 s3"), w("s1 s3")));
        assert!(contains_reduced_factor(&sys, w("s1 s2 s3 s1"), w("s3 s1")));
    }

    #[test]
    fn levels_and_structural_values() {
        let sys = affine_a2();
        let strat = Stratification::build(&sys);
        let w = |s: &str| sys.parse_word(s).unwrap();
        assert_eq!(strat.omega_level(&sys, sys.identity()), 0);
        assert_eq!(strat.omega_level(&sys, w("s1 s2 s1")), 3);
        assert_eq!(strat.omega_level(&sys, w("s1 s2 s3")), 1);
        assert_eq!(strat.a_structural(&sys, w("s1 s2 s1 s3")).a, 3);

        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let strat = Stratification::build(&sys);
        let w = |s: &str| sys.parse_word(s).unwrap();
        assert_eq!(strat.a_structural(&sys, w("t s t")).a, 3);
        assert_eq!(strat.a_structural(&sys, w("t s")).a, 2);
        assert_eq!(strat.a_structural(&sys, w("s t s")).a, 2);

        let sys = right_angled_example();
        let strat = Stratification::build(&sys);
        for (word, n) in [("s2", 2), ("s1", 1), ("s3", 1), ("s1 s2", 2), ("s3 s1", 2)] {
            assert_eq!(strat.omega_level(&sys, sys.parse_word(word).unwrap()), n, "{word}");
        }
    }

    #[test]
    fn ud_and_bd_examples() {
        let sys = affine_a2();
        let strat = Stratification::build(&sys);
        let w = |s: &str| sys.parse_word(s).unwrap();
        let d = strat.find(w("s1 s2 s1")).unwrap().clone();
        let ud = strat.compute_ud(&sys, &d, 3);
        assert_eq!(ud.radius, 3);
        for y in ["e", "s3", "s3 s1", "s3 s2"] {
            assert!(ud.contains(w(y)), "{y}");
        }
        let bd = strat.compute_bd(&sys, &d, 3);
        assert!(bd.contains(sys.identity()));
        assert!(bd.contains(w("s3")));

        let sys = CoxeterSystem::dihedral(4, 1, 2).unwrap();
        let strat = Stratification::build(&sys);
        let top = strat.stratum(6)[0].clone();
        assert_eq!(strat.compute_ud(&sys, &top, 4).elements, vec![sys.identity()]);
        assert_eq!(strat.compute_bd(&sys, &top, 4).elements, vec![sys.identity()]);
    }

    #[test]
    fn length_additivity_of_bdy() {
        for sys in [affine_a2(), hyperbolic_344(), right_angled_example()] {
            let strat = Stratification::build(&sys);
            for d in strat.distinguished() {
                let ud = strat.compute_ud(&sys, d, 3);
                let bd = strat.compute_bd(&sys, d, 3);
                assert!(ud.contains(sys.identity()) && bd.contains(sys.identity()));
                for &b in &bd.elements {
                    for &y in &ud.elements {
                        let bdy = sys.mul(sys.mul(b, d.d), y);
                        assert_eq!(bdy.length(), b.length() + d.d.length() + y.length());
                    }
                }
            }
        }
    }

    #[test]
    fn distinguished_are_involutions_of_their_level() {
        for sys in [affine_a2(), hyperbolic_344(), right_angled_example()] {
            let strat = Stratification::build(&sys);
            for d in strat.distinguished() {
                assert_eq!(sys.inverse(d.d), d.d);
                assert_eq!(strat.omega_level(&sys, d.d), d.a_prime);
            }
        }
    }

    #[test]
    fn parabolic_compatibility() {
        for sys in [hyperbolic_344(), right_angled_example()] {
            let strat = Stratification::build(&sys);
            for j in [vec![0u8, 1], vec![0, 2], vec![1, 2]] {
                let sub = sys.parabolic(&j).unwrap();
                let sub_strat = Stratification::build(&sub);
                for u in sub.ball(6) {
                    let letters: Vec<Gen> = sub.word(u).iter().map(|&i| j[i as usize]).collect();
                    let w = sys.canonicalize(&letters);
                    assert_eq!(sub_strat.omega_level(&sub, u), strat.omega_level(&sys, w));
                }
            }
        }
    }

    #[test]
    fn involutions_in_small_balls() {
        let sys = right_angled_example();
        let strat = Stratification::build(&sys);
        let mut table = KlTable::<Int>::new(&sys);
        let found = strat.distinguished_involutions_in_ball(&sys, &mut table, 4).unwrap();
        assert!(found.contains(&sys.identity()));
        for s in sys.generators() {
            assert!(found.contains(&sys.generator(s)));
        }
        for &z in &found {
            assert_eq!(sys.inverse(z), z);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn weak_scan_matches_word_scan(which in 0usize..3, i in 0usize..100, j in 0usize..8) {
            let sys = match which { 0 => affine_a2(), 1 => hyperbolic_344(), _ => right_angled_example() };
            let ball = sys.ball(6);
            let w = ball[i % ball.len()];
            let strat = Stratification::build(&sys);
            let ds = strat.distinguished();
            let d = ds[j % ds.len()].d;
            prop_assert_eq!(
                contains_reduced_factor(&sys, w, d),
                contains_reduced_factor_by_words(&sys, w, d, 100_000).unwrap()
            );
        }
    }
}
