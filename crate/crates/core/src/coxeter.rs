//! Coxeter systems, canonical ShortLex words, descents and Bruhat order.
//!
//! Group elements live in a per-system arena that grows on demand. Each node
//! stores its ShortLex-minimal reduced word and its right descent set; right
//! multiplication by a generator is memoized both ways. Descents of a new
//! element `ys` are read off from the rank-2 parabolic components of `y`:
//! `t` is a right descent of `ys` exactly when `y` ends in an alternating
//! `{s,t}` word of length `m_st - 1` ending in `t`.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Generator index, in declaration order.
pub type Gen = u8;

const NONE: u32 = u32::MAX;

/// Default cap on the size of a braid class returned by [`CoxeterSystem::all_reduced_words`].
pub const DEFAULT_WORD_CAP: usize = 100_000;

/// Order of a product `st`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    Finite(u32),
    Infinite,
}

impl Order {
    pub fn finite(self) -> Option<u32> {
        match self {
            Order::Finite(m) => Some(m),
            Order::Infinite => None,
        }
    }

    fn from_code(code: u32) -> Order {
        if code == 0 {
            Order::Infinite
        } else {
            Order::Finite(code)
        }
    }

    fn code(self) -> u32 {
        self.finite().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Every pair of distinct generators has `m_st >= 3` (possibly infinite).
    CompleteGraph,
    /// Every pair of distinct generators has `m_st` in `{2, infinity}`.
    RightAngled,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::CompleteGraph => "complete",
            Family::RightAngled => "right-angled",
        }
    }
}

/// A group element. Cheap to copy; only meaningful together with the system
/// that produced it. Two elements of one system are equal exactly when their
/// canonical words are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    id: u32,
    len: u32,
    weight: u32,
}

impl Element {
    pub fn length(self) -> u32 {
        self.len
    }

    /// `L(w)`, the sum of the weights of the letters of a reduced word.
    pub fn weight(self) -> u32 {
        self.weight
    }

    pub fn is_identity(self) -> bool {
        self.len == 0
    }

    /// Arena index; stable for the lifetime of the system.
    pub fn id(self) -> u32 {
        self.id
    }
}

struct Node {
    word: Box<[Gen]>,
    weight: u32,
    rdesc: u32,
    parent: u32,
    last: Gen,
}

pub(crate) struct Arena {
    rank: usize,
    orders: Vec<Option<u32>>,
    weights: Vec<u32>,
    nodes: Vec<Node>,
    right: Vec<u32>,
    left: Vec<u32>,
    inverse: Vec<u32>,
    index: HashMap<Box<[Gen]>, u32>,
    lower: HashMap<u32, Arc<Vec<Element>>>,
    levels: Vec<Vec<u32>>,
}

impl Arena {
    fn new(rank: usize, orders: Vec<Option<u32>>, weights: Vec<u32>) -> Self {
        let mut arena = Arena {
            rank,
            orders,
            weights,
            nodes: Vec::new(),
            right: Vec::new(),
            left: Vec::new(),
            inverse: Vec::new(),
            index: HashMap::new(),
            lower: HashMap::new(),
            levels: vec![vec![0]],
        };
        arena.push(Box::new([]), 0, 0, NONE, 0);
        arena.inverse[0] = 0;
        arena
    }

    fn push(&mut self, word: Box<[Gen]>, weight: u32, rdesc: u32, parent: u32, last: Gen) -> u32 {
        let id = self.nodes.len() as u32;
        self.index.insert(word.clone(), id);
        self.nodes.push(Node { word, weight, rdesc, parent, last });
        self.right.extend(std::iter::repeat_n(NONE, self.rank));
        self.left.extend(std::iter::repeat_n(NONE, self.rank));
        self.inverse.push(NONE);
        id
    }

    fn order(&self, s: Gen, t: Gen) -> Option<u32> {
        self.orders[s as usize * self.rank + t as usize]
    }

    pub(crate) fn elem(&self, id: u32) -> Element {
        let n = &self.nodes[id as usize];
        Element { id, len: n.word.len() as u32, weight: n.weight }
    }

    pub(crate) fn word(&self, id: u32) -> &[Gen] {
        &self.nodes[id as usize].word
    }

    pub(crate) fn rdesc(&self, id: u32) -> u32 {
        self.nodes[id as usize].rdesc
    }

    pub(crate) fn mul_right(&mut self, x: u32, s: Gen) -> u32 {
        let cached = self.right[x as usize * self.rank + s as usize];
        if cached != NONE {
            return cached;
        }
        if self.rdesc(x) & (1 << s) != 0 {
            self.down(x, s)
        } else {
            self.up(x, s)
        }
    }

    fn link(&mut self, x: u32, s: Gen, y: u32) {
        self.right[x as usize * self.rank + s as usize] = y;
        self.right[y as usize * self.rank + s as usize] = x;
    }

    /// Alternating word of length `len` over `{last, other}` ending in `last`.
    fn alternating(len: u32, last: Gen, other: Gen) -> Vec<Gen> {
        (0..len).map(|i| if (len - 1 - i) % 2 == 0 { last } else { other }).collect()
    }

    fn climb(&mut self, mut x: u32, word: &[Gen]) -> u32 {
        for &s in word {
            x = self.mul_right(x, s);
        }
        x
    }

    /// Strips the alternating `{first, other}` suffix of `x`, starting with
    /// `first`, for at most `limit` steps. Returns the number of letters
    /// removed and the remaining element.
    fn strip(&mut self, x: u32, first: Gen, other: Gen, limit: u32) -> (u32, u32) {
        let mut cur = x;
        let mut steps = 0;
        while steps < limit {
            let letter = if steps % 2 == 0 { first } else { other };
            if self.rdesc(cur) & (1 << letter) == 0 {
                break;
            }
            cur = self.mul_right(cur, letter);
            steps += 1;
        }
        (steps, cur)
    }

    fn down(&mut self, x: u32, s: Gen) -> u32 {
        let node = &self.nodes[x as usize];
        let (b, parent) = (node.last, node.parent);
        if b == s {
            self.link(x, s, parent);
            return parent;
        }
        let m = self.order(s, b).expect("two right descents generate a finite parabolic");
        let (steps, base) = self.strip(x, b, s, m);
        debug_assert_eq!(steps, m);
        let result = self.climb(base, &Self::alternating(m - 1, b, s));
        self.link(x, s, result);
        result
    }

    fn up(&mut self, y: u32, a: Gen) -> u32 {
        let mut rdesc = 1u32 << a;
        let mut lowers: Vec<(Gen, u32)> = vec![(a, y)];
        for t in 0..self.rank as Gen {
            if t == a {
                continue;
            }
            let Some(m) = self.order(a, t) else { continue };
            let (steps, base) = self.strip(y, t, a, m - 1);
            if steps == m - 1 {
                rdesc |= 1 << t;
                let lower = self.climb(base, &Self::alternating(m - 1, a, t));
                lowers.push((t, lower));
            }
        }
        let mut best: Option<(Vec<Gen>, Gen, u32)> = None;
        for &(t, lower) in &lowers {
            let mut w = self.word(lower).to_vec();
            w.push(t);
            if best.as_ref().is_none_or(|(bw, _, _)| w < *bw) {
                best = Some((w, t, lower));
            }
        }
        let (word, last, parent) = best.expect("at least one lower neighbour");
        let z = match self.index.get(word.as_slice()) {
            Some(&z) => z,
            None => {
                let weight = self.nodes[y as usize].weight + self.weights[a as usize];
                self.push(word.into_boxed_slice(), weight, rdesc, parent, last)
            }
        };
        for (t, lower) in lowers {
            self.link(z, t, lower);
        }
        z
    }

    pub(crate) fn canonicalize(&mut self, word: &[Gen]) -> u32 {
        self.climb(0, word)
    }

    pub(crate) fn inverse(&mut self, x: u32) -> u32 {
        let cached = self.inverse[x as usize];
        if cached != NONE {
            return cached;
        }
        let rev: Vec<Gen> = self.word(x).iter().rev().copied().collect();
        let y = self.canonicalize(&rev);
        self.inverse[x as usize] = y;
        self.inverse[y as usize] = x;
        y
    }

    pub(crate) fn mul_left(&mut self, s: Gen, x: u32) -> u32 {
        let cached = self.left[x as usize * self.rank + s as usize];
        if cached != NONE {
            return cached;
        }
        let xi = self.inverse(x);
        let yi = self.mul_right(xi, s);
        let y = self.inverse(yi);
        self.left[x as usize * self.rank + s as usize] = y;
        self.left[y as usize * self.rank + s as usize] = x;
        y
    }

    pub(crate) fn ldesc(&mut self, x: u32) -> u32 {
        let xi = self.inverse(x);
        self.rdesc(xi)
    }

    pub(crate) fn multiply(&mut self, x: u32, y: u32) -> u32 {
        let word = self.word(y).to_vec();
        self.climb(x, &word)
    }

    fn bruhat_leq(&mut self, mut y: u32, mut w: u32) -> bool {
        loop {
            if y == 0 {
                return true;
            }
            let (ly, lw) = (self.word(y).len(), self.word(w).len());
            if ly > lw {
                return false;
            }
            if ly == lw {
                return y == w;
            }
            let s = self.word(w)[0];
            w = self.mul_left(s, w);
            if self.ldesc(y) & (1 << s) != 0 {
                y = self.mul_left(s, y);
            }
        }
    }

    fn shortlex(&self, a: u32, b: u32) -> Ordering {
        let (wa, wb) = (self.word(a), self.word(b));
        wa.len().cmp(&wb.len()).then_with(|| wa.cmp(wb))
    }

    fn lower_interval(&mut self, w: u32) -> Arc<Vec<Element>> {
        if let Some(v) = self.lower.get(&w) {
            return v.clone();
        }
        let result = if w == 0 {
            vec![self.elem(0)]
        } else {
            let s = self.word(w)[0];
            let sw = self.mul_left(s, w);
            let below = self.lower_interval(sw);
            let mut ids: HashSet<u32> = below.iter().map(|e| e.id).collect();
            for e in below.iter() {
                let t = self.mul_left(s, e.id);
                ids.insert(t);
            }
            let mut ids: Vec<u32> = ids.into_iter().collect();
            ids.sort_by(|&a, &b| self.shortlex(a, b));
            ids.into_iter().map(|id| self.elem(id)).collect()
        };
        let arc = Arc::new(result);
        self.lower.insert(w, arc.clone());
        arc
    }

    fn level(&mut self, n: usize) -> Vec<u32> {
        while self.levels.len() <= n {
            let prev = self.levels.last().unwrap().clone();
            let mut next: HashSet<u32> = HashSet::new();
            for x in prev {
                for s in 0..self.rank as Gen {
                    if self.rdesc(x) & (1 << s) == 0 {
                        let y = self.mul_right(x, s);
                        next.insert(y);
                    }
                }
            }
            let mut next: Vec<u32> = next.into_iter().collect();
            next.sort_by(|&a, &b| self.shortlex(a, b));
            self.levels.push(next);
        }
        self.levels[n].clone()
    }
}

/// A Coxeter system `(W, S)` with a positive weight function.
pub struct CoxeterSystem {
    names: Vec<String>,
    orders: Vec<Vec<Order>>,
    weights: Vec<u32>,
    family: Family,
    hash: String,
    arena: Mutex<Arena>,
}

impl fmt::Debug for CoxeterSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoxeterSystem")
            .field("generators", &self.names)
            .field("m", &self.matrix_codes())
            .field("weights", &self.weights)
            .field("family", &self.family)
            .finish()
    }
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl CoxeterSystem {
    /// Validates and builds a system. `m` uses `Order::Infinite` for `m = infinity`.
    pub fn new(names: Vec<String>, m: Vec<Vec<Order>>, weights: Vec<u32>, family: Family) -> Result<Self> {
        let rank = names.len();
        if rank == 0 || rank > 32 {
            return Err(config_err("generators", format!("rank must be between 1 and 32, got {rank}")));
        }
        let distinct: HashSet<&String> = names.iter().collect();
        if distinct.len() != rank {
            return Err(config_err("generators", "duplicate generator name"));
        }
        if names.iter().any(|n| n.is_empty() || n.chars().any(char::is_whitespace)) {
            return Err(config_err("generators", "names must be nonempty and contain no whitespace"));
        }
        if m.len() != rank || m.iter().any(|row| row.len() != rank) {
            return Err(config_err("m", format!("matrix must be {rank}x{rank}")));
        }
        if weights.len() != rank {
            return Err(config_err("weights", format!("expected {rank} weights")));
        }
        for (i, w) in weights.iter().enumerate() {
            if *w == 0 {
                return Err(config_err(format!("weights[{i}]"), "weights must be positive"));
            }
        }
        for i in 0..rank {
            if m[i][i] != Order::Finite(1) {
                return Err(config_err(format!("m[{i}][{i}]"), "diagonal entries must be 1"));
            }
            for j in 0..rank {
                if i == j {
                    continue;
                }
                if m[i][j] != m[j][i] {
                    return Err(config_err(format!("m[{i}][{j}]"), "matrix must be symmetric"));
                }
                match (family, m[i][j]) {
                    (_, Order::Finite(k)) if k < 2 => {
                        return Err(config_err(format!("m[{i}][{j}]"), "off-diagonal entries must be >= 2"));
                    }
                    (Family::CompleteGraph, Order::Finite(2)) => {
                        return Err(config_err(format!("m[{i}][{j}]"), "complete-graph systems need m >= 3"));
                    }
                    (Family::RightAngled, Order::Finite(k)) if k != 2 => {
                        return Err(config_err(format!("m[{i}][{j}]"), "right-angled systems need m in {2, 0}"));
                    }
                    _ => {}
                }
                if let Order::Finite(k) = m[i][j] {
                    if k % 2 == 1 && weights[i] != weights[j] {
                        return Err(config_err(format!("weights[{i}], weights[{j}]"), format!("odd m = {k} forces equal weights")));
                    }
                }
            }
        }
        let orders: Vec<Option<u32>> = m.iter().flatten().map(|o| o.finite()).collect();
        let mut sys = CoxeterSystem {
            names,
            orders: m,
            weights: weights.clone(),
            family,
            hash: String::new(),
            arena: Mutex::new(Arena::new(rank, orders, weights)),
        };
        sys.hash = sys.compute_hash();
        Ok(sys)
    }

    /// Convenience constructor from the file encoding (`0` means infinity).
    pub fn from_codes(names: &[&str], m: &[Vec<u32>], weights: &[u32], family: Family) -> Result<Self> {
        let orders = m.iter().map(|row| row.iter().map(|&c| Order::from_code(c)).collect()).collect();
        Self::new(names.iter().map(|s| s.to_string()).collect(), orders, weights.to_vec(), family)
    }

    /// The finite dihedral group of order `2m` with `L(s) = a`, `L(t) = b`.
    pub fn dihedral(m: u32, a: u32, b: u32) -> Result<Self> {
        if m < 3 {
            return Err(config_err("m", "dihedral systems need m >= 3"));
        }
        Self::from_codes(&["s", "t"], &[vec![1, m], vec![m, 1]], &[a, b], Family::CompleteGraph)
    }

    /// Parses the JSON configuration format.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err(format!("line {}", e.line()), e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| config_err("<root>", "expected a JSON object"))?;
        let names: Vec<String> = obj
            .get("generators")
            .and_then(|g| g.as_array())
            .ok_or_else(|| config_err("generators", "expected an array of strings"))?
            .iter()
            .enumerate()
            .map(|(i, g)| g.as_str().map(str::to_string).ok_or_else(|| config_err(format!("generators[{i}]"), "expected a string")))
            .collect::<Result<_>>()?;
        let m_rows = obj.get("m").and_then(|m| m.as_array()).ok_or_else(|| config_err("m", "expected a matrix"))?;
        let mut m = Vec::new();
        for (i, row) in m_rows.iter().enumerate() {
            let row = row.as_array().ok_or_else(|| config_err(format!("m[{i}]"), "expected an array"))?;
            let mut out = Vec::new();
            for (j, x) in row.iter().enumerate() {
                let code = x.as_u64().ok_or_else(|| config_err(format!("m[{i}][{j}]"), "expected a nonnegative integer"))?;
                out.push(Order::from_code(code as u32));
            }
            m.push(out);
        }
        let weights: Vec<u32> = match obj.get("weights") {
            None => vec![1; names.len()],
            Some(w) => w
                .as_array()
                .ok_or_else(|| config_err("weights", "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    x.as_u64().map(|x| x as u32).ok_or_else(|| config_err(format!("weights[{i}]"), "expected a positive integer"))
                })
                .collect::<Result<_>>()?,
        };
        let family = match obj.get("family").and_then(|f| f.as_str()) {
            Some("complete") | Some("complete-graph") | Some("dihedral") => Family::CompleteGraph,
            Some("right-angled") | Some("right_angled") => Family::RightAngled,
            Some(other) => return Err(config_err("family", format!("unknown family `{other}`"))),
            None => return Err(config_err("family", "missing")),
        };
        Self::new(names, m, weights, family)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "generators": self.names,
            "m": self.matrix_codes(),
            "weights": self.weights,
            "family": self.family.name(),
        })
    }

    fn matrix_codes(&self) -> Vec<Vec<u32>> {
        self.orders.iter().map(|row| row.iter().map(|o| o.code()).collect()).collect()
    }

    fn compute_hash(&self) -> String {
        let canonical = self.to_json().to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Content hash of the system, used to key persisted tables.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    pub fn generators(&self) -> impl Iterator<Item = Gen> {
        0..self.rank() as Gen
    }

    pub fn order(&self, s: Gen, t: Gen) -> Order {
        self.orders[s as usize][t as usize]
    }

    pub fn weight(&self, s: Gen) -> u32 {
        self.weights[s as usize]
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub(crate) fn arena(&self) -> MutexGuard<'_, Arena> {
        self.arena.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn identity(&self) -> Element {
        Element { id: 0, len: 0, weight: 0 }
    }

    pub fn generator(&self, s: Gen) -> Element {
        self.canonicalize(&[s])
    }

    pub fn gen_index(&self, name: &str) -> Result<Gen> {
        self.names.iter().position(|n| n == name).map(|i| i as Gen).ok_or_else(|| Error::Input(format!("unknown generator `{name}`")))
    }

    /// Reads a word: space-separated generator names, or a run of one-letter
    /// names when every generator name is a single character. `e`, `1` and
    /// the empty string denote the identity unless they name a generator.
    pub fn parse_letters(&self, text: &str) -> Result<Vec<Gen>> {
        let text = text.trim();
        if text.is_empty() || ((text == "e" || text == "1") && self.gen_index(text).is_err()) {
            return Ok(Vec::new());
        }
        let tokens: Vec<&str> = text.split(|c: char| c.is_whitespace() || c == '*' || c == '.').filter(|t| !t.is_empty()).collect();
        if tokens.len() == 1 && self.gen_index(tokens[0]).is_err() && self.names.iter().all(|n| n.chars().count() == 1) {
            return text.chars().map(|c| self.gen_index(&c.to_string())).collect();
        }
        tokens.into_iter().map(|t| self.gen_index(t)).collect()
    }

    pub fn parse_word(&self, text: &str) -> Result<Element> {
        Ok(self.canonicalize(&self.parse_letters(text)?))
    }

    /// Checks generator ids and canonicalizes.
    pub fn try_canonicalize(&self, word: &[Gen]) -> Result<Element> {
        if let Some(bad) = word.iter().find(|&&s| s as usize >= self.rank()) {
            return Err(Error::Input(format!("generator id {bad} out of range")));
        }
        Ok(self.canonicalize(word))
    }

    /// ShortLex-minimal reduced word of the element represented by `word`.
    pub fn canonicalize(&self, word: &[Gen]) -> Element {
        let mut a = self.arena();
        let id = a.canonicalize(word);
        a.elem(id)
    }

    pub fn word(&self, w: Element) -> Vec<Gen> {
        self.arena().word(w.id).to_vec()
    }

    /// Space-separated generator names; `e` for the identity.
    pub fn format_word(&self, w: Element) -> String {
        if w.is_identity() {
            return "e".to_string();
        }
        self.format_letters(&self.word(w))
    }

    pub fn format_letters(&self, letters: &[Gen]) -> String {
        letters.iter().map(|&s| self.names[s as usize].as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn mul_gen_right(&self, w: Element, s: Gen) -> Element {
        let mut a = self.arena();
        let id = a.mul_right(w.id, s);
        a.elem(id)
    }

    pub fn mul_gen_left(&self, s: Gen, w: Element) -> Element {
        let mut a = self.arena();
        let id = a.mul_left(s, w.id);
        a.elem(id)
    }

    /// Group product.
    pub fn mul(&self, x: Element, y: Element) -> Element {
        let mut a = self.arena();
        let id = a.multiply(x.id, y.id);
        a.elem(id)
    }

    pub fn inverse(&self, w: Element) -> Element {
        let mut a = self.arena();
        let id = a.inverse(w.id);
        a.elem(id)
    }

    /// `l(xy) = l(x) + l(y)`.
    pub fn is_length_additive(&self, x: Element, y: Element) -> bool {
        self.mul(x, y).len == x.len + y.len
    }

    pub fn right_descent_mask(&self, w: Element) -> u32 {
        self.arena().rdesc(w.id)
    }

    pub fn left_descent_mask(&self, w: Element) -> u32 {
        self.arena().ldesc(w.id)
    }

    /// `(left, right)` descent sets in generator order.
    pub fn descent_sets(&self, w: Element) -> (Vec<Gen>, Vec<Gen>) {
        let (l, r) = (self.left_descent_mask(w), self.right_descent_mask(w));
        let unpack = |mask: u32| self.generators().filter(|s| mask & (1 << s) != 0).collect();
        (unpack(l), unpack(r))
    }

    pub fn bruhat_leq(&self, y: Element, w: Element) -> bool {
        self.arena().bruhat_leq(y.id, w.id)
    }

    /// All `y <= w`, sorted ShortLex.
    pub fn lower_interval(&self, w: Element) -> Arc<Vec<Element>> {
        self.arena().lower_interval(w.id)
    }

    pub fn shortlex_cmp(&self, x: Element, y: Element) -> Ordering {
        if x == y {
            return Ordering::Equal;
        }
        self.arena().shortlex(x.id, y.id)
    }

    pub fn sort_shortlex(&self, v: &mut [Element]) {
        let a = self.arena();
        v.sort_by(|x, y| a.shortlex(x.id, y.id));
    }

    /// Elements of length exactly `n`, sorted ShortLex.
    pub fn sphere(&self, n: u32) -> Vec<Element> {
        let mut a = self.arena();
        let ids = a.level(n as usize);
        ids.into_iter().map(|id| a.elem(id)).collect()
    }

    /// Elements of length at most `radius`, sorted ShortLex.
    pub fn ball(&self, radius: u32) -> Vec<Element> {
        (0..=radius).flat_map(|n| self.sphere(n)).collect()
    }

    /// Every reduced word of `w`, sorted lexicographically. Fails once more
    /// than `cap` words have been produced.
    pub fn all_reduced_words(&self, w: Element, cap: usize) -> Result<Vec<Vec<Gen>>> {
        let mut memo: HashMap<u32, Arc<Vec<Vec<Gen>>>> = HashMap::new();
        let mut a = self.arena();
        let words = reduced_words_rec(&mut a, w.id, cap, &mut memo)
            .map_err(|_| Error::Overflow { element: self.format_letters(a.word(w.id)), cap })?;
        let mut out = words.as_ref().clone();
        out.sort();
        Ok(out)
    }

    /// The standard parabolic subsystem on `gens` (kept in increasing order).
    pub fn parabolic(&self, gens: &[Gen]) -> Result<CoxeterSystem> {
        let mut gens = gens.to_vec();
        gens.sort();
        gens.dedup();
        if gens.is_empty() {
            return Err(Error::Contract("parabolic subsystem needs at least one generator".into()));
        }
        let names = gens.iter().map(|&s| self.names[s as usize].clone()).collect();
        let m = gens.iter().map(|&s| gens.iter().map(|&t| self.order(s, t)).collect()).collect();
        let weights = gens.iter().map(|&s| self.weight(s)).collect();
        CoxeterSystem::new(names, m, weights, self.family)
    }
}

fn reduced_words_rec(
    a: &mut Arena,
    w: u32,
    cap: usize,
    memo: &mut HashMap<u32, Arc<Vec<Vec<Gen>>>>,
) -> std::result::Result<Arc<Vec<Vec<Gen>>>, ()> {
    if let Some(v) = memo.get(&w) {
        return Ok(v.clone());
    }
    if w == 0 {
        let v = Arc::new(vec![Vec::new()]);
        memo.insert(0, v.clone());
        return Ok(v);
    }
    let mut out = Vec::new();
    let rdesc = a.rdesc(w);
    for t in 0..a.rank as Gen {
        if rdesc & (1 << t) == 0 {
            continue;
        }
        let lower = a.mul_right(w, t);
        let sub = reduced_words_rec(a, lower, cap, memo)?;
        for word in sub.iter() {
            let mut x = word.clone();
            x.push(t);
            out.push(x);
            if out.len() > cap {
                return Err(());
            }
        }
    }
    let v = Arc::new(out);
    memo.insert(w, v.clone());
    Ok(v)
}

/// The standard test systems.
pub mod systems {
    use super::*;

    /// Rank 3, all `m = 3`, weights `L = 1` (the affine group of type A2).
    pub fn affine_a2() -> CoxeterSystem {
        CoxeterSystem::from_codes(&["s1", "s2", "s3"], &[vec![1, 3, 3], vec![3, 1, 3], vec![3, 3, 1]], &[1, 1, 1], Family::CompleteGraph)
            .expect("valid system")
    }

    /// Rank 3, `m12 = 3`, `m13 = m23 = 4`, weights `(1, 1, 2)`.
    pub fn hyperbolic_344() -> CoxeterSystem {
        CoxeterSystem::from_codes(&["s1", "s2", "s3"], &[vec![1, 3, 4], vec![3, 1, 4], vec![4, 4, 1]], &[1, 1, 2], Family::CompleteGraph)
            .expect("valid system")
    }

    /// Right-angled rank 3 with `m12 = m23 = infinity`, `m13 = 2`, weights `(1, 2, 1)`.
    pub fn right_angled_example() -> CoxeterSystem {
        CoxeterSystem::from_codes(&["s1", "s2", "s3"], &[vec![1, 0, 2], vec![0, 1, 0], vec![2, 0, 1]], &[1, 2, 1], Family::RightAngled)
            .expect("valid system")
    }

    /// The system `r, s, t` with all `m = 3` and `L = 1`.
    pub fn rst() -> CoxeterSystem {
        CoxeterSystem::from_codes(&["r", "s", "t"], &[vec![1, 3, 3], vec![3, 1, 3], vec![3, 3, 1]], &[1, 1, 1], Family::CompleteGraph)
            .expect("valid system")
    }
}
