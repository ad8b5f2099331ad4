//! Trees, forests, USGTFs, towers, multi-towers and the embedding relation.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, Rat, StepFunction};
use crate::tiles::{tile_dilate, tile_leq, Freq, Tile};

#[derive(Debug, thiserror::Error, PartialEq, Eq, Clone)]
pub enum StructError {
    #[error("expected {expected} frequencies, got {got}")]
    Cardinality { expected: usize, got: usize },
    #[error("frequencies not strictly increasing and 2^{0}-separated")]
    Separation(u32),
    #[error("tops must be disjoint and of equal length")]
    Tops,
    #[error("generation (r, n) = ({0}, {1}) invalid")]
    Generation(u32, u32),
    #[error("frequency {0:?} not aligned to the finest tile")]
    Alignment(Freq),
    #[error("layer {0}: tops not ≺ bottoms of layer {1}")]
    Prec(usize, usize),
    #[error("layers {0} and {1} share a frequency")]
    NoComFreq(usize, usize),
    #[error("layers {0} and {1} have comparable tiles {2:?} and {3:?}")]
    Incomp(usize, usize, Tile, Tile),
    #[error("towers {0} and {1} have intersecting bases")]
    Basis(usize, usize),
    #[error("keycompress fails for tile {0:?}")]
    KeyCompress(Tile),
    #[error("round trip mismatch")]
    RoundTrip,
}

/// A ≺ B: every member of A lies inside some member of B (non-strict containment).
pub fn prec(a: &[DyadicInterval], b: &[DyadicInterval]) -> bool {
    let set: HashSet<DyadicInterval> = b.iter().copied().collect();
    let scales: Vec<i32> = {
        let mut s: Vec<i32> = b.iter().map(|i| i.scale).collect();
        s.sort();
        s.dedup();
        s
    };
    a.iter().all(|i| scales.iter().any(|&s| s <= i.scale && set.contains(&i.ancestor(s))))
}

/// p is a tree with top `top` inside `universe`: P ≤ top for all P ∈ p and p is order-convex.
pub fn is_tree(p: &[Tile], top: &Tile, universe: &[Tile]) -> bool {
    let members: HashSet<Tile> = p.iter().copied().collect();
    if !members.contains(top) || !p.iter().all(|t| tile_leq(t, top)) {
        return false;
    }
    // P1 ≤ P ≤ top with P1 ∈ p forces P ∈ p
    p.iter().all(|p1| universe.iter().all(|q| !(tile_leq(p1, q) && tile_leq(q, top)) || members.contains(q)))
}

/// Packing condition Σ_{P′ ∈ p, I_{P′} ⊆ I_P} |I_{P′}| ≤ C|I_P| for every P ∈ p.
pub fn is_sparse_tree(p: &[Tile], top: &Tile, c: &Rat, universe: &[Tile]) -> bool {
    if !is_tree(p, top, universe) {
        return false;
    }
    p.iter().all(|t| {
        let s = p.iter().filter(|q| t.time.contains(&q.time)).fold(Rat::from_integer(BigInt::from(0)), |a, q| a + q.time.len());
        s <= c * t.time.len()
    })
}

#[derive(Clone, Debug)]
pub struct ForestReport {
    /// (top, members) with tops in (left endpoint, frequency) order
    pub trees: Vec<(Tile, Vec<Tile>)>,
    pub counting: StepFunction<Rat>,
    pub linf: Rat,
    pub separation_violation: Option<(Tile, Tile)>,
    pub verdict: bool,
}

/// Greedy maximal-tree decomposition, the separation test 2P ≰ 10P_{j′} and the
/// counting-function bound ‖N_p‖_∞ ≤ C_f·2^n.
pub fn forest_check(p: &[Tile], n: u32, c_f: &Rat) -> ForestReport {
    let mut tops: Vec<Tile> = p
        .iter()
        .copied()
        .filter(|t| !p.iter().any(|q| q != t && tile_leq(t, q)))
        .collect();
    tops.sort_by(|a, b| a.time.left().cmp(&b.time.left()).then(a.alpha.cmp(&b.alpha)));
    tops.dedup();
    let mut trees: Vec<(Tile, Vec<Tile>)> = tops.iter().map(|t| (*t, Vec::new())).collect();
    for t in p {
        if let Some(slot) = trees.iter_mut().find(|(top, _)| tile_leq(t, top)) {
            slot.1.push(*t);
        }
    }
    let two = Rat::from_integer(BigInt::from(2));
    let ten = Rat::from_integer(BigInt::from(10));
    let mut violation = None;
    'outer: for (j, (_, members)) in trees.iter().enumerate() {
        for (jp, (top2, _)) in trees.iter().enumerate() {
            if j == jp {
                continue;
            }
            let big = tile_dilate(&ten, top2);
            for t in members {
                let small = tile_dilate(&two, t);
                // 2P ≤ 10P′: I ⊆ I′ and 2ω ⊇ 10ω′
                if top2.time.contains(&t.time) && small.contains_interval(&big) {
                    violation = Some((*t, *top2));
                    break 'outer;
                }
            }
        }
    }
    let res = tops.iter().map(|t| t.time.scale.max(0) as u32).max().unwrap_or(0);
    let mut counting: StepFunction<Rat> = StepFunction::zero(res);
    let one = Rat::from_integer(BigInt::from(1));
    for t in &tops {
        let (lo, hi) = t.time.cell_range(res);
        for c in lo..hi {
            counting.values[c as usize] += &one;
        }
    }
    let linf = counting.values.iter().cloned().max().unwrap_or_else(|| Rat::from_integer(BigInt::from(0)));
    let bound = c_f * Rat::from_integer(BigInt::from(1u64) << n as usize);
    let verdict = violation.is_none() && linf <= bound;
    ForestReport { trees, counting, linf, separation_violation: violation, verdict }
}

/// Parameters (ITop, α, generation) that determine a USGTF.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsgtfParams {
    pub tops: Vec<DyadicInterval>,
    pub alphas: Vec<Freq>,
    pub r: u32,
    pub n: u32,
    pub sigma: u32,
}

impl UsgtfParams {
    /// IBtm = ⋃ I_{n−r}(top).
    pub fn bottoms(&self) -> Vec<DyadicInterval> {
        self.tops.iter().flat_map(|t| t.subintervals(self.n - self.r)).collect()
    }

    fn validate(&self) -> Result<(), StructError> {
        if self.r < 1 || self.r > self.n || self.n > 40 {
            return Err(StructError::Generation(self.r, self.n));
        }
        let expected = 1usize << (self.n - 1);
        if self.alphas.len() != expected {
            return Err(StructError::Cardinality { expected, got: self.alphas.len() });
        }
        let sep_ok = self.alphas.windows(2).all(|w| {
            w[0] < w[1] && (w[0].is_zero() || w[1].log2() - w[0].log2() >= self.sigma as f64 - 1e-9)
        });
        if !sep_ok {
            return Err(StructError::Separation(self.sigma));
        }
        if self.tops.is_empty() {
            return Err(StructError::Tops);
        }
        let s = self.tops[0].scale;
        if self.tops.iter().any(|t| t.scale != s) {
            return Err(StructError::Tops);
        }
        let mut idx: Vec<u64> = self.tops.iter().map(|t| t.index).collect();
        idx.sort();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(StructError::Tops);
        }
        let finest = (s as u32) + self.n - self.r;
        if let Some(a) = self.alphas.iter().find(|a| !a.aligned(finest)) {
            return Err(StructError::Alignment(*a));
        }
        Ok(())
    }
}

/// Uniform saturated generalized top-forest, tiles listed level by level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Usgtf {
    pub params: UsgtfParams,
    pub tiles: Vec<Tile>,
    /// generation level of each tile, in r..=n
    pub level: Vec<u32>,
}

/// A chain's E-set requirement: measure `measure` inside `bottom`, shared by the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct EConstraint {
    pub bottom: DyadicInterval,
    pub alpha: Freq,
    pub measure: Rat,
    pub chain: Vec<usize>,
}

/// NUSGT algorithm: at level i the depth-(n−i) subintervals t of each top carry the
/// frequency block α_{t·2^{i−1}}, …, α_{(t+1)2^{i−1}−1}.
pub fn build_usgtf(params: UsgtfParams) -> Result<Usgtf, StructError> {
    params.validate()?;
    let (r, n) = (params.r, params.n);
    let mut tiles = Vec::new();
    let mut level = Vec::new();
    for top in &params.tops {
        for i in (r..=n).rev() {
            let block = 1usize << (i - 1);
            for (t, sub) in top.subintervals(n - i).into_iter().enumerate() {
                for a in &params.alphas[t * block..(t + 1) * block] {
                    tiles.push(Tile { time: sub, alpha: *a });
                    level.push(i);
                }
            }
        }
    }
    Ok(Usgtf { params, tiles, level })
}

impl Usgtf {
    pub fn generation(&self) -> (u32, u32) {
        (self.params.r, self.params.n)
    }

    pub fn tops(&self) -> &[DyadicInterval] {
        &self.params.tops
    }

    pub fn bottoms(&self) -> Vec<DyadicInterval> {
        self.params.bottoms()
    }

    fn per_top(&self) -> usize {
        ((self.params.n - self.params.r + 1) as usize) << (self.params.n - 1)
    }

    /// Index of the tile at level i of the chain (top t, frequency u).
    pub fn tile_index(&self, top: usize, u: usize, i: u32) -> usize {
        let (_, n) = self.generation();
        top * self.per_top() + ((n - i) as usize) * (1usize << (n - 1)) + u
    }

    /// Chain of α_u in top t, level n first.
    pub fn chain(&self, top: usize, u: usize) -> Vec<usize> {
        let (r, n) = self.generation();
        (r..=n).rev().map(|i| self.tile_index(top, u, i)).collect()
    }

    /// Bottom interval through which the chain of α_u in top t passes.
    pub fn chain_bottom(&self, top: usize, u: usize) -> DyadicInterval {
        let (r, n) = self.generation();
        let t = self.params.tops[top];
        DyadicInterval::new(t.scale + (n - r) as i32, (t.index << (n - r)) + (u as u64 >> (r - 1)))
    }

    /// E-set requirements: each level-r tile gets 2^{−r}|I_bottom|, shared along its chain.
    pub fn e_constraints(&self) -> Vec<EConstraint> {
        let (r, _) = self.generation();
        let mut out = Vec::new();
        for top in 0..self.params.tops.len() {
            for (u, a) in self.params.alphas.iter().enumerate() {
                let b = self.chain_bottom(top, u);
                out.push(EConstraint { bottom: b, alpha: *a, measure: b.len() * crate::dyadic::pow2(-(r as i64)), chain: self.chain(top, u) });
            }
        }
        out
    }

    /// Parameters re-derived from the tile set alone.
    pub fn params_from_tiles(tiles: &[Tile], r: u32, n: u32, sigma: u32) -> UsgtfParams {
        let s = tiles.iter().map(|t| t.time.scale).min().unwrap_or(0);
        let mut tops: Vec<DyadicInterval> = tiles.iter().filter(|t| t.time.scale == s).map(|t| t.time).collect();
        tops.sort_by_key(|t| t.index);
        tops.dedup();
        let mut alphas: Vec<Freq> = tiles.iter().map(|t| t.alpha).collect();
        alphas.sort();
        alphas.dedup();
        UsgtfParams { tops, alphas, r, n, sigma }
    }

    /// Round trip, keycompress uniqueness, equal top length and cross-level domination.
    pub fn check(&self) -> Result<(), StructError> {
        let (r, n) = self.generation();
        let back = Usgtf::params_from_tiles(&self.tiles, r, n, self.params.sigma);
        let mut sorted_tops = self.params.tops.clone();
        sorted_tops.sort_by_key(|t| t.index);
        if back.tops != sorted_tops || back.alphas != self.params.alphas {
            return Err(StructError::RoundTrip);
        }
        let rebuilt = build_usgtf(back).map_err(|_| StructError::RoundTrip)?;
        let a: HashSet<Tile> = rebuilt.tiles.iter().copied().collect();
        let b: HashSet<Tile> = self.tiles.iter().copied().collect();
        if a != b || a.len() != self.tiles.len() {
            return Err(StructError::RoundTrip);
        }
        // keycompress: unique level-r tile below each level-n tile; with a common frequency
        // the order reduces to time containment, so ancestor walks suffice
        let tops: HashMap<Tile, usize> = self.tiles.iter().zip(&self.level).filter(|(_, &l)| l == n).enumerate().map(|(k, (t, _))| (*t, k)).collect();
        let mut below = vec![0usize; tops.len()];
        for (t, &l) in self.tiles.iter().zip(&self.level) {
            let mut dominated = false;
            for s in (0..=t.time.scale).rev() {
                let q = Tile { time: t.time.ancestor(s), alpha: t.alpha };
                if let Some(&k) = tops.get(&q) {
                    if tile_leq(t, &q) {
                        dominated = true;
                        if l == r && q != *t {
                            below[k] += 1;
                        }
                    }
                }
            }
            if !dominated {
                return Err(StructError::KeyCompress(*t));
            }
        }
        let expected = if r == n { 0 } else { 1 };
        for (t, &k) in &tops {
            if below[k] != expected {
                return Err(StructError::KeyCompress(*t));
            }
        }
        Ok(())
    }
}

/// Stack of USGTFs; when `shared_floor` the last two layers share tops and bottoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub layers: Vec<Usgtf>,
    pub shared_floor: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TowerReport {
    pub height: usize,
    pub basis: Vec<DyadicInterval>,
}

fn interval_index(tiles: &[Tile]) -> HashMap<DyadicInterval, Vec<Tile>> {
    let mut m: HashMap<DyadicInterval, Vec<Tile>> = HashMap::new();
    for t in tiles {
        m.entry(t.time).or_default().push(*t);
    }
    m
}

/// Any P ∈ a, Q ∈ b with P ≤ Q; exhaustive through time-ancestor lookups.
fn comparable_pair(a: &[Tile], b_index: &HashMap<DyadicInterval, Vec<Tile>>, min_scale: i32) -> Option<(Tile, Tile)> {
    for p in a {
        for s in min_scale..=p.time.scale {
            if let Some(qs) = b_index.get(&p.time.ancestor(s)) {
                if let Some(q) = qs.iter().find(|q| tile_leq(p, q)) {
                    return Some((*p, *q));
                }
            }
        }
    }
    None
}

pub fn tower_check(t: &Tower) -> Result<TowerReport, StructError> {
    let h = t.layers.len();
    for l in 0..h.saturating_sub(1) {
        let shared = t.shared_floor && l + 2 == h;
        let (up, down) = (&t.layers[l + 1], &t.layers[l]);
        let ok = if shared {
            up.tops() == down.tops() && up.generation() == down.generation()
        } else {
            prec(up.tops(), &down.bottoms())
        };
        if !ok {
            return Err(StructError::Prec(l + 1, l));
        }
    }
    let sets: Vec<HashSet<Freq>> = t.layers.iter().map(|u| u.params.alphas.iter().copied().collect()).collect();
    for a in 0..h {
        for b in a + 1..h {
            if !sets[a].is_disjoint(&sets[b]) {
                return Err(StructError::NoComFreq(a, b));
            }
        }
    }
    let idx: Vec<HashMap<DyadicInterval, Vec<Tile>>> = t.layers.iter().map(|u| interval_index(&u.tiles)).collect();
    let min_scale = t.layers.iter().flat_map(|u| u.tops().iter().map(|i| i.scale)).min().unwrap_or(0);
    for a in 0..h {
        for b in 0..h {
            if a != b {
                if let Some((p, q)) = comparable_pair(&t.layers[a].tiles, &idx[b], min_scale) {
                    return Err(StructError::Incomp(a, b, p, q));
                }
            }
        }
    }
    Ok(TowerReport { height: h, basis: t.layers.first().map(|u| u.tops().to_vec()).unwrap_or_default() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTower {
    pub towers: Vec<Tower>,
}

impl MultiTower {
    pub fn basis(&self) -> Vec<DyadicInterval> {
        self.towers.iter().flat_map(|t| t.layers[0].tops().to_vec()).collect()
    }

    pub fn tiles(&self) -> impl Iterator<Item = &Tile> {
        self.towers.iter().flat_map(|t| t.layers.iter().flat_map(|u| u.tiles.iter()))
    }
}

pub fn multitower_check(m: &MultiTower) -> Result<Vec<TowerReport>, StructError> {
    let reports = m.towers.iter().map(tower_check).collect::<Result<Vec<_>, _>>()?;
    for a in 0..reports.len() {
        for b in a + 1..reports.len() {
            let hit = reports[a].basis.iter().any(|i| reports[b].basis.iter().any(|j| !i.disjoint(j)));
            if hit {
                return Err(StructError::Basis(a, b));
            }
        }
    }
    Ok(reports)
}

/// F1 ⊏ F2 for families of USGTFs: n₁ ≤ r₂, ITop(F1) ≺ IBtm(F2), α(F1) ⊂ α(F2), and every
/// level-n₁ tile of F1 lies below some level-r₂ tile of F2.
pub fn embeds(f1: &[&Usgtf], f2: &[&Usgtf]) -> bool {
    if f1.is_empty() || f2.is_empty() {
        return false;
    }
    let n1 = f1.iter().map(|u| u.params.n).max().unwrap();
    let r2 = f2.iter().map(|u| u.params.r).min().unwrap();
    if n1 > r2 {
        return false;
    }
    let tops1: Vec<DyadicInterval> = f1.iter().flat_map(|u| u.tops().to_vec()).collect();
    let btm2: Vec<DyadicInterval> = f2.iter().flat_map(|u| u.bottoms()).collect();
    if !prec(&tops1, &btm2) {
        return false;
    }
    let alphas2: HashSet<Freq> = f2.iter().flat_map(|u| u.params.alphas.iter().copied()).collect();
    if !f1.iter().all(|u| u.params.alphas.iter().all(|a| alphas2.contains(a))) {
        return false;
    }
    let low2: Vec<Tile> = f2
        .iter()
        .flat_map(|u| u.tiles.iter().zip(&u.level).filter(|(_, &l)| l == u.params.r).map(|(t, _)| *t))
        .collect();
    let idx = interval_index(&low2);
    let min_scale = btm2.iter().map(|b| b.scale).min().unwrap_or(0);
    f1.iter().all(|u| {
        u.tiles.iter().zip(&u.level).filter(|(_, &l)| l == u.params.n).all(|(p, _)| {
            (min_scale..=p.time.scale).any(|s| idx.get(&p.time.ancestor(s)).is_some_and(|qs| qs.iter().any(|q| tile_leq(p, q))))
        })
    })
}
