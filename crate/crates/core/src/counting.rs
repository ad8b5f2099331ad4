//! Counting functions ν̄_n, ν_j and the grand maximal ν, their level sets, and the checks
//! run on them (dyadic BMO, nesting, John–Nirenberg decay, extremality).

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cme::Cme;
use crate::dyadic::{pow2, rat_f64, DyadicInterval, MeasurableSet, Rat};
use crate::tiles::{Classification, Freq, Tile};

/// Nonnegative step function on [0, 1) with breakpoints on the 2^{-R} grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CountFn {
    pub resolution: u32,
    /// breaks[0] = 0; values[i] holds on [breaks[i], breaks[i+1]) (the last piece runs to 1)
    pub breaks: Vec<u64>,
    pub values: Vec<Rat>,
}

impl CountFn {
    pub fn zero(resolution: u32) -> Self {
        CountFn { resolution, breaks: vec![0], values: vec![Rat::zero()] }
    }

    /// Σ w·χ over cell runs [a, b), divided by `denom`.
    pub fn from_weighted(resolution: u32, items: &[(u64, u64, i64)], denom: &Rat) -> Self {
        let mut ev: Vec<(u64, i128)> = Vec::with_capacity(2 * items.len());
        for &(a, b, w) in items {
            if a < b {
                ev.push((a, w as i128));
                ev.push((b, -(w as i128)));
            }
        }
        ev.sort_unstable();
        let mut breaks = vec![0u64];
        let mut acc: Vec<i128> = vec![0];
        let mut cur: i128 = 0;
        let mut i = 0;
        let end = 1u64 << resolution;
        while i < ev.len() {
            let x = ev[i].0;
            while i < ev.len() && ev[i].0 == x {
                cur += ev[i].1;
                i += 1;
            }
            if x >= end {
                break;
            }
            if x == *breaks.last().unwrap() {
                *acc.last_mut().unwrap() = cur;
            } else if cur != *acc.last().unwrap() {
                breaks.push(x);
                acc.push(cur);
            }
        }
        let values = acc.into_iter().map(|v| Rat::from_integer(BigInt::from(v)) / denom).collect();
        CountFn { resolution, breaks, values }.merged()
    }

    fn merged(self) -> Self {
        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut values: Vec<Rat> = Vec::with_capacity(self.values.len());
        for (b, v) in self.breaks.into_iter().zip(self.values) {
            if values.last() == Some(&v) {
                continue;
            }
            breaks.push(b);
            values.push(v);
        }
        CountFn { resolution: self.resolution, breaks, values }
    }

    fn end(&self, i: usize) -> u64 {
        self.breaks.get(i + 1).copied().unwrap_or(1u64 << self.resolution)
    }

    /// Pieces as (start, end, value).
    pub fn pieces(&self) -> impl Iterator<Item = (u64, u64, &Rat)> + '_ {
        (0..self.values.len()).map(move |i| (self.breaks[i], self.end(i), &self.values[i]))
    }

    pub fn value_at(&self, cell: u64) -> &Rat {
        let i = self.breaks.partition_point(|&b| b <= cell) - 1;
        &self.values[i]
    }

    pub fn max_value(&self) -> Rat {
        self.values.iter().max().cloned().unwrap_or_else(Rat::zero)
    }

    fn cell(&self) -> Rat {
        pow2(-(self.resolution as i64))
    }

    pub fn l1(&self) -> Rat {
        let mut acc = Rat::zero();
        for (a, b, v) in self.pieces() {
            acc += v * Rat::from_integer(BigInt::from(b - a));
        }
        acc * self.cell()
    }

    /// sup_λ λ·|{ν > λ}|, attained in the limit λ ↑ v at a value v: v·|{ν ≥ v}|.
    pub fn weak(&self) -> Rat {
        let mut by_value: BTreeMap<&Rat, u64> = BTreeMap::new();
        for (a, b, v) in self.pieces() {
            *by_value.entry(v).or_insert(0) += b - a;
        }
        let mut best = Rat::zero();
        let mut acc: u64 = 0;
        for (v, m) in by_value.into_iter().rev() {
            acc += m;
            let cand = v * Rat::from_integer(BigInt::from(acc));
            if cand > best {
                best = cand;
            }
        }
        best * self.cell()
    }

    /// {ν ≥ t} (or {ν > t} when `strict`).
    pub fn superlevel(&self, t: &Rat, strict: bool) -> MeasurableSet {
        let runs = self.pieces().filter(|(_, _, v)| if strict { *v > t } else { *v >= t }).map(|(a, b, _)| (a, b)).collect();
        MeasurableSet::from_runs(self.resolution, runs)
    }

    pub fn pointwise_max(fs: &[CountFn]) -> CountFn {
        let r = fs[0].resolution;
        let mut cuts: Vec<u64> = fs.iter().flat_map(|f| f.breaks.iter().copied()).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let values = cuts.iter().map(|&c| fs.iter().map(|f| f.value_at(c)).max().unwrap().clone()).collect();
        CountFn { resolution: r, breaks: cuts, values }.merged()
    }

    /// sup over dyadic I of the mean oscillation (1/|I|)∫_I |ν − ν_I|.
    pub fn bmo_dyadic(&self) -> f64 {
        let vals: Vec<f64> = self.values.iter().map(rat_f64).collect();
        let mut best: f64 = 0.0;
        // (scale, index, first piece meeting I)
        let mut stack: Vec<(u32, u64, usize)> = vec![(0, 0, 0)];
        while let Some((s, idx, first)) = stack.pop() {
            let sh = self.resolution - s;
            let (lo, hi) = (idx << sh, (idx + 1) << sh);
            let mut last = first;
            while last + 1 < self.breaks.len() && self.breaks[last + 1] < hi {
                last += 1;
            }
            if last == first {
                continue;
            }
            let len = (hi - lo) as f64;
            let seg = |i: usize| (self.breaks[i].max(lo), self.end(i).min(hi));
            let mean: f64 = (first..=last).map(|i| {
                let (a, b) = seg(i);
                vals[i] * (b - a) as f64
            }).sum::<f64>() / len;
            let osc: f64 = (first..=last).map(|i| {
                let (a, b) = seg(i);
                (vals[i] - mean).abs() * (b - a) as f64
            }).sum::<f64>() / len;
            best = best.max(osc);
            if s < self.resolution {
                let mid = (2 * idx + 1) << (sh - 1);
                let right_first = self.breaks.partition_point(|&b| b <= mid) - 1;
                stack.push((s + 1, 2 * idx, first));
                stack.push((s + 1, 2 * idx + 1, right_first));
            }
        }
        best
    }
}

/// ν̄_n = 2^{-(n−1)} Σ_{P ∈ P_n^max} χ_{I_P}.
pub fn nu_bar(n: u32, tiles: &[Tile], maxima: &[usize], resolution: u32) -> CountFn {
    nu_window(tiles, &BTreeMap::from([(n, maxima.to_vec())]), n..=n, resolution)
}

/// Arithmetic mean of ν̄_n over a window of mass values.
pub fn nu_window(tiles: &[Tile], maxima: &BTreeMap<u32, Vec<usize>>, window: std::ops::RangeInclusive<u32>, resolution: u32) -> CountFn {
    let (lo, hi) = (*window.start(), *window.end());
    if hi < lo {
        return CountFn::zero(resolution);
    }
    let width = (hi - lo + 1) as i64;
    let mut items = Vec::new();
    for n in window {
        for &i in maxima.get(&n).map(|v| v.as_slice()).unwrap_or(&[]) {
            let (a, b) = tiles[i].time.cell_range(resolution);
            items.push((a, b, 1i64 << (hi - n)));
        }
    }
    let denom = Rat::from_integer(BigInt::from(width)) * pow2(hi as i64 - 1);
    CountFn::from_weighted(resolution, &items, &denom)
}

/// P_n^max for a general classification.
pub fn maxima_of(cls: &Classification) -> &BTreeMap<u32, Vec<usize>> {
    &cls.maxima
}

/// P_n^max of a CME with declared masses, optionally restricted to one level. Tiles with
/// distinct frequencies are never comparable there (ω_P holds a single frequency of the
/// list), so a tile is maximal unless a coarser tile with the same α and mass lies above it.
pub fn cme_maxima(cme: &Cme, level: Option<u32>) -> BTreeMap<u32, Vec<usize>> {
    let keep = |i: usize| level.is_none_or(|l| cme.level_of_tile(i) == l);
    let present: HashSet<(u32, Freq, DyadicInterval)> =
        (0..cme.tiles.len()).filter(|&i| keep(i)).map(|i| (cme.tile_gen[i], cme.tiles[i].alpha, cme.tiles[i].time)).collect();
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for i in (0..cme.tiles.len()).filter(|&i| keep(i)) {
        let t = &cme.tiles[i];
        let g = cme.tile_gen[i];
        let dominated = (0..t.time.scale).any(|s| present.contains(&(g, t.alpha, t.time.ancestor(s))));
        if !dominated {
            out.entry(g).or_default().push(i);
        }
    }
    out
}

/// Mass window (r_j, n_j] of level j.
pub fn window(cme: &Cme, j: u32) -> std::ops::RangeInclusive<u32> {
    let (r, n) = cme.profile.gen[j as usize - 1];
    r + 1..=n
}

/// ν_j built from the level-j tiles.
pub fn nu_j(cme: &Cme, j: u32) -> CountFn {
    nu_window(&cme.tiles, &cme_maxima(cme, Some(j)), window(cme, j), cme.resolution)
}

/// ν = max_j ν_j.
pub fn nu_grand(cme: &Cme) -> CountFn {
    let parts: Vec<CountFn> = (1..=cme.profile.levels).map(|j| nu_j(cme, j)).collect();
    CountFn::pointwise_max(&parts)
}

/// Maximal dyadic intervals whose union is the set.
pub fn dyadic_components(set: &MeasurableSet) -> Vec<DyadicInterval> {
    let r = set.resolution;
    let mut out = Vec::new();
    for &(a, b) in set.runs() {
        let mut x = a;
        while x < b {
            let mut k = if x == 0 { r } else { x.trailing_zeros().min(r) };
            while x + (1u64 << k) > b {
                k -= 1;
            }
            out.push(DyadicInterval::new((r - k) as i32, x >> k));
            x += 1u64 << k;
        }
    }
    out
}

/// C_j^l = {ν_j ≥ l} for l = 1..=max_l and their maximal dyadic components.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetTree {
    pub j: u32,
    /// (l, C_j^l, components sorted by position)
    pub sets: Vec<(u32, MeasurableSet, Vec<DyadicInterval>)>,
}

pub fn level_sets(nu: &CountFn, j: u32, max_l: u32) -> LevelSetTree {
    let sets = (1..=max_l)
        .map(|l| {
            let s = nu.superlevel(&Rat::from_integer(BigInt::from(l)), false);
            let c = dyadic_components(&s);
            (l, s, c)
        })
        .collect();
    LevelSetTree { j, sets }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub pairs: u64,
    pub nesting_violations: u64,
    pub jn_violations: u64,
    /// max over checked (outer, inner level) of |C[j₂,l₂]| / (2^{−l₂+10}|C|)
    pub worst_jn: f64,
    /// C_j^{l+1} ⊆ C_j^l for every tree
    pub monotone: bool,
}

/// Ordered pairs (outer, inner) with j_outer > j_inner, or the same level and l_outer ≤ l_inner:
/// every inner component meeting an outer one lies inside it, and the inner components inside
/// an outer one cover less than 2^{−l_inner+10} of it.
pub fn nesting_check(trees: &[LevelSetTree]) -> NestingReport {
    let mut rep = NestingReport { monotone: true, ..Default::default() };
    for t in trees {
        for w in t.sets.windows(2) {
            if !w[1].1.is_subset(&w[0].1) {
                rep.monotone = false;
            }
        }
    }
    let flat: Vec<(u32, u32, &Vec<DyadicInterval>)> = trees.iter().flat_map(|t| t.sets.iter().map(move |(l, _, c)| (t.j, *l, c))).collect();
    for &(j1, l1, outer) in &flat {
        for &(j2, l2, inner) in &flat {
            if !(j1 > j2 || (j1 == j2 && l1 <= l2)) {
                continue;
            }
            for o in outer {
                let (olo, ohi) = (o.left(), o.right());
                // inner components are disjoint and sorted: find the ones meeting o
                let a = inner.partition_point(|c| c.right() <= olo);
                let mut covered = Rat::zero();
                for c in &inner[a..] {
                    if c.left() >= ohi {
                        break;
                    }
                    rep.pairs += 1;
                    if o.contains(c) {
                        covered += c.len();
                    } else {
                        rep.nesting_violations += 1;
                    }
                }
                let bound = pow2(10 - l2 as i64) * o.len();
                let q = rat_f64(&(covered.clone() / &bound));
                rep.worst_jn = rep.worst_jn.max(q);
                if covered >= bound {
                    rep.jn_violations += 1;
                }
            }
        }
    }
    rep
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyObsReport {
    pub components: usize,
    /// components equal to a single top of a level-j USGTF
    pub single_top: usize,
    /// components tiled exactly by tops of level-j USGTFs of one layer
    pub union_of_tops: usize,
}

impl KeyObsReport {
    pub fn holds(&self) -> bool {
        self.union_of_tops == self.components
    }
}

/// Compares every component of a level-set tree with the tops of the level's USGTFs.
pub fn keyobs_check(cme: &Cme, tree: &LevelSetTree) -> KeyObsReport {
    let mut tops_by_layer: HashMap<u32, Vec<DyadicInterval>> = HashMap::new();
    for cu in cme.usgtfs.iter().filter(|u| u.level == tree.j) {
        tops_by_layer.entry(cu.layer).or_default().extend_from_slice(cu.u.tops());
    }
    let mut all: HashSet<DyadicInterval> = HashSet::new();
    for v in tops_by_layer.values_mut() {
        v.sort_by(|a, b| a.cmp_position(b));
        v.dedup();
        all.extend(v.iter().copied());
    }
    let mut rep = KeyObsReport::default();
    for (_, _, comps) in &tree.sets {
        for c in comps {
            rep.components += 1;
            if all.contains(c) {
                rep.single_top += 1;
                rep.union_of_tops += 1;
                continue;
            }
            let tiled = tops_by_layer.values().any(|tops| {
                let a = tops.partition_point(|t| t.right() <= c.left());
                let mut covered = Rat::zero();
                for t in &tops[a..] {
                    if t.left() >= c.right() {
                        break;
                    }
                    if !c.contains(t) {
                        return false;
                    }
                    covered += t.len();
                }
                covered == c.len()
            });
            if tiled {
                rep.union_of_tops += 1;
            }
        }
    }
    rep
}

/// {ν̄_{m₁} ≥ h} ∩ {ν̄_{m₂} ≥ h} = ∅ for m₁, m₂ in the windows of distinct levels, with ν̄
/// built from each level's own tiles.
pub fn obs6_disjoint(cme: &Cme) -> bool {
    let h = Rat::from_integer(BigInt::from(cme.profile.height));
    let mut per_level: Vec<MeasurableSet> = Vec::new();
    for j in 1..=cme.profile.levels {
        let mx = cme_maxima(cme, Some(j));
        let mut u = MeasurableSet::empty(cme.resolution);
        for m in window(cme, j) {
            let s = nu_bar(m, &cme.tiles, mx.get(&m).map(|v| v.as_slice()).unwrap_or(&[]), cme.resolution).superlevel(&h, false);
            u = u.union(&s);
        }
        per_level.push(u);
    }
    (0..per_level.len()).all(|a| (a + 1..per_level.len()).all(|b| per_level[a].intersection(&per_level[b]).is_empty()))
}

/// {ν_j ≥ h} ⊆ Basis(F_j^h) ⊆ {ν_j > h/2}.
pub fn base_sandwich(cme: &Cme, j: u32, nu: &CountFn) -> bool {
    let h = Rat::from_integer(BigInt::from(cme.profile.height));
    let runs = cme.basis_h(j).iter().map(|i| i.cell_range(cme.resolution)).collect();
    let basis = MeasurableSet::from_runs(cme.resolution, runs);
    let inner = nu.superlevel(&h, false);
    let outer = nu.superlevel(&(h / Rat::from_integer(BigInt::from(2))), true);
    inner.is_subset(&basis) && basis.is_subset(&outer)
}

/// Tail |{ν > γ}| on a γ grid with a least-squares fit of ln|{ν > γ}| = a − cγ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JnFit {
    pub gammas: Vec<f64>,
    pub measures: Vec<f64>,
    pub monotone: bool,
    pub c: f64,
}

pub fn jn_regression(nu: &CountFn, gammas: &[f64]) -> JnFit {
    let vals: Vec<(f64, u64)> = nu.pieces().map(|(a, b, v)| (rat_f64(v), b - a)).collect();
    let cell = (-(nu.resolution as f64)).exp2();
    let measures: Vec<f64> = gammas.iter().map(|&g| vals.iter().filter(|v| v.0 > g).map(|v| v.1 as f64 * cell).fold(0.0, |a, b| a + b)).collect();
    let monotone = measures.windows(2).all(|w| w[1] <= w[0]);
    let pts: Vec<(f64, f64)> = gammas.iter().zip(&measures).filter(|(_, &m)| m > 0.0).map(|(&g, &m)| (g, m.ln())).collect();
    let c = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 {
            -sxy / sxx
        } else {
            0.0
        }
    } else {
        0.0
    };
    JnFit { gammas: gammas.to_vec(), measures, monotone, c }
}

/// One row of the extremality table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityRow {
    pub height: u32,
    pub l1: f64,
    pub weak: f64,
    pub ratio: f64,
    /// |{ν_j ≥ h}| per level
    pub top_measures: Vec<f64>,
    /// ‖ν‖_{1,∞} ≤ ‖ν‖₁, exactly
    pub weak_below_l1: bool,
}

pub fn extremality_row(cme: &Cme) -> ExtremalityRow {
    let h = cme.profile.height;
    let parts: Vec<CountFn> = (1..=cme.profile.levels).map(|j| nu_j(cme, j)).collect();
    let top_measures = parts.iter().map(|p| rat_f64(&p.superlevel(&Rat::from_integer(BigInt::from(h)), false).measure())).collect();
    let nu = CountFn::pointwise_max(&parts);
    let (l1, weak) = (nu.l1(), nu.weak());
    ExtremalityRow {
        height: h,
        l1: l1.to_f64().unwrap_or(f64::NAN),
        weak: weak.to_f64().unwrap_or(f64::NAN),
        ratio: weak.to_f64().unwrap_or(f64::NAN) / h as f64,
        top_measures,
        weak_below_l1: weak <= l1,
    }
}

/// max/min of the ratios ‖ν‖_{1,∞}/h across rows.
pub fn extremality_spread(rows: &[ExtremalityRow]) -> f64 {
    let mx = rows.iter().map(|r| r.ratio).fold(f64::MIN, f64::max);
    let mn = rows.iter().map(|r| r.ratio).fold(f64::MAX, f64::min);
    mx / mn
}
