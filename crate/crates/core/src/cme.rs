//! Cantor multi-tower embedding: a chain of multi-towers, one per level, with the
//! linearization N that realizes every chain's E-set.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::dyadic::{pow2, DyadicInterval, Rat};
use crate::structures::{build_usgtf, embeds, multitower_check, prec, StructError, Tower, Usgtf, UsgtfParams};
use crate::tiles::{restricted_mass, Freq, Linearization, Tile, TileUniverse};

/// Desk-scale stand-in for the asymptotic parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleProfile {
    /// number of levels L
    pub levels: u32,
    /// tower height h
    pub height: u32,
    /// (r_j, n_j) for j = 1..=L
    pub gen: Vec<(u32, u32)>,
    /// J_s is split into 2^s pieces
    pub subdiv: u32,
    /// lower generation of the floor layers
    #[serde(default = "one")]
    pub floor_gen: u32,
    /// frequencies are 2^{e_min + σ m}
    #[serde(default = "ten")]
    pub sigma: u32,
    /// decay exponent in the mass
    #[serde(default = "ten")]
    pub n0: u32,
}

fn one() -> u32 {
    1
}
fn ten() -> u32 {
    10
}

#[derive(Debug, thiserror::Error, PartialEq, Eq, Clone)]
pub enum CmeError {
    #[error("subdivision infeasible: 2^{s} < h = {h}")]
    Subdivision { h: u32, s: u32 },
    #[error("invalid generations: {0}")]
    Generation(String),
    #[error("resolution {0} exceeds 62 bits")]
    Resolution(u32),
    #[error("E-set allotment failed: {0}")]
    Allotment(String),
    #[error(transparent)]
    Structure(#[from] StructError),
}

impl ScaleProfile {
    pub fn new(levels: u32, height: u32, gen: Vec<(u32, u32)>, subdiv: u32) -> Self {
        ScaleProfile { levels, height, gen, subdiv, floor_gen: 1, sigma: 10, n0: 10 }
    }

    /// (L=2, h=2, s=1)
    pub fn toy_a() -> Self {
        ScaleProfile::new(2, 2, vec![(1, 6), (7, 8)], 1)
    }

    /// (L=2, h=3, s=2)
    pub fn toy_b() -> Self {
        ScaleProfile::new(2, 3, vec![(1, 6), (8, 9)], 2)
    }

    /// (L=3, h=2, s=1)
    pub fn toy_c() -> Self {
        ScaleProfile::new(3, 2, vec![(1, 6), (7, 8), (9, 10)], 1)
    }

    /// Single-level profile of height h used by the sweeps.
    pub fn sweep(h: u32) -> Self {
        let s = (32 - (h.max(1) - 1).leading_zeros()).max(1);
        ScaleProfile::new(1, h, vec![(1, 6)], s)
    }

    /// Height-1 single tower.
    pub fn warmup() -> Self {
        ScaleProfile::new(1, 1, vec![(1, 6)], 0)
    }

    pub fn nonfloor_layers(&self) -> u32 {
        match self.height {
            1 => 0,
            2 => 1,
            h => h - 2,
        }
    }

    pub fn validate(&self) -> Result<(), CmeError> {
        let (h, s) = (self.height, self.subdiv);
        if h == 0 || self.levels == 0 || self.gen.len() != self.levels as usize {
            return Err(CmeError::Generation("levels/height/gen length mismatch".into()));
        }
        if h == 1 && self.levels > 1 {
            return Err(CmeError::Generation("height 1 admits a single level".into()));
        }
        if self.levels > 1 && (1u64 << s) < h as u64 {
            return Err(CmeError::Subdivision { h, s });
        }
        if self.sigma < 10 {
            return Err(CmeError::Generation("σ must be at least 10".into()));
        }
        for (j, &(r, n)) in self.gen.iter().enumerate() {
            if r < 1 || r > n || n > 30 {
                return Err(CmeError::Generation(format!("level {}: ({}, {})", j + 1, r, n)));
            }
            if self.floor_gen < 1 || self.floor_gen > n {
                return Err(CmeError::Generation("floor generation out of range".into()));
            }
            if j > 0 {
                let (r0, n0) = self.gen[j - 1];
                if n0 > r || r0 >= r {
                    return Err(CmeError::Generation(format!("level {} does not sit below level {}", j, j + 1)));
                }
                // h blocks of 2^{n_{j-1}-1} out of the 2^{r_j-1} chain frequencies of a bottom
                if (h as u64) << (n0 - 1) > 1u64 << (r - 1) {
                    return Err(CmeError::Generation(format!("level {}: too few chain frequencies per bottom", j + 1)));
                }
            }
        }
        Ok(())
    }

    /// Deepest interval (tile or bottom) depth reached by the geometry.
    pub fn finest_depth(&self) -> u32 {
        self.depth_from(self.levels, 0)
    }

    fn depth_from(&self, j: u32, base: u32) -> u32 {
        let (r, n) = self.gen[j as usize - 1];
        let nf = self.nonfloor_layers();
        let step = n - r + 1;
        let floor_top = match self.height {
            1 => base,
            2 => base + step,
            _ => base + (nf) * step,
        };
        let mut deepest = floor_top + n - self.floor_gen;
        if j > 1 && nf > 0 {
            let last_bottom = base + (nf - 1) * step + (n - r);
            deepest = deepest.max(self.depth_from(j - 1, last_bottom + 1 + self.subdiv));
        }
        deepest
    }
}

/// Where a layer's chains place their E-cells inside a bottom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    NonFloor,
    Floor,
    FloorLeft,
    FloorRight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmeUsgtf {
    pub u: Usgtf,
    pub level: u32,
    /// 1-based
    pub layer: u32,
    pub tower: usize,
    pub kind: LayerKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmeTower {
    pub level: u32,
    pub layers: Vec<usize>,
    pub shared_floor: bool,
    /// hosting USGTF and bottom, for embedded towers
    pub host: Option<(usize, DyadicInterval)>,
    pub base: DyadicInterval,
}

#[derive(Clone, Debug)]
pub struct Cme {
    pub profile: ScaleProfile,
    pub e_min: u32,
    pub resolution: u32,
    pub freqs: Vec<Freq>,
    pub usgtfs: Vec<CmeUsgtf>,
    pub towers: Vec<CmeTower>,
    pub lin: Linearization,
    pub tiles: Vec<Tile>,
    pub tile_usgtf: Vec<u32>,
    pub tile_gen: Vec<u32>,
}

impl Cme {
    pub fn tower_of(&self, usgtf: usize) -> &CmeTower {
        &self.towers[self.usgtfs[usgtf].tower]
    }

    pub fn level_of_tile(&self, i: usize) -> u32 {
        self.usgtfs[self.tile_usgtf[i] as usize].level
    }

    pub fn layer_of_tile(&self, i: usize) -> u32 {
        self.usgtfs[self.tile_usgtf[i] as usize].layer
    }

    pub fn towers_at(&self, level: u32) -> Vec<usize> {
        (0..self.towers.len()).filter(|&t| self.towers[t].level == level).collect()
    }

    pub fn tower_struct(&self, t: usize) -> Tower {
        let ct = &self.towers[t];
        Tower { layers: ct.layers.iter().map(|&u| self.usgtfs[u].u.clone()).collect(), shared_floor: ct.shared_floor }
    }

    /// All frequencies of a tower, sorted.
    pub fn tower_freqs(&self, t: usize) -> Vec<Freq> {
        let mut v: Vec<Freq> = self.towers[t].layers.iter().flat_map(|&u| self.usgtfs[u].u.params.alphas.iter().copied()).collect();
        v.sort();
        v
    }

    /// Bottoms of the deepest layer of a tower, where F_j lives.
    pub fn floor_bottoms(&self, t: usize) -> Vec<DyadicInterval> {
        let last = *self.towers[t].layers.last().unwrap();
        let mut b = self.usgtfs[last].u.bottoms();
        b.sort_by_key(|i| i.index);
        b
    }

    /// Tops of the layer-h USGTFs of a level.
    pub fn basis_h(&self, level: u32) -> Vec<DyadicInterval> {
        self.towers_at(level)
            .into_iter()
            .flat_map(|t| self.usgtfs[*self.towers[t].layers.last().unwrap()].u.tops().to_vec())
            .collect()
    }

    pub fn universe(&self) -> TileUniverse {
        TileUniverse::new(self.tiles.clone(), self.lin.clone(), self.profile.n0)
    }

    /// Declared mass 2^{-i} of every tile, i its generation level.
    pub fn declared_mass(&self, i: usize) -> Rat {
        pow2(-(self.tile_gen[i] as i64))
    }

    /// Normal tiles have I_{P*} inside the union of their USGTF's tops.
    pub fn is_normal(&self, i: usize) -> bool {
        let u = &self.usgtfs[self.tile_usgtf[i] as usize].u;
        star_inside_tops(&self.tiles[i].time, u.tops())
    }

    /// `is_normal` for every tile, with the merged tops computed once per USGTF.
    pub fn normal_flags(&self) -> Vec<bool> {
        let merged: Vec<Vec<(f64, f64)>> = self
            .usgtfs
            .iter()
            .map(|cu| {
                let mut runs: Vec<(f64, f64)> = cu.u.tops().iter().map(|t| (t.left_f64(), t.left_f64() + t.len_f64())).collect();
                runs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let mut out: Vec<(f64, f64)> = Vec::new();
                for r in runs {
                    match out.last_mut() {
                        Some(m) if r.0 <= m.1 => m.1 = m.1.max(r.1),
                        _ => out.push(r),
                    }
                }
                out
            })
            .collect();
        self.tiles
            .iter()
            .zip(&self.tile_usgtf)
            .map(|(t, &u)| {
                let runs = &merged[u as usize];
                let (c, l) = (t.time.center_f64(), t.time.len_f64());
                [(c - 8.5 * l, c - 1.5 * l), (c + 1.5 * l, c + 8.5 * l)].iter().all(|&(a, b)| {
                    let k = runs.partition_point(|r| r.0 <= a);
                    k > 0 && runs[k - 1].1 >= b
                })
            })
            .collect()
    }

    /// (normal, boundary) tile indices of a level.
    pub fn normal_boundary_split(&self, level: u32) -> (Vec<usize>, Vec<usize>) {
        let mut nm = Vec::new();
        let mut bd = Vec::new();
        for i in 0..self.tiles.len() {
            if self.level_of_tile(i) == level {
                if self.is_normal(i) {
                    nm.push(i)
                } else {
                    bd.push(i)
                }
            }
        }
        (nm, bd)
    }
}

/// Both closed components of star(I) inside the closure of a union of tops.
pub fn star_inside_tops(i: &DyadicInterval, tops: &[DyadicInterval]) -> bool {
    // units of 2^{-(scale+1)}
    let s = i.scale + 1;
    let c = 2 * i.index as i128 + 1;
    let comps = [(c - 17, c - 3), (c + 3, c + 17)];
    let mut runs: Vec<(i128, i128)> = tops
        .iter()
        .filter(|t| t.scale <= s)
        .map(|t| {
            let sh = (s - t.scale) as u32;
            ((t.index as i128) << sh, ((t.index as i128) + 1) << sh)
        })
        .collect();
    runs.sort();
    let mut merged: Vec<(i128, i128)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(m) if r.0 <= m.1 => m.1 = m.1.max(r.1),
            _ => merged.push(r),
        }
    }
    comps.iter().all(|&(a, b)| merged.iter().any(|&(lo, hi)| lo <= a && b <= hi))
}

struct Builder<'a> {
    p: &'a ScaleProfile,
    usgtfs: Vec<CmeUsgtf>,
    towers: Vec<CmeTower>,
}

impl<'a> Builder<'a> {
    fn layer(&mut self, tops: Vec<DyadicInterval>, alphas: Vec<Freq>, r: u32, n: u32, level: u32, layer: u32, tower: usize, kind: LayerKind) -> Result<usize, CmeError> {
        let u = build_usgtf(UsgtfParams { tops, alphas, r, n, sigma: self.p.sigma })?;
        self.usgtfs.push(CmeUsgtf { u, level, layer, tower, kind });
        Ok(self.usgtfs.len() - 1)
    }

    /// One tower of the given level on `base`, layer l using `blocks[l]`.
    fn tower(&mut self, level: u32, base: DyadicInterval, blocks: Vec<Vec<Freq>>, host: Option<(usize, DyadicInterval)>) -> Result<usize, CmeError> {
        let (r, n) = self.p.gen[level as usize - 1];
        let h = self.p.height;
        let g0 = self.p.floor_gen;
        let t = self.towers.len();
        self.towers.push(CmeTower { level, layers: Vec::new(), shared_floor: h >= 3, host, base });
        let mut layers = Vec::new();
        let mut tops = vec![base];
        for l in 0..self.p.nonfloor_layers() {
            let id = self.layer(tops.clone(), blocks[l as usize].clone(), r, n, level, l + 1, t, LayerKind::NonFloor)?;
            layers.push(id);
            tops = self.usgtfs[id].u.bottoms().iter().map(|b| b.right_child()).collect();
        }
        match h {
            1 => layers.push(self.layer(tops, blocks[0].clone(), g0, n, level, 1, t, LayerKind::Floor)?),
            2 => layers.push(self.layer(tops, blocks[1].clone(), g0, n, level, 2, t, LayerKind::Floor)?),
            _ => {
                layers.push(self.layer(tops.clone(), blocks[h as usize - 2].clone(), g0, n, level, h - 1, t, LayerKind::FloorLeft)?);
                layers.push(self.layer(tops, blocks[h as usize - 1].clone(), g0, n, level, h, t, LayerKind::FloorRight)?);
            }
        }
        self.towers[t].layers = layers;
        Ok(t)
    }
}

/// Build the whole chain of multi-towers and derive N.
pub fn build_cme(p: &ScaleProfile) -> Result<Cme, CmeError> {
    p.validate()?;
    let depth = p.finest_depth();
    let e_min = depth + 7;
    let (r_top, n_top) = p.gen[p.levels as usize - 1];
    let _ = r_top;
    let per_layer = 1usize << (n_top - 1);
    let total = per_layer * p.height as usize;
    let freqs: Vec<Freq> = (0..total).map(|m| Freq::pow2(e_min + p.sigma * m as u32)).collect();
    let mut b = Builder { p, usgtfs: Vec::new(), towers: Vec::new() };
    let blocks: Vec<Vec<Freq>> = (0..p.height as usize).map(|l| freqs[l * per_layer..(l + 1) * per_layer].to_vec()).collect();
    let top = b.tower(p.levels, DyadicInterval::unit(), blocks, None)?;
    let mut frontier = vec![top];
    for level in (1..p.levels).rev() {
        let (_, n_low) = p.gen[level as usize - 1];
        let blk = 1usize << (n_low - 1);
        let mut next = Vec::new();
        for &t in &frontier {
            let hosts: Vec<usize> = b.towers[t].layers.iter().copied().filter(|&u| b.usgtfs[u].kind == LayerKind::NonFloor).collect();
            for hu in hosts {
                let u = b.usgtfs[hu].u.clone();
                let (r, n) = u.generation();
                let per_bottom = 1usize << (r - 1);
                for top in u.tops() {
                    for (ti, bottom) in top.subintervals(n - r).into_iter().enumerate() {
                        let chain_freqs = &u.params.alphas[ti * per_bottom..(ti + 1) * per_bottom];
                        let pieces = bottom.left_child().subintervals(p.subdiv);
                        for rr in 0..p.height as usize {
                            let lb: Vec<Vec<Freq>> = (0..p.height as usize)
                                .map(|l1| {
                                    let bi = (rr + l1) % p.height as usize;
                                    chain_freqs[bi * blk..(bi + 1) * blk].to_vec()
                                })
                                .collect();
                            next.push(b.tower(level, pieces[rr], lb, Some((hu, bottom)))?);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    let Builder { usgtfs, towers, .. } = b;
    let mut tiles = Vec::new();
    let mut tile_usgtf = Vec::new();
    let mut tile_gen = Vec::new();
    for (id, cu) in usgtfs.iter().enumerate() {
        tiles.extend_from_slice(&cu.u.tiles);
        tile_usgtf.extend(std::iter::repeat_n(id as u32, cu.u.tiles.len()));
        tile_gen.extend_from_slice(&cu.u.level);
    }
    let max_r = p.gen.iter().map(|g| g.1).max().unwrap();
    let resolution = depth + max_r + 3;
    if resolution > 62 {
        return Err(CmeError::Resolution(resolution));
    }
    let lin = derive_linearization(&usgtfs, resolution)?;
    Ok(Cme { profile: p.clone(), e_min, resolution, freqs, usgtfs, towers, lin, tiles, tile_usgtf, tile_gen })
}

fn cells(i: &DyadicInterval, r: u32) -> (u64, u64) {
    i.cell_range(r)
}

/// Allot E-cells: bottoms smallest first; each chain receives 2^{-r}|B| cells with value α,
/// counting cells already given to α by lower levels inside B, never inside a lower-level
/// top that uses α, filling free cells left to right in its region.
pub fn derive_linearization(usgtfs: &[CmeUsgtf], r: u32) -> Result<Linearization, CmeError> {
    struct Job {
        bottom: DyadicInterval,
        alpha: Freq,
        quota: u64,
        level: u32,
        kind: LayerKind,
    }
    let mut jobs = Vec::new();
    // α → (level, top) of every USGTF using α
    let mut tops_by_alpha: HashMap<Freq, Vec<(u32, DyadicInterval)>> = HashMap::new();
    for cu in usgtfs {
        for c in cu.u.e_constraints() {
            let q = c.measure * pow2(r as i64);
            if !q.is_integer() {
                return Err(CmeError::Allotment(format!("quota below one cell at {:?}", c.bottom)));
            }
            jobs.push(Job { bottom: c.bottom, alpha: c.alpha, quota: q.to_integer().to_u64().unwrap(), level: cu.level, kind: cu.kind });
        }
        for a in &cu.u.params.alphas {
            let e = tops_by_alpha.entry(*a).or_default();
            for t in cu.u.tops() {
                e.push((cu.level, *t));
            }
        }
    }
    jobs.sort_by(|a, b| b.bottom.scale.cmp(&a.bottom.scale).then(a.bottom.index.cmp(&b.bottom.index)).then(a.alpha.cmp(&b.alpha)));
    let mut occupied: BTreeMap<u64, u64> = BTreeMap::new();
    let mut by_alpha: HashMap<Freq, Vec<(u64, u64)>> = HashMap::new();
    let mut out: Vec<(u64, u64, Freq)> = Vec::new();
    for job in &jobs {
        let (blo, bhi) = cells(&job.bottom, r);
        let have: u64 = by_alpha
            .get(&job.alpha)
            .map(|v| v.iter().map(|&(a, b)| b.min(bhi).saturating_sub(a.max(blo))).sum())
            .unwrap_or(0);
        if have > job.quota {
            return Err(CmeError::Allotment(format!("{:?} over-subscribed in {:?}", job.alpha, job.bottom)));
        }
        let mut need = job.quota - have;
        if need == 0 {
            continue;
        }
        let region = match job.kind {
            LayerKind::NonFloor => job.bottom,
            LayerKind::Floor | LayerKind::FloorLeft => job.bottom.left_child(),
            LayerKind::FloorRight => job.bottom.right_child(),
        };
        let (lo, hi) = cells(&region, r);
        let mut blocked: Vec<(u64, u64)> = tops_by_alpha
            .get(&job.alpha)
            .map(|v| {
                v.iter()
                    .filter(|(lv, t)| *lv < job.level && job.bottom.contains(t))
                    .map(|(_, t)| cells(t, r))
                    .collect()
            })
            .unwrap_or_default();
        if let Some((&s, &e)) = occupied.range(..lo).next_back() {
            if e > lo {
                blocked.push((s, e));
            }
        }
        blocked.extend(occupied.range(lo..hi).map(|(&s, &e)| (s, e)));
        blocked.sort();
        let mut cursor = lo;
        let mut taken = Vec::new();
        let mut bi = 0;
        while need > 0 && cursor < hi {
            while bi < blocked.len() && blocked[bi].1 <= cursor {
                bi += 1;
            }
            if bi < blocked.len() && blocked[bi].0 <= cursor {
                cursor = blocked[bi].1;
                continue;
            }
            let gap_end = if bi < blocked.len() { blocked[bi].0.min(hi) } else { hi };
            let take = need.min(gap_end - cursor);
            taken.push((cursor, cursor + take));
            need -= take;
            cursor += take;
        }
        if need > 0 {
            return Err(CmeError::Allotment(format!("no room for {:?} in {:?}", job.alpha, job.bottom)));
        }
        for (a, b) in taken {
            occupied.insert(a, b);
            by_alpha.entry(job.alpha).or_default().push((a, b));
            out.push((a, b, job.alpha));
        }
    }
    Ok(Linearization::from_runs(r, out))
}

/// Proper dyadic ancestors, nearest first.
fn ancestors(i: &DyadicInterval) -> impl Iterator<Item = DyadicInterval> + '_ {
    (0..i.scale).rev().map(move |s| i.ancestor(s))
}

/// One line of the validation ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

/// Runs every structural invariant; the report carries failures instead of erroring.
pub fn validate_cme(c: &Cme) -> Vec<Check> {
    let mut out = Vec::new();
    let p = &c.profile;
    // USGTF round trip and keycompress
    let bad: Vec<String> = c.usgtfs.iter().enumerate().filter_map(|(i, u)| u.u.check().err().map(|e| format!("usgtf {}: {}", i, e))).collect();
    out.push(check("usgtf_roundtrip_keycompress", bad.is_empty(), bad.join("; ")));
    // towers and multi-towers per level (and per host bottom)
    let mut fails = Vec::new();
    for level in 1..=p.levels {
        let mut groups: BTreeMap<Option<(usize, u64, i32)>, Vec<usize>> = BTreeMap::new();
        for t in c.towers_at(level) {
            let key = c.towers[t].host.map(|(u, b)| (u, b.index, b.scale));
            groups.entry(key).or_default().push(t);
        }
        for ts in groups.values() {
            let m = crate::structures::MultiTower { towers: ts.iter().map(|&t| c.tower_struct(t)).collect() };
            if let Err(e) = multitower_check(&m) {
                fails.push(format!("level {}: {}", level, e));
            }
        }
    }
    out.push(check("tower_multitower", fails.is_empty(), fails.join("; ")));
    // chain embedding: every lower tower embeds into its host USGTF
    let mut emb_fail = Vec::new();
    for (t, ct) in c.towers.iter().enumerate() {
        if let Some((hu, _)) = ct.host {
            let f1: Vec<&Usgtf> = ct.layers.iter().map(|&u| &c.usgtfs[u].u).collect();
            if !embeds(&f1, &[&c.usgtfs[hu].u]) {
                emb_fail.push(format!("tower {}", t));
            }
        }
    }
    out.push(check("chain_embedding", emb_fail.is_empty(), emb_fail.join("; ")));
    // bases of the layer-h families are disjoint across levels
    let mut basis_level: HashMap<DyadicInterval, u32> = HashMap::new();
    let mut disjoint = true;
    for j in 1..=p.levels {
        for x in c.basis_h(j) {
            if basis_level.insert(x, j).is_some_and(|lv| lv != j) {
                disjoint = false;
            }
        }
    }
    for (x, &lv) in &basis_level {
        if ancestors(x).any(|anc| basis_level.get(&anc).is_some_and(|&l2| l2 != lv)) {
            disjoint = false;
        }
    }
    out.push(check("basis_h_disjoint", disjoint, String::new()));
    let meas: Vec<String> = (1..=p.levels)
        .map(|j| {
            let m: Rat = c.basis_h(j).iter().map(|i| i.len()).fold(Rat::from_integer(0.into()), |a, b| a + b);
            format!("|Basis(F_{}^h)| = 2^{:.3}", j, m.to_f64().unwrap().log2())
        })
        .collect();
    out.push(check("basis_h_measure", true, meas.join(", ")));
    // tops nested or disjoint across levels j1 ≥ j2: no top sits strictly inside a top of a lower level
    let mut top_level: HashMap<DyadicInterval, u32> = HashMap::new();
    for u in &c.usgtfs {
        for t in u.u.tops() {
            let e = top_level.entry(*t).or_insert(u.level);
            *e = (*e).min(u.level);
        }
    }
    let mut nested = true;
    for u in &c.usgtfs {
        for a in u.u.tops() {
            if ancestors(a).any(|anc| top_level.get(&anc).is_some_and(|&lv| lv < u.level)) {
                nested = false;
            }
        }
    }
    out.push(check("keyobs1_tops_nested", nested, String::new()));
    // length drop between layers within a tower: |I2| ≤ 2^{10} 2^{l1 - l2} |I1|
    let mut drop_ok = true;
    for t in &c.towers {
        for (a, &ua) in t.layers.iter().enumerate() {
            let set: HashSet<DyadicInterval> = c.usgtfs[ua].u.tops().iter().copied().collect();
            for &ub in &t.layers[a..] {
                let (l1, l2) = (c.usgtfs[ua].layer as i32, c.usgtfs[ub].layer as i32);
                for i2 in c.usgtfs[ub].u.tops() {
                    let hit = std::iter::once(*i2).chain(ancestors(i2)).find(|x| set.contains(x));
                    if let Some(i1) = hit {
                        if i2.scale - i1.scale < l2 - l1 - 10 {
                            drop_ok = false;
                        }
                    }
                }
            }
        }
    }
    out.push(check("keyobs2_length_drop", drop_ok, String::new()));
    // frequency image and separation
    out.push(check("image_n_declared", c.lin.image_within(&c.freqs), String::new()));
    out.push(check("frequency_separation", c.lin.separated(p.sigma), String::new()));
    // every tile realizes its declared mass exactly
    let mut mass_bad = 0usize;
    for (i, t) in c.tiles.iter().enumerate() {
        if restricted_mass(t, &c.lin) != c.declared_mass(i) {
            mass_bad += 1;
        }
    }
    out.push(check("restricted_mass_exact", mass_bad == 0, format!("{} mismatches", mass_bad)));
    let min_mass = c.tile_gen.iter().max().map(|g| format!("2^-{}", g)).unwrap_or_default();
    out.push(check("min_mass", true, min_mass));
    // bottoms of consecutive non-floor layers host the next tops
    let mut prec_ok = true;
    for t in &c.towers {
        for w in t.layers.windows(2) {
            let (a, b) = (&c.usgtfs[w[0]], &c.usgtfs[w[1]]);
            if b.kind == LayerKind::FloorRight {
                continue;
            }
            if !prec(b.u.tops(), &a.u.bottoms()) {
                prec_ok = false;
            }
        }
    }
    out.push(check("layer_prec", prec_ok, String::new()));
    out
}

/// Serializable description: profile, per-USGTF parameters and N.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub profile: ScaleProfile,
    pub e_min: u32,
    pub resolution: u32,
    pub structures: Vec<ManifestEntry>,
    /// run-length N as (start, end, frequency exponent)
    pub n_runs: Vec<(u64, u64, u32)>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub level: u32,
    pub layer: u32,
    pub tower: usize,
    pub generation: (u32, u32),
    pub tops: Vec<(i32, u64)>,
    pub alpha_exponents: Vec<u32>,
}

impl Cme {
    pub fn manifest(&self) -> Manifest {
        let structures = self
            .usgtfs
            .iter()
            .map(|u| ManifestEntry {
                level: u.level,
                layer: u.layer,
                tower: u.tower,
                generation: u.u.generation(),
                tops: u.u.tops().iter().map(|t| (t.scale, t.index)).collect(),
                alpha_exponents: u.u.params.alphas.iter().map(|a| a.exponent()).collect(),
            })
            .collect();
        let n_runs = self.lin.runs.iter().map(|&(a, b, f)| (a, b, self.lin.freqs[f as usize].exponent())).collect();
        Manifest { profile: self.profile.clone(), e_min: self.e_min, resolution: self.resolution, structures, n_runs }
    }
}
