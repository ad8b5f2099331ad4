//! Tiles, the linearization N, E(P), masses and the mass-bin partition.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::dyadic::{pow2, DyadicInterval, MeasurableSet, Rat, RealInterval};

/// Nonnegative integer frequency m·2^e, normalized so m is odd (or zero with e = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Freq {
    m: u64,
    e: u32,
}

impl Freq {
    pub fn new(m: u64, e: u32) -> Self {
        if m == 0 {
            return Freq { m: 0, e: 0 };
        }
        let tz = m.trailing_zeros();
        Freq { m: m >> tz, e: e + tz }
    }

    pub fn from_u64(v: u64) -> Self {
        Freq::new(v, 0)
    }

    pub fn pow2(e: u32) -> Self {
        Freq { m: 1, e }
    }

    pub fn mantissa(&self) -> u64 {
        self.m
    }

    pub fn exponent(&self) -> u32 {
        self.e
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0
    }

    /// Number of binary digits.
    pub fn bits(&self) -> u64 {
        if self.m == 0 {
            0
        } else {
            self.e as u64 + 64 - self.m.leading_zeros() as u64
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from(self.m) << (self.e as usize)
    }

    pub fn to_rat(&self) -> Rat {
        Rat::from_integer(BigInt::from(self.to_biguint()))
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.m == 0 {
            return Some(0);
        }
        if self.bits() > 64 {
            None
        } else {
            Some(self.m << self.e)
        }
    }

    pub fn log2(&self) -> f64 {
        if self.m == 0 {
            f64::NEG_INFINITY
        } else {
            self.e as f64 + (self.m as f64).log2()
        }
    }

    /// True iff 2^k divides the value.
    pub fn aligned(&self, k: u32) -> bool {
        self.m == 0 || self.e >= k
    }

    /// Value with the binary digits below 2^k cleared.
    pub fn floor_pow2(&self, k: u32) -> Freq {
        if self.m == 0 || self.e >= k {
            return *self;
        }
        let sh = k - self.e;
        if sh >= 64 {
            return Freq::new(0, 0);
        }
        Freq::new((self.m >> sh) << sh, self.e)
    }

    /// frac(value·c·2^{-r}), the phase of e^{2πi·value·x} at x = c·2^{-r}.
    pub fn phase_at(&self, c: u64, r: u32) -> f64 {
        if self.m == 0 || self.e >= r {
            return 0.0;
        }
        let sh = r - self.e;
        if sh > 64 {
            // only the low bits of m·c survive; with sh > 64 use wide arithmetic
            let prod = BigUint::from(self.m) * BigUint::from(c);
            let modulus = BigUint::one() << (sh as usize);
            let rem = prod % &modulus;
            return Rat::new(BigInt::from(rem), BigInt::from(modulus)).to_f64().unwrap_or(0.0);
        }
        let mask: u128 = if sh == 64 { u64::MAX as u128 } else { (1u128 << sh) - 1 };
        let prod = (self.m as u128).wrapping_mul(c as u128) & mask;
        prod as f64 / (sh as f64).exp2()
    }
}

impl Ord for Freq {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.bits(), other.bits());
        if a != b {
            return a.cmp(&b);
        }
        if a == 0 {
            return Ordering::Equal;
        }
        // same bit length: align the smaller exponent
        if self.e >= other.e {
            (self.m << (self.e - other.e)).cmp(&other.m)
        } else {
            self.m.cmp(&(other.m << (other.e - self.e)))
        }
    }
}

impl PartialOrd for Freq {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Area-one tile I × [α, α + 1/|I|).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tile {
    pub time: DyadicInterval,
    pub alpha: Freq,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TileError {
    #[error("frequency not aligned to |ω| = 2^{0}")]
    Unaligned(i32),
    #[error("time interval outside [0,1)")]
    OutsideUnit,
    #[error("tiles {0} and {1} overlap in N allotment")]
    Collision(usize, usize),
}

impl Tile {
    pub fn new(time: DyadicInterval, alpha: Freq) -> Result<Self, TileError> {
        if time.scale < 0 || (time.scale < 64 && time.index >> time.scale != 0) {
            return Err(TileError::OutsideUnit);
        }
        if !alpha.aligned(time.scale as u32) {
            return Err(TileError::Unaligned(time.scale));
        }
        Ok(Tile { time, alpha })
    }

    /// log2 |ω| = scale of I.
    pub fn k(&self) -> u32 {
        self.time.scale as u32
    }

    pub fn contains_freq(&self, a: &Freq) -> bool {
        a.floor_pow2(self.k()) == self.alpha
    }

    /// ω as a dyadic interval of negative scale, when its index fits.
    pub fn omega(&self) -> Option<DyadicInterval> {
        let v = self.alpha.to_u64()?;
        Some(DyadicInterval::new(-self.time.scale, v >> self.k()))
    }

    pub fn omega_real(&self) -> RealInterval {
        let lo = self.alpha.to_rat();
        let hi = &lo + pow2(self.k() as i64);
        RealInterval::new(lo, hi)
    }
}

/// P1 ≤ P2: I1 ⊆ I2 and ω1 ⊇ ω2.
pub fn tile_leq(p1: &Tile, p2: &Tile) -> bool {
    p2.time.contains(&p1.time) && p2.alpha.floor_pow2(p1.k()) == p1.alpha
}

pub fn tile_lt(p1: &Tile, p2: &Tile) -> bool {
    tile_leq(p1, p2) && p1.k() > p2.k()
}

/// Frequency interval of aP (dilated about its center), exact.
pub fn tile_dilate(a: &Rat, p: &Tile) -> RealInterval {
    p.omega_real().dilate(a)
}

/// dist(10ω, 10ω′)/|ω| as log2(1 + ratio); exact for moderate sizes, log-domain otherwise.
fn damping_log2(p: &Tile, q: &Tile) -> f64 {
    if p.alpha == q.alpha {
        return 0.0;
    }
    let (la, lb) = (p.alpha.log2(), q.alpha.log2());
    let big = la.max(lb);
    let gap = (la - lb).abs();
    if big > 100.0 && gap > 1e-6 {
        let lg = big + (-(-gap).exp2()).ln_1p() / std::f64::consts::LN_2;
        let k = p.k() as f64;
        if lg > p.k().max(q.k()) as f64 + 12.0 {
            return (1.0 + (lg - k).exp2()).log2().max(lg - k);
        }
    }
    let ten = Rat::from_integer(BigInt::from(10));
    let d = tile_dilate(&ten, p).distance(&tile_dilate(&ten, q));
    let ratio = d / pow2(p.k() as i64);
    (1.0 + ratio.to_f64().unwrap_or(f64::INFINITY)).log2()
}

/// Step function N with values in a finite frequency list; uncovered cells carry
/// a sentinel that lies in no tile's ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    pub resolution: u32,
    /// sorted, duplicate-free
    pub freqs: Vec<Freq>,
    /// disjoint runs [start, end) of cells, sorted, with an index into `freqs`
    pub runs: Vec<(u64, u64, u32)>,
    /// run indices per frequency id
    #[serde(skip)]
    by_freq: Vec<Vec<u32>>,
}

impl Linearization {
    pub fn from_runs(resolution: u32, mut runs: Vec<(u64, u64, Freq)>) -> Self {
        runs.sort_by_key(|r| r.0);
        let mut freqs: Vec<Freq> = runs.iter().map(|r| r.2).collect();
        freqs.sort();
        freqs.dedup();
        let mut out: Vec<(u64, u64, u32)> = Vec::with_capacity(runs.len());
        for (a, b, f) in runs {
            if a >= b {
                continue;
            }
            let id = freqs.binary_search(&f).unwrap() as u32;
            if let Some(last) = out.last_mut() {
                assert!(last.1 <= a, "overlapping runs in linearization");
                if last.1 == a && last.2 == id {
                    last.1 = b;
                    continue;
                }
            }
            out.push((a, b, id));
        }
        let mut by_freq = vec![Vec::new(); freqs.len()];
        for (i, r) in out.iter().enumerate() {
            by_freq[r.2 as usize].push(i as u32);
        }
        Linearization { resolution, freqs, runs: out, by_freq }
    }

    pub fn from_cells(resolution: u32, cells: &[Option<Freq>]) -> Self {
        let runs = cells
            .iter()
            .enumerate()
            .filter_map(|(c, f)| f.map(|f| (c as u64, c as u64 + 1, f)))
            .collect();
        Linearization::from_runs(resolution, runs)
    }

    pub fn constant(resolution: u32, a: Freq) -> Self {
        Linearization::from_runs(resolution, vec![(0, 1u64 << resolution, a)])
    }

    pub fn value_at(&self, cell: u64) -> Option<Freq> {
        let i = self.runs.partition_point(|r| r.0 <= cell);
        if i == 0 {
            return None;
        }
        let r = self.runs[i - 1];
        if cell < r.1 {
            Some(self.freqs[r.2 as usize])
        } else {
            None
        }
    }

    /// Index range of runs intersecting cells [lo, hi).
    pub fn runs_in(&self, lo: u64, hi: u64) -> &[(u64, u64, u32)] {
        let a = self.runs.partition_point(|r| r.1 <= lo);
        let b = self.runs.partition_point(|r| r.0 < hi);
        &self.runs[a..b.max(a)]
    }

    /// Indices of the runs with frequency id `fid` meeting cells [lo, hi).
    pub fn run_ids_of(&self, fid: usize, lo: u64, hi: u64) -> Vec<usize> {
        if self.by_freq.len() != self.freqs.len() {
            let a = self.runs.partition_point(|r| r.1 <= lo);
            return (a..self.runs.len()).take_while(|&i| self.runs[i].0 < hi).filter(|&i| self.runs[i].2 as usize == fid).collect();
        }
        let ids = &self.by_freq[fid];
        let a = ids.partition_point(|&i| self.runs[i as usize].1 <= lo);
        ids[a..].iter().map(|&i| i as usize).take_while(|&i| self.runs[i].0 < hi).collect()
    }

    /// Image(N) ⊆ universe.
    pub fn image_within(&self, universe: &[Freq]) -> bool {
        self.freqs.iter().all(|f| universe.contains(f))
    }

    /// Every pair of distinct values is 2^σ-separated.
    pub fn separated(&self, sigma: u32) -> bool {
        self.freqs.windows(2).all(|w| w[0].is_zero() || w[1].log2() - w[0].log2() >= sigma as f64 - 1e-9)
    }
}

/// E(P) = {x ∈ I_P | N(x) ∈ ω_P}.
pub fn e_set(p: &Tile, n: &Linearization) -> MeasurableSet {
    let r = n.resolution;
    let (lo, hi) = p.time.cell_range(r);
    let mut runs: Vec<(u64, u64)> = Vec::new();
    let first = n.freqs.partition_point(|f| *f < p.alpha);
    for fid in first..n.freqs.len() {
        if !p.contains_freq(&n.freqs[fid]) {
            break;
        }
        if n.by_freq.len() != n.freqs.len() {
            // deserialized without the index
            for run in n.runs_in(lo, hi) {
                if run.2 as usize == fid {
                    runs.push((run.0.max(lo), run.1.min(hi)));
                }
            }
            continue;
        }
        let ids = &n.by_freq[fid];
        let a = ids.partition_point(|&i| n.runs[i as usize].1 <= lo);
        for &i in &ids[a..] {
            let run = n.runs[i as usize];
            if run.0 >= hi {
                break;
            }
            runs.push((run.0.max(lo), run.1.min(hi)));
        }
    }
    MeasurableSet::from_runs(r, runs)
}

/// A₀(P) = |E(P)|/|I_P|.
pub fn restricted_mass(p: &Tile, n: &Linearization) -> Rat {
    e_set(p, n).measure() / p.time.len()
}

/// A finite tile family together with N and the decay parameter N₀.
#[derive(Clone, Debug)]
pub struct TileUniverse {
    pub tiles: Vec<Tile>,
    pub lin: Linearization,
    pub n0: u32,
    by_time: HashMap<DyadicInterval, Vec<usize>>,
}

/// P(0) ⊔ P̄₀ ⊔ ⨆ P_n with the maximal subfamilies.
#[derive(Clone, Debug, Default)]
pub struct Classification {
    pub p_zero: Vec<usize>,
    pub p_bar0: Vec<usize>,
    pub bins: BTreeMap<u32, Vec<usize>>,
    pub maxima: BTreeMap<u32, Vec<usize>>,
    pub mass: Vec<f64>,
    pub a0: Vec<Rat>,
    pub bin_of: Vec<Option<u32>>,
}

impl TileUniverse {
    pub fn new(tiles: Vec<Tile>, lin: Linearization, n0: u32) -> Self {
        let mut by_time: HashMap<DyadicInterval, Vec<usize>> = HashMap::new();
        for (i, t) in tiles.iter().enumerate() {
            by_time.entry(t.time).or_default().push(i);
        }
        TileUniverse { tiles, lin, n0, by_time }
    }

    pub fn tiles_at(&self, i: &DyadicInterval) -> &[usize] {
        self.by_time.get(i).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Minimum pairwise ratio log2 between distinct time lengths; None if only one length.
    pub fn scale_gap(&self) -> Option<i32> {
        let mut scales: Vec<i32> = self.tiles.iter().map(|t| t.time.scale).collect();
        scales.sort();
        scales.dedup();
        scales.windows(2).map(|w| w[1] - w[0]).min()
    }

    pub fn restricted_masses(&self) -> Vec<Rat> {
        self.tiles.iter().map(|t| restricted_mass(t, &self.lin)).collect()
    }

    /// A(P) for every tile, given the restricted masses.
    pub fn masses_from(&self, a0: &[Rat]) -> Vec<f64> {
        let a0f: Vec<f64> = a0.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
        self.tiles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut best = a0f[i];
                for s in 0..=p.time.scale {
                    let anc = p.time.ancestor(s);
                    for &j in self.tiles_at(&anc) {
                        if a0f[j] <= best {
                            continue;
                        }
                        let d = damping_log2(p, &self.tiles[j]);
                        let v = a0f[j] * (-(self.n0 as f64) * d).exp2();
                        if v > best {
                            best = v;
                        }
                    }
                }
                best
            })
            .collect()
    }

    pub fn mass(&self, i: usize) -> f64 {
        let a0 = self.restricted_masses();
        self.masses_from(&a0)[i]
    }

    /// Partition into P(0), P̄₀ (mass ≤ floor) and bins A ∈ (2^{-n-1}, 2^{-n}].
    pub fn classify_with(&self, a0: Vec<Rat>, mass_floor: f64) -> Classification {
        let mass = self.masses_from(&a0);
        let mut c = Classification { bin_of: vec![None; self.tiles.len()], ..Default::default() };
        for (i, p) in self.tiles.iter().enumerate() {
            if in_p_zero(p) {
                c.p_zero.push(i);
                continue;
            }
            let a = mass[i];
            if a <= mass_floor {
                c.p_bar0.push(i);
                continue;
            }
            let n = mass_bin(a);
            c.bins.entry(n).or_default().push(i);
            c.bin_of[i] = Some(n);
        }
        for (&n, members) in &c.bins {
            let mx: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| {
                    let p = &self.tiles[i];
                    !(0..=p.time.scale).any(|s| {
                        self.tiles_at(&p.time.ancestor(s))
                            .iter()
                            .any(|&j| c.bin_of[j] == Some(n) && self.tiles[j] != *p && tile_leq(p, &self.tiles[j]))
                    })
                })
                .collect();
            c.maxima.insert(n, mx);
        }
        c.mass = mass;
        c.a0 = a0;
        c
    }

    pub fn classify(&self) -> Classification {
        self.classify_with(self.restricted_masses(), 0.0)
    }
}

/// 0 ∈ 100ω ⟺ α + |ω|/2 ≤ 50|ω| ⟺ α/|ω| ≤ 49.
pub fn in_p_zero(p: &Tile) -> bool {
    let k = p.k();
    if p.alpha.bits() > k as u64 + 7 {
        return false;
    }
    let q = p.alpha.to_biguint() >> (k as usize);
    q <= BigUint::from(49u32)
}

/// n with A ∈ (2^{-n-1}, 2^{-n}], for 0 < A ≤ 1.
pub fn mass_bin(a: f64) -> u32 {
    assert!(a > 0.0 && a <= 1.0 + 1e-12);
    let mut n = (-a.log2()).floor().max(0.0) as u32;
    // correct rounding at exact powers of two
    while (-(n as f64)).exp2() < a && n > 0 {
        n -= 1;
    }
    while (-(n as f64 + 1.0)).exp2() >= a {
        n += 1;
    }
    n
}
