//! The sets F_j aligned with the frequency signs of their tower, the extremal function
//! f = Σ r_j χ_{F_j}, and the general lacunary variant.
//!
//! Frequencies of an embedding are powers of two 2^e far beyond any grid, so F_j is kept
//! symbolically: inside each piece (a floor bottom interval) a point belongs to F_j iff its
//! binary digits satisfy a list of digit constraints. sgn cos(2π 2^e x) is fixed by digits
//! e+1 and e+2 of x, which makes every U-set a digit constraint.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carleson::{cis, two_pi, Kernel};
use crate::cme::Cme;
use crate::dyadic::{DyadicInterval, MeasurableSet};
use crate::norms::{log2_add, lorentz_norm_parts, FundamentalFunction};
use crate::tiles::{e_set, Freq};

/// Digits e_max+3 … e_max+RUN_GAP−1 stay free so every 2^{-5}-subcell of a quarter period
/// carries equal mass; the placement run starts at digit e_max+RUN_GAP.
pub const RUN_GAP: u32 = 8;

/// Smallest accepted min_j n_{j+1}/n_j.
pub const LACUNARY_MIN: f64 = 1.125;

#[derive(Debug, thiserror::Error, PartialEq, Clone)]
pub enum SetsError {
    #[error("frequency {a} not resolvable at resolution {r}")]
    Resolution { a: u64, r: u32 },
    #[error("sequence is not lacunary (min ratio {0:.4})")]
    NonLacunary(f64),
    #[error("F_{0} and F_{1} overlap")]
    Overlap(u32, u32),
    #[error("constraint digit {bit} not below piece depth {depth}")]
    Depth { bit: u32, depth: u32 },
    #[error("empty input")]
    Empty,
    #[error("weights: {0}")]
    Weights(String),
}

/// Constraint on the binary digits at absolute positions `bits` (digit p has weight 2^{-p});
/// `allowed` lists admissible patterns, bit i of a pattern being the digit at bits[i].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitGroup {
    pub bits: Vec<u32>,
    pub allowed: Vec<u32>,
}

impl DigitGroup {
    /// Digits (e+1, e+2) with sgn cos(2π 2^e x) = s.
    pub fn sign(e: u32, s: i8) -> Self {
        let allowed = if s >= 0 { vec![0b00, 0b11] } else { vec![0b01, 0b10] };
        DigitGroup { bits: vec![e + 1, e + 2], allowed }
    }

    /// Digit `start` = 1 followed by len−1 zeros.
    pub fn run(start: u32, len: u32) -> Self {
        DigitGroup { bits: (start..start + len).collect(), allowed: vec![1] }
    }

    fn log2_density(&self) -> f64 {
        (self.allowed.len() as f64).log2() - self.bits.len() as f64
    }

    /// Fraction of the group's patterns consistent with the fixed digits.
    fn fraction_given(&self, fixed: &dyn Fn(u32) -> Option<u8>) -> f64 {
        let mut free = 0u32;
        let ok = self
            .allowed
            .iter()
            .filter(|&&pat| {
                self.bits.iter().enumerate().all(|(i, &p)| match fixed(p) {
                    Some(d) => ((pat >> i) & 1) as u8 == d,
                    None => true,
                })
            })
            .count();
        for &p in &self.bits {
            if fixed(p).is_none() {
                free += 1;
            }
        }
        ok as f64 / (free as f64).exp2()
    }

    /// Average of e^{−2πi 2^b y} over the admissible digit patterns.
    fn fourier(&self, b: u32) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for &pat in &self.allowed {
            let mut phase = 0.0;
            for (i, &p) in self.bits.iter().enumerate() {
                if (pat >> i) & 1 == 1 && p > b {
                    phase += (-((p - b) as f64)).exp2();
                }
            }
            s += cis(-two_pi() * phase);
        }
        s / self.allowed.len() as f64
    }
}

/// Intersection of digit groups on pairwise disjoint digit positions, sorted by first digit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitSet {
    pub groups: Vec<DigitGroup>,
}

impl DigitSet {
    pub fn new(mut groups: Vec<DigitGroup>) -> Self {
        groups.sort_by_key(|g| g.bits[0]);
        DigitSet { groups }
    }

    /// log2 of the relative measure inside any interval coarser than every constrained digit.
    pub fn log2_density(&self) -> f64 {
        self.groups.iter().map(|g| g.log2_density()).sum()
    }

    /// Relative measure inside the dyadic set with the given digits fixed.
    pub fn fraction_given(&self, fixed: &dyn Fn(u32) -> Option<u8>) -> f64 {
        self.groups.iter().map(|g| g.fraction_given(fixed)).product()
    }

    /// Mean of e^{−2πi 2^b y} over the set, inside an interval whose endpoints are multiples
    /// of 2^{−b}. Digits beyond b+64 are treated as free, an error below 2^{−60}.
    pub fn fourier(&self, b: u32) -> Complex64 {
        let hi = b + 64;
        let mut used = [false; 65];
        let mut acc = Complex64::new(1.0, 0.0);
        for g in &self.groups {
            if g.bits.iter().all(|&p| p <= b || p > hi) {
                continue;
            }
            for &p in &g.bits {
                if p > b && p <= hi {
                    used[(p - b) as usize] = true;
                }
            }
            acc *= g.fourier(b);
        }
        if !used[1] {
            return Complex64::new(0.0, 0.0);
        }
        for d in 2..=64usize {
            if !used[d] {
                acc *= (Complex64::new(1.0, 0.0) + cis(-two_pi() * (-(d as f64)).exp2())) * 0.5;
            }
        }
        acc
    }
}

/// One piece of F_j: a floor bottom interval of a tower, with the sign of every tower frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FPiece {
    pub interval: DyadicInterval,
    pub tower: usize,
    /// aligned with the tower's sorted frequency exponents
    pub signs: Vec<i8>,
}

/// F_j for one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FLevel {
    pub level: u32,
    /// sorted by position
    pub pieces: Vec<FPiece>,
    /// sorted frequency exponents per tower
    pub tower_exps: BTreeMap<usize, Vec<u32>>,
    /// number of sign constraints per piece
    pub constraints: u32,
    /// length of the placement run
    pub run_bits: u32,
    /// log2 |F_j|
    pub log2_measure: f64,
}

impl FLevel {
    fn groups_for(&self, piece: &FPiece, window: Option<(u32, u32)>) -> Vec<DigitGroup> {
        let exps = &self.tower_exps[&piece.tower];
        let (lo, hi) = window.unwrap_or((0, u32::MAX));
        let mut g: Vec<DigitGroup> = Vec::new();
        let start = exps.partition_point(|&e| e + 2 <= lo);
        for (i, &e) in exps.iter().enumerate().skip(start) {
            if e + 1 > hi {
                break;
            }
            g.push(DigitGroup::sign(e, piece.signs[i]));
        }
        let e_max = *exps.last().unwrap();
        let run = DigitGroup::run(e_max + RUN_GAP, self.run_bits);
        if run.bits.last().copied().unwrap_or(0) > lo && run.bits[0] <= hi {
            g.push(run);
        }
        g
    }

    /// Full digit description of F_j inside a piece.
    pub fn digits(&self, idx: usize) -> DigitSet {
        DigitSet::new(self.groups_for(&self.pieces[idx], None))
    }

    /// log2 |F_j ∩ piece| / |piece|, the same for every piece.
    pub fn log2_density(&self) -> f64 {
        -((self.constraints + self.run_bits) as f64)
    }

    /// (1/|F_j ∩ p|) ∫_{F_j ∩ p} e^{−2πi 2^b y} dy.
    pub fn fourier(&self, idx: usize, b: u32) -> Complex64 {
        let piece = &self.pieces[idx];
        DigitSet::new(self.groups_for(piece, Some((b, b + 64)))).fourier(b)
    }

    pub fn signs_of(&self, idx: usize) -> Vec<(u32, i8)> {
        let p = &self.pieces[idx];
        self.tower_exps[&p.tower].iter().copied().zip(p.signs.iter().copied()).collect()
    }

    /// Pieces meeting [lo, hi), as an index range.
    pub fn pieces_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.pieces.partition_point(|p| p.interval.left_f64() + p.interval.len_f64() <= lo);
        let b = self.pieces.partition_point(|p| p.interval.left_f64() < hi);
        a..b.max(a)
    }

    /// |I ∩ F_j| / |I| for a dyadic interval, in log2 (−∞ if empty).
    pub fn log2_relative_in(&self, i: &DyadicInterval) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        for k in self.pieces_in(i.left_f64(), i.left_f64() + i.len_f64()) {
            let p = &self.pieces[k].interval;
            let common = if i.contains(p) {
                *p
            } else if p.contains(i) {
                *i
            } else {
                continue;
            };
            acc = log2_add(acc, -(common.scale as f64));
        }
        acc + self.log2_density() + i.scale as f64
    }

    /// Exact check of the 2^5-subcell uniformity inside a quarter period J of 2^e that
    /// meets the set, for the given piece.
    pub fn local_uniformity(&self, idx: usize, e: u32) -> bool {
        let d = self.digits(idx);
        let piece = &self.pieces[idx];
        let depth = piece.interval.scale as u32;
        // pick J: digits up to e+2 given by the first admissible pattern, zero elsewhere
        let mut prefix: HashMap<u32, u8> = HashMap::new();
        for p in depth + 1..=e + 2 {
            prefix.insert(p, 0);
        }
        for g in &d.groups {
            if g.bits.iter().all(|&p| p > depth && p <= e + 2) {
                let pat = g.allowed[0];
                for (i, &p) in g.bits.iter().enumerate() {
                    prefix.insert(p, ((pat >> i) & 1) as u8);
                }
            }
        }
        let whole = d.fraction_given(&|p| prefix.get(&p).copied());
        if whole == 0.0 {
            return false;
        }
        (0..32u32).all(|sub| {
            let f = d.fraction_given(&|p| {
                if p > e + 2 && p <= e + 7 {
                    Some(((sub >> (e + 7 - p)) & 1) as u8)
                } else {
                    prefix.get(&p).copied()
                }
            });
            f == whole
        })
    }
}

/// Lookup for the layer holding each tower frequency and the tops of each USGTF.
struct SignContext<'a> {
    cme: &'a Cme,
    freq_home: HashMap<(usize, Freq), (usize, usize)>,
    top_index: HashMap<usize, HashMap<DyadicInterval, usize>>,
}

impl<'a> SignContext<'a> {
    fn new(cme: &'a Cme) -> Self {
        let mut freq_home = HashMap::new();
        let mut top_index = HashMap::new();
        for (t, tw) in cme.towers.iter().enumerate() {
            for &u in &tw.layers {
                for (i, a) in cme.usgtfs[u].u.params.alphas.iter().enumerate() {
                    freq_home.insert((t, *a), (u, i));
                }
                let m: HashMap<DyadicInterval, usize> = cme.usgtfs[u].u.tops().iter().enumerate().map(|(i, x)| (*x, i)).collect();
                top_index.insert(u, m);
            }
        }
        SignContext { cme, freq_home, top_index }
    }

    /// Chain bottom of α in the layer top containing the piece.
    fn chain_bottom(&self, tower: usize, piece: &DyadicInterval, a: Freq) -> Option<DyadicInterval> {
        let &(u, ui) = self.freq_home.get(&(tower, a))?;
        let us = &self.cme.usgtfs[u].u;
        let scale = us.tops()[0].scale;
        if piece.scale < scale {
            return None;
        }
        let top = self.top_index[&u].get(&piece.ancestor(scale))?;
        Some(us.chain_bottom(*top, ui))
    }
}

/// S[I](α): +1 when I lies left of, or inside, the chain bottom of α in the layer top that
/// contains I (T_P^* vanishes inside I_P, and y·ψ(y) ≥ 0 makes ∫_I G_P ≥ 0 to the left);
/// −1 to the right.
pub fn sign_symbolic(cme: &Cme, tower: usize, piece: &DyadicInterval, a: Freq) -> i8 {
    let ctx = SignContext::new(cme);
    sign_with(&ctx, tower, piece, a)
}

fn sign_with(ctx: &SignContext, tower: usize, piece: &DyadicInterval, a: Freq) -> i8 {
    match ctx.chain_bottom(tower, piece, a) {
        Some(b) if !b.contains(piece) && b.left_of(piece) => -1,
        _ => 1,
    }
}

/// sgn ∫_I e^{−2πiαy} T_P^*(χ_{[0,1]})(y) dy for one tile, by the kernel antiderivatives;
/// None when the integral is below 10^{-12}·|I|.
pub fn sign_numeric(cme: &Cme, kernel: &Kernel, tile: usize, piece: &DyadicInterval) -> Option<i8> {
    let v = g_integral(cme, kernel, tile, piece.left_f64(), piece.left_f64() + piece.len_f64());
    if v.abs() <= 1e-12 * piece.len_f64() {
        None
    } else {
        Some(if v > 0.0 { 1 } else { -1 })
    }
}

/// ∫_lo^hi G_P where T_P^*(1)(y) = e^{2πiαy} G_P(y).
pub fn g_integral(cme: &Cme, kernel: &Kernel, tile: usize, lo: f64, hi: f64) -> f64 {
    let p = &cme.tiles[tile];
    let e = e_set(p, &cme.lin);
    let cell = (-(cme.lin.resolution as f64)).exp2();
    let k = p.time.scale;
    e.runs().iter().map(|&(a, b)| kernel.g_run_integral(k, a as f64 * cell, b as f64 * cell, lo, hi)).sum()
}

/// Builds F_j for every level. The placement run of level j has `run_bits(j)` digits.
pub fn build_f_sets(cme: &Cme, run_bits: impl Fn(u32) -> u32) -> Result<Vec<FLevel>, SetsError> {
    let ctx = SignContext::new(cme);
    let mut out = Vec::new();
    for j in 1..=cme.profile.levels {
        let mut pieces = Vec::new();
        let mut tower_exps = BTreeMap::new();
        let mut constraints = 0;
        for t in cme.towers_at(j) {
            let freqs = cme.tower_freqs(t);
            constraints = freqs.len() as u32;
            let exps: Vec<u32> = freqs.iter().map(|f| f.exponent()).collect();
            for f in &freqs {
                assert_eq!(f.mantissa(), 1, "embedding frequencies are powers of two");
            }
            for b in cme.floor_bottoms(t) {
                if exps[0] < b.scale as u32 {
                    return Err(SetsError::Depth { bit: exps[0] + 1, depth: b.scale as u32 });
                }
                let signs = freqs.iter().map(|a| sign_with(&ctx, t, &b, *a)).collect();
                pieces.push(FPiece { interval: b, tower: t, signs });
            }
            tower_exps.insert(t, exps);
        }
        pieces.sort_by(|a, b| a.interval.cmp_position(&b.interval));
        let t_bits = run_bits(j).max(1);
        let mut lm = f64::NEG_INFINITY;
        for p in &pieces {
            lm = log2_add(lm, -(p.interval.scale as f64));
        }
        let log2_measure = lm - (constraints + t_bits) as f64;
        out.push(FLevel { level: j, pieces, tower_exps, constraints, run_bits: t_bits, log2_measure });
    }
    check_disjoint(&out)?;
    Ok(out)
}

/// Default placement run: t_j = j digits.
pub fn default_run_bits(j: u32) -> u32 {
    j
}

/// F_j ∩ F_{j'} = ∅, checked on the pieces.
pub fn check_disjoint(levels: &[FLevel]) -> Result<(), SetsError> {
    let mut all: Vec<(DyadicInterval, u32)> = levels.iter().flat_map(|l| l.pieces.iter().map(move |p| (p.interval, l.level))).collect();
    all.sort_by(|a, b| a.0.cmp_position(&b.0));
    for w in all.windows(2) {
        if !w[0].0.left_of(&w[1].0) {
            return Err(SetsError::Overlap(w[0].1, w[1].1));
        }
    }
    Ok(())
}

/// Weight choice for f = Σ r_j χ_{F_j}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weights {
    /// r_j = 1/(L·|F_j|·loglog(4/|F_j|)), so ‖f‖_{L loglog L} ≈ 1
    Default,
    /// r_j = 1/(|F_j|·2^j·j)
    Inverse,
    /// log2 r_j given verbatim
    Log2(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalFunction {
    /// (level, log2 r_j, log2 |F_j|)
    pub parts: Vec<(u32, f64, f64)>,
    pub l1: f64,
    pub mu_norm: f64,
    pub phi0_norm: f64,
}

impl ExtremalFunction {
    pub fn log2_weight(&self, level: u32) -> f64 {
        self.parts.iter().find(|p| p.0 == level).map(|p| p.1).unwrap_or(f64::NEG_INFINITY)
    }
}

/// f = Σ r_j χ_{F_j} with cached norms.
pub fn assemble(levels: &[FLevel], weights: &Weights) -> Result<ExtremalFunction, SetsError> {
    check_disjoint(levels)?;
    if levels.is_empty() {
        return Err(SetsError::Empty);
    }
    let mu = FundamentalFunction::mu();
    let nl = levels.len() as f64;
    let mut parts = Vec::new();
    for (i, l) in levels.iter().enumerate() {
        let m = l.log2_measure;
        let lr = match weights {
            Weights::Default => -(nl.log2() + m + mu.log_factor(-m).log2()),
            Weights::Inverse => -(m + l.level as f64 + (l.level as f64).log2()),
            Weights::Log2(v) => *v.get(i).ok_or_else(|| SetsError::Weights(format!("{} weights for {} levels", v.len(), levels.len())))?,
        };
        parts.push((l.level, lr, m));
    }
    let lp: Vec<(f64, f64)> = parts.iter().map(|p| (p.1, p.2)).collect();
    let l1 = parts.iter().map(|p| (p.1 + p.2).exp2()).sum();
    Ok(ExtremalFunction { l1, mu_norm: lorentz_norm_parts(&lp, &mu), phi0_norm: lorentz_norm_parts(&lp, &FundamentalFunction::phi0()), parts })
}

/// {x ∈ I : sgn cos(2π a x) = s} by cell-centre evaluation at resolution r (zeros count as +1).
pub fn u_set(i: &DyadicInterval, a: u64, s: i8, r: u32) -> Result<MeasurableSet, SetsError> {
    if a == 0 || (a as u128) * 4 > (1u128 << r) {
        return Err(SetsError::Resolution { a, r });
    }
    let (lo, hi) = i.cell_range(r);
    let modulus: u128 = 1u128 << (r + 1);
    let mut runs = Vec::new();
    let mut start: Option<u64> = None;
    for c in lo..hi {
        // phase = frac(a (2c+1) / 2^{r+1})
        let num = (a as u128 * (2 * c as u128 + 1)) % modulus;
        let q = 4 * num;
        let positive = q <= modulus || q >= 3 * modulus;
        let keep = if s >= 0 { positive } else { !positive };
        match (keep, start) {
            (true, None) => start = Some(c),
            (false, Some(st)) => {
                runs.push((st, c));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        runs.push((st, hi));
    }
    Ok(MeasurableSet::from_runs(r, runs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunaryReport {
    pub min_ratio: f64,
    pub step: usize,
    pub kept: Vec<u64>,
    pub signs: Vec<i8>,
    /// |∩ U| / |I|
    pub achieved: f64,
    /// 2^{−c}
    pub target: f64,
    pub in_band: bool,
}

/// Subsamples a lacunary sequence to 2^σ separation, intersects the U-sets with alternating
/// signs on [0,1) at resolution r and compares the density with 2^{−c} (factor e band).
pub fn general_lacunary_mode(seq: &[u64], sigma: u32, r: u32) -> Result<LacunaryReport, SetsError> {
    if seq.len() < 2 {
        return Err(SetsError::Empty);
    }
    let ratios: Vec<f64> = seq.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let q = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if !(q >= LACUNARY_MIN) {
        return Err(SetsError::NonLacunary(q));
    }
    let step = ((sigma as f64 / q.log2()).ceil() as usize).max(1);
    let cap = 1u64 << (r - 2);
    let kept: Vec<u64> = seq.iter().copied().step_by(step).filter(|&a| a <= cap).collect();
    if kept.is_empty() {
        return Err(SetsError::Resolution { a: seq[0], r });
    }
    let signs: Vec<i8> = (0..kept.len()).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let unit = DyadicInterval::unit();
    let mut set = MeasurableSet::full(r);
    for (a, s) in kept.iter().zip(&signs) {
        set = set.intersection(&u_set(&unit, *a, *s, r)?);
    }
    let achieved = set.measure_f64();
    let target = (-(kept.len() as f64)).exp2();
    let e = std::f64::consts::E;
    Ok(LacunaryReport { min_ratio: q, step, in_band: achieved >= target / e && achieved <= target * e, kept, signs, achieved, target })
}
