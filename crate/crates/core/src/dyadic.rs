//! Dyadic intervals, finite unions of dyadic cells and step functions on [0,1).
//!
//! Everything here is exact: endpoints and measures are dyadic rationals held as
//! `BigRational`. Step functions are generic over [`Scalar`] so the same code runs
//! with exact rationals or with `f64` when quadrature is involved.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rat = BigRational;

/// 2^k as an exact rational, any sign of k.
pub fn pow2(k: i64) -> Rat {
    if k >= 0 {
        Rat::from_integer(BigInt::one() << (k as usize))
    } else {
        Rat::new(BigInt::one(), BigInt::one() << ((-k) as usize))
    }
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Numeric values a step function can carry.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn s_zero() -> Self;
    fn s_one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_rat(v: &Rat) -> Self;
    fn abs_val(&self) -> Self;
    fn as_f64(&self) -> f64;
    /// self * 2^k
    fn mul_pow2(&self, k: i64) -> Self;
    fn is_zero_val(&self) -> bool {
        *self == Self::s_zero()
    }
    fn max_val(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for Rat {
    fn s_zero() -> Self {
        Zero::zero()
    }
    fn s_one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }
    fn from_rat(v: &Rat) -> Self {
        v.clone()
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn as_f64(&self) -> f64 {
        rat_f64(self)
    }
    fn mul_pow2(&self, k: i64) -> Self {
        self * pow2(k)
    }
}

impl Scalar for f64 {
    fn s_zero() -> Self {
        0.0
    }
    fn s_one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_rat(v: &Rat) -> Self {
        rat_f64(v)
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn mul_pow2(&self, k: i64) -> Self {
        self * (k as f64).exp2()
    }
}

/// Dyadic interval [index·2^(−scale), (index+1)·2^(−scale)).
///
/// Negative scales describe frequency-axis intervals of length 2^|scale|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub scale: i32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn new(scale: i32, index: u64) -> Self {
        DyadicInterval { scale, index }
    }

    pub fn unit() -> Self {
        DyadicInterval { scale: 0, index: 0 }
    }

    pub fn len(&self) -> Rat {
        pow2(-(self.scale as i64))
    }

    pub fn left(&self) -> Rat {
        Rat::from_integer(BigInt::from(self.index)) * self.len()
    }

    pub fn right(&self) -> Rat {
        Rat::from_integer(BigInt::from(self.index + 1)) * self.len()
    }

    pub fn center(&self) -> Rat {
        (self.left() + self.right()) / Rat::from_integer(BigInt::from(2))
    }

    pub fn len_f64(&self) -> f64 {
        (-(self.scale as f64)).exp2()
    }

    pub fn left_f64(&self) -> f64 {
        self.index as f64 * self.len_f64()
    }

    pub fn center_f64(&self) -> f64 {
        (self.index as f64 + 0.5) * self.len_f64()
    }

    pub fn children(&self) -> (DyadicInterval, DyadicInterval) {
        let s = self.scale + 1;
        (
            DyadicInterval::new(s, self.index * 2),
            DyadicInterval::new(s, self.index * 2 + 1),
        )
    }

    pub fn left_child(&self) -> DyadicInterval {
        self.children().0
    }

    pub fn right_child(&self) -> DyadicInterval {
        self.children().1
    }

    pub fn parent(&self) -> DyadicInterval {
        DyadicInterval::new(self.scale - 1, self.index / 2)
    }

    /// Ancestor at a coarser (or equal) scale.
    pub fn ancestor(&self, scale: i32) -> DyadicInterval {
        assert!(scale <= self.scale);
        DyadicInterval::new(scale, self.index >> (self.scale - scale))
    }

    /// The 2^m dyadic subintervals of length |J|·2^(−m), left to right.
    pub fn subintervals(&self, m: u32) -> Vec<DyadicInterval> {
        let s = self.scale + m as i32;
        let base = self.index << m;
        (0..(1u64 << m)).map(|i| DyadicInterval::new(s, base + i)).collect()
    }

    /// other ⊆ self
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.scale >= self.scale && (other.index >> (other.scale - self.scale)) == self.index
    }

    pub fn disjoint(&self, other: &DyadicInterval) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    pub fn is_left_child(&self) -> bool {
        self.index.is_multiple_of(2)
    }

    /// Cell range [a, b) covered at resolution r ≥ scale.
    pub fn cell_range(&self, r: u32) -> (u64, u64) {
        let sh = r as i64 - self.scale as i64;
        assert!(sh >= 0, "resolution {} coarser than interval scale {}", r, self.scale);
        (self.index << sh, (self.index + 1) << sh)
    }

    /// Compare by position of left endpoints, ties by length (longer first).
    pub fn cmp_position(&self, other: &DyadicInterval) -> Ordering {
        let s = self.scale.max(other.scale);
        let a = (self.index as u128) << (s - self.scale);
        let b = (other.index as u128) << (s - other.scale);
        a.cmp(&b).then(self.scale.cmp(&other.scale))
    }

    /// Entirely to the left of other (no overlap).
    pub fn left_of(&self, other: &DyadicInterval) -> bool {
        let s = self.scale.max(other.scale);
        let self_hi = ((self.index + 1) as u128) << (s - self.scale);
        let other_lo = (other.index as u128) << (s - other.scale);
        self_hi <= other_lo
    }

    pub fn to_real(&self) -> RealInterval {
        RealInterval::new(self.left(), self.right())
    }
}

/// Half-open interval with exact dyadic-rational endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealInterval {
    pub lo: Rat,
    pub hi: Rat,
}

impl RealInterval {
    pub fn new(lo: Rat, hi: Rat) -> Self {
        assert!(lo < hi, "empty real interval");
        RealInterval { lo, hi }
    }

    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn center(&self) -> Rat {
        (&self.lo + &self.hi) / Rat::from_integer(BigInt::from(2))
    }

    /// Dilation by a about the center.
    pub fn dilate(&self, a: &Rat) -> RealInterval {
        let c = self.center();
        let half = self.len() * a / Rat::from_integer(BigInt::from(2));
        RealInterval::new(&c - &half, &c + &half)
    }

    pub fn contains_interval(&self, other: &RealInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &RealInterval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    /// Distance between closed hulls, 0 when they overlap or touch.
    pub fn distance(&self, other: &RealInterval) -> Rat {
        if self.hi < other.lo {
            &other.lo - &self.hi
        } else if other.hi < self.lo {
            &self.lo - &other.hi
        } else {
            Rat::zero()
        }
    }

    pub fn lo_f64(&self) -> f64 {
        rat_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        rat_f64(&self.hi)
    }
}

/// The two components c − 17/2·|I| .. c − 3/2·|I| and c + 3/2·|I| .. c + 17/2·|I|.
pub fn star(i: &DyadicInterval) -> (RealInterval, RealInterval) {
    let c = i.center();
    let l = i.len();
    let a = rat(17, 2) * &l;
    let b = rat(3, 2) * &l;
    (
        RealInterval::new(&c - &a, &c - &b),
        RealInterval::new(&c + &b, &c + &a),
    )
}

/// Float version of the star, (lo, hi) pairs.
pub fn star_f64(i: &DyadicInterval) -> [(f64, f64); 2] {
    let c = i.center_f64();
    let l = i.len_f64();
    [(c - 8.5 * l, c - 1.5 * l), (c + 1.5 * l, c + 8.5 * l)]
}

/// Finite union of resolution-R cells in [0,1), stored as merged half-open runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurableSet {
    pub resolution: u32,
    runs: Vec<(u64, u64)>,
}

impl MeasurableSet {
    pub fn empty(resolution: u32) -> Self {
        MeasurableSet { resolution, runs: Vec::new() }
    }

    pub fn full(resolution: u32) -> Self {
        MeasurableSet { resolution, runs: vec![(0, 1u64 << resolution)] }
    }

    pub fn from_interval(resolution: u32, i: &DyadicInterval) -> Self {
        MeasurableSet { resolution, runs: vec![i.cell_range(resolution)] }
    }

    pub fn from_cells(resolution: u32, cells: &[u64]) -> Self {
        let mut c = cells.to_vec();
        c.sort_unstable();
        c.dedup();
        let runs = c.into_iter().map(|x| (x, x + 1)).collect();
        Self::from_runs(resolution, runs)
    }

    /// Accepts arbitrary (possibly overlapping, unsorted) runs.
    pub fn from_runs(resolution: u32, mut runs: Vec<(u64, u64)>) -> Self {
        let cap = 1u64 << resolution;
        runs.retain(|r| r.0 < r.1);
        for r in &runs {
            assert!(r.1 <= cap, "cell outside [0,1) at resolution {}", resolution);
        }
        runs.sort_unstable();
        let mut out: Vec<(u64, u64)> = Vec::with_capacity(runs.len());
        for (a, b) in runs {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        MeasurableSet { resolution, runs: out }
    }

    pub fn runs(&self) -> &[(u64, u64)] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn cell_count(&self) -> u64 {
        self.runs.iter().map(|r| r.1 - r.0).sum()
    }

    pub fn measure(&self) -> Rat {
        Rat::from_integer(BigInt::from(self.cell_count())) * pow2(-(self.resolution as i64))
    }

    pub fn measure_f64(&self) -> f64 {
        self.cell_count() as f64 * (-(self.resolution as f64)).exp2()
    }

    pub fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.runs.iter().flat_map(|r| r.0..r.1)
    }

    pub fn contains_cell(&self, c: u64) -> bool {
        self.runs.binary_search_by(|r| {
            if r.1 <= c {
                Ordering::Less
            } else if r.0 > c {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        }).is_ok()
    }

    pub fn refine(&self, resolution: u32) -> Self {
        assert!(resolution >= self.resolution);
        let sh = resolution - self.resolution;
        MeasurableSet {
            resolution,
            runs: self.runs.iter().map(|r| (r.0 << sh, r.1 << sh)).collect(),
        }
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        let r = self.resolution.max(other.resolution);
        (self.refine(r), other.refine(r))
    }

    pub fn union(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        let mut runs = a.runs;
        runs.extend(b.runs);
        Self::from_runs(a.resolution, runs)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.runs.len() && j < b.runs.len() {
            let lo = a.runs[i].0.max(b.runs[j].0);
            let hi = a.runs[i].1.min(b.runs[j].1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a.runs[i].1 < b.runs[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        MeasurableSet { resolution: a.resolution, runs: out }
    }

    pub fn difference(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        let mut out = Vec::new();
        let mut j = 0;
        for &(lo, hi) in &a.runs {
            let mut cur = lo;
            while j < b.runs.len() && b.runs[j].1 <= cur {
                j += 1;
            }
            let mut k = j;
            while k < b.runs.len() && b.runs[k].0 < hi {
                if b.runs[k].0 > cur {
                    out.push((cur, b.runs[k].0));
                }
                cur = cur.max(b.runs[k].1);
                if cur >= hi {
                    break;
                }
                k += 1;
            }
            if cur < hi {
                out.push((cur, hi));
            }
        }
        MeasurableSet { resolution: a.resolution, runs: out }
    }

    /// |self ∩ I| in cells of this resolution (I must be resolvable).
    pub fn cells_in(&self, i: &DyadicInterval) -> u64 {
        let (lo, hi) = i.cell_range(self.resolution);
        let start = self.runs.partition_point(|r| r.1 <= lo);
        let mut n = 0;
        for r in &self.runs[start..] {
            if r.0 >= hi {
                break;
            }
            n += r.1.min(hi) - r.0.max(lo);
        }
        n
    }

    pub fn measure_in(&self, i: &DyadicInterval) -> Rat {
        Rat::from_integer(BigInt::from(self.cells_in(i))) * pow2(-(self.resolution as i64))
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn subset_of_interval(&self, i: &DyadicInterval) -> bool {
        self.cells_in(i) == self.cell_count()
    }
}

/// Piecewise-constant function on the 2^R cells of [0,1).
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction<T: Scalar> {
    pub resolution: u32,
    pub values: Vec<T>,
}

pub type ExactStep = StepFunction<Rat>;
pub type NumStep = StepFunction<f64>;

impl<T: Scalar> StepFunction<T> {
    pub fn new(resolution: u32, values: Vec<T>) -> Self {
        assert_eq!(values.len() as u64, 1u64 << resolution, "value count must be 2^R");
        StepFunction { resolution, values }
    }

    pub fn constant(resolution: u32, v: T) -> Self {
        StepFunction { resolution, values: vec![v; 1usize << resolution] }
    }

    pub fn zero(resolution: u32) -> Self {
        Self::constant(resolution, T::s_zero())
    }

    pub fn from_fn(resolution: u32, f: impl Fn(u64) -> T) -> Self {
        StepFunction { resolution, values: (0..(1u64 << resolution)).map(f).collect() }
    }

    pub fn indicator(set: &MeasurableSet) -> Self {
        let mut v = vec![T::s_zero(); 1usize << set.resolution];
        for c in set.cells() {
            v[c as usize] = T::s_one();
        }
        StepFunction { resolution: set.resolution, values: v }
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn refine(&self, resolution: u32) -> Self {
        assert!(resolution >= self.resolution);
        let k = 1usize << (resolution - self.resolution);
        let mut v = Vec::with_capacity(self.values.len() * k);
        for x in &self.values {
            for _ in 0..k {
                v.push(x.clone());
            }
        }
        StepFunction { resolution, values: v }
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        StepFunction { resolution: self.resolution, values: self.values.iter().map(f).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs_val())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        let r = self.resolution.max(other.resolution);
        let a = if self.resolution < r { self.refine(r) } else { self.clone() };
        let b = if other.resolution < r { other.refine(r) } else { other.clone() };
        StepFunction {
            resolution: r,
            values: a.values.iter().zip(b.values.iter()).map(|(x, y)| f(x, y)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|v| v.clone() * c.clone())
    }

    fn sum_values<'a>(it: impl Iterator<Item = &'a T>) -> T
    where
        T: 'a,
    {
        it.fold(T::s_zero(), |acc, v| acc + v.clone())
    }

    pub fn integral(&self) -> T {
        Self::sum_values(self.values.iter()).mul_pow2(-(self.resolution as i64))
    }

    pub fn l1_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::s_zero(), |acc, v| acc + v.abs_val())
            .mul_pow2(-(self.resolution as i64))
    }

    pub fn linf_norm(&self) -> T {
        self.values.iter().fold(T::s_zero(), |acc, v| acc.max_val(v.abs_val()))
    }

    /// Mean over a dyadic interval resolvable at this resolution.
    pub fn mean_on(&self, i: &DyadicInterval) -> T {
        let (a, b) = i.cell_range(self.resolution);
        let s = Self::sum_values(self.values[a as usize..b as usize].iter());
        s.mul_pow2(-((b - a).trailing_zeros() as i64))
    }

    /// max_i v_i·|{|f| ≥ v_i}| over the distinct magnitudes, which is the supremum
    /// of λ·|{|f| > λ}|.
    pub fn weak_l1_norm(&self) -> T {
        let mut mags: Vec<T> = self.values.iter().map(|v| v.abs_val()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        let mut best = T::s_zero();
        let mut i = 0;
        while i < mags.len() {
            let mut j = i;
            while j < mags.len() && mags[j] == mags[i] {
                j += 1;
            }
            let cand = mags[i].clone() * T::from_i64(j as i64);
            if cand > best {
                best = cand;
            }
            i = j;
        }
        best.mul_pow2(-(self.resolution as i64))
    }

    /// sup over dyadic I at scales 0..=R of (1/|I|)∫_I |f − mean_I f|.
    pub fn dyadic_bmo_norm(&self) -> T {
        let r = self.resolution;
        let mut best = T::s_zero();
        for s in 0..r {
            let width = 1usize << (r - s);
            for blk in self.values.chunks(width) {
                let mean = Self::sum_values(blk.iter()).mul_pow2(-((r - s) as i64));
                let osc = blk
                    .iter()
                    .fold(T::s_zero(), |acc, v| acc + (v.clone() - mean.clone()).abs_val())
                    .mul_pow2(-((r - s) as i64));
                if osc > best {
                    best = osc;
                }
            }
        }
        best
    }

    /// Dyadic Hardy-Littlewood maximal function of |f|.
    pub fn hl_maximal(&self) -> Self {
        let r = self.resolution as usize;
        // sums[s][i] = Σ |f| over the cells of the scale-s interval i
        let mut sums: Vec<Vec<T>> = vec![Vec::new(); r + 1];
        sums[r] = self.values.iter().map(|v| v.abs_val()).collect();
        for s in (0..r).rev() {
            let fine = &sums[s + 1];
            let coarse: Vec<T> =
                fine.chunks(2).map(|c| c[0].clone() + c[1].clone()).collect();
            sums[s] = coarse;
        }
        let mut best: Vec<T> = vec![sums[0][0].clone().mul_pow2(-(r as i64))];
        for s in 1..=r {
            let shift = -((r - s) as i64);
            best = sums[s]
                .iter()
                .enumerate()
                .map(|(i, v)| best[i / 2].clone().max_val(v.clone().mul_pow2(shift)))
                .collect();
        }
        StepFunction { resolution: self.resolution, values: best }
    }

    pub fn to_f64(&self) -> NumStep {
        StepFunction { resolution: self.resolution, values: self.values.iter().map(|v| v.as_f64()).collect() }
    }
}

impl ExactStep {
    /// Measure of {|f| > λ}, exact.
    pub fn strict_superlevel_measure(&self, lambda: &Rat) -> Rat {
        let n = self.values.iter().filter(|v| v.abs() > *lambda).count();
        Rat::from_integer(BigInt::from(n)) * pow2(-(self.resolution as i64))
    }
}
