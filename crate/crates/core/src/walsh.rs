//! Exact Walsh system in the Paley order, wave packets, bitiles and the
//! partial-sum identities. Values of step functions are kept as integers over a
//! common denominator so every identity is checked with zero tolerance.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dyadic::{pow2, DyadicInterval, NumStep, Rat, StepFunction};

/// Reverse the low `r` bits of c.
pub fn bit_reverse(c: u64, r: u32) -> u64 {
    if r == 0 {
        0
    } else {
        c.reverse_bits() >> (64 - r)
    }
}

/// w_n at the center of cell c of resolution r (needs 2^r > n).
///
/// The i-th Rademacher factor sgn sin(2^{i+1}πx) is (−1)^{x_{i+1}}, x_{i+1}
/// being the (i+1)-th binary digit of x, so w_n = (−1)^{popcount(n & digits)}.
pub fn walsh_cell(n: u64, c: u64, r: u32) -> i8 {
    debug_assert!(r >= 64 || n < (1u64 << r), "resolution too coarse for w_{}", n);
    if (n & bit_reverse(c, r)).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// w_n(x) for an exact rational x; 0 off [0,1) and at zeros of a factor.
pub fn walsh(n: u64, x: &Rat) -> i8 {
    if x.is_negative() || *x >= Rat::one() {
        return 0;
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut sign = 1i8;
    let mut m = n;
    let mut i = 0i64;
    while m > 0 {
        if m & 1 == 1 {
            let y = x * pow2(i);
            let frac = &y - y.floor();
            if frac.is_zero() || frac == half {
                return 0;
            }
            if frac > half {
                sign = -sign;
            }
        }
        m >>= 1;
        i += 1;
    }
    sign
}

pub fn walsh_step(n: u64, r: u32) -> StepFunction<Rat> {
    StepFunction::from_fn(r, |c| Rat::from_integer(BigInt::from(walsh_cell(n, c, r))))
}

/// ±2^{half_pow/2}, the exact value of a wave packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketValue {
    pub sign: i8,
    pub half_pow: u32,
}

impl PacketValue {
    pub fn to_f64(&self) -> f64 {
        self.sign as f64 * (self.half_pow as f64 / 2.0).exp2()
    }
    /// value², exact.
    pub fn square(&self) -> Rat {
        if self.sign == 0 {
            Rat::zero()
        } else {
            pow2(self.half_pow as i64)
        }
    }
}

/// w_{n,l,j}(x) = 2^{j/2} w_n(2^j x − l).
pub fn wave_packet(n: u64, l: u64, j: u32, x: &Rat) -> PacketValue {
    let y = x * pow2(j as i64) - Rat::from_integer(BigInt::from(l));
    PacketValue { sign: walsh(n, &y), half_pow: j }
}

/// Area-one tile I × [2^j n, 2^j (n+1)) with |I| = 2^{-j}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WalshTile {
    pub j: u32,
    pub l: u64,
    pub n: u64,
}

impl WalshTile {
    pub fn time(&self) -> DyadicInterval {
        DyadicInterval::new(self.j as i32, self.l)
    }

    /// Frequency interval as [lo, hi).
    pub fn freq(&self) -> (u64, u64) {
        (self.n << self.j, (self.n + 1) << self.j)
    }

    /// Unnormalized packet w_n(2^j x − l) on cell c of resolution r: ±1 inside I, 0 outside.
    pub fn unit_value(&self, c: u64, r: u32) -> i8 {
        let sh = r - self.j;
        if c >> sh != self.l {
            return 0;
        }
        walsh_cell(self.n, c - (self.l << sh), sh)
    }
}

/// Area-two bitile I × [2^{j+1} q, 2^{j+1}(q+1)), |I| = 2^{-j}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WalshBitile {
    pub j: u32,
    pub l: u64,
    pub q: u64,
}

impl WalshBitile {
    pub fn upper(&self) -> WalshTile {
        WalshTile { j: self.j, l: self.l, n: 2 * self.q + 1 }
    }
    pub fn lower(&self) -> WalshTile {
        WalshTile { j: self.j, l: self.l, n: 2 * self.q }
    }
    pub fn left_son(&self) -> WalshTile {
        WalshTile { j: self.j + 1, l: 2 * self.l, n: self.q }
    }
    pub fn right_son(&self) -> WalshTile {
        WalshTile { j: self.j + 1, l: 2 * self.l + 1, n: self.q }
    }

    /// Bitiles with time scale j and ν ∈ ω_{R_u}; empty unless bit j of ν is set.
    pub fn with_upper_containing(nu: u64, j: u32) -> Option<u64> {
        if (nu >> j) & 1 == 1 {
            Some(nu >> (j + 1))
        } else {
            None
        }
    }
}

/// Step function as integers over a common denominator: f = a / den.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaled {
    pub r: u32,
    pub den: BigInt,
    pub a: Vec<BigInt>,
}

impl Scaled {
    pub fn from_step(f: &StepFunction<Rat>) -> Self {
        let den = f.values.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let a = f.values.iter().map(|v| v.numer() * (&den / v.denom())).collect();
        Scaled { r: f.resolution, den, a }
    }

    /// acc / (den·2^r) as an exact step function.
    fn finish(&self, acc: Vec<BigInt>) -> StepFunction<Rat> {
        let d = &self.den << (self.r as usize);
        StepFunction::new(self.r, acc.into_iter().map(|v| Rat::new(v, d.clone())).collect())
    }

    /// 2^r·den·⟨f, w_k⟩
    pub fn coeff(&self, k: u64) -> BigInt {
        let mut s = BigInt::zero();
        for (c, v) in self.a.iter().enumerate() {
            if walsh_cell(k, c as u64, self.r) > 0 {
                s += v;
            } else {
                s -= v;
            }
        }
        s
    }
}

/// ⟨f, w_k⟩ exactly.
pub fn walsh_coefficient(f: &StepFunction<Rat>, k: u64) -> Rat {
    let s = Scaled::from_step(f);
    Rat::new(s.coeff(k), &s.den << (s.r as usize))
}

/// Route A: W_n f = Σ_{k=0}^{n} ⟨f,w_k⟩ w_k.
pub fn partial_sum_direct(f: &StepFunction<Rat>, n: u64) -> StepFunction<Rat> {
    let s = Scaled::from_step(f);
    partial_sums_direct_scaled(&s, &[n]).pop().unwrap()
}

/// W_{n} f for every n in `ns` (sorted or not), sharing coefficient work.
pub fn partial_sums_direct_scaled(s: &Scaled, ns: &[u64]) -> Vec<StepFunction<Rat>> {
    let max = ns.iter().copied().max().unwrap_or(0);
    let cells = s.a.len();
    let mut acc = vec![BigInt::zero(); cells];
    let mut snapshots: Vec<Option<Vec<BigInt>>> = vec![None; ns.len()];
    for k in 0..=max {
        let ck = s.coeff(k);
        if !ck.is_zero() {
            for (c, v) in acc.iter_mut().enumerate() {
                if walsh_cell(k, c as u64, s.r) > 0 {
                    *v += &ck;
                } else {
                    *v -= &ck;
                }
            }
        }
        for (i, &n) in ns.iter().enumerate() {
            if n == k {
                snapshots[i] = Some(acc.clone());
            }
        }
    }
    snapshots.into_iter().map(|v| s.finish(v.unwrap())).collect()
}

/// Route B: Σ_R ⟨f, w_{R_l}⟩ w_{R_l} χ_{ω_{R_u}}(ν). This equals W_{ν−1} f; the
/// Σ_{k=0}^{n} form is therefore route B evaluated at ν = n + 1.
pub fn bitile_sum(f: &StepFunction<Rat>, nu: u64) -> StepFunction<Rat> {
    let s = Scaled::from_step(f);
    bitile_sum_scaled(&s, nu)
}

pub fn bitile_sum_scaled(s: &Scaled, nu: u64) -> StepFunction<Rat> {
    let r = s.r;
    let mut acc = vec![BigInt::zero(); s.a.len()];
    for j in 0..=r {
        let q = match WalshBitile::with_upper_containing(nu, j) {
            Some(q) => q,
            None => continue,
        };
        let m = 2 * q;
        let sh = r - j;
        let width = 1usize << sh;
        let signs: Vec<i8> = (0..width as u64).map(|c| walsh_cell(m, c, sh)).collect();
        for l in 0..(1usize << j) {
            let base = l * width;
            let mut ip = BigInt::zero();
            for (t, &sg) in signs.iter().enumerate() {
                if sg > 0 {
                    ip += &s.a[base + t];
                } else {
                    ip -= &s.a[base + t];
                }
            }
            if ip.is_zero() {
                continue;
            }
            let contrib = ip << (j as usize);
            for (t, &sg) in signs.iter().enumerate() {
                if sg > 0 {
                    acc[base + t] += &contrib;
                } else {
                    acc[base + t] -= &contrib;
                }
            }
        }
    }
    s.finish(acc)
}

/// Partial sum W_n f through the bitile route.
pub fn partial_sum_bitile(f: &StepFunction<Rat>, n: u64) -> StepFunction<Rat> {
    bitile_sum(f, n + 1)
}

/// Conditional expectation onto the dyadic cells of scale l.
pub fn conditional_expectation(f: &StepFunction<Rat>, l: u32) -> StepFunction<Rat> {
    assert!(l <= f.resolution);
    let w = 1usize << (f.resolution - l);
    let mut out = Vec::with_capacity(f.values.len());
    for blk in f.values.chunks(w) {
        let m = blk.iter().fold(Rat::zero(), |a, v| a + v) / Rat::from_integer(BigInt::from(w));
        for _ in 0..w {
            out.push(m.clone());
        }
    }
    StepFunction::new(f.resolution, out)
}

/// u_{R_u} = u_{l^R} − u_{r^R} and u_{R_l} = u_{l^R} + u_{r^R} on every cell,
/// the 2^{j/2} normalizations having been divided out of both sides.
pub fn recursions_check(b: &WalshBitile, r: u32) -> bool {
    assert!(b.j < r);
    let (u, lo, ls, rs) = (b.upper(), b.lower(), b.left_son(), b.right_son());
    (0..(1u64 << r)).all(|c| {
        let (a_u, a_l) = (u.unit_value(c, r) as i32, lo.unit_value(c, r) as i32);
        let (s_l, s_r) = (ls.unit_value(c, r) as i32, rs.unit_value(c, r) as i32);
        a_u == s_l - s_r && a_l == s_l + s_r
    })
}

/// Σ_{n<2^L} w_n = Π_{i<L} (r_0 + r_{2^i}) with r_0 ≡ 1, r_{2^i} = w_{2^i}.
pub fn product_identity(l: u32, r: u32) -> bool {
    assert!(l <= r);
    (0..(1u64 << r)).all(|c| {
        let sum: i64 = (0..(1u64 << l)).map(|n| walsh_cell(n, c, r) as i64).sum();
        let prod: i64 = (0..l).map(|i| 1 + walsh_cell(1 << i, c, r) as i64).product();
        sum == prod
    })
}

/// W_{2^L−1} f − W_{2^L−2^M−1} f equals the product-kernel pairing, exactly.
pub fn difference_identity(l: u32, m: u32, f: &StepFunction<Rat>) -> bool {
    assert!(m < l && l <= f.resolution);
    let s = Scaled::from_step(f);
    let hi = (1u64 << l) - 1;
    let lo = (1u64 << l) - (1u64 << m) - 1;
    let sums = partial_sums_direct_scaled(&s, &[hi, lo]);
    let direct = sums[0].add(&sums[1].scale(&-Rat::one()));
    let r = s.r;
    let cells = 1u64 << r;
    let rad: Vec<Vec<i64>> = (0..l).map(|i| (0..cells).map(|c| walsh_cell(1 << i, c, r) as i64).collect()).collect();
    let mut acc = vec![BigInt::zero(); cells as usize];
    for x in 0..cells as usize {
        let mut total = BigInt::zero();
        for y in 0..cells as usize {
            let mut k: i64 = 1;
            for i in 0..l as usize {
                let p = rad[i][x] * rad[i][y];
                k *= if i >= m as usize { p } else { 1 + p };
                if k == 0 {
                    break;
                }
            }
            if k != 0 {
                total += &s.a[y] * k;
            }
        }
        acc[x] = total;
    }
    s.finish(acc) == direct
}

/// sup_j |W_{n_j} f|, exact.
pub fn c_w(f: &StepFunction<Rat>, seq: &[u64]) -> StepFunction<Rat> {
    let s = Scaled::from_step(f);
    let sums = partial_sums_direct_scaled(&s, seq);
    let mut out = StepFunction::zero(f.resolution);
    for w in sums {
        for (o, v) in out.values.iter_mut().zip(w.values.iter()) {
            let a = v.abs();
            if a > *o {
                *o = a;
            }
        }
    }
    out
}

/// Single-scale bitile model for ν = 2^j: the bitiles of scale j only.
pub fn single_scale_model(f: &StepFunction<Rat>, j: u32) -> StepFunction<Rat> {
    bitile_sum(f, 1u64 << j)
}

/// p.v. ∫_cell cot(π(x − y)) dy for x at a cell center, by the closed form
/// (1/π) ln|sin π(x−a) / sin π(x−b)|.
fn cot_cell_integral(x: f64, a: f64, b: f64) -> f64 {
    let num = (std::f64::consts::PI * (x - a)).sin().abs();
    let den = (std::f64::consts::PI * (x - b)).sin().abs();
    (num / den).ln() / std::f64::consts::PI
}

/// Periodic conjugate function p.v. ∫ cot(π(x−y)) g(y) dy at cell centers.
pub fn conjugate_cells(g: &[f64], r: u32) -> Vec<f64> {
    let n = g.len();
    let h = (-(r as f64)).exp2();
    // kernel depends only on the cell offset
    let kern: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                0.0
            } else {
                let x = 0.5 * h;
                let a = d as f64 * h;
                cot_cell_integral(x, a, a + h)
            }
        })
        .collect();
    (0..n)
        .map(|xc| {
            let mut s = 0.0;
            for (yc, gv) in g.iter().enumerate() {
                if *gv != 0.0 {
                    let d = (yc + n - xc) % n;
                    s += gv * kern[d];
                }
            }
            s
        })
        .collect()
}

/// Averaged Walsh model sup_j |∫ w_{n_j}(x) w_{n_j}(−y) cot(π(x−y)) f(y) dy|.
pub fn c_aw(f: &StepFunction<Rat>, seq: &[u64]) -> NumStep {
    let r = f.resolution;
    let n = f.values.len();
    let fv: Vec<f64> = f.values.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let mut out = vec![0.0f64; n];
    for &nj in seq {
        // w(−y) for y in cell c is w at cell 2^r − 1 − c under periodic extension
        let g: Vec<f64> = (0..n).map(|c| fv[c] * walsh_cell(nj, (n - 1 - c) as u64, r) as f64).collect();
        let conj = conjugate_cells(&g, r);
        for c in 0..n {
            let v = (walsh_cell(nj, c as u64, r) as f64 * conj[c]).abs();
            if v > out[c] {
                out[c] = v;
            }
        }
    }
    StepFunction::new(r, out)
}

/// Exact column sum of the Walsh boundary-cancellation experiment.
///
/// For each tile P in the column (time interval `i_d`, all at frequency a0) the
/// bitile R with R_u ∋ a0 at that scale contributes ⟨χ_F, w_{R_l}⟩⟨w_{a0} w_{R_l}, χ_E⟩.
pub fn walsh_column_sum(f_set: &[bool], e_set: &[bool], r: u32, a0: u64, column: &[DyadicInterval]) -> Rat {
    let mut total = Rat::zero();
    for i in column {
        let j = i.scale as u32;
        let q = match WalshBitile::with_upper_containing(a0, j) {
            Some(q) => q,
            None => continue,
        };
        let lower = WalshTile { j, l: i.index, n: 2 * q };
        let (lo, hi) = i.cell_range(r);
        let mut ip_f: i64 = 0;
        let mut ip_e: i64 = 0;
        for c in lo..hi {
            let u = lower.unit_value(c, r) as i64;
            if f_set[c as usize] {
                ip_f += u;
            }
            if e_set[c as usize] {
                ip_e += u * walsh_cell(a0, c, r) as i64;
            }
        }
        // 2^j·(ip_f 2^{-r})·(ip_e 2^{-r})
        total += Rat::from_integer(BigInt::from(ip_f) * BigInt::from(ip_e)) * pow2(j as i64 - 2 * r as i64);
    }
    total
}

/// Walsh column: I_l = [0, 2^{-l}) for l < height, E = I_height, a₀ = 2^r − 1, and F_l the
/// cells of I_l \ I_{l+1} where the lower packet of the bitile over I_l is positive. Terms are
/// the exact per-scale contributions of `walsh_column_sum`.
pub fn walsh_column(height: u32, r: u32) -> Vec<Rat> {
    assert!(height < r, "resolution must exceed the column height");
    let a0 = (1u64 << r) - 1;
    let n = 1usize << r;
    let mut e = vec![false; n];
    for c in 0..(1u64 << (r - height)) {
        e[c as usize] = true;
    }
    let mut f = vec![false; n];
    for l in 0..height {
        let q = match WalshBitile::with_upper_containing(a0, l) {
            Some(q) => q,
            None => continue,
        };
        let lower = WalshTile { j: l, l: 0, n: 2 * q };
        for c in (1u64 << (r - l - 1))..(1u64 << (r - l)) {
            if lower.unit_value(c, r) > 0 {
                f[c as usize] = true;
            }
        }
    }
    (0..height).map(|l| walsh_column_sum(&f, &e, r, a0, &[DyadicInterval::new(l as i32, 0)])).collect()
}
