//! Fourier side: the kernel ψ, tile operators T_P and T_P^*, the operator decomposition on a
//! built embedding, the alignment ratio, direct lacunary Carleson evaluation and the
//! wave-packet model.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cme::Cme;
use crate::dyadic::{DyadicInterval, StepFunction};
use crate::norms::weak_norm_samples;
use crate::setsbuild::{ExtremalFunction, FLevel};
use crate::tiles::{e_set, Freq, Linearization, Tile};

/// C∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    let f = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = f(t);
        a / (a + f(1.0 - t))
    }
}

/// η ≡ 1 on [−4,4], 0 off (−8,8), nonincreasing in |y|.
pub fn eta(y: f64) -> f64 {
    smooth_step((8.0 - y.abs()) / 4.0)
}

/// ψ(y) = (η(y) − η(2y))/y, odd, supported in 2 < |y| < 8.
pub fn psi(y: f64) -> f64 {
    let a = y.abs();
    if a <= 2.0 || a >= 8.0 {
        0.0
    } else {
        (eta(y) - eta(2.0 * y)) / y
    }
}

/// ψ_k(y) = 2^k ψ(2^k y).
pub fn psi_k(k: i32, y: f64) -> f64 {
    let s = (k as f64).exp2();
    s * psi(s * y)
}

const PANELS: usize = 8192;

/// Tabulated antiderivatives Ψ' = ψ and Ψ₂' = Ψ on [−8, 8] with Hermite interpolation.
#[derive(Clone, Debug)]
pub struct Kernel {
    h: f64,
    big: Vec<f64>,
    big2: Vec<f64>,
}

fn hermite(t: f64, h: f64, p0: f64, m0: f64, p1: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * h * m1
}

impl Default for Kernel {
    fn default() -> Self {
        Self::new()
    }
}

impl Kernel {
    pub fn new() -> Self {
        let h = 16.0 / PANELS as f64;
        let node = |i: usize| -8.0 + i as f64 * h;
        let mut big = vec![0.0; PANELS + 1];
        // Simpson per panel on the left half, mirrored: Ψ is even
        for i in 0..PANELS / 2 {
            let (a, b) = (node(i), node(i + 1));
            big[i + 1] = big[i] + h / 6.0 * (psi(a) + 4.0 * psi(0.5 * (a + b)) + psi(b));
        }
        for i in PANELS / 2 + 1..=PANELS {
            big[i] = big[PANELS - i];
        }
        let mut big2 = vec![0.0; PANELS + 1];
        for i in 0..PANELS {
            // exact integral of the Hermite interpolant of Ψ
            big2[i + 1] = big2[i] + h / 2.0 * (big[i] + big[i + 1]) + h * h / 12.0 * (psi(node(i)) - psi(node(i + 1)));
        }
        Kernel { h, big, big2 }
    }

    fn locate(&self, y: f64) -> (usize, f64) {
        let u = (y + 8.0) / self.h;
        let i = (u.floor() as usize).min(PANELS - 1);
        (i, u - i as f64)
    }

    /// Ψ(y) = ∫_{−∞}^y ψ.
    pub fn big_psi(&self, y: f64) -> f64 {
        if y <= -8.0 || y >= 8.0 {
            return 0.0;
        }
        let (i, t) = self.locate(y);
        let (a, b) = (-8.0 + i as f64 * self.h, -8.0 + (i + 1) as f64 * self.h);
        hermite(t, self.h, self.big[i], psi(a), self.big[i + 1], psi(b))
    }

    /// Ψ₂(y) = ∫_{−∞}^y Ψ.
    pub fn big_psi2(&self, y: f64) -> f64 {
        if y <= -8.0 {
            return 0.0;
        }
        if y >= 8.0 {
            return self.big2[PANELS];
        }
        let (i, t) = self.locate(y);
        hermite(t, self.h, self.big2[i], self.big[i], self.big2[i + 1], self.big[i + 1])
    }

    /// ∫_lo^hi ψ_k(x − y) dy.
    pub fn psi_k_integral(&self, k: i32, x: f64, lo: f64, hi: f64) -> f64 {
        let s = (k as f64).exp2();
        self.big_psi(s * (x - lo)) - self.big_psi(s * (x - hi))
    }

    /// G(y) = ∫_a^b ψ_k(x − y) dx for an E-run [a, b).
    pub fn g_run(&self, k: i32, a: f64, b: f64, y: f64) -> f64 {
        let s = (k as f64).exp2();
        self.big_psi(s * (b - y)) - self.big_psi(s * (a - y))
    }

    /// ∫_lo^hi G(y) dy for an E-run [a, b).
    pub fn g_run_integral(&self, k: i32, a: f64, b: f64, lo: f64, hi: f64) -> f64 {
        let s = (k as f64).exp2();
        let w = |c: f64| (self.big_psi2(s * (c - lo)) - self.big_psi2(s * (c - hi))) / s;
        w(b) - w(a)
    }
}

/// e^{iθ}.
pub(crate) fn cis(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

pub(crate) fn two_pi() -> f64 {
    2.0 * PI
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Gauss–Legendre (8 points) on [a, b].
fn gauss(a: f64, b: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL8.iter().map(|&(t, w)| f(m + r * t) * (w * r)).sum()
}

/// Complex step function on the 2^{-r} grid of [0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct CStep {
    pub resolution: u32,
    pub values: Vec<Complex64>,
}

impl CStep {
    pub fn zero(resolution: u32) -> Self {
        CStep { resolution, values: vec![Complex64::new(0.0, 0.0); 1usize << resolution] }
    }

    pub fn from_real(f: &StepFunction<f64>) -> Self {
        CStep { resolution: f.resolution, values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    fn h(&self) -> f64 {
        (-(self.resolution as f64)).exp2()
    }

    /// ⟨f, g⟩ = ∫ f ḡ.
    pub fn inner(&self, other: &CStep) -> Complex64 {
        assert_eq!(self.resolution, other.resolution);
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.h()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Cells with a nonzero value.
    pub fn support(&self) -> Vec<u64> {
        self.values.iter().enumerate().filter(|(_, v)| v.norm() > 0.0).map(|(c, _)| c as u64).collect()
    }
}

fn freq_u64(a: &Freq) -> u64 {
    a.to_u64().filter(|&v| v < 1u64 << 53).expect("numeric tile operators need frequencies below 2^53")
}

/// frac(N·y) for y the b-th of m midpoint nodes of cell d at resolution r, exactly.
fn node_phase(n: u64, d: u64, b: usize, m: usize, r: u32) -> f64 {
    let modulus: u128 = (2 * m as u128) << r;
    let num = (n as u128 * (2 * (d as u128 * m as u128 + b as u128) + 1)) % modulus;
    num as f64 / modulus as f64
}

fn node(d: u64, b: usize, m: usize, h: f64) -> f64 {
    (d as f64 + (b as f64 + 0.5) / m as f64) * h
}

/// Cells meeting the reach x ± 8|I| of I.
fn reach_cells(i: &DyadicInterval, r: u32) -> (u64, u64) {
    let (lo, hi) = i.cell_range(r);
    let w = (hi - lo) * 8;
    (lo.saturating_sub(w), (hi + w).min(1u64 << r))
}

/// Cells of the two closed components of star(I), clipped to [0, 1).
pub fn star_cells(i: &DyadicInterval, r: u32) -> Vec<(u64, u64)> {
    let (lo, hi) = i.cell_range(r);
    let len = (hi - lo) as i128;
    let c2 = (lo + hi) as i128; // twice the centre, in cells
    let n = 1i128 << r;
    let clip = |a: i128, b: i128| (a.div_euclid(2).clamp(0, n) as u64, (b + 1).div_euclid(2).clamp(0, n) as u64);
    // centre ± (1.5, 8.5)|I|
    let left = clip(c2 - 17 * len, c2 - 3 * len);
    let right = clip(c2 + 3 * len, c2 + 17 * len);
    vec![left, right]
}

/// T_P f(x) = χ_{E(P)}(x) ∫ e^{−2πiN(x)y} ψ_k(x−y) f(y) dy, cell averages by an m-node midpoint
/// rule in x and y.
pub fn t_p(f: &CStep, p: &Tile, n: &Linearization, m: usize) -> CStep {
    let r = f.resolution;
    assert_eq!(n.resolution, r, "f and N must share the resolution");
    let h = (-(r as f64)).exp2();
    let k = p.k() as i32;
    let mut out = CStep::zero(r);
    let (ylo, yhi) = reach_cells(&p.time, r);
    for &(a, b) in e_set(p, n).runs() {
        for c in a..b {
            let nf = freq_u64(&n.value_at(c).expect("E(P) cell without a frequency"));
            let mut acc = Complex64::new(0.0, 0.0);
            for ia in 0..m {
                let x = node(c, ia, m, h);
                for d in ylo..yhi {
                    let fv = f.values[d as usize];
                    if fv == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for ib in 0..m {
                        let y = node(d, ib, m, h);
                        let ps = psi_k(k, x - y);
                        if ps != 0.0 {
                            acc += cis(-two_pi() * node_phase(nf, d, ib, m, r)) * (ps * h / m as f64) * fv;
                        }
                    }
                }
            }
            out.values[c as usize] = acc / m as f64;
        }
    }
    out
}

/// T_P^* g(y) = ∫ e^{2πiN(x)y} ψ_k(x−y) χ_{E(P)}(x) g(x) dx with the nodes of `t_p`, so
/// ⟨T_P f, g⟩ = ⟨f, T_P^* g⟩ up to rounding.
pub fn t_p_star(g: &CStep, p: &Tile, n: &Linearization, m: usize) -> CStep {
    let r = g.resolution;
    assert_eq!(n.resolution, r, "g and N must share the resolution");
    let h = (-(r as f64)).exp2();
    let k = p.k() as i32;
    let mut out = CStep::zero(r);
    let e = e_set(p, n);
    let (ylo, yhi) = reach_cells(&p.time, r);
    for d in ylo..yhi {
        let mut acc = Complex64::new(0.0, 0.0);
        for ib in 0..m {
            let y = node(d, ib, m, h);
            for &(a, b) in e.runs() {
                for c in a..b {
                    let gv = g.values[c as usize];
                    if gv == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let nf = freq_u64(&n.value_at(c).expect("E(P) cell without a frequency"));
                    let ph = cis(two_pi() * node_phase(nf, d, ib, m, r));
                    for ia in 0..m {
                        let ps = psi_k(k, node(c, ia, m, h) - y);
                        if ps != 0.0 {
                            acc += ph * (ps * h / m as f64) * gv;
                        }
                    }
                }
            }
        }
        out.values[d as usize] = acc / m as f64;
    }
    out
}

/// sup_j |p.v. ∫ e^{2πi n_j(x−y)} cot(π(x−y)) f(y) dy| at cell centres, by quadrature: the
/// own cell is handled through the symmetric principal value, every other half-shifted
/// segment by 8-point Gauss–Legendre.
pub fn c_lac_direct(f: &StepFunction<f64>, seq: &[u64]) -> StepFunction<f64> {
    let r = f.resolution;
    let nc = f.values.len();
    let h = (-(r as f64)).exp2();
    let mut out = vec![0.0f64; nc];
    for &n in seq {
        let nn = n as f64;
        // p.v. over |u| < h/2 of e^{2πinu}cot(πu) = 2i ∫_0^{h/2} sin(2πnu) cot(πu) du
        let own = {
            let v = gauss(0.0, 0.5 * h, |u| {
                let s = if u == 0.0 { 2.0 * nn } else { (two_pi() * nn * u).sin() / (PI * u).tan() };
                Complex64::new(s, 0.0)
            });
            Complex64::new(0.0, 2.0 * v.re)
        };
        // segment s covers u ∈ [h/2 + s h, h/2 + (s+1) h], y in cell c − 1 − s
        let segs: Vec<Complex64> = (0..nc - 1)
            .map(|s| {
                let a = 0.5 * h + s as f64 * h;
                gauss(a, a + h, |u| cis(two_pi() * nn * u) / (PI * u).tan())
            })
            .collect();
        for c in 0..nc {
            let mut acc = own * f.values[c];
            for (s, w) in segs.iter().enumerate() {
                let y = (c + 2 * nc - 1 - s) % nc;
                acc += w * f.values[y];
            }
            out[c] = out[c].max(acc.norm());
        }
    }
    StepFunction::new(r, out)
}

/// The same operator through the Fourier coefficients of f: for each n,
/// Σ_k −i sgn(k−n) f̂(k) e^{2πikx}, with the infinite tails summed in closed form.
pub fn c_lac_fourier(f: &StepFunction<f64>, seq: &[u64]) -> StepFunction<f64> {
    let r = f.resolution;
    let nc = f.values.len();
    let h = (-(r as f64)).exp2();
    let nmax = seq.iter().copied().max().unwrap_or(0) as usize;
    let mut runs: Vec<(f64, f64, f64)> = Vec::new();
    for (c, &v) in f.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        match runs.last_mut() {
            Some(last) if last.2 == v && (last.1 - c as f64 * h).abs() < 0.5 * h => last.1 = (c + 1) as f64 * h,
            _ => runs.push((c as f64 * h, (c + 1) as f64 * h, v)),
        }
    }
    let mean: f64 = f.values.iter().sum::<f64>() * h;
    let coef: Vec<Complex64> = (0..=nmax)
        .map(|k| {
            if k == 0 {
                return Complex64::new(mean, 0.0);
            }
            let kk = k as f64;
            runs.iter()
                .map(|&(a, b, v)| (cis(-two_pi() * kk * a) - cis(-two_pi() * kk * b)) / Complex64::new(0.0, two_pi() * kk) * v)
                .sum()
        })
        .collect();
    let mut out = vec![0.0f64; nc];
    for c in 0..nc {
        let x = (c as f64 + 0.5) * h;
        // A = Σ_{k≥1} f̂(k) e^{2πikx}
        let log1m = |t: f64| (Complex64::new(1.0, 0.0) - cis(two_pi() * t)).ln();
        let a_sum: Complex64 = runs.iter().map(|&(a, b, v)| (log1m(x - b) - log1m(x - a)) / Complex64::new(0.0, two_pi()) * v).sum();
        let mut partial = vec![Complex64::new(0.0, 0.0); nmax + 1];
        for k in 1..=nmax {
            partial[k] = partial[k - 1] + coef[k] * cis(two_pi() * k as f64 * x);
        }
        for &n in seq {
            let n = n as usize;
            let (above, below) = if n == 0 {
                (a_sum, a_sum.conj())
            } else {
                (a_sum - partial[n], a_sum.conj() + coef[0] + partial[n - 1])
            };
            let v = Complex64::new(0.0, -1.0) * (above - below);
            out[c] = out[c].max(v.norm());
        }
    }
    StepFunction::new(r, out)
}

/// Cells next to a jump of f (either neighbour differs), where the two routes are not compared.
pub fn jump_adjacent(f: &StepFunction<f64>) -> Vec<bool> {
    let n = f.values.len();
    (0..n)
        .map(|c| {
            let l = f.values[(c + n - 1) % n];
            let r = f.values[(c + 1) % n];
            l != f.values[c] || r != f.values[c]
        })
        .collect()
}

/// φ̂: ≡ 1 on [−0.07, 0.07], supported in [−0.1, 0.1].
pub fn phi_hat(eta: f64) -> f64 {
    smooth_step((0.1 - eta.abs()) / 0.03)
}

/// Tabulated φ = inverse Fourier transform of φ̂ (real and even).
#[derive(Clone, Debug)]
pub struct WavePacket {
    step: f64,
    pub half_width: f64,
    table: Vec<f64>,
    /// ∫_{|u| > half_width} |φ|² estimate from the tabulated decay
    pub tail: f64,
}

impl Default for WavePacket {
    fn default() -> Self {
        Self::new(64.0, 64)
    }
}

impl WavePacket {
    pub fn new(half_width: f64, per_unit: usize) -> Self {
        let step = 1.0 / per_unit as f64;
        let n = (half_width * per_unit as f64).ceil() as usize;
        let panels = 400;
        let dh = 0.1 / panels as f64;
        let table: Vec<f64> = (0..=n)
            .map(|i| {
                let u = i as f64 * step;
                let g = |eta: f64| phi_hat(eta) * (two_pi() * eta * u).cos();
                let mut s = g(0.0) + g(0.1);
                for j in 1..panels {
                    s += g(j as f64 * dh) * if j % 2 == 1 { 4.0 } else { 2.0 };
                }
                2.0 * s * dh / 3.0
            })
            .collect();
        let tail_start = (0.75 * n as f64) as usize;
        let tail = 2.0 * table[tail_start..].iter().map(|v| v * v).sum::<f64>() * step;
        WavePacket { step, half_width, table, tail }
    }

    pub fn phi(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= self.half_width {
            return 0.0;
        }
        let t = a / self.step;
        let i = t.floor() as usize;
        let fr = t - i as f64;
        let next = self.table.get(i + 1).copied().unwrap_or(0.0);
        self.table[i] * (1.0 - fr) + next * fr
    }

    /// φ_{P_l}(x) = e^{2πi c_l x} |I|^{−1/2} φ((x − c(I))/|I|).
    pub fn packet(&self, centre: f64, len: f64, c_l: f64, x: f64) -> Complex64 {
        cis(two_pi() * c_l * x) * (self.phi((x - centre) / len) / len.sqrt())
    }
}

/// Grid offsets of the discretized model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    pub y: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl GridParams {
    pub fn origin() -> Self {
        GridParams { y: 0.0, lambda: 0.0, mu: 0.0 }
    }
}

/// Σ_P ⟨f, φ_{P_l}⟩ φ_{P_l}(x) χ_{ω_{P_u}}(ξ) over the (y, λ, μ)-grid tiles with scales
/// m_min ≤ m ≤ m_max and time intervals inside [−1, 2), at cell centres of [0, 1).
pub fn lt_model(f: &StepFunction<f64>, xi: f64, scales: (i32, i32), grid: GridParams, wp: &WavePacket) -> CStep {
    let r = f.resolution;
    let h = (-(r as f64)).exp2();
    let nc = f.values.len();
    let mut out = CStep::zero(r);
    let q = 4usize;
    for m in scales.0..=scales.1 {
        let len = (-(m as f64) - grid.lambda).exp2();
        let flen = 1.0 / len;
        let np = ((xi * len) - grid.mu).floor();
        let lo_w = flen * (np + grid.mu);
        if xi < lo_w + 0.5 * flen {
            continue;
        }
        let c_l = lo_w + 0.25 * flen;
        let n_lo = ((-1.0 / len) - grid.y).ceil() as i64;
        let n_hi = ((2.0 / len) - grid.y - 1.0).floor() as i64;
        let reach = wp.half_width * len;
        for ni in n_lo..=n_hi {
            let a = len * (ni as f64 + grid.y);
            let centre = a + 0.5 * len;
            if centre + reach < 0.0 || centre - reach > 1.0 {
                continue;
            }
            let c0 = ((centre - reach).max(0.0) / h).floor() as usize;
            let c1 = (((centre + reach).min(1.0) / h).ceil() as usize).min(nc);
            let mut coef = Complex64::new(0.0, 0.0);
            for c in c0..c1 {
                let v = f.values[c];
                if v == 0.0 {
                    continue;
                }
                for b in 0..q {
                    let x = (c as f64 + (b as f64 + 0.5) / q as f64) * h;
                    coef += wp.packet(centre, len, c_l, x).conj() * (v * h / q as f64);
                }
            }
            if coef.norm() == 0.0 {
                continue;
            }
            for c in c0..c1 {
                let x = (c as f64 + 0.5) * h;
                out.values[c] += coef * wp.packet(centre, len, c_l, x);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub xis: Vec<f64>,
    pub values: Vec<f64>,
    pub spread: f64,
    pub doubled: Vec<f64>,
    pub doubling_change: f64,
    /// largest share of a value carried by the two extreme scales
    pub edge_share: f64,
}

fn recon_value(xi: f64, scales: u32, mu: f64, points: usize) -> (f64, f64) {
    // composite Simpson over λ ∈ [0, 1]
    let term = |m: u32, lam: f64| {
        let flen = (m as f64 + lam).exp2();
        let np = (-mu).floor();
        let lo = flen * (np + mu);
        if 0.0 < lo + 0.5 * flen {
            return 0.0;
        }
        let c_l = lo + 0.25 * flen;
        phi_hat((xi - c_l) / flen).powi(2)
    };
    let n = points + points % 2;
    let dl = 1.0 / n as f64;
    let mut total = 0.0;
    let mut edge = 0.0;
    for m in 0..scales {
        let mut s = term(m, 0.0) + term(m, 1.0);
        for i in 1..n {
            s += term(m, i as f64 * dl) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let v = s * dl / 3.0;
        if m == 0 || m + 1 == scales {
            edge += v;
        }
        total += v;
    }
    (total, edge)
}

/// ∫_0^1 Σ_m 2^{m+λ} Σ_P |φ̂_{P_l}(ξ)|² χ_{ω_{P_u}}(0) dλ with one time interval per scale,
/// for each ξ; the identity says the value does not depend on ξ ≤ −1.
pub fn reconstruction_constancy(xis: &[f64], scales: u32, mu: f64, points: usize) -> ReconReport {
    let run = |pts: usize| -> (Vec<f64>, f64) {
        let mut edge_share: f64 = 0.0;
        let vals = xis
            .iter()
            .map(|&xi| {
                let (v, e) = recon_value(xi, scales, mu, pts);
                if v > 0.0 {
                    edge_share = edge_share.max(e / v);
                }
                v
            })
            .collect();
        (vals, edge_share)
    };
    let (values, edge_share) = run(points);
    let (doubled, _) = run(2 * points);
    let mx = values.iter().copied().fold(f64::MIN, f64::max);
    let mn = values.iter().copied().fold(f64::MAX, f64::min);
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let doubling_change = values.iter().zip(&doubled).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    ReconReport { xis: xis.to_vec(), spread: (mx - mn) / mean, values, doubled, doubling_change, edge_share }
}

/// Buckets of T = T_O + T_0 + T_{R,<} + T_R^bd + T_M + T_{R,>}, acting on the level-j part
/// χ_{F_j} of f; T_{R,<} is split into its normal and boundary parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    O,
    Zero,
    RLessNm,
    RLessBd,
    RGreater,
    Bd,
    M,
}

impl Bucket {
    pub const ALL: [Bucket; 7] = [Bucket::O, Bucket::Zero, Bucket::RLessNm, Bucket::RLessBd, Bucket::RGreater, Bucket::Bd, Bucket::M];

    pub fn name(&self) -> &'static str {
        match self {
            Bucket::O => "T_O",
            Bucket::Zero => "T_0",
            Bucket::RLessNm => "T_R<nm",
            Bucket::RLessBd => "T_R<bd",
            Bucket::RGreater => "T_R>",
            Bucket::Bd => "T_Rbd",
            Bucket::M => "T_M",
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// Bucket of tile i against level j, given its mass bin (None outside the bins).
pub fn bucket_of(cme: &Cme, i: usize, bin: Option<u32>, normal: bool, level: u32) -> Bucket {
    let n = match bin {
        None if crate::tiles::in_p_zero(&cme.tiles[i]) => return Bucket::O,
        None | Some(0) => return Bucket::Zero,
        Some(n) => n,
    };
    let tl = cme.level_of_tile(i);
    let nj = cme.profile.gen.get(level as usize - 1).map(|g| g.1).unwrap_or(0);
    if tl == level {
        if normal {
            Bucket::M
        } else {
            Bucket::Bd
        }
    } else if tl < level {
        if normal {
            Bucket::RLessNm
        } else {
            Bucket::RLessBd
        }
    } else if n > nj {
        Bucket::RGreater
    } else {
        Bucket::RLessBd
    }
}

/// The declared generation of every tile as its mass bin.
pub fn declared_bins(cme: &Cme) -> Vec<Option<u32>> {
    cme.tile_gen.iter().map(|&g| Some(g)).collect()
}

pub const SAMPLES_PER_RUN: usize = 8;

/// Midpoint samples of the linearization runs: run i owns samples [8i, 8i + 8).
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Samples {
    pub fn of(lin: &Linearization) -> Self {
        let h = (-(lin.resolution as f64)).exp2();
        let mut x = Vec::with_capacity(lin.runs.len() * SAMPLES_PER_RUN);
        let mut w = Vec::with_capacity(x.capacity());
        for &(a, b, _) in &lin.runs {
            let len = (b - a) as f64 * h;
            for m in 0..SAMPLES_PER_RUN {
                x.push(a as f64 * h + (m as f64 + 0.5) / SAMPLES_PER_RUN as f64 * len);
                w.push(len / SAMPLES_PER_RUN as f64);
            }
        }
        Samples { x, w }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// T f bucket by bucket on the samples. Values are stored without the unimodular factor
/// e^{2πiN(x)x}; at a given x every contributing tile has α = N(x), so moduli are exact.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub samples: Samples,
    pub values: Vec<Vec<Complex64>>,
    /// (tile, level) pairs per bucket that reached at least one sample
    pub pairs: [usize; 7],
}

impl Decomposition {
    pub fn bucket(&self, b: Bucket) -> &[Complex64] {
        &self.values[b.idx()]
    }

    pub fn sum_of(&self, buckets: &[Bucket]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.samples.len()];
        for b in buckets {
            for (o, v) in out.iter_mut().zip(self.bucket(*b)) {
                *o += v;
            }
        }
        out
    }

    pub fn total(&self) -> Vec<Complex64> {
        self.sum_of(&Bucket::ALL)
    }

    pub fn l1(&self, b: Bucket) -> f64 {
        self.bucket(b).iter().zip(&self.samples.w).map(|(v, w)| v.norm() * w).sum()
    }

    pub fn max_abs(&self, b: Bucket) -> f64 {
        self.bucket(b).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// ‖Σ_b T_b f‖_{1,∞}.
    pub fn weak(&self, buckets: &[Bucket]) -> f64 {
        let mut s: Vec<(f64, f64)> = self.sum_of(buckets).iter().zip(&self.samples.w).map(|(v, &w)| (v.norm(), w)).collect();
        weak_norm_samples(&mut s)
    }

    /// ∫ Re T_M f over the samples outside the removed intervals.
    pub fn probe(&self, removed: &[(f64, f64)]) -> f64 {
        self.bucket(Bucket::M)
            .iter()
            .zip(self.samples.x.iter().zip(&self.samples.w))
            .filter(|(_, (x, _))| !removed.iter().any(|&(a, b)| a <= **x && **x < b))
            .map(|(v, (_, w))| v.re * w)
            .sum()
    }
}

/// Pieces of one level seen by one frequency: [lo, hi), coefficient, and prefix sums of
/// coefficient × length.
struct PieceList {
    lo: Vec<f64>,
    hi: Vec<f64>,
    coef: Vec<Complex64>,
    prefix: Vec<Complex64>,
}

const DIRECT_MAX: usize = 256;
const BINS: usize = 128;
const GRID: usize = 129;

impl PieceList {
    fn new(mut items: Vec<(f64, f64, Complex64)>) -> Self {
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut prefix = Vec::with_capacity(items.len() + 1);
        let mut acc = Complex64::new(0.0, 0.0);
        prefix.push(acc);
        for it in &items {
            acc += it.2 * (it.1 - it.0);
            prefix.push(acc);
        }
        PieceList {
            lo: items.iter().map(|i| i.0).collect(),
            hi: items.iter().map(|i| i.1).collect(),
            coef: items.iter().map(|i| i.2).collect(),
            prefix,
        }
    }

    /// ∫_{−∞}^y of the piecewise-constant density.
    fn cumulative(&self, y: f64) -> Complex64 {
        let j = self.lo.partition_point(|&l| l < y);
        let mut m = self.prefix[j];
        if j > 0 && self.hi[j - 1] > y {
            m -= self.coef[j - 1] * (self.hi[j - 1] - y);
        }
        m
    }

    /// Σ_p coef_p ∫_p ψ_k(x − y) dy.
    fn apply(&self, kernel: &Kernel, k: i32, x: f64) -> Complex64 {
        let s = (k as f64).exp2();
        let (wlo, whi) = (x - 8.0 / s, x + 8.0 / s);
        let a = self.hi.partition_point(|&h| h <= wlo);
        let b = self.lo.partition_point(|&l| l < whi);
        if b <= a {
            return Complex64::new(0.0, 0.0);
        }
        if b - a <= DIRECT_MAX {
            return (a..b).map(|i| self.coef[i] * kernel.psi_k_integral(k, x, self.lo[i], self.hi[i])).sum();
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for side in [-1.0, 1.0] {
            let (u0, u1) = (2.0 / s, 8.0 / s);
            let du = (u1 - u0) / BINS as f64;
            let mut prev = self.cumulative(x + side * u0);
            for q in 0..BINS {
                let u = u0 + (q + 1) as f64 * du;
                let cur = self.cumulative(x + side * u);
                let mid = u0 + (q as f64 + 0.5) * du;
                acc += (cur - prev) * (side * psi_k(k, -side * mid));
                prev = cur;
            }
        }
        acc
    }
}

fn catmull_rom(grid: &[Complex64], lo: f64, step: f64, x: f64) -> Complex64 {
    let n = grid.len();
    let u = ((x - lo) / step).clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    let t = u - i as f64;
    let p1 = grid[i];
    let p2 = grid[i + 1];
    let p0 = if i > 0 { grid[i - 1] } else { p1 * 2.0 - p2 };
    let p3 = if i + 2 < n { grid[i + 2] } else { p2 * 2.0 - p1 };
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3) * 0.5
}

/// T f on the run samples, f = Σ_j r_j χ_{F_j} with F_j homogenized inside each piece:
/// ∫_{F_j ∩ p} e^{−2πiαy} ψ_k(x−y) dy ≈ |F_j ∩ p|/|p| · Φ_p(α) · ∫_p ψ_k(x−y) dy.
pub fn evaluate(cme: &Cme, levels: &[FLevel], f: &ExtremalFunction, kernel: &Kernel, bins: &[Option<u32>]) -> Decomposition {
    let lin = &cme.lin;
    let samples = Samples::of(lin);
    let ns = samples.len();
    let mut values = vec![vec![Complex64::new(0.0, 0.0); ns]; Bucket::ALL.len()];
    let mut pairs = [0usize; 7];
    let normal = cme.normal_flags();

    // towers holding each frequency, and the pieces of each tower per level
    let mut towers_of: HashMap<Freq, Vec<usize>> = HashMap::new();
    for t in 0..cme.towers.len() {
        for a in cme.tower_freqs(t) {
            towers_of.entry(a).or_default().push(t);
        }
    }
    let mut pieces_of: Vec<HashMap<usize, Vec<usize>>> = Vec::with_capacity(levels.len());
    for l in levels {
        let mut m: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, p) in l.pieces.iter().enumerate() {
            m.entry(p.tower).or_default().push(i);
        }
        pieces_of.push(m);
    }

    let mut by_alpha: HashMap<Freq, Vec<usize>> = HashMap::new();
    for (i, t) in cme.tiles.iter().enumerate() {
        by_alpha.entry(t.alpha).or_default().push(i);
    }
    let mut alphas: Vec<Freq> = by_alpha.keys().copied().collect();
    alphas.sort();

    for alpha in alphas {
        let fid = match lin.freqs.binary_search(&alpha) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if alpha.mantissa() != 1 {
            continue;
        }
        let b = alpha.exponent();
        let towers = towers_of.get(&alpha).cloned().unwrap_or_default();
        let lists: Vec<Option<PieceList>> = levels
            .iter()
            .enumerate()
            .map(|(li, l)| {
                let lr = f.log2_weight(l.level);
                let dens = (lr + l.log2_density()).exp2();
                let mut items = Vec::new();
                for t in &towers {
                    for &pi in pieces_of[li].get(t).map(|v| v.as_slice()).unwrap_or(&[]) {
                        let phi = l.fourier(pi, b);
                        if phi.norm() == 0.0 {
                            continue;
                        }
                        let iv = &l.pieces[pi].interval;
                        items.push((iv.left_f64(), iv.left_f64() + iv.len_f64(), phi * dens));
                    }
                }
                if items.is_empty() {
                    None
                } else {
                    Some(PieceList::new(items))
                }
            })
            .collect();
        if lists.iter().all(|l| l.is_none()) {
            continue;
        }
        for &i in &by_alpha[&alpha] {
            let tile = &cme.tiles[i];
            let k = tile.time.scale;
            let (ilo, ihi) = (tile.time.left_f64(), tile.time.left_f64() + tile.time.len_f64());
            let (clo, chi) = tile.time.cell_range(lin.resolution);
            let mut idx: Vec<usize> = Vec::new();
            for run in lin.run_ids_of(fid, clo, chi) {
                for s in run * SAMPLES_PER_RUN..(run + 1) * SAMPLES_PER_RUN {
                    let x = samples.x[s];
                    if ilo <= x && x < ihi {
                        idx.push(s);
                    }
                }
            }
            if idx.is_empty() {
                continue;
            }
            for (li, list) in lists.iter().enumerate() {
                let list = match list {
                    Some(l) => l,
                    None => continue,
                };
                let bk = bucket_of(cme, i, bins[i], normal[i], levels[li].level).idx();
                pairs[bk] += 1;
                if idx.len() > GRID {
                    let step = (ihi - ilo) / (GRID - 1) as f64;
                    let grid: Vec<Complex64> = (0..GRID).map(|g| list.apply(kernel, k, ilo + g as f64 * step)).collect();
                    for &s in &idx {
                        values[bk][s] += catmull_rom(&grid, ilo, step, samples.x[s]);
                    }
                } else {
                    for &s in &idx {
                        values[bk][s] += list.apply(kernel, k, samples.x[s]);
                    }
                }
            }
        }
    }
    Decomposition { samples, values, pairs }
}

/// ‖T_M f‖₁ / (h·Σ_j r_j (n_j − r_j + 1) |F_j|), with (r_j, n_j) the generation range of level j.
pub fn l1_blowup_ratio(dec: &Decomposition, cme: &Cme, f: &ExtremalFunction) -> f64 {
    let h = cme.profile.height as f64;
    let denom: f64 = f
        .parts
        .iter()
        .map(|&(level, lr, lm)| {
            let (r, n) = cme.profile.gen[level as usize - 1];
            (lr + lm).exp2() * (n - r + 1) as f64
        })
        .sum();
    dec.l1(Bucket::M) / (h * denom)
}

/// Tiles entering the alignment test: normal, in a non-floor layer.
pub fn key_eligible(cme: &Cme, normal: &[bool]) -> Vec<usize> {
    (0..cme.tiles.len())
        .filter(|&i| normal[i] && cme.usgtfs[cme.tile_usgtf[i] as usize].kind == crate::cme::LayerKind::NonFloor)
        .collect()
}

/// H(y) = Σ_runs ∫_a^b Ψ_k-antiderivative, so ∫_lo^hi G = H(lo) − H(hi).
struct GPrimitive<'a> {
    kernel: &'a Kernel,
    s: f64,
    runs: Vec<(f64, f64)>,
}

impl<'a> GPrimitive<'a> {
    fn new(cme: &Cme, kernel: &'a Kernel, tile: usize) -> Self {
        let t = &cme.tiles[tile];
        let e = e_set(t, &cme.lin);
        let h = (-(e.resolution as f64)).exp2();
        let runs = e.runs().iter().map(|&(a, b)| (a as f64 * h, b as f64 * h)).collect();
        GPrimitive { kernel, s: (t.time.scale as f64).exp2(), runs }
    }

    fn h(&self, y: f64) -> f64 {
        let s = self.s;
        self.runs.iter().map(|&(a, b)| (self.kernel.big_psi2(s * (b - y)) - self.kernel.big_psi2(s * (a - y))) / s).sum()
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let k = self.s.log2() as i32;
        self.runs.iter().map(|&(a, b)| self.kernel.g_run_integral(k, a, b, lo, hi)).sum()
    }
}

/// Alignment outcome for one tile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KeyOutcome {
    /// no part of F_j meets the support of T_P^* 1
    Vacuous,
    Ratio(f64),
}

fn key_window(cme: &Cme, tile: usize, level: &FLevel) -> std::ops::Range<usize> {
    let t = &cme.tiles[tile].time;
    let len = t.len_f64();
    level.pieces_in(t.left_f64() - 8.0 * len, t.left_f64() + 9.0 * len)
}

/// ∫ Re(χ_F T_P^* 1) / ∫ |χ_F T_P^* 1| with F the tile's own level set.
pub fn key_alignment(cme: &Cme, kernel: &Kernel, level: &FLevel, tile: usize) -> KeyOutcome {
    let range = key_window(cme, tile, level);
    if range.is_empty() {
        return KeyOutcome::Vacuous;
    }
    let g = GPrimitive::new(cme, kernel, tile);
    let b = cme.tiles[tile].alpha.exponent();
    let (mut num, mut den) = (0.0, 0.0);
    for pi in range {
        let iv = &level.pieces[pi].interval;
        let (lo, len) = (iv.left_f64(), iv.len_f64());
        let edges: Vec<f64> = (0..=4).map(|q| g.h(lo + q as f64 * len / 4.0)).collect();
        let gp = edges[0] - edges[4];
        den += edges.windows(2).map(|w| (w[0] - w[1]).abs()).sum::<f64>();
        if gp != 0.0 {
            num += level.fourier(pi, b).re * gp;
        }
    }
    if den == 0.0 {
        KeyOutcome::Vacuous
    } else {
        KeyOutcome::Ratio(num / den)
    }
}

/// The same ratio with the sign of F's phase drawn independently on sub-blocks of each piece.
pub fn key_alignment_scrambled(cme: &Cme, kernel: &Kernel, level: &FLevel, tile: usize, sign: &mut dyn FnMut() -> bool) -> KeyOutcome {
    let range = key_window(cme, tile, level);
    if range.is_empty() {
        return KeyOutcome::Vacuous;
    }
    let g = GPrimitive::new(cme, kernel, tile);
    let b = cme.tiles[tile].alpha.exponent();
    let subs = (4096 / range.len()).clamp(4, 1024).next_power_of_two();
    let (mut num, mut den) = (0.0, 0.0);
    for pi in range {
        let iv = &level.pieces[pi].interval;
        let (lo, len) = (iv.left_f64(), iv.len_f64());
        let amp = level.fourier(pi, b).re.abs();
        let d = len / subs as f64;
        for q in 0..subs {
            let gs = g.integral(lo + q as f64 * d, lo + (q + 1) as f64 * d);
            den += gs.abs();
            num += if sign() { amp * gs } else { -amp * gs };
        }
    }
    if den == 0.0 {
        KeyOutcome::Vacuous
    } else {
        KeyOutcome::Ratio(num / den)
    }
}

/// Column sums of a boundary-cancellation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub height: usize,
    pub terms: Vec<f64>,
    pub sum: f64,
    /// |Σ terms| / max |term|
    pub ratio: f64,
}

impl ColumnReport {
    pub fn from_terms(terms: Vec<f64>) -> Self {
        let sum: f64 = terms.iter().sum();
        let mx = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
        ColumnReport { height: terms.len(), ratio: if mx > 0.0 { sum.abs() / mx } else { 0.0 }, sum, terms }
    }
}

/// Fourier column: nested I_l = [1/4, 1/4 + d_l), d_l = 2^{−4−step·l}, one E at the bottom and
/// F_l = R_l ∩ {cos 2πay < 0} on R_l = [1/4 + 2d_l, 1/4 + 9d_l). Each term is
/// ∫_F Re(e^{2πiay} G_l) ≈ −(1/π) Σ_{l'} ∫_{R_{l'}} G_l.
pub fn fourier_column(kernel: &Kernel, height: usize, step: u32) -> ColumnReport {
    let x0 = 0.25;
    let d = |l: usize| (-(4.0 + (step as usize * l) as f64)).exp2();
    let (ea, eb) = (x0, x0 + d(height));
    let terms = (0..height)
        .map(|l| {
            let k = 4 + step as i32 * l as i32;
            let s: f64 = (0..height).map(|m| kernel.g_run_integral(k, ea, eb, x0 + 2.0 * d(m), x0 + 9.0 * d(m))).sum();
            -s / PI
        })
        .collect();
    ColumnReport::from_terms(terms)
}
