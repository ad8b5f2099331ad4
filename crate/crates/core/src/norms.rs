//! Rearrangement-invariant functionals: distribution function, decreasing
//! rearrangement, Lorentz / Marcinkiewicz norms, the 𝒲 upper bound, the V
//! functional and the growth integral. All logarithms are base 2.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

use crate::dyadic::{pow2, rat_f64, Rat, Scalar, StepFunction};

#[derive(Debug, Error, PartialEq)]
pub enum NormError {
    #[error("part {0} has zero L1 norm")]
    ZeroPart(usize),
    #[error("part {0} violates 0 < L1 <= Linf")]
    BadPart(usize),
    #[error("ordering is not a permutation of the parts")]
    BadOrdering,
}

/// log2(log2 x) with the floor of 1 used near t = 1.
pub fn loglog(x: f64) -> f64 {
    let v = x.log2();
    if v <= 2.0 {
        1.0
    } else {
        v.log2().max(1.0)
    }
}

fn log_iter(x: f64, k: usize) -> f64 {
    let mut v = x;
    for _ in 0..k {
        v = v.log2();
    }
    v
}

/// φ(t) = t·g(log2(1/t)); the log-side factor g is kept so iterated-log
/// functions can be evaluated far below f64's range of t.
#[derive(Clone)]
pub struct FundamentalFunction {
    pub name: String,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    exact_identity: bool,
}

impl fmt::Debug for FundamentalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FundamentalFunction({})", self.name)
    }
}

impl FundamentalFunction {
    /// φ(t) = t·g(log2(1/t)).
    pub fn from_log_factor(name: &str, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FundamentalFunction { name: name.to_string(), g: Arc::new(g), exact_identity: false }
    }

    pub fn identity() -> Self {
        FundamentalFunction { name: "identity".into(), g: Arc::new(|_| 1.0), exact_identity: true }
    }

    /// μ(t) = t·loglog(4/t), the L loglog L fundamental function.
    pub fn mu() -> Self {
        Self::from_log_factor("mu", |u| (2.0 + u).log2().max(1.0))
    }

    /// φ₀(s) = s·loglog(17/s)·loglogloglog(17/s).
    pub fn phi0() -> Self {
        Self::from_log_factor("phi0", |u| {
            let l = 17f64.log2() + u;
            let ll = l.log2();
            ll * log_iter(ll, 2)
        })
    }

    /// φ₀(s)·max(1, logloglog(4/s))², the convergent comparison case.
    pub fn phi0_lll2() -> Self {
        let p = Self::phi0();
        Self::from_log_factor("phi0_lll2", move |u| {
            let lll = log_iter(2.0 + u, 2).max(1.0);
            (p.g)(u) * lll * lll
        })
    }

    /// φ(t) for t in (0,1]; φ(0) = 0.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if self.exact_identity {
            return t;
        }
        t * (self.g)(-t.log2())
    }

    /// φ(t)/t as a function of u = log2(1/t).
    pub fn log_factor(&self, u: f64) -> f64 {
        (self.g)(u)
    }

    /// Checks positivity and monotonicity on a geometric grid.
    pub fn check_grid(&self, points: usize) -> bool {
        let mut prev = 0.0;
        for i in (0..=points).rev() {
            let t = (-(i as f64) * 30.0 / points as f64).exp2();
            let v = self.eval(t);
            if !(v > 0.0) || v < prev {
                return false;
            }
            prev = v;
        }
        true
    }
}

/// Blocks (value, measure) of f*, values strictly decreasing, zero block dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct Rearrangement<T: Scalar> {
    pub blocks: Vec<(T, Rat)>,
}

impl<T: Scalar> Rearrangement<T> {
    /// Right endpoints t_1 < t_2 < … of the blocks.
    pub fn breakpoints(&self) -> Vec<Rat> {
        let mut acc = Rat::from_integer(BigInt::from(0));
        self.blocks
            .iter()
            .map(|(_, m)| {
                acc += m;
                acc.clone()
            })
            .collect()
    }

    /// f*(t)
    pub fn value_at(&self, t: &Rat) -> T {
        let mut acc = Rat::from_integer(BigInt::from(0));
        for (v, m) in &self.blocks {
            acc += m;
            if *t < acc {
                return v.clone();
            }
        }
        T::s_zero()
    }

    pub fn integral(&self) -> T {
        self.blocks.iter().fold(T::s_zero(), |acc, (v, m)| acc + v.clone() * T::from_rat(m))
    }
}

/// m_f(λ) = |{|f| > λ}|
pub fn distribution<T: Scalar>(f: &StepFunction<T>, lambda: &T) -> Rat {
    let n = f.values.iter().filter(|v| v.abs_val() > *lambda).count();
    Rat::from_integer(BigInt::from(n)) * pow2(-(f.resolution as i64))
}

pub fn rearrange<T: Scalar>(f: &StepFunction<T>) -> Rearrangement<T> {
    let mut mags: Vec<T> = f.values.iter().map(|v| v.abs_val()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let cell = pow2(-(f.resolution as i64));
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < mags.len() {
        let mut j = i;
        while j < mags.len() && mags[j] == mags[i] {
            j += 1;
        }
        if !mags[i].is_zero_val() {
            blocks.push((mags[i].clone(), Rat::from_integer(BigInt::from(j - i)) * &cell));
        }
        i = j;
    }
    Rearrangement { blocks }
}

/// Σ v_i (φ(t_i) − φ(t_{i−1})).
pub fn lorentz_norm<T: Scalar>(f: &StepFunction<T>, phi: &FundamentalFunction) -> f64 {
    let r = rearrange(f);
    let mut prev = 0.0;
    let mut total = 0.0;
    for ((v, _), t) in r.blocks.iter().zip(r.breakpoints()) {
        let cur = phi.eval(rat_f64(&t));
        total += v.as_f64() * (cur - prev);
        prev = cur;
    }
    total
}

/// Lorentz norm for the identity fundamental function, exact.
pub fn lorentz_identity_exact(f: &StepFunction<Rat>) -> Rat {
    rearrange(f).integral()
}

/// sup_t (1/φ(t)) ∫_0^t f*, over the breakpoints, t = 1 and a geometric grid.
pub fn marcinkiewicz_norm<T: Scalar>(f: &StepFunction<T>, phi: &FundamentalFunction) -> f64 {
    let r = rearrange(f);
    let bps: Vec<f64> = r.breakpoints().iter().map(rat_f64).collect();
    let vals: Vec<f64> = r.blocks.iter().map(|b| b.0.as_f64()).collect();
    let primitive = |t: f64| -> f64 {
        let mut acc = 0.0;
        let mut lo = 0.0;
        for (i, &hi) in bps.iter().enumerate() {
            if t <= lo {
                break;
            }
            acc += vals[i] * (t.min(hi) - lo);
            lo = hi;
        }
        acc
    };
    let mut grid: Vec<f64> = bps.clone();
    grid.push(1.0);
    let finest = (-(f.resolution as f64)).exp2();
    let mut t = 1.0;
    while t >= finest {
        grid.push(t);
        t /= 2f64.powf(0.125);
    }
    grid.into_iter()
        .filter(|&t| t > 0.0 && t <= 1.0)
        .map(|t| primitive(t) / phi.eval(t))
        .fold(0.0, f64::max)
}

fn w_weight(l1: f64, linf: f64) -> f64 {
    l1 * loglog(4.0 * linf / l1)
}

fn validate_parts(parts: &[(f64, f64)]) -> Result<(), NormError> {
    for (i, &(a, b)) in parts.iter().enumerate() {
        if a == 0.0 {
            return Err(NormError::ZeroPart(i));
        }
        if !(a > 0.0 && b > 0.0 && a <= b) {
            return Err(NormError::BadPart(i));
        }
    }
    Ok(())
}

/// Σ_j (1 + log j)·‖f_{σ(j)}‖₁ loglog(4‖f_{σ(j)}‖∞/‖f_{σ(j)}‖₁), where position j
/// (1-based) holds part `ordering[j-1]`.
pub fn w_norm_upper(parts: &[(f64, f64)], ordering: &[usize]) -> Result<f64, NormError> {
    validate_parts(parts)?;
    let mut seen = vec![false; parts.len()];
    if ordering.len() != parts.len() {
        return Err(NormError::BadOrdering);
    }
    for &o in ordering {
        if o >= parts.len() || seen[o] {
            return Err(NormError::BadOrdering);
        }
        seen[o] = true;
    }
    Ok(ordering
        .iter()
        .enumerate()
        .map(|(j, &p)| (1.0 + ((j + 1) as f64).log2()) * w_weight(parts[p].0, parts[p].1))
        .sum())
}

/// Best ordering of a given decomposition: weights descending (stable).
pub fn w_norm_best(parts: &[(f64, f64)]) -> Result<(f64, Vec<usize>), NormError> {
    validate_parts(parts)?;
    let mut idx: Vec<usize> = (0..parts.len()).collect();
    let w: Vec<f64> = parts.iter().map(|p| w_weight(p.0, p.1)).collect();
    idx.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(Ordering::Equal));
    let v = w_norm_upper(parts, &idx)?;
    Ok((v, idx))
}

/// Value of Σ_k a_{τ(k)}·log2(k+1), summed in k order; `assign[k]` is the
/// weight placed at log-factor position k.
pub fn v_assignment_value(assign: &[f64]) -> f64 {
    assign.iter().enumerate().map(|(k, a)| a * ((k + 2) as f64).log2()).sum()
}

/// inf over σ of Σ a_j log(σ(j)+1): largest weight meets the smallest factor.
pub fn v_norm(weights: &[f64]) -> f64 {
    let mut a = weights.to_vec();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    v_assignment_value(&a)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    /// (log2(1/ε), value) for each cutoff of the sweep
    pub sweep: Vec<(f64, f64)>,
    pub value: f64,
    pub convergent: bool,
}

/// ∫_ε^1 φ₀(s)/φ(s) · ds/(s log(4/s) loglog(4/s)), composite Simpson in u = log2(1/s).
pub fn growth_integral_at(phi: &FundamentalFunction, eps_log2: f64) -> f64 {
    let phi0 = FundamentalFunction::phi0();
    let h = |u: f64| -> f64 {
        let l = 2.0 + u;
        let ll = l.log2().max(1.0);
        phi0.log_factor(u) / phi.log_factor(u) * std::f64::consts::LN_2 / (l * ll)
    };
    let steps = ((eps_log2 * 64.0).ceil() as usize).max(2) & !1;
    let dx = eps_log2 / steps as f64;
    let mut s = h(0.0) + h(eps_log2);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * h(i as f64 * dx);
    }
    s * dx / 3.0
}

/// Cutoff sweep ε = 2^(−a) .. 2^(−b) with one halving per step; the flag is
/// "divergent" when the last halving still changes the value by more than `tol`.
pub fn growth_integral(phi: &FundamentalFunction, from_log2: u32, to_log2: u32, tol: f64) -> GrowthReport {
    let sweep: Vec<(f64, f64)> = (from_log2..=to_log2)
        .map(|k| (k as f64, growth_integral_at(phi, k as f64)))
        .collect();
    let n = sweep.len();
    let convergent = if n < 2 {
        true
    } else {
        let d = sweep[n - 1].1 - sweep[n - 2].1;
        !(d > tol)
    };
    GrowthReport { value: sweep.last().map(|x| x.1).unwrap_or(0.0), sweep, convergent }
}

/// Default tolerance for the growth flag.
pub const GROWTH_TOL: f64 = 1.0 / 512.0;

/// log2(2^a + 2^b).
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// ‖Σ r_i χ_{A_i}‖ in Λ_φ for disjoint A_i given as (log2 r_i, log2|A_i|), usable when
/// weights and measures leave the f64 range.
pub fn lorentz_norm_parts(parts: &[(f64, f64)], phi: &FundamentalFunction) -> f64 {
    let mut p: Vec<(f64, f64)> = parts.iter().copied().filter(|x| x.0 > f64::NEG_INFINITY && x.1 > f64::NEG_INFINITY).collect();
    p.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let mut total = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for (lr, lm) in p {
        let cur = log2_add(prev, lm);
        let rho = (prev - cur).exp2();
        let g_prev = if prev == f64::NEG_INFINITY { 0.0 } else { phi.log_factor(-prev) };
        let bracket = phi.log_factor(-cur) - rho * g_prev;
        total += (lr + cur).exp2() * bracket;
        prev = cur;
    }
    total
}

/// sup_λ λ·|{|g| ≥ λ}| from weighted samples (value, measure).
pub fn weak_norm_samples(samples: &mut [(f64, f64)]) -> f64 {
    samples.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap_or(Ordering::Equal));
    let mut acc = 0.0;
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let v = samples[i].0.abs();
        while i < samples.len() && samples[i].0.abs() == v {
            acc += samples[i].1;
            i += 1;
        }
        best = best.max(v * acc);
    }
    best
}
