use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use tiletower::cme::*;
use tiletower::dyadic::*;
use tiletower::setsbuild::*;

/// Cell-centre sign test in plain floating point.
fn u_cells_brute(i: &DyadicInterval, a: u64, s: i8, r: u32) -> u64 {
    let (lo, hi) = i.cell_range(r);
    let h = (-(r as f64)).exp2();
    (lo..hi)
        .filter(|&c| {
            let v = (2.0 * PI * a as f64 * (c as f64 + 0.5) * h).cos();
            let pos = v >= -1e-12;
            if s >= 0 { pos } else { !pos }
        })
        .count() as u64
}

/// Bit p (weight 2^{-p}) of x = k·2^{-d}.
fn digit(k: u64, d: u32, p: u32) -> u32 {
    ((k >> (d - p)) & 1) as u32
}

fn member(set: &DigitSet, k: u64, d: u32) -> bool {
    set.groups.iter().all(|g| {
        let pat = g.bits.iter().enumerate().fold(0u32, |acc, (i, &p)| acc | (digit(k, d, p) << i));
        g.allowed.contains(&pat)
    })
}

#[test]
fn u_set_half_measure() {
    for (s, i) in [(0, 0), (2, 1), (3, 5)] {
        let i = DyadicInterval::new(s, i);
        for a in [4u64, 8, 12, 64] {
            let plus = u_set(&i, a, 1, 12).unwrap();
            let minus = u_set(&i, a, -1, 12).unwrap();
            assert_eq!(plus.measure(), i.len() * rat(1, 2), "a={} I={:?}", a, i);
            assert!(plus.intersection(&minus).is_empty());
            assert_eq!(plus.union(&minus).measure(), i.len());
        }
    }
    assert_eq!(u_set(&DyadicInterval::unit(), 0, 1, 10).unwrap_err(), SetsError::Resolution { a: 0, r: 10 });
    assert!(u_set(&DyadicInterval::unit(), 512, 1, 10).is_err());
}

#[test]
fn sign_digits_match_cosine() {
    // sgn cos(2π 2^e x) is read off digits e+1, e+2
    let d = 12;
    for e in [0u32, 2, 5] {
        for s in [1i8, -1] {
            let set = DigitSet::new(vec![DigitGroup::sign(e, s)]);
            for k in 0..1u64 << d {
                let x = (k as f64 + 0.5) / (1u64 << d) as f64;
                let c = (2.0 * PI * (1u64 << e) as f64 * x).cos();
                if c.abs() > 1e-9 {
                    assert_eq!(member(&set, k, d), (c > 0.0) == (s > 0), "e={} s={} k={}", e, s, k);
                }
            }
        }
    }
}

fn sample_set(signs: &[i8]) -> DigitSet {
    let mut groups: Vec<DigitGroup> = signs.iter().enumerate().map(|(i, &s)| DigitGroup::sign(3 * i as u32, s)).collect();
    let start = 3 * signs.len() as u32 + 1;
    groups.push(DigitGroup::run(start, 2));
    DigitSet::new(groups)
}

proptest! {
    #[test]
    fn u_set_matches_float_scan(s in 0i32..4, idx in any::<u64>(), a in 1u64..256, plus in any::<bool>()) {
        let i = DyadicInterval::new(s, idx % (1 << s));
        let sg = if plus { 1 } else { -1 };
        let set = u_set(&i, a, sg, 11).unwrap();
        prop_assert_eq!(set.cell_count(), u_cells_brute(&i, a, sg, 11));
    }

    #[test]
    fn digit_set_density_and_fourier(signs in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..4), b in 0u32..4) {
        let set = sample_set(&signs);
        let d = 14;
        let n = 1u64 << d;
        let members: Vec<u64> = (0..n).filter(|&k| member(&set, k, d)).collect();
        prop_assert!((set.log2_density() - (members.len() as f64 / n as f64).log2()).abs() < 1e-12);
        // exact cell averages of e^{−2πi 2^b y}
        let h = 1.0 / n as f64;
        let w = 2.0 * PI * (1u64 << b) as f64;
        let cell = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -w * h)) / Complex64::new(0.0, w * h);
        let mut acc = Complex64::new(0.0, 0.0);
        for &k in &members {
            acc += Complex64::from_polar(1.0, -w * k as f64 * h) * cell;
        }
        acc /= members.len() as f64;
        prop_assert!((set.fourier(b) - acc).norm() < 1e-9, "{:?} vs {:?}", set.fourier(b), acc);
    }

    #[test]
    fn fraction_given_matches_enumeration(signs in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..4), prefix in 0u64..64) {
        let set = sample_set(&signs);
        let d = 14;
        // fix digits 1..=6 to the prefix
        let fixed = |p: u32| if (1..=6).contains(&p) { Some(((prefix >> (6 - p)) & 1) as u8) } else { None };
        let total = 1u64 << (d - 6);
        let hits = (0..total).filter(|&k| member(&set, (prefix << (d - 6)) | k, d)).count();
        prop_assert!((set.fraction_given(&fixed) - hits as f64 / total as f64).abs() < 1e-12);
    }
}

#[test]
fn lacunary_powers_of_three() {
    let seq: Vec<u64> = (0..14).map(|j| 3u64.pow(j)).collect();
    let rep = general_lacunary_mode(&seq, 2, 20).unwrap();
    assert!((rep.min_ratio - 3.0).abs() < 1e-12);
    assert_eq!(rep.step, 2);
    assert_eq!(rep.kept, vec![1, 9, 81, 729, 6561, 59049]);
    assert_eq!(rep.signs, vec![1, -1, 1, -1, 1, -1]);
    assert_eq!(rep.target, 1.0 / 64.0);
    assert!(rep.in_band, "achieved {}", rep.achieved);
}

#[test]
fn lacunary_errors() {
    assert_eq!(general_lacunary_mode(&[5], 2, 20).unwrap_err(), SetsError::Empty);
    assert!(matches!(general_lacunary_mode(&[9, 10, 100], 2, 20).unwrap_err(), SetsError::NonLacunary(_)));
    assert!(general_lacunary_mode(&[8, 9, 81], 2, 20).is_ok());
    assert!(matches!(general_lacunary_mode(&[1 << 30, 1 << 31], 2, 20).unwrap_err(), SetsError::Resolution { .. }));
}

#[test]
fn f_sets_of_toy_profiles() {
    for p in [ScaleProfile::toy_a(), ScaleProfile::toy_c()] {
        let c = build_cme(&p).unwrap();
        let levels = build_f_sets(&c, default_run_bits).unwrap();
        assert_eq!(levels.len(), p.levels as usize);
        check_disjoint(&levels).unwrap();
        for l in &levels {
            assert_eq!(l.run_bits, l.level);
            assert_eq!(l.log2_density(), -((l.constraints + l.run_bits) as f64));
            for (k, piece) in l.pieces.iter().enumerate() {
                assert!((l.log2_relative_in(&piece.interval) - l.log2_density()).abs() < 1e-9);
                assert_eq!(piece.signs.len(), l.tower_exps[&piece.tower].len());
                let d = l.digits(k);
                assert!((d.log2_density() - l.log2_density()).abs() < 1e-9);
                let e = l.tower_exps[&piece.tower][0];
                assert!(l.local_uniformity(k, e));
            }
        }
        let mut dup = levels.clone();
        dup.push(levels[0].clone());
        assert!(matches!(check_disjoint(&dup).unwrap_err(), SetsError::Overlap(..)));
    }
}

/// ∫₀^∞ φ(|{f > λ}|) dλ for f a sum of disjoint weighted indicators.
fn lorentz_brute(parts: &[(f64, f64)], phi: impl Fn(f64) -> f64) -> f64 {
    let mut p: Vec<(f64, f64)> = parts.iter().map(|&(lr, lm)| (lr.exp2(), lm.exp2())).collect();
    p.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut m = 0.0;
    let mut total = 0.0;
    for k in 0..p.len() {
        m += p[k].1;
        let next = p.get(k + 1).map(|x| x.0).unwrap_or(0.0);
        total += (p[k].0 - next) * phi(m);
    }
    total
}

#[test]
fn assembled_norms() {
    let c = build_cme(&ScaleProfile::toy_c()).unwrap();
    let levels = build_f_sets(&c, default_run_bits).unwrap();
    let f = assemble(&levels, &Weights::Default).unwrap();
    assert!((0.25..=4.0).contains(&f.mu_norm), "{}", f.mu_norm);
    let parts: Vec<(f64, f64)> = f.parts.iter().map(|p| (p.1, p.2)).collect();
    let mu = |s: f64| s * (4.0 / s).log2().log2();
    let brute = lorentz_brute(&parts, mu);
    assert!((f.mu_norm - brute).abs() <= 1e-9 * brute, "{} vs {}", f.mu_norm, brute);
    let l1: f64 = parts.iter().map(|&(a, b)| (a + b).exp2()).sum();
    assert!((f.l1 - l1).abs() <= 1e-12 * l1);

    let w = Weights::Log2(vec![3.0, 5.5, -1.0]);
    let g = assemble(&levels, &w).unwrap();
    assert_eq!(g.parts.iter().map(|p| p.1).collect::<Vec<_>>(), vec![3.0, 5.5, -1.0]);
    assert_eq!(g.log2_weight(2), 5.5);
    assert_eq!(g.log2_weight(9), f64::NEG_INFINITY);
    assert!(matches!(assemble(&levels, &Weights::Log2(vec![1.0])).unwrap_err(), SetsError::Weights(_)));
    assert_eq!(assemble(&[], &Weights::Default).unwrap_err(), SetsError::Empty);

    let inv = assemble(&levels, &Weights::Inverse).unwrap();
    for (lv, lr, lm) in &inv.parts {
        let j = *lv as f64;
        assert!((lr + lm + j + j.log2()).abs() < 1e-9);
    }
}
