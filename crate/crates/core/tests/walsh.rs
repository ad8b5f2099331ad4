use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use std::f64::consts::PI;
use tiletower::dyadic::*;
use tiletower::walsh::*;

/// Π_{i: bit i of n} sgn sin(2^{i+1}πx), in floating point.
fn rademacher_product(n: u64, x: f64) -> i8 {
    let mut s = 1.0;
    for i in 0..64 {
        if (n >> i) & 1 == 1 {
            s *= (((1u64 << (i + 1)) as f64) * PI * x).sin().signum();
        }
    }
    s as i8
}

fn step(r: u32, v: &[i64]) -> StepFunction<Rat> {
    StepFunction::new(r, v.iter().map(|&x| rat(x, 1)).collect())
}

/// ⟨f, w_k⟩ straight from the definition.
fn coeff_brute(f: &StepFunction<Rat>, k: u64) -> Rat {
    let r = f.resolution;
    let n = 1u64 << r;
    let mut s = Rat::zero();
    for c in 0..n {
        let x = (c as f64 + 0.5) / n as f64;
        s += &f.values[c as usize] * rat(rademacher_product(k, x) as i64, 1);
    }
    s * pow2(-(r as i64))
}

#[test]
fn walsh_values_match_rademacher_products() {
    let r = 8;
    for n in 0..256u64 {
        for c in 0..256u64 {
            let x = (c as f64 + 0.5) / 256.0;
            assert_eq!(walsh_cell(n, c, r), rademacher_product(n, x), "n={} c={}", n, c);
            if c % 17 == 0 {
                assert_eq!(walsh(n, &rat(2 * c as i64 + 1, 512)), rademacher_product(n, x));
            }
        }
    }
    assert!(walsh_step(0, 6).values.iter().all(|v| *v == rat(1, 1)));
    assert_eq!(walsh(1, &rat(1, 2)), 0);
    assert_eq!(walsh(3, &rat(-1, 4)), 0);
    assert_eq!(walsh(0, &rat(1, 1)), 0);
    assert_eq!(bit_reverse(0b0011, 4), 0b1100);
}

#[test]
fn walsh_system_is_orthonormal() {
    let r = 6;
    for n in 0..64u64 {
        for m in 0..64u64 {
            let ip: i64 = (0..64).map(|c| walsh_cell(n, c, r) as i64 * walsh_cell(m, c, r) as i64).sum();
            assert_eq!(ip, if n == m { 64 } else { 0 });
        }
    }
}

#[test]
fn wave_packets_have_unit_norm() {
    for (n, l, j) in [(0u64, 0u64, 0u32), (3, 1, 2), (5, 6, 3), (1, 0, 4)] {
        let r = j + 4;
        let cells = 1i64 << r;
        let mut norm = Rat::zero();
        for c in 0..cells {
            let v = wave_packet(n, l, j, &rat(2 * c + 1, 2 * cells));
            norm += v.square();
            assert!(v.sign == 0 || (v.to_f64().abs() - (j as f64 / 2.0).exp2()).abs() < 1e-12);
        }
        assert_eq!(norm * pow2(-(r as i64)), rat(1, 1), "packet ({}, {}, {})", n, l, j);
    }
}

#[test]
fn dyadic_partial_sums_are_conditional_expectations() {
    let f = step(5, &(0..32).map(|c| (c * 7 % 11) - 5).collect::<Vec<_>>());
    for l in 0..=5 {
        assert_eq!(partial_sum_direct(&f, (1 << l) - 1), conditional_expectation(&f, l));
    }
}

#[test]
fn unit_bitile_recursions() {
    let r = 6;
    for j in 0..r {
        for l in 0..(1u64 << j) {
            for q in 0..(1u64 << (r - j - 1)).min(8) {
                assert!(recursions_check(&WalshBitile { j, l, q }, r));
            }
        }
    }
    let b = WalshBitile { j: 2, l: 1, q: 3 };
    assert_eq!(b.upper().freq(), (28, 32));
    assert_eq!(b.lower().freq(), (24, 28));
    assert_eq!(b.left_son().time(), DyadicInterval::new(3, 2));
    assert_eq!(WalshBitile::with_upper_containing(0b101, 0), Some(2));
    assert_eq!(WalshBitile::with_upper_containing(0b101, 1), None);
}

#[test]
fn product_identity_small_case() {
    // w_0 + w_1 + w_2 + w_3 = 4·χ_[0,1/4)
    let r = 4;
    for c in 0..16u64 {
        let s: i32 = (0..4).map(|n| walsh_cell(n, c, r) as i32).sum();
        assert_eq!(s, if c < 4 { 4 } else { 0 });
    }
    for l in 0..=6 {
        assert!(product_identity(l, 6));
    }
}

#[test]
fn column_ratio_stays_bounded() {
    for h in 1..=8u32 {
        let terms = walsh_column(h, h + 8);
        let sum: Rat = terms.iter().cloned().fold(Rat::zero(), |a, b| a + b);
        let mx = terms.iter().map(|t| t.abs()).max().unwrap();
        assert!(!mx.is_zero());
        assert!(sum.abs() <= &mx * rat(2, 1), "h={} sum={} max={}", h, sum, mx);
    }
}

#[test]
fn conjugate_of_constant_vanishes() {
    let g = vec![1.0; 64];
    assert!(conjugate_cells(&g, 6).iter().all(|v| v.abs() < 1e-10));
    let f = step(5, &[1; 32]);
    let m = c_aw(&f, &[0]);
    assert!(m.values.iter().all(|v| v.abs() < 1e-10));
}

fn arb_f(r: u32) -> impl Strategy<Value = StepFunction<Rat>> {
    prop::collection::vec(-8i64..=8, 1usize << r).prop_map(move |v| step(r, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_routes_agree(f in arb_f(5)) {
        let s = Scaled::from_step(&f);
        let ns: Vec<u64> = (0..32).collect();
        let direct = partial_sums_direct_scaled(&s, &ns);
        for n in 0..32u64 {
            prop_assert_eq!(&direct[n as usize], &partial_sum_bitile(&f, n));
            prop_assert_eq!(&direct[n as usize], &bitile_sum_scaled(&s, n + 1));
        }
        prop_assert_eq!(&direct[31], &f);
    }

    #[test]
    fn coefficients_match_brute(f in arb_f(4), k in 0u64..16) {
        prop_assert_eq!(walsh_coefficient(&f, k), coeff_brute(&f, k));
        let s = Scaled::from_step(&f);
        prop_assert_eq!(Rat::new(s.coeff(k), &s.den << 4usize), coeff_brute(&f, k));
        prop_assert!(s.den > BigInt::zero());
    }

    #[test]
    fn difference_identity_holds(f in arb_f(5), l in 1u32..=5, m in 0u32..5) {
        prop_assume!(m < l);
        prop_assert!(difference_identity(l, m, &f));
    }

    #[test]
    fn maximal_partial_sum_dominates(f in arb_f(4), seq in prop::collection::vec(0u64..16, 1..5)) {
        let cw = c_w(&f, &seq);
        for &n in &seq {
            let w = partial_sum_direct(&f, n);
            for (a, b) in w.values.iter().zip(&cw.values) {
                prop_assert!(a.abs() <= *b);
            }
        }
        prop_assert_eq!(single_scale_model(&f, 2), bitile_sum(&f, 4));
    }
}
