use num_bigint::BigInt;
use proptest::prelude::*;
use tiletower::dyadic::*;
use tiletower::norms::*;

fn step(r: u32, v: &[i64]) -> ExactStep {
    StepFunction::new(r, v.iter().map(|&x| Rat::from_integer(BigInt::from(x))).collect())
}

fn perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in perms(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn distribution_counts_cells() {
    let f = step(2, &[2, 1, 0, 0]);
    assert_eq!(distribution(&f, &Rat::from_integer(BigInt::from(1))), rat(1, 4));
}

#[test]
fn lorentz_identity_is_l1() {
    let f = step(2, &[2, 1, 0, 0]);
    assert_eq!(lorentz_norm(&f, &FundamentalFunction::identity()), 0.75);
    assert_eq!(lorentz_identity_exact(&f), rat(3, 4));
}

#[test]
fn marcinkiewicz_of_indicator() {
    let f = step(3, &[1, 1, 0, 0, 0, 0, 0, 0]);
    assert!((marcinkiewicz_norm(&f, &FundamentalFunction::identity()) - 1.0).abs() < 1e-12);
}

#[test]
fn v_norm_worked_value() {
    let v = v_norm(&[3.0, 2.0, 1.0]);
    assert!((v - (3.0 + 2.0 * 3f64.log2() + 2.0)).abs() < 1e-12);
    assert!((v - 8.1699).abs() < 1e-4);
}

#[test]
fn w_norm_best_matches_permutations() {
    let parts = [(0.1, 1.0), (0.3, 0.5), (0.05, 4.0)];
    let (best, _) = w_norm_best(&parts).unwrap();
    let brute = perms(3).iter().map(|p| w_norm_upper(&parts, p).unwrap()).fold(f64::INFINITY, f64::min);
    assert!((best - brute).abs() < 1e-12);
    assert!(w_norm_upper(&parts, &[0, 0, 1]).is_err());
    assert!(w_norm_best(&[(0.0, 1.0)]).is_err());
    assert!(w_norm_best(&[(2.0, 1.0)]).is_err());
}

#[test]
fn growth_flags() {
    assert!(!growth_integral(&FundamentalFunction::phi0(), 10, 30, GROWTH_TOL).convergent);
    assert!(growth_integral(&FundamentalFunction::phi0_lll2(), 10, 30, GROWTH_TOL).convergent);
}

#[test]
fn fundamental_functions_are_monotone() {
    for phi in [FundamentalFunction::identity(), FundamentalFunction::mu()] {
        assert!(phi.check_grid(200));
    }
    // the fourfold iterated log makes φ₀ dip on roughly [1/6, 1/2); below 1/8 it increases
    for phi in [FundamentalFunction::phi0(), FundamentalFunction::phi0_lll2()] {
        assert!(!phi.check_grid(200));
        let mut prev = 0.0;
        for i in (0..=400).rev() {
            let t = (-3.0 - i as f64 * 0.1).exp2();
            let v = phi.eval(t);
            assert!(v > prev, "{:?} at {}", phi, t);
            prev = v;
        }
        assert_eq!(phi.eval(0.0), 0.0);
    }
}

#[test]
fn parts_norm_matches_step_function() {
    // 3 on 1/8, 1 on 1/4
    let f = step(3, &[3, 1, 1, 0, 0, 0, 0, 0]);
    let mu = FundamentalFunction::mu();
    let parts = [(3f64.log2(), -3.0), (0.0, -2.0)];
    assert!((lorentz_norm_parts(&parts, &mu) - lorentz_norm(&f, &mu)).abs() < 1e-12);
}

#[test]
fn weak_samples() {
    let mut s = vec![(4.0, 0.125), (2.0, 0.25), (1.0, 0.5)];
    assert!((weak_norm_samples(&mut s) - 0.875).abs() < 1e-15);
}

proptest! {
    #[test]
    fn v_norm_is_permutation_minimum(w in prop::collection::vec(0.0f64..10.0, 1..=6)) {
        let brute = perms(w.len()).iter().map(|p| v_assignment_value(&p.iter().map(|&i| w[i]).collect::<Vec<_>>())).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(v_norm(&w), brute);
    }

    #[test]
    fn lorentz_of_indicator_is_phi(cells in prop::collection::btree_set(0u64..64, 1..64)) {
        let v: Vec<u64> = cells.into_iter().collect();
        let a = MeasurableSet::from_cells(6, &v);
        let f: ExactStep = StepFunction::indicator(&a);
        for phi in [FundamentalFunction::identity(), FundamentalFunction::mu(), FundamentalFunction::phi0()] {
            prop_assert_eq!(lorentz_norm(&f, &phi), phi.eval(a.measure_f64()));
        }
    }

    #[test]
    fn rearrangement_of_disjoint_blocks(mut r in prop::collection::btree_set(1i64..50, 1..5)) {
        // r_j decreasing on disjoint sets of 2 cells each
        let vals: Vec<i64> = std::mem::take(&mut r).into_iter().rev().collect();
        let mut cells = vec![0i64; 16];
        for (j, v) in vals.iter().enumerate() {
            cells[2 * j] = *v;
            cells[2 * j + 1] = *v;
        }
        let f = step(4, &cells);
        let re = rearrange(&f);
        prop_assert_eq!(re.blocks.len(), vals.len());
        for ((bv, bm), v) in re.blocks.iter().zip(&vals) {
            prop_assert_eq!(bv, &Rat::from_integer(BigInt::from(*v)));
            prop_assert_eq!(bm, &rat(1, 8));
        }
        // λ-sweep: |{|f| > r_i}| is the measure of the blocks above r_i
        let bps = re.breakpoints();
        for (i, (lam, _)) in re.blocks.iter().enumerate() {
            let before = if i == 0 { rat(0, 1) } else { bps[i - 1].clone() };
            prop_assert_eq!(distribution(&f, lam), before);
        }
        prop_assert_eq!(re.integral(), f.l1_norm());
    }

    #[test]
    fn lorentz_identity_equals_l1(v in prop::collection::vec(-5i64..=5, 16)) {
        let f = step(4, &v);
        prop_assert_eq!(lorentz_identity_exact(&f), f.l1_norm());
    }
}
