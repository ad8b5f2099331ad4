use num_bigint::BigInt;
use num_traits::Signed;
use proptest::prelude::*;
use tiletower::dyadic::*;

fn q(n: i64, d: i64) -> Rat {
    rat(n, d)
}

fn step(r: u32, v: &[i64]) -> ExactStep {
    StepFunction::new(r, v.iter().map(|&x| Rat::from_integer(BigInt::from(x))).collect())
}

#[test]
fn children_and_subintervals() {
    let i = DyadicInterval::new(1, 1);
    let (a, b) = i.children();
    assert_eq!((a, b), (DyadicInterval::new(2, 2), DyadicInterval::new(2, 3)));
    assert_eq!(a.parent(), i);
    let subs = DyadicInterval::unit().subintervals(2);
    assert_eq!(subs.iter().map(|s| s.left()).collect::<Vec<_>>(), vec![q(0, 1), q(1, 4), q(1, 2), q(3, 4)]);
    assert_eq!(DyadicInterval::unit().subintervals(0), vec![DyadicInterval::unit()]);
}

#[test]
fn star_of_unit_and_half() {
    let (l, r) = star(&DyadicInterval::unit());
    assert_eq!((l.lo, l.hi), (q(-8, 1), q(-1, 1)));
    assert_eq!((r.lo, r.hi), (q(2, 1), q(9, 1)));
    let (l, r) = star(&DyadicInterval::new(1, 0));
    assert_eq!((l.lo, l.hi), (q(-4, 1), q(-1, 2)));
    assert_eq!((r.lo, r.hi), (q(1, 1), q(9, 2)));
}

#[test]
fn weak_norm_enumerates_thresholds() {
    // 4 on 1/8, 2 on 1/4, 1 on 1/2, 0 on 1/8
    let f = step(3, &[4, 2, 2, 1, 1, 1, 1, 0]);
    assert_eq!(f.weak_l1_norm(), q(7, 8));
}

#[test]
fn bmo_of_half_indicator() {
    let f = step(3, &[1, 1, 1, 1, 0, 0, 0, 0]);
    assert_eq!(f.dyadic_bmo_norm(), q(1, 2));
}

#[test]
fn maximal_function_of_quarter_indicator() {
    let f = step(2, &[1, 0, 0, 0]);
    let m = f.hl_maximal();
    assert_eq!(m.values[0], q(1, 1));
    assert_eq!(m.values[1], q(1, 2));
    assert_eq!(m.values[2], q(1, 4));
    assert_eq!(m.values[3], q(1, 4));
}

#[test]
fn measurable_set_algebra() {
    let a = MeasurableSet::from_runs(4, vec![(0, 4), (8, 10)]);
    let b = MeasurableSet::from_runs(4, vec![(2, 9)]);
    assert_eq!(a.union(&b).runs(), &[(0, 10)]);
    assert_eq!(a.intersection(&b).runs(), &[(2, 4), (8, 9)]);
    assert_eq!(a.difference(&b).runs(), &[(0, 2), (9, 10)]);
    assert_eq!(a.measure(), q(6, 16));
    assert!(a.intersection(&b).is_subset(&a));
    assert_eq!(a.refine(5).measure(), a.measure());
}

fn brute_weak(v: &[i64], r: u32) -> Rat {
    // sup over λ of λ·|{|f| > λ}| approached from below the jump values, i.e. v·|{|f| ≥ v}|
    let mut best = Rat::from_integer(BigInt::from(0));
    for &t in v {
        let t = t.abs();
        let n = v.iter().filter(|x| x.abs() >= t).count() as i64;
        let c = Rat::from_integer(BigInt::from(t * n)) * pow2(-(r as i64));
        if c > best {
            best = c;
        }
    }
    best
}

fn brute_bmo(v: &[i64], r: u32) -> Rat {
    let mut best = Rat::from_integer(BigInt::from(0));
    for s in 0..=r {
        let w = 1usize << (r - s);
        for blk in v.chunks(w) {
            let mean = Rat::new(BigInt::from(blk.iter().sum::<i64>()), BigInt::from(w as i64));
            let osc: Rat = blk.iter().map(|&x| (Rat::from_integer(BigInt::from(x)) - &mean).abs()).fold(Rat::from_integer(BigInt::from(0)), |a, b| a + b)
                / Rat::from_integer(BigInt::from(w as i64));
            if osc > best {
                best = osc;
            }
        }
    }
    best
}

proptest! {
    #[test]
    fn weak_norm_matches_threshold_enumeration(v in prop::collection::vec(-6i64..=6, 16)) {
        prop_assert_eq!(step(4, &v).weak_l1_norm(), brute_weak(&v, 4));
    }

    #[test]
    fn weak_norm_below_l1(v in prop::collection::vec(-6i64..=6, 32)) {
        let f = step(5, &v);
        prop_assert!(f.weak_l1_norm() <= f.l1_norm());
    }

    #[test]
    fn bmo_matches_brute_force(v in prop::collection::vec(-4i64..=4, 16)) {
        prop_assert_eq!(step(4, &v).dyadic_bmo_norm(), brute_bmo(&v, 4));
    }

    #[test]
    fn maximal_function_dominates_and_matches_brute_force(v in prop::collection::vec(-5i64..=5, 8)) {
        let f = step(3, &v);
        let m = f.hl_maximal();
        for c in 0..8u64 {
            let mut best = Rat::from_integer(BigInt::from(0));
            for s in 0..=3i32 {
                let i = DyadicInterval::new(3, c).ancestor(s);
                let a = f.abs().mean_on(&i);
                if a > best { best = a; }
            }
            prop_assert_eq!(&m.values[c as usize], &best);
            prop_assert!(m.values[c as usize] >= Rat::from_integer(BigInt::from(v[c as usize].abs())));
        }
    }

    #[test]
    fn set_operations_match_cellwise(a in prop::collection::vec(any::<bool>(), 32), b in prop::collection::vec(any::<bool>(), 32)) {
        let cells = |v: &[bool]| v.iter().enumerate().filter(|x| *x.1).map(|x| x.0 as u64).collect::<Vec<_>>();
        let sa = MeasurableSet::from_cells(5, &cells(&a));
        let sb = MeasurableSet::from_cells(5, &cells(&b));
        for c in 0..32u64 {
            let (x, y) = (a[c as usize], b[c as usize]);
            prop_assert_eq!(sa.union(&sb).contains_cell(c), x || y);
            prop_assert_eq!(sa.intersection(&sb).contains_cell(c), x && y);
            prop_assert_eq!(sa.difference(&sb).contains_cell(c), x && !y);
        }
        prop_assert_eq!(sa.cell_count() as usize, a.iter().filter(|x| **x).count());
    }

    #[test]
    fn children_partition_parent(scale in 0i32..20, idx in 0u64..1000) {
        let i = DyadicInterval::new(scale, idx % (1u64 << scale));
        let (a, b) = i.children();
        prop_assert_eq!(a.len() + b.len(), i.len());
        prop_assert_eq!(a.left(), i.left());
        prop_assert_eq!(b.right(), i.right());
        prop_assert!(i.contains(&a) && i.contains(&b) && a.disjoint(&b));
        let (l, r) = star(&i);
        prop_assert_eq!(l.len(), r.len());
        prop_assert_eq!(l.len(), i.len() * Rat::from_integer(BigInt::from(7)));
    }
}
