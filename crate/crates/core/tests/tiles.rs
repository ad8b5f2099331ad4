use proptest::prelude::*;
use tiletower::dyadic::*;
use tiletower::tiles::*;

fn tile(scale: i32, index: u64, alpha: u64) -> Tile {
    Tile::new(DyadicInterval::new(scale, index), Freq::from_u64(alpha)).unwrap()
}

#[test]
fn freq_normalization_and_order() {
    let a = Freq::new(12, 3);
    assert_eq!((a.mantissa(), a.exponent()), (3, 5));
    assert_eq!(a.to_u64(), Some(96));
    assert_eq!(Freq::new(0, 7), Freq::from_u64(0));
    assert!(Freq::pow2(70) > Freq::from_u64(u64::MAX));
    assert!(Freq::pow2(3).aligned(3) && !Freq::from_u64(12).aligned(3));
    assert_eq!(Freq::from_u64(13).floor_pow2(2), Freq::from_u64(12));
    assert_eq!(Freq::pow2(80).bits(), 81);
}

#[test]
fn tile_constructor_checks() {
    assert!(Tile::new(DyadicInterval::new(2, 4), Freq::from_u64(4)).is_err());
    assert!(Tile::new(DyadicInterval::new(2, 1), Freq::from_u64(6)).is_err());
    assert!(Tile::new(DyadicInterval::new(2, 1), Freq::from_u64(8)).is_ok());
}

#[test]
fn e_set_is_left_half() {
    let p = tile(0, 0, 4);
    let n = Linearization::from_runs(3, vec![(0, 4, Freq::from_u64(4)), (4, 8, Freq::from_u64(8))]);
    let e = e_set(&p, &n);
    assert_eq!(e.runs(), &[(0, 4)]);
    assert_eq!(restricted_mass(&p, &n), rat(1, 2));
}

#[test]
fn order_example() {
    let p1 = tile(1, 0, 0);
    let p2 = tile(0, 0, 0);
    assert!(tile_leq(&p1, &p2) && tile_lt(&p1, &p2));
    assert!(!tile_leq(&p2, &p1));
    assert!(tile_leq(&p2, &p2) && !tile_lt(&p2, &p2));
}

#[test]
fn dilation_example() {
    let p = tile(2, 0, 4);
    let d = tile_dilate(&rat(100, 1), &p);
    assert_eq!((d.lo, d.hi), (rat(-194, 1), rat(206, 1)));
}

#[test]
fn mass_through_distant_frequency() {
    // P = [0,1/2)×[100,102) has no E-set; P′ = [0,1/2)×[122,124) has A₀ = 1 and
    // dist(10ω, 10ω′) = 22 − 20 = 2 = |ω|, so A(P) = 2^{−N₀}
    let p = tile(1, 0, 100);
    let pp = tile(1, 0, 122);
    let lin = Linearization::from_runs(1, vec![(0, 1, Freq::from_u64(122))]);
    let u = TileUniverse::new(vec![p, pp], lin, 10);
    let a0 = u.restricted_masses();
    assert_eq!(a0, vec![rat(0, 1), rat(1, 1)]);
    assert_eq!(u.mass(0), (-10f64).exp2());
    assert_eq!(u.mass(1), 1.0);
}

#[test]
fn mass_bins_are_half_open() {
    assert_eq!(mass_bin(0.125), 3);
    assert_eq!(mass_bin(0.126), 2);
    assert_eq!(mass_bin(1.0), 0);
    assert_eq!(mass_bin(0.0625 + 1e-15), 3);
}

#[test]
fn classify_puts_declared_masses_in_bins() {
    // three tiles at frequency 2^10 with E-sets of relative measure 1, 1/2, 1/8
    let a = Freq::pow2(10);
    let tiles = vec![
        Tile::new(DyadicInterval::new(1, 0), a).unwrap(),
        Tile::new(DyadicInterval::new(2, 2), a).unwrap(),
        Tile::new(DyadicInterval::new(3, 7), a).unwrap(),
    ];
    let lin = Linearization::from_runs(6, vec![(0, 32, a), (32, 40, a), (63, 64, a)]);
    let u = TileUniverse::new(tiles, lin, 10);
    let c = u.classify();
    assert!(c.p_zero.is_empty());
    assert_eq!(c.bin_of, vec![Some(0), Some(1), Some(3)]);
    assert_eq!(c.maxima[&0], vec![0]);
}

#[test]
fn p_zero_membership() {
    assert!(in_p_zero(&tile(0, 0, 49)));
    assert!(!in_p_zero(&tile(0, 0, 50)));
    assert!(in_p_zero(&tile(3, 0, 8 * 49)));
}

fn arb_tile() -> impl Strategy<Value = Tile> {
    (0i32..5, any::<u64>(), 0u64..64).prop_map(|(s, i, a)| {
        let idx = i % (1u64 << s);
        Tile::new(DyadicInterval::new(s, idx), Freq::from_u64(a << s)).unwrap()
    })
}

proptest! {
    #[test]
    fn order_is_a_partial_order(a in arb_tile(), b in arb_tile(), c in arb_tile()) {
        prop_assert!(tile_leq(&a, &a));
        if tile_leq(&a, &b) && tile_leq(&b, &a) {
            prop_assert_eq!(a, b);
        }
        if tile_leq(&a, &b) && tile_leq(&b, &c) {
            prop_assert!(tile_leq(&a, &c));
        }
        // ≤ means I ⊆ I′ and ω ⊇ ω′, checked on the real intervals
        let brute = b.time.contains(&a.time) && a.omega_real().contains_interval(&b.omega_real());
        prop_assert_eq!(tile_leq(&a, &b), brute);
    }

    #[test]
    fn restricted_mass_matches_cell_scan(p in arb_tile(), vals in prop::collection::vec(proptest::option::of(0u64..96), 64)) {
        let cells: Vec<Option<Freq>> = vals.iter().map(|v| v.map(Freq::from_u64)).collect();
        let n = Linearization::from_cells(6, &cells);
        let (lo, hi) = p.time.cell_range(6);
        let hits = (lo..hi).filter(|&c| n.value_at(c).map(|f| p.contains_freq(&f)).unwrap_or(false)).count() as i64;
        prop_assert_eq!(restricted_mass(&p, &n), rat(hits, (hi - lo) as i64));
        prop_assert!(e_set(&p, &n).subset_of_interval(&p.time));
    }

    #[test]
    fn bins_bracket_masses(m in 1e-9f64..=1.0) {
        let n = mass_bin(m);
        prop_assert!((-(n as f64) - 1.0).exp2() < m && m <= (-(n as f64)).exp2());
    }
}
