use proptest::prelude::*;
use tiletower::dyadic::*;
use tiletower::structures::*;
use tiletower::tiles::*;

fn di(s: i32, i: u64) -> DyadicInterval {
    DyadicInterval::new(s, i)
}

fn tile(s: i32, i: u64, a: u64) -> Tile {
    Tile::new(di(s, i), Freq::from_u64(a)).unwrap()
}

fn params(tops: Vec<DyadicInterval>, alphas: &[u64], r: u32, n: u32) -> UsgtfParams {
    UsgtfParams { tops, alphas: alphas.iter().map(|&a| Freq::from_u64(a)).collect(), r, n, sigma: 2 }
}

#[test]
fn prec_examples() {
    assert!(prec(&[di(2, 0), di(2, 1)], &[di(1, 0)]));
    assert!(prec(&[di(1, 0)], &[di(1, 0)]));
    assert!(!prec(&[di(0, 0)], &[di(1, 0), di(1, 1)]));
    assert!(!prec(&[di(2, 2)], &[di(1, 0)]));
}

#[test]
fn tree_and_sparse_tree() {
    let a = tile(0, 0, 8);
    let b = tile(1, 0, 8);
    let c = tile(2, 0, 8);
    let universe = [a, b, c, tile(1, 1, 8)];
    assert!(is_tree(&[a, b, c], &a, &universe));
    assert!(!is_tree(&[a, c], &a, &universe));
    assert!(!is_tree(&[b, c], &a, &universe));
    assert!(is_sparse_tree(&[a, b, c], &a, &rat(7, 4), &universe));
    assert!(!is_sparse_tree(&[a, b, c], &a, &rat(3, 2), &universe));
}

#[test]
fn usgtf_smallest_example() {
    let u = build_usgtf(params(vec![di(0, 0)], &[4, 16], 1, 2)).unwrap();
    let expected = vec![tile(0, 0, 4), tile(0, 0, 16), tile(1, 0, 4), tile(1, 1, 16)];
    assert_eq!(u.tiles, expected);
    assert_eq!(u.level, vec![2, 2, 1, 1]);
    assert_eq!(u.bottoms(), vec![di(1, 0), di(1, 1)]);
    assert_eq!(u.chain(0, 1), vec![1, 3]);
    assert_eq!(u.chain_bottom(0, 1), di(1, 1));
    let e = u.e_constraints();
    assert_eq!(e.len(), 2);
    assert_eq!(e[0].measure, rat(1, 4));
    u.check().unwrap();
}

#[test]
fn usgtf_parameter_errors() {
    assert_eq!(build_usgtf(params(vec![di(0, 0)], &[4], 1, 2)).unwrap_err(), StructError::Cardinality { expected: 2, got: 1 });
    assert_eq!(build_usgtf(params(vec![di(0, 0)], &[4, 8], 1, 2)).unwrap_err(), StructError::Separation(2));
    assert_eq!(build_usgtf(params(vec![di(0, 0)], &[4, 16], 0, 2)).unwrap_err(), StructError::Generation(0, 2));
    assert!(matches!(build_usgtf(params(vec![di(0, 0)], &[3, 16], 1, 2)).unwrap_err(), StructError::Alignment(_)));
    assert_eq!(build_usgtf(params(vec![di(1, 0), di(2, 2)], &[4, 16], 1, 2)).unwrap_err(), StructError::Tops);
    assert_eq!(build_usgtf(params(vec![di(1, 0), di(1, 0)], &[4, 16], 1, 2)).unwrap_err(), StructError::Tops);
}

#[test]
fn check_detects_missing_tile() {
    let mut u = build_usgtf(params(vec![di(0, 0)], &[4, 16], 1, 2)).unwrap();
    u.tiles.pop();
    u.level.pop();
    assert!(u.check().is_err());
}

#[test]
fn forest_counting_bound() {
    let n = 2;
    let stacked = |k: u64| (0..k).map(|j| tile(0, 0, 100 * j)).collect::<Vec<_>>();
    let ok = forest_check(&stacked(4), n, &rat(1, 1));
    assert!(ok.verdict);
    assert_eq!(ok.trees.len(), 4);
    assert_eq!(ok.linf, rat(4, 1));
    let bad = forest_check(&stacked(5), n, &rat(1, 1));
    assert!(!bad.verdict);
    assert!(bad.separation_violation.is_none());
    assert_eq!(bad.linf, rat(5, 1));
}

#[test]
fn forest_separation_violation() {
    // a deep tile whose doubled box swallows the tenfold box of a different top
    let top1 = tile(0, 0, 0);
    let top2 = tile(0, 0, 64);
    let deep = tile(6, 0, 0);
    let r = forest_check(&[top1, top2, deep], 4, &rat(8, 1));
    assert_eq!(r.separation_violation, Some((deep, top2)));
    assert!(!r.verdict);
}

fn two_layer(alpha_up: u64) -> Tower {
    let down = build_usgtf(params(vec![di(0, 0)], &[4, 16], 1, 2)).unwrap();
    let up = build_usgtf(params(vec![di(1, 0)], &[alpha_up], 1, 1)).unwrap();
    Tower { layers: vec![down, up], shared_floor: false }
}

#[test]
fn tower_heights_and_failures() {
    let one = Tower { layers: vec![build_usgtf(params(vec![di(0, 0)], &[4, 16], 1, 2)).unwrap()], shared_floor: false };
    assert_eq!(tower_check(&one).unwrap().height, 1);
    let t = two_layer(64);
    let rep = tower_check(&t).unwrap();
    assert_eq!(rep.height, 2);
    assert_eq!(rep.basis, vec![di(0, 0)]);
    assert_eq!(tower_check(&two_layer(4)).unwrap_err(), StructError::NoComFreq(0, 1));
    let mut misplaced = two_layer(64);
    misplaced.layers.swap(0, 1);
    assert_eq!(tower_check(&misplaced).unwrap_err(), StructError::Prec(1, 0));
}

#[test]
fn tower_incomparability() {
    // [0,1/4)×[4,8) lies below [0,1/2)×[4,6) of the lower layer
    let down = build_usgtf(params(vec![di(0, 0)], &[4, 16], 1, 2)).unwrap();
    let up = build_usgtf(params(vec![di(2, 0)], &[32], 1, 1)).unwrap();
    let mut bad_up = up.clone();
    bad_up.tiles = vec![tile(2, 0, 4)];
    bad_up.params.alphas = vec![Freq::from_u64(8)];
    let t = Tower { layers: vec![down.clone(), bad_up], shared_floor: false };
    assert!(matches!(tower_check(&t).unwrap_err(), StructError::Incomp(..)));
    let t = Tower { layers: vec![down, up], shared_floor: false };
    assert!(tower_check(&t).is_ok());
}

#[test]
fn multitower_bases() {
    let a = two_layer(64);
    let mut b = a.clone();
    for l in &mut b.layers {
        let p = UsgtfParams { tops: l.params.tops.iter().map(|t| DyadicInterval::new(t.scale, t.index + (1 << t.scale))).collect(), ..l.params.clone() };
        *l = build_usgtf(p).unwrap();
    }
    let m = MultiTower { towers: vec![a.clone(), b] };
    assert_eq!(multitower_check(&m).unwrap().len(), 2);
    assert_eq!(m.basis(), vec![di(0, 0), di(0, 1)]);
    let m = MultiTower { towers: vec![a.clone(), a] };
    assert_eq!(multitower_check(&m).unwrap_err(), StructError::Basis(0, 1));
}

#[test]
fn embedding_examples() {
    let f2 = build_usgtf(params(vec![di(0, 0)], &[4, 16], 1, 2)).unwrap();
    let f1 = build_usgtf(params(vec![di(1, 0)], &[4], 1, 1)).unwrap();
    assert!(embeds(&[&f1], &[&f2]));
    let wrong_side = build_usgtf(params(vec![di(1, 0)], &[16], 1, 1)).unwrap();
    assert!(!embeds(&[&wrong_side], &[&f2]));
    let foreign = build_usgtf(params(vec![di(1, 0)], &[64], 1, 1)).unwrap();
    assert!(!embeds(&[&foreign], &[&f2]));
    assert!(!embeds(&[&f2], &[&f1]));
    assert!(!embeds(&[], &[&f2]));
}

fn arb_params() -> impl Strategy<Value = UsgtfParams> {
    (1u32..5, 0u32..3, 0i32..3, 1u32..3, prop::bool::ANY).prop_flat_map(|(n, dr, s, sigma, zero)| {
        let r = n.saturating_sub(dr).max(1);
        let count = 1usize << s;
        (prop::sample::subsequence((0..(1u64 << s)).collect::<Vec<_>>(), 1..=count), Just((r, n, s, sigma, zero)))
    })
    .prop_map(|(idx, (r, n, s, sigma, zero))| {
        let finest = s as u32 + n - r;
        let alphas = (0..1u32 << (n - 1))
            .map(|k| if zero && k == 0 { Freq::from_u64(0) } else { Freq::pow2(finest + sigma * k) })
            .collect();
        UsgtfParams { tops: idx.into_iter().map(|i| DyadicInterval::new(s, i)).collect(), alphas, r, n, sigma }
    })
}

proptest! {
    #[test]
    fn built_usgtfs_are_consistent(p in arb_params()) {
        let u = build_usgtf(p.clone()).unwrap();
        let (r, n) = u.generation();
        prop_assert_eq!(u.tiles.len(), p.tops.len() * (n - r + 1) as usize * (1usize << (n - 1)));
        prop_assert!(u.check().is_ok());
        for t in &u.tiles {
            prop_assert!(Tile::new(t.time, t.alpha).is_ok());
        }
        // every chain is a decreasing path in the tile order ending at its bottom
        for top in 0..p.tops.len() {
            for k in 0..p.alphas.len() {
                let c = u.chain(top, k);
                for w in c.windows(2) {
                    prop_assert!(tile_leq(&u.tiles[w[1]], &u.tiles[w[0]]));
                }
                prop_assert_eq!(u.tiles[*c.last().unwrap()].time, u.chain_bottom(top, k));
            }
        }
        // E requirements per bottom add up to |bottom|·2^{−r}·2^{r−1}
        let total: Rat = u.e_constraints().iter().map(|e| e.measure.clone()).sum();
        let tops_len: Rat = p.tops.iter().map(|t| t.len()).sum();
        prop_assert_eq!(total, tops_len * rat(1, 2));
    }

    #[test]
    fn forest_counting_matches_brute(tiles in prop::collection::vec((0i32..4, any::<u64>(), 0u64..8), 1..12)) {
        let p: Vec<Tile> = tiles.iter().map(|&(s, i, a)| tile(s, i % (1 << s), (a * 1000) << s)).collect();
        let rep = forest_check(&p, 3, &rat(1, 1));
        let maximal: Vec<&Tile> = p.iter().filter(|t| !p.iter().any(|q| q != *t && tile_leq(t, q))).collect();
        let mut maximal: Vec<Tile> = maximal.into_iter().copied().collect();
        maximal.sort_by(|a, b| a.time.left().cmp(&b.time.left()).then(a.alpha.cmp(&b.alpha)));
        maximal.dedup();
        let mut best = 0i64;
        for c in 0..8u64 {
            let x = rat(c as i64, 8) + rat(1, 16);
            let k = maximal.iter().filter(|t| t.time.left() <= x && x < t.time.right()).count() as i64;
            best = best.max(k);
        }
        prop_assert_eq!(rep.linf, rat(best, 1));
        prop_assert_eq!(rep.trees.iter().map(|(_, m)| m.len()).sum::<usize>(), p.len());
    }
}
