use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tiletower::carleson::*;
use tiletower::cme::*;
use tiletower::dyadic::*;
use tiletower::setsbuild::*;
use tiletower::tiles::*;

/// Composite Simpson with n (even) panels.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn psi_support_and_symmetry() {
    for i in 0..=2000 {
        let y = -10.0 + i as f64 * 0.01;
        let v = psi(y);
        if y.abs() <= 2.0 || y.abs() >= 8.0 {
            assert_eq!(v, 0.0, "y={}", y);
        }
        assert_eq!(psi(-y), -v);
        if y > 0.0 {
            assert!(v >= 0.0);
        }
    }
    assert_eq!(eta(3.9), 1.0);
    assert_eq!(eta(8.0), 0.0);
    assert_eq!(smooth_step(-1.0), 0.0);
    assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
}

#[test]
fn psi_k_sum_telescopes_to_one_over_y() {
    for y in [0.25, 0.7, 3.0, -0.25] {
        let s: f64 = (-12..=24).map(|k| psi_k(k, y)).sum();
        assert!((s - 1.0 / y).abs() < 1e-12, "y={} s={}", y, s);
    }
}

#[test]
fn kernel_antiderivatives_match_quadrature() {
    let k = Kernel::new();
    for y in [-7.5f64, -5.0, -2.5, -1.0, 0.0, 2.2, 3.3, 6.9, 9.0] {
        let direct = simpson(-8.0, y.min(8.0), 20000, psi);
        assert!((k.big_psi(y) - direct).abs() < 1e-9, "Ψ({}) {} vs {}", y, k.big_psi(y), direct);
    }
    assert!(k.big_psi(7.999).abs() < 1e-9);
    let direct2 = simpson(-8.0, 1.7, 8000, |t| k.big_psi(t));
    assert!((k.big_psi2(1.7) - direct2).abs() < 1e-8);
    // ∫_lo^hi ∫_a^b ψ_k(x − y) dx dy
    let (kk, a, b, lo, hi) = (3, 0.1, 0.35, 0.4, 0.9);
    let inner = |y: f64| simpson(a, b, 400, |x| psi_k(kk, x - y));
    let brute = simpson(lo, hi, 400, inner);
    assert!((k.g_run_integral(kk, a, b, lo, hi) - brute).abs() < 1e-7, "{} vs {}", k.g_run_integral(kk, a, b, lo, hi), brute);
    assert!((k.g_run(kk, a, b, 0.6) - inner(0.6)).abs() < 1e-8);
    assert!((k.psi_k_integral(kk, 0.9, lo, hi) - simpson(lo, hi, 400, |y| psi_k(kk, 0.9 - y))).abs() < 1e-8);
}

fn random_cstep(rng: &mut ChaCha8Rng, r: u32) -> CStep {
    let mut f = CStep::zero(r);
    for v in &mut f.values {
        *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    f
}

#[test]
fn tile_operator_adjointness_and_support() {
    let r = 7;
    let p = Tile::new(DyadicInterval::new(3, 3), Freq::from_u64(24)).unwrap();
    // E(P) is the right half of I
    let lin = Linearization::from_runs(r, vec![(48, 56, Freq::from_u64(40)), (56, 64, Freq::from_u64(24))]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let f = random_cstep(&mut rng, r);
        let g = random_cstep(&mut rng, r);
        let tf = t_p(&f, &p, &lin, 3);
        let tsg = t_p_star(&g, &p, &lin, 3);
        let lhs = tf.inner(&g);
        let rhs = f.inner(&tsg);
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()), "{} vs {}", lhs, rhs);
        assert!(tf.support().iter().all(|&c| (56..64).contains(&c)));
        // T_P^* g lives within 8|I| of E(P)
        assert!(tsg.support().iter().all(|&c| c + 128 > 56 && c < 64 + 128));
        assert!(tsg.support().iter().all(|&c| !(55..65).contains(&c)));
    }
}

#[test]
fn tile_operator_matches_fine_quadrature() {
    // T_P 1(x) = ∫ e^{−2πiαy} ψ_k(x − y) dy over [0, 1) with N ≡ α
    let r = 8;
    let p = Tile::new(DyadicInterval::new(2, 1), Freq::from_u64(12)).unwrap();
    let lin = Linearization::constant(r, Freq::from_u64(12));
    let mut one = CStep::zero(r);
    one.values.iter_mut().for_each(|v| *v = Complex64::new(1.0, 0.0));
    let t = t_p(&one, &p, &lin, 4);
    let h = (-(r as f64)).exp2();
    for c in [64u64, 80, 100, 127] {
        let x0 = c as f64 * h;
        let cell_avg = |re: bool| {
            simpson(x0, x0 + h, 8, |x| {
                simpson(0.0, 1.0, 4096, |y| {
                    let ph = -2.0 * PI * 12.0 * y;
                    psi_k(2, x - y) * if re { ph.cos() } else { ph.sin() }
                })
            }) / h
        };
        let exact = Complex64::new(cell_avg(true), cell_avg(false));
        assert!((t.values[c as usize] - exact).norm() < 2e-3 * (1.0 + exact.norm()), "cell {}: {} vs {}", c, t.values[c as usize], exact);
    }
}

#[test]
fn lacunary_routes_agree_off_jumps() {
    let r = 7;
    let mut vals = vec![0.0; 128];
    for (c, v) in vals.iter_mut().enumerate() {
        if (32..64).contains(&c) {
            *v = 1.0;
        } else if (90..100).contains(&c) {
            *v = -0.5;
        }
    }
    let f = StepFunction::new(r, vals);
    let seq = [1u64, 2, 4, 8];
    let d = c_lac_direct(&f, &seq);
    let q = c_lac_fourier(&f, &seq);
    let jumps = jump_adjacent(&f);
    let mut compared = 0;
    for c in 0..128 {
        if !jumps[c] {
            compared += 1;
            assert!((d.values[c] - q.values[c]).abs() < 1e-3 * (1.0 + q.values[c]), "cell {}: {} vs {}", c, d.values[c], q.values[c]);
        }
    }
    assert!(compared > 100);
}

#[test]
fn wave_packet_profile() {
    assert_eq!(phi_hat(0.05), 1.0);
    assert_eq!(phi_hat(0.1), 0.0);
    let wp = WavePacket::default();
    let phi0 = 2.0 * simpson(0.0, 0.1, 2000, phi_hat);
    assert!((wp.phi(0.0) - phi0).abs() < 1e-9);
    assert_eq!(wp.phi(3.25), wp.phi(-3.25));
    assert_eq!(wp.phi(wp.half_width), 0.0);
    // Plancherel: ‖φ‖² = ∫ φ̂², almost all of it inside the table
    let energy = 2.0 * simpson(0.0, 0.1, 2000, |e| phi_hat(e).powi(2));
    assert!(wp.tail < 1e-3 * energy, "{} vs {}", wp.tail, energy);
}

#[test]
fn reconstruction_is_constant_in_xi() {
    let rep = reconstruction_constancy(&[-2.0, -5.0, -17.0], 12, 0.125, 64);
    assert!(rep.spread <= 0.01, "{}", rep.spread);
    assert!(rep.doubling_change <= 0.001, "{}", rep.doubling_change);
    assert!(rep.values.iter().all(|&v| v > 0.0));
}

#[test]
fn lt_model_is_linear() {
    let r = 6;
    let wp = WavePacket::new(16.0, 32);
    let f = StepFunction::new(r, (0..64).map(|c| if c < 20 { 1.0 } else { 0.0 }).collect());
    let g = StepFunction::new(r, (0..64).map(|c| if c >= 40 { 2.0 } else { 0.0 }).collect());
    let fg = StepFunction::new(r, f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect());
    let a = lt_model(&f, -9.0, (0, 4), GridParams::origin(), &wp);
    let b = lt_model(&g, -9.0, (0, 4), GridParams::origin(), &wp);
    let s = lt_model(&fg, -9.0, (0, 4), GridParams::origin(), &wp);
    for c in 0..64 {
        assert!((a.values[c] + b.values[c] - s.values[c]).norm() < 1e-12);
    }
    assert!(s.max_abs() > 0.0);
}

#[test]
fn key_alignment_on_toy_profile() {
    let c = build_cme(&ScaleProfile::toy_a()).unwrap();
    let levels = build_f_sets(&c, default_run_bits).unwrap();
    let kernel = Kernel::new();
    let normal = c.normal_flags();
    let elig = key_eligible(&c, &normal);
    assert!(!elig.is_empty());
    let mut ratios = 0;
    for &i in elig.iter().step_by((elig.len() / 25).max(1)) {
        let lv = &levels[c.level_of_tile(i) as usize - 1];
        if let KeyOutcome::Ratio(q) = key_alignment(&c, &kernel, lv, i) {
            assert!((1.0 / 500.0..=1.0 + 1e-9).contains(&q), "tile {}: {}", i, q);
            ratios += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            if let KeyOutcome::Ratio(s) = key_alignment_scrambled(&c, &kernel, lv, i, &mut || rng.gen::<bool>()) {
                assert!(s.abs() <= 1.0 + 1e-9);
            }
        }
    }
    assert!(ratios > 0);
}

#[test]
fn fourier_column_grows_with_height() {
    let k = Kernel::new();
    let mut prev = 0.0;
    for h in [1usize, 2, 4, 8] {
        let col = fourier_column(&k, h, 3);
        assert_eq!(col.terms.len(), h);
        assert!(col.ratio >= prev);
        assert!(col.ratio >= 0.5 * h as f64, "h={} ratio={}", h, col.ratio);
        prev = col.ratio;
    }
    let r = ColumnReport::from_terms(vec![1.0, -1.0, 0.5]);
    assert_eq!((r.sum, r.ratio), (0.5, 0.5));
    assert_eq!(ColumnReport::from_terms(vec![]).ratio, 0.0);
}
