//! The eleven acceptance criteria, each reduced to a pass flag and a one-line detail.

use std::time::{Duration, Instant};

use tiletower::carleson::Kernel;
use tiletower::counting::extremality_spread;

use crate::config::Config;
use crate::experiments::{
    all_profiles, blowup_rows, build, column_rows, counting_report, key_stats, norm_oracles, reconstruct_report, strictly_increasing,
    structural, walsh_identities, walsh_weak_rows, BlowupRow, CountingReport, Structural,
};
use crate::report::num;
use crate::LabError;

#[derive(Clone, Debug)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!("{} {:>2} {}: {} [{:.1}s]", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail, self.elapsed.as_secs_f64())
    }
}

/// Data shared between criteria.
#[derive(Default)]
struct Shared {
    structural: Option<Vec<Structural>>,
    counting: Option<Vec<CountingReport>>,
    blowup: Option<Vec<BlowupRow>>,
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> Result<(bool, String), LabError>) -> Criterion {
    let t = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
    Criterion { id, name, pass, detail, elapsed: t.elapsed() }
}

const MASS_CHECK: &str = "restricted_mass_exact";

/// Runs every criterion in order, calling `report` as each finishes.
pub fn run_all(cfg: &Config, report: &mut dyn FnMut(&Criterion)) -> Vec<Criterion> {
    let t = &cfg.tolerances;
    let mut sh = Shared::default();
    let mut out = Vec::new();
    let mut push = |c: Criterion, out: &mut Vec<Criterion>| {
        report(&c);
        out.push(c);
    };

    push(
        timed(1, "walsh identities", || {
            let start = Instant::now();
            let r = walsh_identities(cfg);
            let secs = start.elapsed().as_secs_f64();
            Ok((r.pass() && secs < 60.0, format!("{} partial sums, {} mismatches, recursions {}, product {}, difference {}", r.partial_sums_checked, r.partial_sum_mismatches, r.recursions_ok, r.product_ok, r.difference_ok)))
        }),
        &mut out,
    );

    push(
        timed(2, "structure invariants", || {
            let start = Instant::now();
            let v: Vec<Structural> = crate::experiments::par_map(&all_profiles(cfg), structural).into_iter().collect::<Result<_, _>>()?;
            let failed: Vec<String> = v
                .iter()
                .filter(|s| cfg.profiles.iter().any(|p| p.label() == s.label))
                .flat_map(|s| s.checks.iter().filter(|c| c.name != MASS_CHECK && !c.pass).map(move |c| format!("{} {}", s.label, c.name)))
                .collect();
            let n: usize = v.iter().filter(|s| cfg.profiles.iter().any(|p| p.label() == s.label)).map(|s| s.checks.len() - 1).sum();
            let secs = start.elapsed().as_secs_f64();
            sh.structural = Some(v);
            Ok((failed.is_empty() && secs < 300.0, if failed.is_empty() { format!("{} checks on {} profiles", n, cfg.profiles.len()) } else { failed.join("; ") }))
        }),
        &mut out,
    );

    push(
        timed(3, "mass realization", || {
            let v = sh.structural.as_ref().ok_or_else(|| LabError::Validation("no builds".into()))?;
            let exact = v.iter().all(|s| s.checks.iter().any(|c| c.name == MASS_CHECK && c.pass));
            let worst = v.iter().map(|s| s.mass_ratio).fold(0.0, f64::max);
            Ok((exact && worst <= t.mass_ratio, format!("restricted masses exact: {}, max A/A0 = {}", exact, num(worst))))
        }),
        &mut out,
    );

    push(
        timed(4, "counting functions", || {
            let v: Vec<CountingReport> = crate::experiments::par_map(&all_profiles(cfg), counting_report).into_iter().collect::<Result<_, _>>()?;
            let bmo = v.iter().flat_map(|r| r.rows.iter().map(|l| l.bmo)).fold(0.0, f64::max);
            let nest: u64 = v.iter().map(|r| r.nesting_violations + r.jn_violations).sum();
            let pairs: u64 = v.iter().map(|r| r.nesting_pairs).sum();
            let weak = v.iter().all(|r| r.extremality.weak_below_l1);
            let obs6 = v.iter().all(|r| r.obs6);
            let mono = v.iter().all(|r| r.monotone);
            let pass = bmo <= t.bmo && nest == 0 && weak && obs6 && mono;
            sh.counting = Some(v);
            Ok((pass, format!("max BMO {}, nesting/JN violations {} over {} pairs, weak<=L1 {}, disjointness {}", num(bmo), nest, pairs, weak, obs6)))
        }),
        &mut out,
    );

    push(
        timed(5, "extremality trend", || {
            let v = sh.counting.as_ref().ok_or_else(|| LabError::Validation("no counting data".into()))?;
            let rows: Vec<_> = cfg.sweep_profiles().iter().filter_map(|p| v.iter().find(|r| r.label == p.label())).map(|r| r.extremality.clone()).collect();
            let spread = extremality_spread(&rows);
            let ratios: Vec<String> = rows.iter().map(|r| format!("h{} {}", r.height, num(r.ratio))).collect();
            Ok((spread <= t.extremality_factor, format!("{}; spread {}", ratios.join(", "), num(spread))))
        }),
        &mut out,
    );

    push(
        timed(6, "alignment", || {
            let kernel = Kernel::new();
            let weights = cfg.weights.to_weights();
            let stats: Vec<_> = crate::experiments::par_map(&all_profiles(cfg), |p| build(p, &weights).map(|b| key_stats(&b, &kernel, t.c_align, t.scramble_small, cfg.seed)))
                .into_iter()
                .collect::<Result<_, _>>()?;
            let eligible: usize = stats.iter().map(|s| s.eligible).sum();
            let bad: usize = stats.iter().map(|s| s.below + s.vacuous).sum();
            let min = stats.iter().map(|s| s.min_ratio).fold(f64::INFINITY, f64::min);
            let worst_frac = stats.iter().map(|s| s.scrambled_small as f64 / s.scrambled.max(1) as f64).fold(1.0, f64::min);
            Ok((bad == 0 && eligible > 0 && worst_frac >= t.scramble_fraction, format!("{} tiles, min ratio {}, {} below; scrambled small fraction >= {}", eligible, num(min), bad, num(worst_frac))))
        }),
        &mut out,
    );

    // one evaluation of T f per build serves both 7 and 8
    let mut blowup_err = LabError::Validation("not evaluated".into());
    push(
        timed(7, "exact cancellation", || {
            let rows = blowup_rows(cfg).inspect_err(|e| blowup_err = e.clone())?;
            let rows = sh.blowup.insert(rows);
            let worst = rows.iter().map(|r| if r.tm_max > 0.0 { r.tr_nm_max / r.tm_max } else { f64::INFINITY }).fold(0.0, f64::max);
            Ok((worst < t.kkey, format!("max |T_R<nm| / max |T_M| = {}", num(worst))))
        }),
        &mut out,
    );

    push(
        timed(8, "blowup trend", || {
            let rows = sh.blowup.as_ref().ok_or_else(|| blowup_err.clone())?;
            let min = rows.iter().map(|r| r.blowup_ratio).fold(f64::INFINITY, f64::min);
            let mut sw: Vec<&BlowupRow> = rows.iter().filter(|r| r.sweep).collect();
            sw.sort_by_key(|r| r.height);
            let inc = strictly_increasing(&sw);
            let trend: Vec<String> = sw.iter().map(|r| format!("h{} {}", r.height, num(r.weak_over_mu))).collect();
            Ok((
                min >= t.blowup_c && inc,
                format!("min T_M ratio {} (c = {}); weak/norm {} {}", num(min), num(t.blowup_c), trend.join(", "), if inc { "increasing" } else { "not increasing" }),
            ))
        }),
        &mut out,
    );

    push(
        timed(9, "walsh dichotomy", || {
            let rows = walsh_weak_rows(cfg);
            let within = rows.iter().all(|r| r.within);
            let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let cols = column_rows(cfg);
            let last = cols.last().ok_or_else(|| LabError::Config("column height 0".into()))?;
            let sep = last.fourier_ratio / last.walsh_ratio;
            Ok((
                within && sep >= t.column_separation,
                format!("max weak/L1 {} over {} functions; height {}: fourier {} walsh {} (x{})", num(worst), rows.len(), last.height, num(last.fourier_ratio), num(last.walsh_ratio), num(sep)),
            ))
        }),
        &mut out,
    );

    push(
        timed(10, "reconstruction", || {
            let r = reconstruct_report(cfg);
            Ok((r.spread <= t.recon_spread && r.doubling_change <= t.recon_doubling, format!("spread {}, doubling change {}", num(r.spread), num(r.doubling_change))))
        }),
        &mut out,
    );

    push(
        timed(11, "norm oracles", || {
            let r = norm_oracles(cfg.seed);
            Ok((r.pass(), format!("{} V vectors ({} off), {} Lorentz cases ({} off), phi0 divergent {}, phi0*lll^2 convergent {}", r.v_vectors, r.v_mismatches, r.lorentz_cases, r.lorentz_mismatches, r.phi0_divergent, r.lll2_convergent)))
        }),
        &mut out,
    );
    out
}
