//! The experiments behind the CLI commands. Each returns an [`Outcome`] holding its tables and
//! a pass flag; [`write_outcome`] turns it into files.

use num_complex::Complex64;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tiletower::carleson::{
    declared_bins, evaluate, fourier_column, key_alignment, key_alignment_scrambled, key_eligible, l1_blowup_ratio,
    reconstruction_constancy, Bucket, Decomposition, Kernel, KeyOutcome, ReconReport,
};
use tiletower::cme::{build_cme, validate_cme, Check, Cme};
use tiletower::counting::{
    base_sandwich, extremality_row, extremality_spread, jn_regression, keyobs_check, level_sets, nesting_check, nu_j,
    obs6_disjoint, ExtremalityRow,
};
use tiletower::dyadic::{rat_f64, DyadicInterval, ExactStep, MeasurableSet, Rat, StepFunction};
use tiletower::norms::{
    growth_integral, loglog, lorentz_norm, v_assignment_value, v_norm, w_norm_best, FundamentalFunction, GROWTH_TOL,
};
use tiletower::setsbuild::{assemble, build_f_sets, default_run_bits, ExtremalFunction, FLevel, Weights};
use tiletower::walsh::{
    bitile_sum_scaled, c_w, difference_identity, partial_sums_direct_scaled, product_identity, recursions_check,
    walsh_column, Scaled, WalshBitile,
};

use crate::config::{Config, Mode, ProfileChoice};
use crate::report::{num, Output, Series, Table};
use crate::{LabError, VERSION};

#[derive(Clone, Debug)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: String,
    pub pass: bool,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    pub json: Vec<(String, serde_json::Value)>,
}

impl Outcome {
    fn new(command: &str) -> Self {
        Outcome { command: command.to_string(), pass: true, notes: Vec::new(), tables: Vec::new(), plots: Vec::new(), json: Vec::new() }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    /// Records a named check; a failing one fails the outcome.
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.pass &= pass;
        self.notes.push(format!("{} {}: {}", if pass { "PASS" } else { "FAIL" }, name, detail));
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) {
        self.json.push((name.to_string(), serde_json::to_value(v).expect("serializable")));
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    mode: Mode,
    pass: bool,
}

/// Writes config copy, meta, summary, tables, JSON and plots. Nothing time-dependent is
/// written, so a rerun yields the same bytes.
pub fn write_outcome(out: &Output, cfg: &Config, o: &Outcome) -> Result<(), LabError> {
    out.write_json("config.json", cfg)?;
    out.write_json("meta.json", &Meta { version: VERSION, command: &o.command, seed: cfg.seed, mode: cfg.mode, pass: o.pass })?;
    let mut summary = o.notes.join("\n");
    summary.push_str(&format!("\n{} {}\n", o.command, if o.pass { "PASS" } else { "FAIL" }));
    out.write_text("summary.txt", &summary)?;
    for t in &o.tables {
        out.write_table(t)?;
    }
    for (name, v) in &o.json {
        out.write_json(&format!("{}.json", name), v)?;
    }
    for p in &o.plots {
        out.write_svg(&p.name, &p.title, &p.x_label, &p.y_label, &p.series)?;
    }
    Ok(())
}

/// A built CME with its F_j sets and f.
pub struct Built {
    pub label: String,
    pub cme: Cme,
    pub levels: Vec<FLevel>,
    pub f: ExtremalFunction,
}

pub fn build(choice: &ProfileChoice, weights: &Weights) -> Result<Built, LabError> {
    let p = choice.resolve()?;
    let cme = build_cme(&p).map_err(|e| LabError::Validation(e.to_string()))?;
    let levels = build_f_sets(&cme, default_run_bits).map_err(|e| LabError::Validation(e.to_string()))?;
    let f = assemble(&levels, weights).map_err(|e| LabError::Config(e.to_string()))?;
    Ok(Built { label: choice.label(), cme, levels, f })
}

/// Runs `f` on every item, spreading the items over the available cores.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(1);
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(workers) {
        let done: Vec<R> = std::thread::scope(|s| {
            let hs: Vec<_> = chunk.iter().map(|it| s.spawn(|| f(it))).collect();
            hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        out.extend(done);
    }
    out
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn all_profiles(cfg: &Config) -> Vec<ProfileChoice> {
    let mut v = cfg.profiles.clone();
    for p in cfg.sweep_profiles() {
        if !v.contains(&p) {
            v.push(p);
        }
    }
    v
}

// ---------------------------------------------------------------- build / verify

pub fn cmd_build(cfg: &Config) -> Result<Outcome, LabError> {
    let mut o = Outcome::new("build");
    let mut ledger = Table::new("ledger", &["check", "pass", "detail"]);
    let p = cfg.profile.resolve()?;
    match build_cme(&p) {
        Err(e) => {
            ledger.push(vec!["build".into(), "false".into(), e.to_string()]);
            o.check("build", false, e.to_string());
        }
        Ok(cme) => {
            let m = cme.manifest();
            let mut runs = Table::new("n_runs", &["start_cell", "end_cell", "exponent"]);
            for &(a, b, e) in &m.n_runs {
                runs.push(vec![a.to_string(), b.to_string(), e.to_string()]);
            }
            o.json("manifest", &m);
            o.tables.push(runs);
            for c in validate_cme(&cme) {
                ledger.push(vec![c.name.clone(), c.pass.to_string(), c.detail.clone()]);
                o.check(&c.name, c.pass, c.detail);
            }
            o.note(format!("tiles {} usgtfs {} resolution {}", cme.tiles.len(), cme.usgtfs.len(), cme.resolution));
        }
    }
    o.tables.push(ledger);
    Ok(o)
}

/// Largest A(P)/A₀(P) over the tiles of a CME.
pub fn mass_ratio(cme: &Cme) -> f64 {
    let u = cme.universe();
    let a0 = u.restricted_masses();
    let a = u.masses_from(&a0);
    a.iter().zip(&a0).map(|(x, y)| x / rat_f64(y)).fold(0.0, f64::max)
}

pub struct Structural {
    pub label: String,
    pub checks: Vec<Check>,
    pub mass_ratio: f64,
}

pub fn structural(choice: &ProfileChoice) -> Result<Structural, LabError> {
    let p = choice.resolve()?;
    let cme = build_cme(&p).map_err(|e| LabError::Validation(e.to_string()))?;
    Ok(Structural { label: choice.label(), checks: validate_cme(&cme), mass_ratio: mass_ratio(&cme) })
}

/// Alignment statistics of one build.
#[derive(Clone, Debug, Serialize)]
pub struct KeyStats {
    pub label: String,
    pub eligible: usize,
    pub vacuous: usize,
    pub min_ratio: f64,
    pub below: usize,
    pub scrambled: usize,
    pub scrambled_small: usize,
}

pub fn key_stats(b: &Built, kernel: &Kernel, c_align: f64, small: f64, seed: u64) -> KeyStats {
    let cme = &b.cme;
    let normal = cme.normal_flags();
    let el = key_eligible(cme, &normal);
    let mut rng = rng_for(seed, 1);
    let mut st = KeyStats { label: b.label.clone(), eligible: el.len(), vacuous: 0, min_ratio: f64::INFINITY, below: 0, scrambled: 0, scrambled_small: 0 };
    for &i in &el {
        let lv = &b.levels[cme.level_of_tile(i) as usize - 1];
        match key_alignment(cme, kernel, lv, i) {
            KeyOutcome::Vacuous => st.vacuous += 1,
            KeyOutcome::Ratio(r) => {
                st.min_ratio = st.min_ratio.min(r);
                if r < c_align {
                    st.below += 1;
                }
            }
        }
        if let KeyOutcome::Ratio(r) = key_alignment_scrambled(cme, kernel, lv, i, &mut || rng.gen::<bool>()) {
            st.scrambled += 1;
            if r.abs() < small {
                st.scrambled_small += 1;
            }
        }
    }
    st
}

pub fn cmd_verify(cfg: &Config) -> Result<Outcome, LabError> {
    let mut o = Outcome::new("verify");
    let t = &cfg.tolerances;
    let profiles = all_profiles(cfg);
    let results = par_map(&profiles, structural);
    let mut tab = Table::new("structure", &["profile", "check", "pass", "detail"]);
    let mut mass = Table::new("mass", &["profile", "max_mass_ratio", "bound"]);
    for r in results {
        let r = r?;
        for c in &r.checks {
            tab.push(vec![r.label.clone(), c.name.clone(), c.pass.to_string(), c.detail.clone()]);
            o.check(&format!("{} {}", r.label, c.name), c.pass, c.detail.clone());
        }
        mass.push(vec![r.label.clone(), num(r.mass_ratio), num(t.mass_ratio)]);
        o.check(&format!("{} mass_ratio", r.label), r.mass_ratio <= t.mass_ratio, num(r.mass_ratio));
    }
    o.tables.push(tab);
    o.tables.push(mass);
    let kernel = Kernel::new();
    let weights = cfg.weights.to_weights();
    let stats = par_map(&profiles, |p| build(p, &weights).map(|b| key_stats(&b, &kernel, t.c_align, t.scramble_small, cfg.seed)));
    let mut key = Table::new("key_alignment", &["profile", "eligible", "vacuous", "min_ratio", "below_c", "scrambled", "scrambled_small"]);
    for s in stats {
        let s = s?;
        key.push(vec![
            s.label.clone(),
            s.eligible.to_string(),
            s.vacuous.to_string(),
            num(s.min_ratio),
            s.below.to_string(),
            s.scrambled.to_string(),
            s.scrambled_small.to_string(),
        ]);
        o.check(&format!("{} key", s.label), s.below == 0 && s.vacuous == 0, format!("min ratio {} over {} tiles", num(s.min_ratio), s.eligible));
        let frac = s.scrambled_small as f64 / s.scrambled.max(1) as f64;
        o.check(&format!("{} key_scrambled", s.label), frac >= t.scramble_fraction, format!("{}/{} small", s.scrambled_small, s.scrambled));
    }
    o.tables.push(key);
    Ok(o)
}

// ---------------------------------------------------------------- warmup

/// Σ_P 2^{−n(P)} |I_P ∩ F| over the tiles of a CME, with F = ∪ F_j.
pub fn lower_bound_sum(b: &Built) -> f64 {
    let cme = &b.cme;
    cme.tiles
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let lv = &b.levels[cme.level_of_tile(i) as usize - 1];
            let rel = lv.log2_relative_in(&t.time);
            rat_f64(&cme.declared_mass(i)) * (rel + t.time.len_f64().log2()).exp2()
        })
        .sum()
}

pub fn cmd_warmup(cfg: &Config) -> Result<Outcome, LabError> {
    let mut o = Outcome::new("warmup");
    let p = cfg.profile.resolve()?;
    if p.height != 1 {
        return Err(LabError::Usage(format!("warmup needs a height-1 profile, got height {}", p.height)));
    }
    let b = build(&cfg.profile, &Weights::Log2(vec![0.0; p.levels as usize]))?;
    let (r, n) = b.cme.usgtfs[0].u.generation();
    let width = (n - r + 1) as f64;
    let log2_f = b.levels[0].log2_measure;
    let sum = lower_bound_sum(&b);
    // each generation-n layer stacks 2^{n−1} tiles of mass 2^{−n} over every point of F
    let expected = width * log2_f.exp2() / 2.0;
    let mut tab = Table::new("warmup", &["generation_width", "log2_measure_F", "lower_bound_sum", "half_width_times_F", "ratio", "weak_norm", "weak_over_sum"]);
    let rel = sum / expected;
    o.check("lower_bound_sum", (rel - 1.0).abs() < 1e-9, format!("sum {} vs width·|F|/2 {}", num(sum), num(expected)));
    let mut row = vec![num(width), num(log2_f), num(sum), num(expected), num(rel)];
    if cfg.mode == Mode::Numeric {
        let kernel = Kernel::new();
        let dec = evaluate(&b.cme, &b.levels, &b.f, &kernel, &declared_bins(&b.cme));
        let weak = dec.weak(&Bucket::ALL);
        row.push(num(weak));
        row.push(num(weak / sum));
        o.check("weak_vs_sum", weak >= cfg.tolerances.blowup_c * sum, format!("weak norm {} = {} × lower-bound sum", num(weak), num(weak / sum)));
    } else {
        row.push("".into());
        row.push("".into());
    }
    tab.push(row);
    o.tables.push(tab);
    Ok(o)
}

// ---------------------------------------------------------------- blowup

#[derive(Clone, Debug, Serialize)]
pub struct BlowupRow {
    pub label: String,
    pub height: u32,
    pub levels: u32,
    pub sweep: bool,
    pub mu_norm: f64,
    pub phi0_norm: f64,
    pub l1_f: f64,
    pub tm_l1: f64,
    pub weak: f64,
    pub weak_over_mu: f64,
    pub blowup_ratio: f64,
    pub probe_min: f64,
    pub probe_ratio: f64,
    pub tr_nm_max: f64,
    pub tm_max: f64,
}

/// Removes `pieces` random intervals of total length `removed` from [0,1).
pub fn random_major_set(rng: &mut ChaCha8Rng, removed: f64, pieces: usize) -> Vec<(f64, f64)> {
    let len = removed / pieces.max(1) as f64;
    (0..pieces.max(1))
        .map(|_| {
            let a = rng.gen::<f64>() * (1.0 - len);
            (a, a + len)
        })
        .collect()
}

pub fn blowup_row(b: &Built, dec: &Decomposition, cfg: &Config, sweep: bool, stream: u64) -> BlowupRow {
    let cme = &b.cme;
    let ratio = l1_blowup_ratio(dec, cme, &b.f);
    let denom = dec.l1(Bucket::M) / ratio;
    let mut rng = rng_for(cfg.seed, 100 + stream);
    let probe_min = (0..cfg.probe.sets)
        .map(|_| dec.probe(&random_major_set(&mut rng, cfg.probe.removed, cfg.probe.pieces)))
        .fold(f64::INFINITY, f64::min);
    let weak = dec.weak(&Bucket::ALL);
    BlowupRow {
        label: b.label.clone(),
        height: cme.profile.height,
        levels: cme.profile.levels,
        sweep,
        mu_norm: b.f.mu_norm,
        phi0_norm: b.f.phi0_norm,
        l1_f: b.f.l1,
        tm_l1: dec.l1(Bucket::M),
        weak,
        weak_over_mu: weak / b.f.mu_norm,
        blowup_ratio: ratio,
        probe_min,
        probe_ratio: probe_min / denom,
        tr_nm_max: dec.max_abs(Bucket::RLessNm),
        tm_max: dec.max_abs(Bucket::M),
    }
}

/// Blowup rows for the corpus profiles and the sweep, the sweep rows sorted by height.
pub fn blowup_rows(cfg: &Config) -> Result<Vec<BlowupRow>, LabError> {
    let weights = cfg.weights.to_weights();
    let sweep = cfg.sweep_profiles();
    let mut items: Vec<(ProfileChoice, bool)> = sweep.iter().map(|p| (p.clone(), true)).collect();
    for p in &cfg.profiles {
        if !sweep.contains(p) {
            items.push((p.clone(), false));
        }
    }
    let kernel = Kernel::new();
    let indexed: Vec<(usize, (ProfileChoice, bool))> = items.into_iter().enumerate().collect();
    let rows = par_map(&indexed, |(k, (p, s))| {
        let b = build(p, &weights)?;
        let dec = evaluate(&b.cme, &b.levels, &b.f, &kernel, &declared_bins(&b.cme));
        Ok::<_, LabError>(blowup_row(&b, &dec, cfg, *s, *k as u64))
    });
    rows.into_iter().collect()
}

pub fn strictly_increasing(rows: &[&BlowupRow]) -> bool {
    rows.windows(2).all(|w| w[1].weak_over_mu > w[0].weak_over_mu)
}

pub fn cmd_blowup(cfg: &Config) -> Result<Outcome, LabError> {
    if cfg.mode == Mode::Exact {
        return Err(LabError::Usage("blowup evaluates T f numerically; use --mode numeric".into()));
    }
    let mut o = Outcome::new("blowup");
    let t = &cfg.tolerances;
    let rows = blowup_rows(cfg)?;
    let mut tab = Table::new(
        "blowup",
        &["profile", "height", "levels", "sweep", "mu_norm", "phi0_norm", "l1_f", "tm_l1", "weak", "weak_over_mu", "blowup_ratio", "probe_min", "probe_ratio", "tr_nm_max", "tm_max"],
    );
    for r in &rows {
        tab.push(vec![
            r.label.clone(),
            r.height.to_string(),
            r.levels.to_string(),
            r.sweep.to_string(),
            num(r.mu_norm),
            num(r.phi0_norm),
            num(r.l1_f),
            num(r.tm_l1),
            num(r.weak),
            num(r.weak_over_mu),
            num(r.blowup_ratio),
            num(r.probe_min),
            num(r.probe_ratio),
            num(r.tr_nm_max),
            num(r.tm_max),
        ]);
        o.check(&format!("{} blowup_ratio", r.label), r.blowup_ratio >= t.blowup_c, num(r.blowup_ratio));
        o.check(&format!("{} probe_ratio", r.label), r.probe_ratio >= t.blowup_c, num(r.probe_ratio));
        o.check(&format!("{} mu_norm", r.label), (t.norm_band.0..=t.norm_band.1).contains(&r.mu_norm), num(r.mu_norm));
        o.check(&format!("{} t_r_nm", r.label), r.tr_nm_max <= t.kkey * r.tm_max, format!("{} vs {}", num(r.tr_nm_max), num(r.tm_max)));
    }
    let mut sw: Vec<&BlowupRow> = rows.iter().filter(|r| r.sweep).collect();
    sw.sort_by_key(|r| r.height);
    let trend: Vec<String> = sw.iter().map(|r| format!("h{} {}", r.height, num(r.weak_over_mu))).collect();
    o.check("weak_ratio_increasing", strictly_increasing(&sw), trend.join(", "));
    o.tables.push(tab);
    o.plots.push(Plot {
        name: "blowup".into(),
        title: "sweep".into(),
        x_label: "h".into(),
        y_label: "ratio".into(),
        series: vec![
            Series { label: "weak/mu".into(), points: sw.iter().map(|r| (r.height as f64, r.weak_over_mu)).collect() },
            Series { label: "T_M L1 ratio".into(), points: sw.iter().map(|r| (r.height as f64, r.blowup_ratio)).collect() },
        ],
    });
    Ok(o)
}

// ---------------------------------------------------------------- walsh

/// Random integer-valued step function with values in [−8, 8].
pub fn random_step(rng: &mut ChaCha8Rng, r: u32) -> ExactStep {
    let values = (0..1u64 << r).map(|_| Rat::from_integer(rng.gen_range(-8i64..=8).into())).collect();
    StepFunction::new(r, values)
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub functions: usize,
    pub partial_sums_checked: usize,
    pub partial_sum_mismatches: usize,
    pub recursions_ok: bool,
    pub product_ok: bool,
    pub difference_ok: bool,
}

impl IdentityReport {
    pub fn pass(&self) -> bool {
        self.partial_sum_mismatches == 0 && self.recursions_ok && self.product_ok && self.difference_ok
    }
}

pub fn walsh_identities(cfg: &Config) -> IdentityReport {
    let w = &cfg.walsh;
    let r = w.resolution;
    let mut rng = rng_for(cfg.seed, 2);
    let fs: Vec<ExactStep> = (0..w.random_functions).map(|_| random_step(&mut rng, r)).collect();
    let ns: Vec<u64> = (0..=w.max_n).collect();
    let mism: usize = par_map(&fs, |f| {
        let s = Scaled::from_step(f);
        let direct = partial_sums_direct_scaled(&s, &ns);
        ns.iter().zip(&direct).filter(|(&n, d)| bitile_sum_scaled(&s, n + 1) != **d).count()
    })
    .into_iter()
    .sum();
    let rr = 7;
    let recursions_ok = (0..rr).all(|j| (0..1u64 << j).all(|l| (0..1u64 << (rr - j - 1)).all(|q| recursions_check(&WalshBitile { j, l, q }, rr))));
    let product_ok = (0..=6).all(|l| product_identity(l, 8));
    let small: Vec<ExactStep> = (0..4).map(|_| random_step(&mut rng, 6)).collect();
    let difference_ok = small.iter().all(|f| difference_identity(4, 2, f) && difference_identity(5, 3, f));
    IdentityReport { functions: fs.len(), partial_sums_checked: fs.len() * ns.len(), partial_sum_mismatches: mism, recursions_ok, product_ok, difference_ok }
}

/// Corpus for the weak-type check: random step functions and indicators of [0, 2^{−k}).
pub fn walsh_corpus(cfg: &Config) -> Vec<(String, ExactStep)> {
    let r = cfg.walsh.resolution;
    let mut rng = rng_for(cfg.seed, 3);
    let mut v: Vec<(String, ExactStep)> = (0..cfg.walsh.random_functions).map(|i| (format!("random{}", i), random_step(&mut rng, r))).collect();
    for k in 0..=r {
        let set = MeasurableSet::from_interval(r, &DyadicInterval::new(k as i32, 0));
        v.push((format!("indicator{}", k), StepFunction::indicator(&set)));
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct CwRow {
    pub name: String,
    pub l1: f64,
    pub weak: f64,
    pub ratio: f64,
    pub within: bool,
}

pub fn walsh_weak_rows(cfg: &Config) -> Vec<CwRow> {
    let corpus = walsh_corpus(cfg);
    let seq = cfg.sequence.terms(cfg.walsh.resolution);
    let c = Rat::from_f64(cfg.tolerances.walsh_weak).unwrap_or_else(Rat::zero);
    par_map(&corpus, |(name, f)| {
        let g = c_w(f, &seq);
        let (l1, weak) = (f.l1_norm(), g.weak_l1_norm());
        let within = weak <= &c * &l1;
        let (l1, weak) = (rat_f64(&l1), rat_f64(&weak));
        CwRow { name: name.clone(), l1, weak, ratio: if l1 > 0.0 { weak / l1 } else { 0.0 }, within }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnRow {
    pub height: u32,
    pub walsh_ratio: f64,
    pub fourier_ratio: f64,
}

pub fn column_rows(cfg: &Config) -> Vec<ColumnRow> {
    let kernel = Kernel::new();
    (1..=cfg.walsh.column_height)
        .map(|h| {
            let terms: Vec<f64> = walsh_column(h, h + 8).iter().map(rat_f64).collect();
            let walsh = tiletower::carleson::ColumnReport::from_terms(terms);
            let fourier = fourier_column(&kernel, h as usize, cfg.walsh.fourier_step);
            ColumnRow { height: h, walsh_ratio: walsh.ratio, fourier_ratio: fourier.ratio }
        })
        .collect()
}

pub fn cmd_walsh(cfg: &Config) -> Outcome {
    let mut o = Outcome::new("walsh");
    let t = &cfg.tolerances;
    let id = walsh_identities(cfg);
    o.check("identities", id.pass(), format!("{:?}", id));
    o.json("identities", &id);
    let rows = walsh_weak_rows(cfg);
    let mut tab = Table::new("walsh_weak", &["function", "l1", "weak", "ratio", "within"]);
    for r in &rows {
        tab.push(vec![r.name.clone(), num(r.l1), num(r.weak), num(r.ratio), r.within.to_string()]);
    }
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    o.check("walsh_weak_type", rows.iter().all(|r| r.within), format!("max weak/l1 {} over {} functions", num(worst), rows.len()));
    o.tables.push(tab);
    let cols = column_rows(cfg);
    let mut ct = Table::new("columns", &["height", "walsh_ratio", "fourier_ratio"]);
    for c in &cols {
        ct.push(vec![c.height.to_string(), num(c.walsh_ratio), num(c.fourier_ratio)]);
    }
    if let Some(last) = cols.last() {
        let sep = last.fourier_ratio / last.walsh_ratio;
        o.check("column_separation", sep >= t.column_separation, format!("height {}: fourier {} walsh {}", last.height, num(last.fourier_ratio), num(last.walsh_ratio)));
    }
    o.tables.push(ct);
    o.plots.push(Plot {
        name: "columns".into(),
        title: "column ratios".into(),
        x_label: "height".into(),
        y_label: "|sum|/max term".into(),
        series: vec![
            Series { label: "walsh".into(), points: cols.iter().map(|c| (c.height as f64, c.walsh_ratio)).collect() },
            Series { label: "fourier".into(), points: cols.iter().map(|c| (c.height as f64, c.fourier_ratio)).collect() },
        ],
    });
    o
}

// ---------------------------------------------------------------- norms

/// min over all permutations of Σ_k a_{π(k)} log2(k+2), summed in position order.
pub fn brute_v(weights: &[f64]) -> f64 {
    fn rec(rest: &mut Vec<f64>, acc: &mut Vec<f64>, best: &mut f64) {
        if rest.is_empty() {
            *best = best.min(v_assignment_value(acc));
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            acc.push(x);
            rec(rest, acc, best);
            acc.pop();
            rest.insert(i, x);
        }
    }
    let mut best = f64::INFINITY;
    rec(&mut weights.to_vec(), &mut Vec::new(), &mut best);
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct NormOracles {
    pub v_vectors: usize,
    pub v_mismatches: usize,
    pub lorentz_cases: usize,
    pub lorentz_mismatches: usize,
    pub phi0_divergent: bool,
    pub lll2_convergent: bool,
}

impl NormOracles {
    pub fn pass(&self) -> bool {
        self.v_mismatches == 0 && self.lorentz_mismatches == 0 && self.phi0_divergent && self.lll2_convergent
    }
}

pub fn norm_oracles(seed: u64) -> NormOracles {
    let mut rng = rng_for(seed, 4);
    let mut v_mismatches = 0;
    let mut v_vectors = 0;
    for k in 1..=6 {
        for _ in 0..100 {
            let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            v_vectors += 1;
            if v_norm(&w) != brute_v(&w) {
                v_mismatches += 1;
            }
        }
    }
    let phis = [FundamentalFunction::identity(), FundamentalFunction::mu(), FundamentalFunction::phi0(), FundamentalFunction::phi0_lll2()];
    let r = 8;
    let mut lorentz_cases = 0;
    let mut lorentz_mismatches = 0;
    for _ in 0..25 {
        let cells: Vec<u64> = (0..1u64 << r).filter(|_| rng.gen::<f64>() < 0.3).collect();
        let a = MeasurableSet::from_cells(r, &cells);
        let f: ExactStep = StepFunction::indicator(&a);
        for phi in &phis {
            lorentz_cases += 1;
            if lorentz_norm(&f, phi) != phi.eval(a.measure_f64()) {
                lorentz_mismatches += 1;
            }
        }
    }
    let phi0_divergent = !growth_integral(&FundamentalFunction::phi0(), 1, 32, GROWTH_TOL).convergent;
    let lll2_convergent = growth_integral(&FundamentalFunction::phi0_lll2(), 1, 32, GROWTH_TOL).convergent;
    NormOracles { v_vectors, v_mismatches, lorentz_cases, lorentz_mismatches, phi0_divergent, lll2_convergent }
}

#[derive(Clone, Debug, Serialize)]
pub struct BandRow {
    pub vector: usize,
    pub log2_weights: Vec<f64>,
    pub w_upper: f64,
    pub v: f64,
    pub v_over_w: f64,
    pub weak: Option<f64>,
    pub weak_over_w: Option<f64>,
}

/// Random positive weights r_j on the F_j of a build. V takes a_j = r_j|F_j|·loglog(4/|F_j|),
/// the desk-scale stand-in for r_j|F_j|2^j. With `per_level` decompositions of T χ_{F_j}, the
/// weak norm of T f = Σ r_j T χ_{F_j} is reported too.
pub fn band_rows(b: &Built, per_level: Option<&[Decomposition]>, vectors: usize, seed: u64) -> Vec<BandRow> {
    let mut rng = rng_for(seed, 5);
    (0..vectors)
        .map(|k| {
            let lw: Vec<f64> = b
                .levels
                .iter()
                .map(|l| {
                    let m = l.log2_measure;
                    -m - (loglog((2.0f64).powf(-m) * 4.0)).log2() + rng.gen_range(-6.0..6.0)
                })
                .collect();
            let parts: Vec<(f64, f64)> = b.levels.iter().zip(&lw).map(|(l, &w)| ((w + l.log2_measure).exp2(), w.exp2())).collect();
            let a: Vec<f64> = b.levels.iter().zip(&lw).map(|(l, &w)| (w + l.log2_measure).exp2() * (2.0 + -l.log2_measure).log2()).collect();
            let (w_upper, _) = w_norm_best(&parts).expect("valid parts");
            let v = v_norm(&a);
            let weak = per_level.map(|decs| {
                let n = decs[0].samples.len();
                let mut total = vec![Complex64::new(0.0, 0.0); n];
                for (d, &w) in decs.iter().zip(&lw) {
                    let tot = d.total();
                    for (o, x) in total.iter_mut().zip(tot) {
                        *o += x * w.exp2();
                    }
                }
                let mut s: Vec<(f64, f64)> = total.iter().zip(&decs[0].samples.w).map(|(x, &w)| (x.norm(), w)).collect();
                tiletower::norms::weak_norm_samples(&mut s)
            });
            BandRow { vector: k, log2_weights: lw, w_upper, v, v_over_w: v / w_upper, weak, weak_over_w: weak.map(|x| x / w_upper) }
        })
        .collect()
}

/// T χ_{F_j} for each level separately.
pub fn per_level_decompositions(b: &Built) -> Vec<Decomposition> {
    let kernel = Kernel::new();
    let bins = declared_bins(&b.cme);
    (0..b.levels.len())
        .map(|j| {
            let lv = &b.levels[j..j + 1];
            let f = assemble(lv, &Weights::Log2(vec![0.0])).expect("single level");
            evaluate(&b.cme, lv, &f, &kernel, &bins)
        })
        .collect()
}

pub fn cmd_norms(cfg: &Config) -> Result<Outcome, LabError> {
    let mut o = Outcome::new("norms");
    let t = &cfg.tolerances;
    let or = norm_oracles(cfg.seed);
    o.check("norm_oracles", or.pass(), format!("{:?}", or));
    o.json("oracles", &or);
    let b = build(&cfg.profile, &cfg.weights.to_weights())?;
    let decs = (cfg.mode == Mode::Numeric).then(|| per_level_decompositions(&b));
    let rows = band_rows(&b, decs.as_deref(), cfg.probe.weight_vectors, cfg.seed);
    let mut tab = Table::new("band", &["vector", "log2_weights", "w_upper", "v", "v_over_w", "weak", "weak_over_w"]);
    for r in &rows {
        let lw: Vec<String> = r.log2_weights.iter().map(|x| num(*x)).collect();
        tab.push(vec![
            r.vector.to_string(),
            lw.join(" "),
            num(r.w_upper),
            num(r.v),
            num(r.v_over_w),
            r.weak.map(num).unwrap_or_default(),
            r.weak_over_w.map(num).unwrap_or_default(),
        ]);
    }
    let (lo, hi) = t.vw_band;
    let vw_ok = rows.iter().all(|r| (lo..=hi).contains(&r.v_over_w));
    let vmin = rows.iter().map(|r| r.v_over_w).fold(f64::INFINITY, f64::min);
    let vmax = rows.iter().map(|r| r.v_over_w).fold(0.0, f64::max);
    o.check("v_vs_w_band", vw_ok, format!("[{}, {}] within [{}, {}]", num(vmin), num(vmax), num(lo), num(hi)));
    if decs.is_some() {
        let ws: Vec<f64> = rows.iter().filter_map(|r| r.weak_over_w).collect();
        let wmin = ws.iter().copied().fold(f64::INFINITY, f64::min);
        let wmax = ws.iter().copied().fold(0.0, f64::max);
        o.check("weak_vs_w_band", wmin > 0.0 && wmax / wmin <= hi / lo, format!("[{}, {}], spread {}", num(wmin), num(wmax), num(wmax / wmin)));
    }
    o.tables.push(tab);
    Ok(o)
}

// ---------------------------------------------------------------- counting

#[derive(Clone, Debug, Serialize)]
pub struct CountingReport {
    pub label: String,
    pub height: u32,
    pub rows: Vec<CountingLevel>,
    pub nesting_pairs: u64,
    pub nesting_violations: u64,
    pub jn_violations: u64,
    pub worst_jn: f64,
    pub monotone: bool,
    pub obs6: bool,
    pub extremality: ExtremalityRow,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingLevel {
    pub j: u32,
    pub max: f64,
    pub bmo: f64,
    pub sandwich: bool,
    pub components: usize,
    pub single_top: usize,
    pub union_of_tops: usize,
    pub jn_c: f64,
}

impl CountingReport {
    pub fn pass(&self, bmo: f64) -> bool {
        self.rows.iter().all(|r| r.bmo <= bmo && r.sandwich && r.union_of_tops == r.components)
            && self.nesting_violations == 0
            && self.jn_violations == 0
            && self.monotone
            && self.obs6
            && self.extremality.weak_below_l1
    }
}

pub fn counting_report(choice: &ProfileChoice) -> Result<CountingReport, LabError> {
    let p = choice.resolve()?;
    let cme = build_cme(&p).map_err(|e| LabError::Validation(e.to_string()))?;
    let mut rows = Vec::new();
    let mut trees = Vec::new();
    for j in 1..=p.levels {
        let nu = nu_j(&cme, j);
        let tree = level_sets(&nu, j, p.height);
        let ko = keyobs_check(&cme, &tree);
        let jn = jn_regression(&nu, &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]);
        rows.push(CountingLevel {
            j,
            max: nu.max_value().to_f64().unwrap_or(f64::NAN),
            bmo: nu.bmo_dyadic(),
            sandwich: base_sandwich(&cme, j, &nu),
            components: ko.components,
            single_top: ko.single_top,
            union_of_tops: ko.union_of_tops,
            jn_c: jn.c,
        });
        trees.push(tree);
    }
    let nr = nesting_check(&trees);
    Ok(CountingReport {
        label: choice.label(),
        height: p.height,
        rows,
        nesting_pairs: nr.pairs,
        nesting_violations: nr.nesting_violations,
        jn_violations: nr.jn_violations,
        worst_jn: nr.worst_jn,
        monotone: nr.monotone,
        obs6: obs6_disjoint(&cme),
        extremality: extremality_row(&cme),
    })
}

pub fn cmd_counting(cfg: &Config) -> Result<Outcome, LabError> {
    let mut o = Outcome::new("counting");
    let t = &cfg.tolerances;
    let profiles = all_profiles(cfg);
    let reports: Vec<CountingReport> = par_map(&profiles, counting_report).into_iter().collect::<Result<_, _>>()?;
    let mut lv = Table::new("counting_levels", &["profile", "j", "max", "bmo", "sandwich", "components", "single_top", "union_of_tops", "jn_c"]);
    let mut pr = Table::new("counting_profiles", &["profile", "height", "nesting_pairs", "nesting_violations", "jn_violations", "worst_jn", "monotone", "obs6", "nu_l1", "nu_weak", "weak_over_h"]);
    for r in &reports {
        for l in &r.rows {
            lv.push(vec![
                r.label.clone(),
                l.j.to_string(),
                num(l.max),
                num(l.bmo),
                l.sandwich.to_string(),
                l.components.to_string(),
                l.single_top.to_string(),
                l.union_of_tops.to_string(),
                num(l.jn_c),
            ]);
        }
        let e = &r.extremality;
        pr.push(vec![
            r.label.clone(),
            r.height.to_string(),
            r.nesting_pairs.to_string(),
            r.nesting_violations.to_string(),
            r.jn_violations.to_string(),
            num(r.worst_jn),
            r.monotone.to_string(),
            r.obs6.to_string(),
            num(e.l1),
            num(e.weak),
            num(e.ratio),
        ]);
        let bmo = r.rows.iter().map(|l| l.bmo).fold(0.0, f64::max);
        o.check(&format!("{} counting", r.label), r.pass(t.bmo), format!("bmo {} nesting {}/{} jn {} obs6 {}", num(bmo), r.nesting_violations, r.nesting_pairs, r.jn_violations, r.obs6));
    }
    let sweep: Vec<ExtremalityRow> = cfg.sweep_profiles().iter().filter_map(|p| reports.iter().find(|r| r.label == p.label())).map(|r| r.extremality.clone()).collect();
    if !sweep.is_empty() {
        let spread = extremality_spread(&sweep);
        o.check("extremality_spread", spread <= t.extremality_factor, num(spread));
        o.plots.push(Plot {
            name: "extremality".into(),
            title: "weak norm of nu over h".into(),
            x_label: "h".into(),
            y_label: "ratio".into(),
            series: vec![Series { label: "weak/h".into(), points: sweep.iter().map(|r| (r.height as f64, r.ratio)).collect() }],
        });
    }
    o.tables.push(lv);
    o.tables.push(pr);
    Ok(o)
}

// ---------------------------------------------------------------- reconstruct

pub fn reconstruct_report(cfg: &Config) -> ReconReport {
    let r = &cfg.reconstruct;
    reconstruction_constancy(&r.xis, r.scales, r.mu, r.points)
}

pub fn cmd_reconstruct(cfg: &Config) -> Outcome {
    let mut o = Outcome::new("reconstruct");
    let t = &cfg.tolerances;
    let rep = reconstruct_report(cfg);
    let mut tab = Table::new("reconstruct", &["xi", "value", "doubled"]);
    for ((x, v), d) in rep.xis.iter().zip(&rep.values).zip(&rep.doubled) {
        tab.push(vec![num(*x), num(*v), num(*d)]);
    }
    o.check("spread", rep.spread <= t.recon_spread, num(rep.spread));
    o.check("doubling", rep.doubling_change <= t.recon_doubling, num(rep.doubling_change));
    o.note(format!("edge share {}", num(rep.edge_share)));
    o.tables.push(tab);
    o
}
