//! Experiment configuration, read from JSON. Every field has a default so `{}` is a
//! valid config.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tiletower::cme::ScaleProfile;
use tiletower::setsbuild::Weights;

use crate::LabError;

/// A named preset or an explicit profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileChoice {
    Named(String),
    Explicit(ScaleProfile),
}

impl ProfileChoice {
    pub fn named(s: &str) -> Self {
        ProfileChoice::Named(s.to_string())
    }

    pub fn label(&self) -> String {
        match self {
            ProfileChoice::Named(s) => s.clone(),
            ProfileChoice::Explicit(p) => format!("L{}h{}s{}", p.levels, p.height, p.subdiv),
        }
    }

    pub fn resolve(&self) -> Result<ScaleProfile, LabError> {
        match self {
            ProfileChoice::Explicit(p) => Ok(p.clone()),
            ProfileChoice::Named(s) => match s.as_str() {
                "toy_a" => Ok(ScaleProfile::toy_a()),
                "toy_b" => Ok(ScaleProfile::toy_b()),
                "toy_c" => Ok(ScaleProfile::toy_c()),
                "warmup" => Ok(ScaleProfile::warmup()),
                _ => s
                    .strip_prefix("sweep")
                    .and_then(|h| h.parse::<u32>().ok())
                    .filter(|&h| (1..=6).contains(&h))
                    .map(ScaleProfile::sweep)
                    .ok_or_else(|| LabError::Config(format!("unknown profile preset {:?}", s))),
            },
        }
    }
}

/// The lacunary sequence n_j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceSpec {
    /// 2^j
    Dyadic,
    /// 2^j − 1
    ShiftedDyadic,
    List(Vec<u64>),
}

impl SequenceSpec {
    /// Terms below 2^r.
    pub fn terms(&self, r: u32) -> Vec<u64> {
        match self {
            SequenceSpec::Dyadic => (0..r).map(|j| 1u64 << j).collect(),
            SequenceSpec::ShiftedDyadic => (1..=r).map(|j| (1u64 << j) - 1).collect(),
            SequenceSpec::List(v) => v.iter().copied().filter(|&n| n < 1u64 << r).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsSpec {
    Default,
    Inverse,
    /// log2 r_j per level
    Log2(Vec<f64>),
}

impl WeightsSpec {
    pub fn to_weights(&self) -> Weights {
        match self {
            WeightsSpec::Default => Weights::Default,
            WeightsSpec::Inverse => Weights::Inverse,
            WeightsSpec::Log2(v) => Weights::Log2(v.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Numeric,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Mode::Exact),
            "numeric" => Ok(Mode::Numeric),
            _ => Err(format!("unknown mode {:?}", s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub c_align: f64,
    pub scramble_small: f64,
    pub scramble_fraction: f64,
    pub kkey: f64,
    pub blowup_c: f64,
    pub norm_band: (f64, f64),
    pub extremality_factor: f64,
    pub bmo: f64,
    pub walsh_weak: f64,
    pub column_separation: f64,
    pub recon_spread: f64,
    pub recon_doubling: f64,
    pub vw_band: (f64, f64),
    pub mass_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            c_align: 1.0 / 500.0,
            scramble_small: 0.1,
            scramble_fraction: 0.9,
            kkey: 1e-10,
            blowup_c: 1.0 / 32.0,
            norm_band: (0.25, 4.0),
            extremality_factor: 3.0,
            bmo: 40.0,
            walsh_weak: 4.0,
            column_separation: 2.0,
            recon_spread: 0.01,
            recon_doubling: 0.001,
            vw_band: (0.125, 8.0),
            mass_ratio: 1.0 + (-20.0f64).exp2(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalshParams {
    pub resolution: u32,
    pub random_functions: usize,
    pub max_n: u64,
    pub column_height: u32,
    pub fourier_step: u32,
}

impl Default for WalshParams {
    fn default() -> Self {
        WalshParams { resolution: 10, random_functions: 100, max_n: 64, column_height: 8, fourier_step: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconParams {
    pub xis: Vec<f64>,
    pub scales: u32,
    pub mu: f64,
    pub points: usize,
}

impl Default for ReconParams {
    fn default() -> Self {
        ReconParams { xis: vec![-2.0, -5.0, -17.0], scales: 12, mu: 0.125, points: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    /// number of random major sets G′
    pub sets: usize,
    /// |[0,1) \ G′|
    pub removed: f64,
    /// intervals removed per set
    pub pieces: usize,
    /// random weight vectors in the norm band check
    pub weight_vectors: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams { sets: 16, removed: 1e-3, pieces: 8, weight_vectors: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// profile used by `build` and `warmup`
    pub profile: ProfileChoice,
    /// structural corpus for `verify`, `counting` and the alignment test
    pub profiles: Vec<ProfileChoice>,
    /// heights of the single-level sweep
    pub sweep: Vec<u32>,
    pub sequence: SequenceSpec,
    pub weights: WeightsSpec,
    pub seed: u64,
    pub mode: Mode,
    pub tolerances: Tolerances,
    pub walsh: WalshParams,
    pub reconstruct: ReconParams,
    pub probe: ProbeParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            profile: ProfileChoice::named("toy_a"),
            profiles: vec![ProfileChoice::named("toy_a"), ProfileChoice::named("toy_b"), ProfileChoice::named("toy_c")],
            sweep: vec![2, 3, 4],
            sequence: SequenceSpec::Dyadic,
            weights: WeightsSpec::Default,
            seed: 20240601,
            mode: Mode::Numeric,
            tolerances: Tolerances::default(),
            walsh: WalshParams::default(),
            reconstruct: ReconParams::default(),
            probe: ProbeParams::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        if text.trim().is_empty() {
            return Err(LabError::Usage("empty config".into()));
        }
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Usage(format!("{}: {}", path.display(), e)))?;
        Self::from_json(&text)
    }

    pub fn sweep_profiles(&self) -> Vec<ProfileChoice> {
        self.sweep.iter().map(|h| ProfileChoice::Named(format!("sweep{}", h))).collect()
    }
}
