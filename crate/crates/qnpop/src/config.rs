//! Experiment configuration.
//!
//! Configs are TOML files. Top-level keys describe the run; the optional
//! `[tolerances]` table overrides verdict thresholds. A minimal file:
//!
//! ```toml
//! experiment = "lln"
//! model = "neutral_logistic"
//! n_list = [100, 1000, 10000]
//! replicas = 200
//! horizon = 5.0
//! ```
//!
//! `model` is either a family name (default parameters) or an inline table
//! `{ family = "...", params = { key = [values] } }` naming a zoo family.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qnpop_core::diffusion::Observable;
use qnpop_core::zoo::{self, ZooEntry};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Environment variable consulted when neither the command line nor the
/// config file fixes a seed.
pub const SEED_ENV: &str = "QN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lln,
    TauDecay,
    GeneratorCheck,
    WfReduction,
    MomentCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lln => "lln",
            Self::TauDecay => "tau_decay",
            Self::GeneratorCheck => "generator_check",
            Self::WfReduction => "wf_reduction",
            Self::MomentCompare => "moment_compare",
        }
    }
}

/// A zoo family, by name or with explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Inline {
        family: String,
        #[serde(default)]
        params: BTreeMap<String, Vec<f64>>,
    },
}

impl ModelRef {
    pub fn build(&self) -> Result<ZooEntry, HarnessError> {
        let (family, params) = match self {
            Self::Name(n) => (n.as_str(), Vec::new()),
            Self::Inline { family, params } => {
                (family.as_str(), params.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            }
        };
        zoo::build(family, &params).map_err(|e| HarnessError::Config(format!("model: {e}")))
    }
}

/// Parses `family` or `family:key=v1;v2,key=v` from the command line.
impl std::str::FromStr for ModelRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let Some((family, rest)) = s.split_once(':') else {
            return Ok(Self::Name(s.to_string()));
        };
        let mut params = BTreeMap::new();
        for kv in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got {kv:?}"))?;
            let vals = v
                .split(';')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{k}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            params.insert(k.trim().to_string(), vals);
        }
        Ok(Self::Inline { family: family.to_string(), params })
    }
}

/// Verdict thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Admissible band for the log-log slope of the median sup-error.
    pub slope_band: [f64; 2],
    /// Largest admissible fraction of replicas with `sup τ > N^{-δ}`.
    pub exceedance_max: f64,
    /// Largest admissible `|z|` in generator comparisons.
    pub z_max: f64,
    /// Largest admissible `|z|` for counting process martingales.
    pub martingale_z_max: f64,
    /// Smallest admissible `R²` of the `c·p(1−p)` fit.
    pub r2_min: f64,
    /// Relative tolerance on the fitted-to-predicted ratio of `c` between
    /// the model and its variant.
    pub ratio_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slope_band: [-0.65, -0.35],
            exceedance_max: 0.05,
            z_max: 3.0,
            martingale_z_max: 4.0,
            r2_min: 0.99,
            ratio_tol: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelRef,
    /// System sizes, strictly increasing.
    pub n_list: Vec<u64>,
    pub replicas: usize,
    /// `lln` and `moment_compare`: process time. `tau_decay`: diffusion time.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    /// Start density. Defaults to half the effective density on the
    /// uniform frequency vector for `lln` and `moment_compare`, and to that
    /// point on `Ω` for `tau_decay`.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Query frequencies for `generator_check` (mapped onto `Ω`) and the
    /// `p` grid for `wf_reduction`.
    #[serde(default)]
    pub frequencies: Option<Vec<Vec<f64>>>,
    /// Query densities for `generator_check` used as given; off-`Ω` points
    /// get a warm-up.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Burst length in diffusion time.
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_observable")]
    pub observable: Observable,
    /// Grid spacing for sup statistics (`lln`: process time, `tau_decay`:
    /// diffusion time).
    #[serde(default)]
    pub snapshot_dt: Option<f64>,
    /// Exponent in the `N^{-δ}` threshold of `tau_decay`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `tau_decay`: a replica's statistics start at the first grid time with
    /// `|τ(Z)| ≤ arrival` (unset: immediately after the warm-up).
    #[serde(default)]
    pub arrival: Option<f64>,
    /// Warm-up constant `c`: off-`Ω` starts are run for process time
    /// `c·ln N` before any statistic is taken.
    #[serde(default = "default_warmup")]
    pub warmup: f64,
    /// Second model for `wf_reduction`, compared through the predicted
    /// ratio of diffusion scales.
    #[serde(default)]
    pub variant: Option<ModelRef>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_horizon() -> f64 {
    1.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("qnpop-out")
}
fn default_h() -> f64 {
    0.05
}
fn default_observable() -> Observable {
    Observable::Projection
}
fn default_delta() -> f64 {
    0.2
}
fn default_warmup() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(experiment: ExperimentKind, model: ModelRef, n_list: Vec<u64>, replicas: usize) -> Self {
        Self {
            experiment,
            model,
            n_list,
            replicas,
            horizon: default_horizon(),
            seed: None,
            output_dir: default_output_dir(),
            threads: 0,
            x0: None,
            frequencies: None,
            points: None,
            h: default_h(),
            observable: default_observable(),
            snapshot_dt: None,
            delta: default_delta(),
            arrival: None,
            warmup: default_warmup(),
            variant: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.replicas < 1 {
            return bad("replicas: must be at least 1");
        }
        if self.n_list.is_empty() {
            return bad("n_list: must not be empty");
        }
        if self.n_list.iter().any(|&n| n == 0) || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("n_list: must be positive and strictly increasing");
        }
        if !(self.horizon > 0.0) {
            return bad("horizon: must be positive");
        }
        if !(self.h > 0.0) {
            return bad("h: must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad("delta: must lie in (0, 0.5)");
        }
        if !(self.warmup >= 0.0) {
            return bad("warmup: must be non-negative");
        }
        if matches!(self.experiment, ExperimentKind::GeneratorCheck | ExperimentKind::WfReduction) && self.replicas < 2 {
            return bad("replicas: moment estimates need at least 2");
        }
        let [lo, hi] = self.tolerances.slope_band;
        if !(lo < hi) {
            return bad("tolerances.slope_band: need lo < hi");
        }
        Ok(())
    }

    /// Seed priority: command line, then config, then `QN_SEED`, then 0.
    pub fn resolve_seed(&mut self, cli: Option<u64>) -> Result<u64, HarnessError> {
        let seed = match (cli, self.seed) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
                Err(_) => 0,
            },
        };
        self.seed = Some(seed);
        Ok(seed)
    }
}
