//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! repetitions = 2
//! out = "runs/sbm"
//! shadows = 8
//! signals = "zero_hop"
//!
//! [data]
//! kind = "sbm"
//! n = 400
//!
//! [target]
//! arch = "gcn2"
//! epochs = 300
//!
//! [attack.base]
//! mode = "both"
//!
//! [attack.rmia]
//! gamma = 1.0
//! ```
//!
//! Unknown keys are rejected. `[shadow]` overrides the target's training
//! settings for the shadow models only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use mia_core::attacks::{AttackConfig, AttackRegistry, Mode};
use mia_core::model::{Arch, TrainConfig};
use mia_core::sampling::{SamplerConfig, SamplerKind};
use mia_core::signals::SignalMode;
use mia_core::synth::SbmSpec;

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_shadows")]
    pub shadows: usize,
    /// Fraction of the population the target trains on.
    #[serde(default = "half")]
    pub train_fraction: f64,
    /// How signal attacks query models: `zero_hop` or `full_graph`.
    #[serde(default = "default_signals")]
    pub signals: String,
    /// Signal CSV for `attack-signals`, relative to the config file.
    pub signal_file: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub target: TrainSection,
    #[serde(default)]
    pub shadow: ShadowSection,
    #[serde(default)]
    pub attack: BTreeMap<String, AttackSection>,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub threshold: ThresholdSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// `sbm` or `iid`.
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_p_in")]
    pub p_in: f64,
    #[serde(default = "default_p_out")]
    pub p_out: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "one_f")]
    pub radius: f64,
    #[serde(default = "one_f")]
    pub noise: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_arch")]
    pub arch: String,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowSection {
    pub arch: Option<String>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub weight_decay: Option<f64>,
    pub hidden: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlphaSetting {
    Value(f64),
    Name(String),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    /// Registered attack to run; defaults to the section name.
    pub method: Option<String>,
    /// `online`, `offline` or `both`.
    pub mode: Option<String>,
    pub lambda: Option<f64>,
    /// A number, or `"auto"` for grid search on a simulated target.
    pub alpha: Option<AlphaSetting>,
    pub gamma: Option<f64>,
    /// Fraction of the scored samples used as the RMIA reference set.
    pub population_fraction: Option<f64>,
    pub lira_variance_floor: Option<f64>,
    pub sampler: Option<String>,
    pub samples: Option<usize>,
    pub flip_fraction: Option<f64>,
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
    pub hops: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    #[serde(default = "default_mcmc_n")]
    pub n: usize,
    #[serde(default)]
    pub target_node: usize,
    #[serde(default = "default_mcmc_samples")]
    pub samples: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    pub flip_fraction: Option<f64>,
    #[serde(default = "default_mcmc_shadows")]
    pub shadows: usize,
}

impl Default for McmcSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default = "default_fpr")]
    pub target_fpr: f64,
    #[serde(default = "default_simulated")]
    pub simulated: usize,
    #[serde(default = "default_fresh")]
    pub fresh: usize,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_shadows() -> usize {
    8
}
fn default_signals() -> String {
    "zero_hop".into()
}
fn default_kind() -> String {
    "sbm".into()
}
fn default_n() -> usize {
    400
}
fn default_classes() -> usize {
    4
}
fn default_p_in() -> f64 {
    0.05
}
fn default_p_out() -> f64 {
    0.005
}
fn default_dim() -> usize {
    32
}
fn default_arch() -> String {
    "gcn2".into()
}
fn default_lr() -> f64 {
    0.5
}
fn default_epochs() -> usize {
    200
}
fn default_hidden() -> usize {
    32
}
fn default_mcmc_n() -> usize {
    8
}
fn default_mcmc_samples() -> usize {
    2000
}
fn default_burn_in() -> usize {
    1000
}
fn default_thinning() -> usize {
    500
}
fn default_mcmc_shadows() -> usize {
    4
}
fn default_fpr() -> f64 {
    0.01
}
fn default_simulated() -> usize {
    10
}
fn default_fresh() -> usize {
    5
}

/// One attack run: a resolved configuration plus whether `α` is searched.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackPlan {
    /// Section name, used in output file names.
    pub label: String,
    pub config: AttackConfig,
    pub auto_alpha: bool,
    pub population_fraction: Option<f64>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_enum<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError> {
    s.parse().map_err(|_| bad(format!("unknown {what} `{s}`")))
}

impl Config {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_str(&text)?;
        if let (Some(f), Some(dir)) = (&cfg.signal_file, path.parent()) {
            if f.is_relative() {
                cfg.signal_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.repetitions == 0 {
            return Err(bad("repetitions must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(bad("train_fraction must lie in (0, 1)"));
        }
        self.signal_mode()?;
        self.data_spec(0)?;
        self.target_train(0)?;
        self.shadow_train(0)?;
        self.attack_plans()?;
        if self.threshold.simulated == 0 || self.threshold.fresh == 0 {
            return Err(bad("threshold needs at least one simulated and one fresh target"));
        }
        if !(self.threshold.target_fpr > 0.0 && self.threshold.target_fpr < 1.0) {
            return Err(bad("threshold target_fpr must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn signal_mode(&self) -> Result<SignalMode, CliError> {
        match self.signals.as_str() {
            "zero_hop" => Ok(SignalMode::ZeroHop),
            "full_graph" => Ok(SignalMode::FullGraph),
            other => Err(bad(format!("unknown signals `{other}`; use zero_hop or full_graph"))),
        }
    }

    pub fn iid(&self) -> bool {
        self.data.kind == "iid"
    }

    pub fn data_spec(&self, seed: u64) -> Result<SbmSpec, CliError> {
        if !matches!(self.data.kind.as_str(), "sbm" | "iid") {
            return Err(bad(format!("unknown data kind `{}`", self.data.kind)));
        }
        let d = &self.data;
        let spec = SbmSpec {
            n: d.n,
            num_classes: d.classes,
            p_in: d.p_in,
            p_out: d.p_out,
            dim: d.dim,
            radius: d.radius,
            noise: d.noise,
            seed,
        };
        spec.validate().map_err(|e| bad(format!("[data] {e}")))?;
        Ok(spec)
    }

    pub fn target_arch(&self) -> Result<Arch, CliError> {
        parse_enum("architecture", &self.target.arch)
    }

    pub fn shadow_arch(&self) -> Result<Arch, CliError> {
        parse_enum("architecture", self.shadow.arch.as_deref().unwrap_or(&self.target.arch))
    }

    pub fn target_train(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let t = &self.target;
        let cfg = TrainConfig {
            lr: t.lr,
            epochs: t.epochs,
            weight_decay: t.weight_decay,
            hidden: t.hidden,
            seed,
        };
        self.target_arch()?;
        cfg.validate().map_err(|e| bad(format!("[target] {e}")))?;
        Ok(cfg)
    }

    pub fn shadow_train(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let s = &self.shadow;
        let base = self.target_train(seed)?;
        let cfg = TrainConfig {
            lr: s.lr.unwrap_or(base.lr),
            epochs: s.epochs.unwrap_or(base.epochs),
            weight_decay: s.weight_decay.unwrap_or(base.weight_decay),
            hidden: s.hidden.unwrap_or(base.hidden),
            seed,
        };
        self.shadow_arch()?;
        cfg.validate().map_err(|e| bad(format!("[shadow] {e}")))?;
        if self.shadows < 2 || self.shadows % 2 != 0 {
            return Err(bad(format!("shadows = {} must be even and at least 2", self.shadows)));
        }
        Ok(cfg)
    }

    /// Every configured attack, expanded over its modes, in section order.
    pub fn attack_plans(&self) -> Result<Vec<AttackPlan>, CliError> {
        let mut plans = Vec::new();
        for (label, sec) in &self.attack {
            let method = sec.method.clone().unwrap_or_else(|| label.clone());
            let attack = AttackRegistry::default()
                .get(&method)
                .map_err(|_| bad(format!("[attack.{label}] unknown attack `{method}`")))?;
            let modes = match sec.mode.as_deref().unwrap_or("online") {
                "both" => vec![Mode::Online, Mode::Offline],
                m => vec![parse_enum::<Mode>("attack mode", m)?],
            };
            for mode in modes {
                let mut cfg = AttackConfig::new(&method).with_mode(mode);
                if let Some(l) = sec.lambda {
                    cfg.lambda = l;
                }
                let auto_alpha = match &sec.alpha {
                    None => mode == Mode::Offline && attack.uses_alpha(),
                    Some(AlphaSetting::Name(s)) if s == "auto" => true,
                    Some(AlphaSetting::Name(s)) => return Err(bad(format!("[attack.{label}] alpha `{s}`"))),
                    Some(AlphaSetting::Value(a)) => {
                        cfg.alpha = *a;
                        false
                    }
                };
                if let Some(g) = sec.gamma {
                    cfg.gamma = g;
                }
                if let Some(f) = sec.lira_variance_floor {
                    cfg.lira_variance_floor = f;
                }
                if let Some(h) = sec.hops {
                    cfg.hops = h;
                }
                let mut sampler = SamplerConfig::default();
                if let Some(s) = &sec.sampler {
                    sampler.kind = parse_enum::<SamplerKind>("sampler", s)?;
                }
                if let Some(m) = sec.samples {
                    sampler.samples = m;
                }
                if let Some(l) = sec.lambda {
                    sampler.lambda = l;
                }
                sampler.flip_fraction = sec.flip_fraction;
                if let Some(b) = sec.burn_in {
                    sampler.burn_in = b;
                }
                if let Some(t) = sec.thinning {
                    sampler.thinning = t;
                }
                cfg.sampler = sampler;
                cfg.validate().map_err(|e| bad(format!("[attack.{label}] {e}")))?;
                if let Some(f) = sec.population_fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(bad(format!("[attack.{label}] population_fraction {f} not in (0, 1]")));
                    }
                }
                plans.push(AttackPlan {
                    label: label.clone(),
                    config: cfg,
                    auto_alpha,
                    population_fraction: sec.population_fraction,
                });
            }
        }
        Ok(plans)
    }
}
