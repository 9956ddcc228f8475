//! Membership scoring functions.
//!
//! Each attack implements [`Attack`] and is looked up by name in an
//! [`AttackRegistry`]. Signal-based attacks (`base`, `mca`, `rmia`, `lira`)
//! only need a [`SignalMatrix`]; `gbase` queries models on sampled subgraphs
//! and needs a [`GraphContext`].

mod alpha;
mod base;
mod gbase;
mod lira;
mod rmia;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{Graph, MembershipMask};
use crate::model::ModelParams;
use crate::numeric::log_mean_exp;
use crate::sampling::SamplerConfig;
use crate::shadow::ShadowPool;
use crate::signals::{signal_matrix, SignalMatrix, SignalMode, SignalRow};

pub use alpha::{select_alpha, AlphaSelection, ALPHA_GRID, GBASE_ALPHA_GRID};
pub use base::{attack_base, attack_mca, base_score, mca_score, BaseAttack, McaAttack};
pub use gbase::{attack_gbase, graph_signal, GBaseAttack};
pub use lira::{attack_lira, LiraAttack};
pub use rmia::{attack_rmia, RmiaAttack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Shadow models may have trained on the target sample.
    Online,
    /// Only shadow models that did not train on the target sample are used.
    Offline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Offline => "offline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Mode::Online),
            "offline" => Ok(Mode::Offline),
            other => Err(Error::UnknownStrategy {
                kind: "attack mode",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub method: String,
    pub mode: Mode,
    /// Prior membership probability.
    pub lambda: f64,
    /// Offline scaling of the shadow term; ignored online.
    pub alpha: f64,
    /// RMIA pairwise likelihood-ratio threshold.
    pub gamma: f64,
    /// RMIA reference set as row indices into the signals; `None` is all rows.
    pub population: Option<Vec<usize>>,
    pub lira_variance_floor: f64,
    /// Mask sampling for `gbase`.
    pub sampler: SamplerConfig,
    /// Message-passing depth used for the neighbourhood term of `gbase`.
    pub hops: usize,
    /// Seed of the per-target sampler streams.
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(method: &str) -> Self {
        Self {
            method: method.to_string(),
            mode: Mode::Online,
            lambda: 0.5,
            alpha: 1.0,
            gamma: 1.0,
            population: None,
            lira_variance_floor: 1e-8,
            sampler: SamplerConfig::default(),
            hops: 2,
            seed: 0,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid(format!("lambda {} not in (0, 1)", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma {} must be >= 0", self.gamma)));
        }
        if !(self.lira_variance_floor > 0.0) {
            return Err(Error::invalid("LiRA variance floor must be positive"));
        }
        if self.hops == 0 {
            return Err(Error::invalid("hops must be at least 1"));
        }
        self.sampler.validate()
    }

    /// The α actually applied: 1 online, the configured value offline.
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            Mode::Online => 1.0,
            Mode::Offline => self.alpha,
        }
    }
}

/// Per-sample scores; larger means "more likely a member".
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub sample_ids: Vec<usize>,
    pub members: Vec<bool>,
    pub scores: Vec<f64>,
    pub method: String,
    pub mode: Mode,
    /// Whether scores are posterior membership probabilities.
    pub probability: bool,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// CSV with header `sample_id,member,score,method,mode`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample_id,member,score,method,mode\n");
        for i in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.sample_ids[i],
                u8::from(self.members[i]),
                crate::numeric::fmt_f64(self.scores[i]),
                self.method,
                self.mode
            ));
        }
        s
    }
}

/// Models and graph needed by attacks that query models directly.
#[derive(Clone, Copy)]
pub struct GraphContext<'a> {
    pub target: &'a ModelParams,
    pub pool: &'a ShadowPool,
    pub graph: &'a Graph,
    pub targets: &'a [usize],
    /// Ground truth for the output file; scores never read it.
    pub members: &'a [bool],
}

#[derive(Clone, Copy, Default)]
pub struct AttackInput<'a> {
    pub signals: Option<&'a SignalMatrix>,
    pub graph: Option<GraphContext<'a>>,
}

impl<'a> AttackInput<'a> {
    pub fn signals(&self) -> Result<&'a SignalMatrix> {
        self.signals
            .ok_or_else(|| Error::invalid("attack requires a signal matrix"))
    }

    pub fn graph(&self) -> Result<GraphContext<'a>> {
        self.graph
            .ok_or_else(|| Error::invalid("attack requires target model, shadow pool and graph"))
    }
}

pub trait Attack: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether scores are membership probabilities in (0, 1).
    fn outputs_probability(&self) -> bool {
        false
    }

    /// Whether offline scores depend on [`AttackConfig::alpha`].
    fn uses_alpha(&self) -> bool {
        true
    }

    /// Whether the attack needs [`AttackInput::graph`] rather than signals.
    fn needs_graph(&self) -> bool {
        false
    }

    fn score(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector>;
}

/// Attacks by name.
#[derive(Clone)]
pub struct AttackRegistry {
    attacks: BTreeMap<String, Arc<dyn Attack>>,
}

impl Default for AttackRegistry {
    fn default() -> Self {
        let mut r = Self {
            attacks: BTreeMap::new(),
        };
        r.register(Arc::new(BaseAttack));
        r.register(Arc::new(GBaseAttack));
        r.register(Arc::new(McaAttack));
        r.register(Arc::new(RmiaAttack));
        r.register(Arc::new(LiraAttack));
        r
    }
}

impl AttackRegistry {
    pub fn register(&mut self, attack: Arc<dyn Attack>) {
        self.attacks.insert(attack.name().to_string(), attack);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Attack>> {
        self.attacks.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "attack",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attacks.keys().map(String::as_str)
    }

    /// Looks up `cfg.method` and runs it.
    pub fn run(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector> {
        self.get(&cfg.method)?.score(input, cfg)
    }
}

/// Scores `targets` against `target` with the attack named by `cfg.method`,
/// computing whatever signals it needs from `pool` on `g`. `truth` only
/// labels the output.
#[allow(clippy::too_many_arguments)]
pub fn audit_model(
    registry: &AttackRegistry,
    cfg: &AttackConfig,
    target: &ModelParams,
    pool: &ShadowPool,
    g: &Graph,
    targets: &[usize],
    truth: &MembershipMask,
    signal_mode: SignalMode,
) -> Result<ScoreVector> {
    let attack = registry.get(&cfg.method)?;
    if attack.needs_graph() {
        if truth.len() != g.n() {
            return Err(Error::dim("membership mask must cover every node"));
        }
        if let Some(&bad) = targets.iter().find(|&&v| v >= g.n()) {
            return Err(Error::OutOfRange { index: bad, len: g.n() });
        }
        let members: Vec<bool> = targets.iter().map(|&v| truth.get(v)).collect();
        let ctx = GraphContext {
            target,
            pool,
            graph: g,
            targets,
            members: &members,
        };
        attack.score(
            &AttackInput {
                signals: None,
                graph: Some(ctx),
            },
            cfg,
        )
    } else {
        let sm = signal_matrix(target, pool, g, targets, truth, signal_mode)?;
        attack.score(
            &AttackInput {
                signals: Some(&sm),
                graph: None,
            },
            cfg,
        )
    }
}

/// `−ℓ_t − α · log((1/K) Σ_k exp(−ℓ_k))` over the shadows selected by `mode`.
///
/// This is the log of the mean-confidence ratio when `α = 1`; BASE is its
/// sigmoid after adding the prior log-odds.
pub(crate) fn log_ratio(row: &SignalRow<'_>, cfg: &AttackConfig) -> Result<f64> {
    let shadows: Vec<f64> = match cfg.mode {
        Mode::Online => row.shadow_loss.iter().map(|l| -l).collect(),
        Mode::Offline => {
            if row.in_bits.len() != row.shadow_loss.len() {
                return Err(Error::invalid("offline attack needs in/out bits for every shadow"));
            }
            row.out_losses().iter().map(|l| -l).collect()
        }
    };
    if shadows.is_empty() {
        return Err(Error::InsufficientModels(format!(
            "no {} shadow models available for a sample",
            if cfg.mode == Mode::Offline { "out" } else { "" }
        )));
    }
    Ok(-row.target_loss - cfg.effective_alpha() * log_mean_exp(&shadows))
}
