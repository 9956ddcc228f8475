//! Shared experiment steps: population, challenger split, model training and
//! attack execution.

use rand::seq::SliceRandom;

use mia_core::attacks::{
    audit_model, select_alpha, AlphaSelection, AttackRegistry, ScoreVector, ALPHA_GRID, GBASE_ALPHA_GRID,
};
use mia_core::graph::{Graph, MembershipMask};
use mia_core::model::{accuracy, train, ModelParams};
use mia_core::rng::{stream_rng, sub_stream};
use mia_core::shadow::{train_shadow_pool, ShadowPool};
use mia_core::synth::{gen_iid_dataset, gen_sbm_graph};

use crate::config::{AttackPlan, Config};
use crate::error::CliError;

const CHALLENGER_TAG: u64 = 11;
const TARGET_TAG: u64 = 12;
const SHADOW_TAG: u64 = 13;
const ATTACK_TAG: u64 = 14;
const EVAL_TAG: u64 = 15;
const POPULATION_TAG: u64 = 16;

/// Seed of repetition `r`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    sub_stream(seed, r as u64)
}

pub fn build_graph(cfg: &Config, seed: u64) -> Result<Graph, CliError> {
    let spec = cfg.data_spec(seed)?;
    Ok(if cfg.iid() {
        gen_iid_dataset(&spec)?
    } else {
        gen_sbm_graph(&spec)?
    })
}

/// The challenger's secret membership: a random `fraction` of the nodes.
pub fn challenger_split(n: usize, fraction: f64, seed: u64, draw: u64) -> MembershipMask {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, sub_stream(CHALLENGER_TAG, draw)));
    let take = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    MembershipMask::from_members(n, order.into_iter().take(take))
}

/// Equal numbers of members and non-members, ascending; the larger class
/// is subsampled.
pub fn evaluation_targets(truth: &MembershipMask, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, EVAL_TAG);
    let mut ins: Vec<usize> = truth.members().collect();
    let mut outs: Vec<usize> = truth.complement().members().collect();
    let k = ins.len().min(outs.len());
    ins.shuffle(&mut rng);
    outs.shuffle(&mut rng);
    let mut targets: Vec<usize> = ins.into_iter().take(k).chain(outs.into_iter().take(k)).collect();
    targets.sort_unstable();
    targets
}

pub struct Trial {
    pub seed: u64,
    pub graph: Graph,
    pub truth: MembershipMask,
    pub target: ModelParams,
    pub pool: ShadowPool,
    pub targets: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

pub fn train_target(cfg: &Config, graph: &Graph, truth: &MembershipMask, seed: u64) -> Result<ModelParams, CliError> {
    let tc = cfg.target_train(sub_stream(seed, TARGET_TAG))?;
    Ok(train(cfg.target_arch()?, graph, truth, &tc)?)
}

pub fn train_pool(cfg: &Config, graph: &Graph, seed: u64) -> Result<ShadowPool, CliError> {
    let sc = cfg.shadow_train(0)?;
    Ok(train_shadow_pool(graph, cfg.shadow_arch()?, &sc, cfg.shadows, sub_stream(seed, SHADOW_TAG))?)
}

/// Builds the population, the challenger's target model and the shadow
/// pool for one repetition.
pub fn run_trial(cfg: &Config, seed: u64) -> Result<Trial, CliError> {
    let graph = build_graph(cfg, seed)?;
    let truth = challenger_split(graph.n(), cfg.train_fraction, seed, 0);
    let target = train_target(cfg, &graph, &truth, seed)?;
    let pool = train_pool(cfg, &graph, seed)?;
    let targets = evaluation_targets(&truth, seed);
    Ok(Trial {
        seed,
        graph,
        truth,
        target,
        pool,
        targets,
    })
}

/// Accuracy of `model` on the member and non-member nodes, each evaluated
/// on the full graph.
pub fn train_report(model: &ModelParams, graph: &Graph, truth: &MembershipMask) -> Result<TrainReport, CliError> {
    let adj = graph.full_adjacency();
    let ins: Vec<usize> = truth.members().collect();
    let outs: Vec<usize> = truth.complement().members().collect();
    // Training only ever sees the member-induced subgraph.
    let train_adj = mia_core::graph::masked_adjacency(graph, truth)?;
    Ok(TrainReport {
        train_accuracy: accuracy(model, graph, &train_adj, &ins)?,
        test_accuracy: accuracy(model, graph, &adj, &outs)?,
    })
}

/// Offline `α` candidates for `method`.
pub fn alpha_grid(registry: &AttackRegistry, method: &str) -> Result<&'static [f64], CliError> {
    Ok(if registry.get(method)?.needs_graph() {
        &GBASE_ALPHA_GRID
    } else {
        &ALPHA_GRID
    })
}

/// Attack outcome for one plan on one trial.
pub struct AttackRun {
    pub scores: ScoreVector,
    pub alpha: Option<AlphaSelection>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_attack(
    cfg: &Config,
    plan: &AttackPlan,
    registry: &AttackRegistry,
    target: &ModelParams,
    pool: &ShadowPool,
    graph: &Graph,
    targets: &[usize],
    truth: &MembershipMask,
    seed: u64,
) -> Result<AttackRun, CliError> {
    let signal_mode = cfg.signal_mode()?;
    let mut ac = plan.config.clone();
    ac.seed = sub_stream(seed, ATTACK_TAG);
    if let Some(f) = plan.population_fraction {
        let mut rows: Vec<usize> = (0..targets.len()).collect();
        rows.shuffle(&mut stream_rng(seed, POPULATION_TAG));
        rows.truncate(((f * rows.len() as f64).ceil() as usize).max(1));
        rows.sort_unstable();
        ac.population = Some(rows);
    }
    let alpha = if plan.auto_alpha {
        let sel = select_alpha(registry, &ac, pool, graph, targets, signal_mode, alpha_grid(registry, &ac.method)?)?;
        ac.alpha = sel.alpha;
        Some(sel)
    } else {
        None
    };
    let scores = audit_model(registry, &ac, target, pool, graph, targets, truth, signal_mode)?;
    Ok(AttackRun { scores, alpha })
}
