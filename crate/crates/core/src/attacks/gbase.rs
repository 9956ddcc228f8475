use std::collections::BTreeSet;

use rayon::prelude::*;

use super::base::clamp_probability;
use super::{Attack, AttackConfig, AttackInput, GraphContext, Mode, ScoreVector};
use crate::error::{Error, Result};
use crate::graph::{masked_adjacency, Graph, MaskedAdjacency, MembershipMask};
use crate::model::{per_node_losses, ModelParams};
use crate::numeric::{log_mean_exp, prior_log_odds, sigmoid};
use crate::rng::{stream_rng, sub_stream};
use crate::sampling::{
    membership_probs_from_signals, MaskSampler, SamplerContext, SamplerRegistry,
};
use crate::shadow::filter_out_models;
use crate::signals::{signal_matrix, SignalMode};

const GBASE_STREAM: u64 = 0x6762_6173;

/// The two adjacencies a node's signal compares, plus the nodes it reads.
struct SignalFrame {
    target: usize,
    with: MaskedAdjacency,
    without: MaskedAdjacency,
    neighbours: BTreeSet<usize>,
}

impl SignalFrame {
    fn new(g: &Graph, v: usize, mask: &MembershipMask, hops: usize) -> Result<Self> {
        if v >= g.n() {
            return Err(Error::OutOfRange { index: v, len: g.n() });
        }
        if mask.len() != g.n() {
            return Err(Error::dim(format!("mask of length {} for {} nodes", mask.len(), g.n())));
        }
        if mask.get(v) {
            return Err(Error::invalid(format!("node {v} is set in the non-target mask")));
        }
        let with = masked_adjacency(g, &mask.with(v, true))?;
        let without = with.drop_node(v)?;
        let neighbours = with.l_hop_neighborhood(v, hops)?;
        Ok(Self {
            target: v,
            with,
            without,
            neighbours,
        })
    }

    fn signal(&self, model: &ModelParams, g: &Graph) -> Result<f64> {
        let mut read = self.neighbours.clone();
        read.insert(self.target);
        let with = per_node_losses(model, g, &self.with, &read)?;
        let without = per_node_losses(model, g, &self.without, &self.neighbours)?;
        let delta: f64 = self.neighbours.iter().map(|u| with[u] - without[u]).sum();
        Ok(with[&self.target] + delta)
    }
}

/// Loss of `v` on the graph where it joins the members of `mask`, plus how
/// much its inclusion changes the losses of its member neighbours within
/// `hops` hops.
pub fn graph_signal(model: &ModelParams, g: &Graph, v: usize, mask: &MembershipMask, hops: usize) -> Result<f64> {
    SignalFrame::new(g, v, mask, hops)?.signal(model, g)
}

/// Posterior for one target under one sampled configuration.
fn mask_term(
    ctx: &GraphContext<'_>,
    v: usize,
    shadows: &[usize],
    mask: &MembershipMask,
    cfg: &AttackConfig,
) -> Result<f64> {
    let frame = SignalFrame::new(ctx.graph, v, mask, cfg.hops)?;
    let own = frame.signal(ctx.target, ctx.graph)?;
    let neg: Vec<f64> = shadows
        .iter()
        .map(|&k| frame.signal(&ctx.pool.models[k], ctx.graph).map(|s| -s))
        .collect::<Result<_>>()?;
    let x = -own - cfg.effective_alpha() * log_mean_exp(&neg) + prior_log_odds(cfg.lambda);
    Ok(clamp_probability(sigmoid(x)))
}

fn shadow_indices(ctx: &GraphContext<'_>, v: usize, mode: Mode) -> Result<Vec<usize>> {
    let ids = match mode {
        Mode::Online => (0..ctx.pool.len()).collect(),
        Mode::Offline => filter_out_models(ctx.pool, v)?,
    };
    if ids.is_empty() {
        return Err(Error::InsufficientModels(format!("no out models for node {v}")));
    }
    Ok(ids)
}

/// Per-node membership probabilities for samplers that need them.
fn zero_hop_probs(ctx: &GraphContext<'_>, lambda: f64) -> Result<Vec<f64>> {
    let n = ctx.graph.n();
    let all: Vec<usize> = (0..n).collect();
    let unknown = MembershipMask::zeros(n);
    let sm = signal_matrix(ctx.target, ctx.pool, ctx.graph, &all, &unknown, SignalMode::ZeroHop)?;
    membership_probs_from_signals(&sm, n, lambda)
}

/// G-BASE: the BASE posterior averaged over sampled membership
/// configurations of the other nodes, with every model queried on the
/// adjacency the configuration induces.
pub fn attack_gbase(ctx: &GraphContext<'_>, cfg: &AttackConfig, sampler: &dyn MaskSampler) -> Result<ScoreVector> {
    cfg.validate()?;
    if ctx.pool.is_empty() {
        return Err(Error::Empty("shadow pool"));
    }
    if ctx.pool.node_count() != ctx.graph.n() {
        return Err(Error::dim("shadow pool membership does not cover the graph"));
    }
    if ctx.targets.len() != ctx.members.len() {
        return Err(Error::dim("targets and membership labels differ in length"));
    }
    let node_probs = if sampler.needs_node_probs() {
        Some(zero_hop_probs(ctx, cfg.lambda)?)
    } else {
        None
    };
    let sctx = SamplerContext {
        graph: ctx.graph,
        target: ctx.target,
        pool: ctx.pool,
        node_probs: node_probs.as_deref(),
    };
    let scores = ctx
        .targets
        .par_iter()
        .map(|&v| {
            let shadows = shadow_indices(ctx, v, cfg.mode)?;
            let mut rng = stream_rng(cfg.seed, sub_stream(GBASE_STREAM, v as u64));
            let masks = sampler.sample(&cfg.sampler, &sctx, v, &mut rng)?;
            if masks.is_empty() {
                return Err(Error::Empty("sampled masks"));
            }
            let mut total = 0.0;
            for m in &masks {
                total += mask_term(ctx, v, &shadows, m, cfg)?;
            }
            Ok(clamp_probability(total / masks.len() as f64))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScoreVector {
        sample_ids: ctx.targets.to_vec(),
        members: ctx.members.to_vec(),
        scores,
        method: cfg.method.clone(),
        mode: cfg.mode,
        probability: true,
    })
}

pub struct GBaseAttack;

impl Attack for GBaseAttack {
    fn name(&self) -> &'static str {
        "gbase"
    }

    fn outputs_probability(&self) -> bool {
        true
    }

    fn needs_graph(&self) -> bool {
        true
    }

    fn score(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector> {
        let sampler = SamplerRegistry::default().get(cfg.sampler.kind.name())?;
        attack_gbase(&input.graph()?, cfg, sampler.as_ref())
    }
}
