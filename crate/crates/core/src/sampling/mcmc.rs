//! Metropolis–Hastings over membership configurations, and the exact
//! enumeration it is checked against on small graphs.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::SamplerConfig;
use crate::error::{Error, Result};
use crate::graph::{masked_adjacency, Graph, MembershipMask};
use crate::model::{per_node_losses, ModelParams};
use crate::numeric::{log_mean_exp, log_sum_exp};
use crate::rng::StreamRng;
use crate::shadow::ShadowPool;

/// Largest graph accepted by [`enumerate_exact`].
pub const MAX_EXACT_NODES: usize = 14;

const CACHE_LIMIT: usize = 1 << 18;

/// Unnormalized log-probability of a non-target configuration `mask`:
///
/// `−Σ_u m_u ℓ_θ(u) − log((1/K) Σ_k exp(−Σ_u m_u ℓ_φk(u)))`,
///
/// with every loss evaluated on the adjacency induced by `mask`.
pub fn mcmc_log_target(
    mask: &MembershipMask,
    target: usize,
    theta: &ModelParams,
    pool: &ShadowPool,
    g: &Graph,
) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Empty("shadow pool"));
    }
    if target >= g.n() {
        return Err(Error::OutOfRange { index: target, len: g.n() });
    }
    if mask.len() == g.n() && mask.get(target) {
        return Err(Error::invalid(format!("target node {target} is set in the non-target mask")));
    }
    let adj = masked_adjacency(g, mask)?;
    let members: BTreeSet<usize> = mask.members().collect();
    let total = |m: &ModelParams| -> Result<f64> {
        Ok(per_node_losses(m, g, &adj, &members)?.values().sum())
    };
    let own = total(theta)?;
    let shadow: Vec<f64> = pool.models.iter().map(|m| total(m).map(|s| -s)).collect::<Result<_>>()?;
    Ok(-own - log_mean_exp(&shadow))
}

/// Normalized target distribution over all `2^(n−1)` configurations.
#[derive(Clone, Debug)]
pub struct ExactTable {
    pub target: usize,
    pub masks: Vec<MembershipMask>,
    pub probs: Vec<f64>,
}

impl ExactTable {
    fn free_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.masks[0].len()).filter(move |&u| u != self.target)
    }

    /// Position of `mask` in [`ExactTable::masks`].
    pub fn index_of(&self, mask: &MembershipMask) -> usize {
        self.free_nodes()
            .enumerate()
            .filter(|&(_, u)| mask.get(u))
            .map(|(j, _)| 1usize << j)
            .sum()
    }

    /// Total-variation distance between the table and the empirical
    /// distribution of `samples`.
    pub fn total_variation(&self, samples: &[MembershipMask]) -> f64 {
        let mut counts = vec![0usize; self.probs.len()];
        for m in samples {
            counts[self.index_of(m)] += 1;
        }
        let total = samples.len() as f64;
        0.5 * counts
            .iter()
            .zip(&self.probs)
            .map(|(&c, &p)| (c as f64 / total - p).abs())
            .sum::<f64>()
    }
}

/// Exact distribution by enumeration; only for `n ≤ 14`.
pub fn enumerate_exact(target: usize, theta: &ModelParams, pool: &ShadowPool, g: &Graph) -> Result<ExactTable> {
    let n = g.n();
    if n > MAX_EXACT_NODES {
        return Err(Error::invalid(format!(
            "exact enumeration limited to {MAX_EXACT_NODES} nodes, graph has {n}"
        )));
    }
    if target >= n {
        return Err(Error::OutOfRange { index: target, len: n });
    }
    let free: Vec<usize> = (0..n).filter(|&u| u != target).collect();
    let masks: Vec<MembershipMask> = (0..1usize << free.len())
        .map(|code| {
            MembershipMask::from_members(
                n,
                free.iter().enumerate().filter(|(j, _)| code >> j & 1 == 1).map(|(_, &u)| u),
            )
        })
        .collect();
    let logs: Vec<f64> = masks
        .par_iter()
        .map(|m| mcmc_log_target(m, target, theta, pool, g))
        .collect::<Result<_>>()?;
    let norm = log_sum_exp(&logs);
    let probs = logs.iter().map(|l| (l - norm).exp()).collect();
    Ok(ExactTable { target, masks, probs })
}

/// Emitted samples plus acceptance bookkeeping.
#[derive(Clone, Debug)]
pub struct McmcRun {
    pub masks: Vec<MembershipMask>,
    pub accepted: usize,
    pub proposed: usize,
}

impl McmcRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }
}

/// Runs one chain: uniform random start, symmetric bit-flip proposals,
/// `burn_in` discarded steps, then one mask every `thinning` steps.
pub fn run_mcmc(
    cfg: &SamplerConfig,
    target: usize,
    theta: &ModelParams,
    pool: &ShadowPool,
    g: &Graph,
    rng: &mut StreamRng,
) -> Result<McmcRun> {
    cfg.validate()?;
    let n = g.n();
    if target >= n {
        return Err(Error::OutOfRange { index: target, len: n });
    }
    let free: Vec<usize> = (0..n).filter(|&u| u != target).collect();
    let mut current = MembershipMask::from_bits((0..n).map(|u| u != target && rng.random_bool(0.5)).collect());
    if free.is_empty() {
        return Ok(McmcRun {
            masks: vec![current; cfg.samples],
            accepted: 0,
            proposed: 0,
        });
    }
    let flips = cfg.flips_per_step(n);
    // Memoized: small graphs revisit the same configurations constantly.
    let mut cache: HashMap<MembershipMask, f64> = HashMap::new();
    let mut log_target = |m: &MembershipMask| -> Result<f64> {
        if let Some(&v) = cache.get(m) {
            return Ok(v);
        }
        let v = mcmc_log_target(m, target, theta, pool, g)?;
        if cache.len() < CACHE_LIMIT {
            cache.insert(m.clone(), v);
        }
        Ok(v)
    };
    let mut current_log = log_target(&current)?;
    let mut run = McmcRun {
        masks: Vec::with_capacity(cfg.samples),
        accepted: 0,
        proposed: 0,
    };
    let mut step = |current: &mut MembershipMask, current_log: &mut f64, run: &mut McmcRun| -> Result<()> {
        let picks = index::sample(rng, free.len(), flips);
        for j in picks.iter() {
            current.flip(free[j]);
        }
        let proposal_log = log_target(current)?;
        run.proposed += 1;
        if rng.random::<f64>() < (proposal_log - *current_log).exp() {
            *current_log = proposal_log;
            run.accepted += 1;
        } else {
            for j in picks.iter() {
                current.flip(free[j]);
            }
        }
        Ok(())
    };
    for _ in 0..cfg.burn_in {
        step(&mut current, &mut current_log, &mut run)?;
    }
    for _ in 0..cfg.samples {
        for _ in 0..cfg.thinning {
            step(&mut current, &mut current_log, &mut run)?;
        }
        run.masks.push(current.clone());
    }
    Ok(run)
}

/// The masks of [`run_mcmc`].
pub fn sample_mcmc(
    cfg: &SamplerConfig,
    target: usize,
    theta: &ModelParams,
    pool: &ShadowPool,
    g: &Graph,
    rng: &mut StreamRng,
) -> Result<Vec<MembershipMask>> {
    run_mcmc(cfg, target, theta, pool, g, rng).map(|r| r.masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, nll_loss, train, Arch, TrainConfig};
    use crate::rng::stream_rng;
    use crate::shadow::train_shadow_pool;
    use crate::synth::{gen_sbm_graph, SbmSpec};

    fn small(n: usize, seed: u64) -> (Graph, ModelParams, ShadowPool) {
        let g = gen_sbm_graph(&SbmSpec {
            n,
            num_classes: 2,
            p_in: 0.6,
            p_out: 0.15,
            dim: 3,
            radius: 1.0,
            noise: 0.8,
            seed,
        })
        .unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            hidden: 4,
            lr: 0.3,
            ..TrainConfig::default()
        };
        let pool = train_shadow_pool(&g, Arch::Gcn2, &cfg, 4, seed + 1).unwrap();
        let half = MembershipMask::from_bits((0..n).map(|v| v % 2 == 0).collect());
        let theta = train(Arch::Gcn2, &g, &half, &TrainConfig { seed: 77, ..cfg }).unwrap();
        (g, theta, pool)
    }

    #[test]
    fn empty_mask_and_self_shadow() {
        let (g, theta, pool) = small(6, 1);
        assert_eq!(mcmc_log_target(&MembershipMask::zeros(6), 0, &theta, &pool, &g).unwrap(), 0.0);
        let same = ShadowPool::from_parts(vec![theta.clone()], vec![MembershipMask::zeros(6)]).unwrap();
        let m = MembershipMask::from_bits(vec![false, true, true, false, true, true]);
        assert!(mcmc_log_target(&m, 0, &theta, &same, &g).unwrap().abs() < 1e-12);
        assert!(mcmc_log_target(&m, 1, &theta, &pool, &g).is_err());
    }

    #[test]
    fn matches_naive_summation() {
        let (g, theta, pool) = small(6, 2);
        let mut rng = stream_rng(5, 0);
        for _ in 0..10 {
            let m = MembershipMask::from_bits((0..6).map(|u| u != 3 && rng.random_bool(0.6)).collect());
            let adj = masked_adjacency(&g, &m).unwrap();
            let sum = |p: &ModelParams| -> f64 {
                let probs = forward(p, &g, &adj).unwrap();
                m.members()
                    .map(|u| nll_loss(&probs.row(u).to_vec(), g.labels()[u]).unwrap())
                    .sum()
            };
            let mean_conf: f64 = pool.models.iter().map(|p| (-sum(p)).exp()).sum::<f64>() / pool.len() as f64;
            let naive = -sum(&theta) - mean_conf.ln();
            let got = mcmc_log_target(&m, 3, &theta, &pool, &g).unwrap();
            assert!((got - naive).abs() < 1e-10, "{got} vs {naive}");
        }
    }

    #[test]
    fn exact_table_normalizes_and_is_uniform_for_equal_models() {
        let (g, theta, pool) = small(6, 3);
        let table = enumerate_exact(2, &theta, &pool, &g).unwrap();
        assert_eq!(table.probs.len(), 32);
        assert!((table.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (i, m) in table.masks.iter().enumerate() {
            assert_eq!(table.index_of(m), i);
            assert!(!m.get(2));
        }
        let same = ShadowPool::from_parts(vec![theta.clone(); 2], vec![MembershipMask::zeros(6); 2]).unwrap();
        let flat = enumerate_exact(2, &theta, &same, &g).unwrap();
        assert!(flat.probs.iter().all(|p| (p - 1.0 / 32.0).abs() < 1e-12));
        let big = small(16, 4).0;
        assert!(enumerate_exact(0, &theta, &pool, &big).is_err());
    }

    #[test]
    fn identical_models_accept_everything() {
        let (g, theta, _) = small(6, 5);
        let same = ShadowPool::from_parts(vec![theta.clone()], vec![MembershipMask::zeros(6)]).unwrap();
        let cfg = SamplerConfig {
            kind: super::super::SamplerKind::Mcmc,
            samples: 20,
            burn_in: 10,
            thinning: 5,
            ..SamplerConfig::default()
        };
        let run = run_mcmc(&cfg, 0, &theta, &same, &g, &mut stream_rng(1, 1)).unwrap();
        assert_eq!(run.accepted, run.proposed);
        assert_eq!(run.masks.len(), 20);
        assert!(run.masks.iter().all(|m| !m.get(0)));
    }

    #[test]
    fn chain_is_deterministic_per_seed() {
        let (g, theta, pool) = small(6, 6);
        let cfg = SamplerConfig {
            samples: 10,
            burn_in: 20,
            thinning: 3,
            flip_fraction: Some(0.4),
            ..SamplerConfig::default()
        };
        let a = sample_mcmc(&cfg, 1, &theta, &pool, &g, &mut stream_rng(9, 2)).unwrap();
        let b = sample_mcmc(&cfg, 1, &theta, &pool, &g, &mut stream_rng(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_matches_enumeration_on_eight_nodes() {
        let (g, theta, pool) = small(8, 7);
        let table = enumerate_exact(0, &theta, &pool, &g).unwrap();
        let cfg = SamplerConfig {
            samples: 50_000,
            burn_in: 1000,
            thinning: 20,
            ..SamplerConfig::default()
        };
        let masks = sample_mcmc(&cfg, 0, &theta, &pool, &g, &mut stream_rng(3, 3)).unwrap();
        let tv = table.total_variation(&masks);
        assert!(tv < 0.05, "tv = {tv}");
    }
}
