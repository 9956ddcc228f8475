//! Shadow-model pools built from complementary half splits.
//!
//! Models come in pairs: one trained on a uniformly random half of the
//! population and one on the complementary half. Every node therefore sits in
//! the training set of exactly `K/2` models, which gives each node a balanced
//! set of in-models and out-models.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, MembershipMask};
use crate::model::{train, Arch, ModelParams, TrainConfig};
use crate::rng::{stream_rng, sub_stream};

const SPLIT_TAG: u64 = 0x5350_4c54;
const INIT_TAG: u64 = 0x494e_4954;

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowPool {
    pub models: Vec<ModelParams>,
    /// `membership[k]` is the training mask of model `k`.
    pub membership: Vec<MembershipMask>,
    pub arch: Arch,
    pub config: TrainConfig,
    pub seed: u64,
}

impl ShadowPool {
    /// Wraps pre-trained models; used for simulated targets and tests.
    pub fn from_parts(models: Vec<ModelParams>, membership: Vec<MembershipMask>) -> Result<Self> {
        if models.len() != membership.len() {
            return Err(Error::dim("one membership mask per shadow model required"));
        }
        if models.is_empty() {
            return Err(Error::Empty("shadow pool"));
        }
        let n = membership[0].len();
        if membership.iter().any(|m| m.len() != n) {
            return Err(Error::dim("membership masks differ in length"));
        }
        let arch = models[0].arch;
        Ok(Self {
            models,
            membership,
            arch,
            config: TrainConfig::default(),
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.membership[0].len()
    }

    pub fn is_in(&self, k: usize, v: usize) -> bool {
        self.membership[k].get(v)
    }

    /// Sub-pool of the listed models, in order.
    pub fn subset(&self, indices: &[usize]) -> ShadowPool {
        ShadowPool {
            models: indices.iter().map(|&k| self.models[k].clone()).collect(),
            membership: indices.iter().map(|&k| self.membership[k].clone()).collect(),
            ..self.clone()
        }
    }

    /// Every model except `k`.
    pub fn without(&self, k: usize) -> ShadowPool {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != k).collect();
        self.subset(&keep)
    }
}

/// Random half of `0..n` for split `pair`, as a mask.
pub fn half_split(n: usize, seed: u64, pair: u64) -> MembershipMask {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, sub_stream(SPLIT_TAG, pair)));
    MembershipMask::from_members(n, order.into_iter().take(n / 2))
}

/// Trains `k` shadow models as `k/2` complementary pairs.
pub fn train_shadow_pool(g: &Graph, arch: Arch, cfg: &TrainConfig, k: usize, seed: u64) -> Result<ShadowPool> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::invalid(format!("shadow count {k} must be even and at least 2")));
    }
    cfg.validate()?;
    let membership: Vec<MembershipMask> = (0..k / 2)
        .flat_map(|pair| {
            let half = half_split(g.n(), seed, pair as u64);
            let rest = half.complement();
            [half, rest]
        })
        .collect();
    let models = membership
        .par_iter()
        .enumerate()
        .map(|(i, mask)| {
            let cfg = TrainConfig {
                seed: sub_stream(seed, sub_stream(INIT_TAG, i as u64)),
                ..cfg.clone()
            };
            train(arch, g, mask, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShadowPool {
        models,
        membership,
        arch,
        config: cfg.clone(),
        seed,
    })
}

/// Indices of the models that did not train on `v`.
pub fn filter_out_models(pool: &ShadowPool, v: usize) -> Result<Vec<usize>> {
    check_node(pool, v)?;
    Ok((0..pool.len()).filter(|&k| !pool.is_in(k, v)).collect())
}

/// Indices of the models that trained on `v`.
pub fn filter_in_models(pool: &ShadowPool, v: usize) -> Result<Vec<usize>> {
    check_node(pool, v)?;
    Ok((0..pool.len()).filter(|&k| pool.is_in(k, v)).collect())
}

fn check_node(pool: &ShadowPool, v: usize) -> Result<()> {
    if v >= pool.node_count() {
        return Err(Error::OutOfRange {
            index: v,
            len: pool.node_count(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_sbm_graph, SbmSpec};

    fn graph(n: usize) -> Graph {
        gen_sbm_graph(&SbmSpec {
            n,
            num_classes: 2,
            p_in: 0.3,
            p_out: 0.05,
            dim: 3,
            radius: 1.0,
            noise: 1.0,
            seed: 5,
        })
        .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            hidden: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pair_partitions_nodes() {
        let pool = train_shadow_pool(&graph(4), Arch::Gcn2, &quick(), 2, 1).unwrap();
        for v in 0..4 {
            assert_ne!(pool.is_in(0, v), pool.is_in(1, v));
        }
        assert_eq!(pool.membership[0].count(), 2);
    }

    #[test]
    fn every_node_in_half_the_models() {
        let g = graph(10);
        for k in [2, 4, 6] {
            let pool = train_shadow_pool(&g, Arch::Mlp1, &quick(), k, 3).unwrap();
            for v in 0..10 {
                let outs = filter_out_models(&pool, v).unwrap();
                let ins = filter_in_models(&pool, v).unwrap();
                assert_eq!(outs.len(), k / 2);
                assert_eq!(ins.len() + outs.len(), k);
            }
        }
    }

    #[test]
    fn complement_pair_out_model() {
        let pool = train_shadow_pool(&graph(6), Arch::Gcn2, &quick(), 2, 9).unwrap();
        let v = pool.membership[0].members().next().unwrap();
        assert_eq!(filter_out_models(&pool, v).unwrap(), vec![1]);
        assert!(filter_out_models(&pool, 6).is_err());
    }

    #[test]
    fn odd_or_zero_counts_rejected() {
        let g = graph(4);
        assert!(train_shadow_pool(&g, Arch::Gcn2, &quick(), 3, 0).is_err());
        assert!(train_shadow_pool(&g, Arch::Gcn2, &quick(), 0, 0).is_err());
    }

    #[test]
    fn pools_are_reproducible_from_seed() {
        let g = graph(10);
        let a = train_shadow_pool(&g, Arch::Gcn2, &quick(), 4, 21).unwrap();
        let b = train_shadow_pool(&g, Arch::Gcn2, &quick(), 4, 21).unwrap();
        assert_eq!(a.membership, b.membership);
        for (x, y) in a.models.iter().zip(&b.models) {
            assert_eq!(x.to_text(), y.to_text());
        }
        let c = train_shadow_pool(&g, Arch::Gcn2, &quick(), 4, 22).unwrap();
        assert_ne!(a.membership, c.membership);
    }
}
