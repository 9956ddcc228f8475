//! Samplers for the membership configuration of the non-target nodes.
//!
//! G-BASE averages its decision statistic over masks drawn from an
//! approximation of `P(M̃ | θ, G)`. Each approximation is a [`MaskSampler`]
//! registered by name in a [`SamplerRegistry`]; the target bit is always left
//! unset in the returned masks.

mod bernoulli;
mod mcmc;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{Graph, MembershipMask};
use crate::model::ModelParams;
use crate::rng::StreamRng;
use crate::shadow::ShadowPool;

pub use bernoulli::{membership_probs_from_signals, sample_model_independent, sample_zero_hop_mia};
pub use mcmc::{enumerate_exact, mcmc_log_target, run_mcmc, sample_mcmc, ExactTable, McmcRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    ModelIndependent,
    Mcmc,
    ZeroHopMia,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::ModelIndependent => "model_independent",
            SamplerKind::Mcmc => "mcmc",
            SamplerKind::ZeroHopMia => "zero_hop_mia",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model_independent" => Ok(SamplerKind::ModelIndependent),
            "mcmc" => Ok(SamplerKind::Mcmc),
            "zero_hop_mia" => Ok(SamplerKind::ZeroHopMia),
            other => Err(Error::UnknownStrategy {
                kind: "sampler",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Bernoulli parameter of the model-independent sampler.
    pub lambda: f64,
    /// Number of masks returned per target.
    pub samples: usize,
    /// Fraction of non-target bits flipped per MCMC proposal; `None` means a
    /// single bit.
    pub flip_fraction: Option<f64>,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::ModelIndependent,
            lambda: 0.5,
            samples: 8,
            flip_fraction: None,
            burn_in: 1000,
            thinning: 500,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid(format!("sampler lambda {} not in (0, 1)", self.lambda)));
        }
        if self.samples == 0 {
            return Err(Error::invalid("sampler must draw at least one mask"));
        }
        if let Some(eps) = self.flip_fraction {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::invalid(format!("flip fraction {eps} not in (0, 1]")));
            }
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        Ok(())
    }

    /// Number of bits flipped per proposal over `n − 1` free bits.
    pub fn flips_per_step(&self, n: usize) -> usize {
        let free = n.saturating_sub(1).max(1);
        match self.flip_fraction {
            None => 1,
            Some(eps) => ((eps * free as f64).ceil() as usize).clamp(1, free),
        }
    }
}

/// What a sampler may look at.
#[derive(Clone, Copy)]
pub struct SamplerContext<'a> {
    pub graph: &'a Graph,
    pub target: &'a ModelParams,
    pub pool: &'a ShadowPool,
    /// Per-node membership probabilities from a 0-hop attack, indexed by node.
    pub node_probs: Option<&'a [f64]>,
}

pub trait MaskSampler: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether [`SamplerContext::node_probs`] must be populated.
    fn needs_node_probs(&self) -> bool {
        false
    }

    fn sample(
        &self,
        cfg: &SamplerConfig,
        ctx: &SamplerContext<'_>,
        target: usize,
        rng: &mut StreamRng,
    ) -> Result<Vec<MembershipMask>>;
}

struct ModelIndependent;

impl MaskSampler for ModelIndependent {
    fn name(&self) -> &'static str {
        SamplerKind::ModelIndependent.name()
    }

    fn sample(
        &self,
        cfg: &SamplerConfig,
        ctx: &SamplerContext<'_>,
        target: usize,
        rng: &mut StreamRng,
    ) -> Result<Vec<MembershipMask>> {
        (0..cfg.samples)
            .map(|_| sample_model_independent(cfg, ctx.graph.n(), target, rng))
            .collect()
    }
}

struct Mcmc;

impl MaskSampler for Mcmc {
    fn name(&self) -> &'static str {
        SamplerKind::Mcmc.name()
    }

    fn sample(
        &self,
        cfg: &SamplerConfig,
        ctx: &SamplerContext<'_>,
        target: usize,
        rng: &mut StreamRng,
    ) -> Result<Vec<MembershipMask>> {
        sample_mcmc(cfg, target, ctx.target, ctx.pool, ctx.graph, rng)
    }
}

struct ZeroHopMia;

impl MaskSampler for ZeroHopMia {
    fn name(&self) -> &'static str {
        SamplerKind::ZeroHopMia.name()
    }

    fn needs_node_probs(&self) -> bool {
        true
    }

    fn sample(
        &self,
        cfg: &SamplerConfig,
        ctx: &SamplerContext<'_>,
        target: usize,
        rng: &mut StreamRng,
    ) -> Result<Vec<MembershipMask>> {
        let probs = ctx
            .node_probs
            .ok_or_else(|| Error::invalid("zero_hop_mia sampler needs per-node membership probabilities"))?;
        sample_zero_hop_mia(cfg, target, probs, rng)
    }
}

/// Samplers by name.
#[derive(Clone)]
pub struct SamplerRegistry {
    samplers: BTreeMap<String, Arc<dyn MaskSampler>>,
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        let mut r = Self {
            samplers: BTreeMap::new(),
        };
        r.register(Arc::new(ModelIndependent));
        r.register(Arc::new(Mcmc));
        r.register(Arc::new(ZeroHopMia));
        r
    }
}

impl SamplerRegistry {
    pub fn register(&mut self, sampler: Arc<dyn MaskSampler>) {
        self.samplers.insert(sampler.name().to_string(), sampler);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MaskSampler>> {
        self.samplers.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "sampler",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.samplers.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_every_kind() {
        let reg = SamplerRegistry::default();
        for kind in [SamplerKind::ModelIndependent, SamplerKind::Mcmc, SamplerKind::ZeroHopMia] {
            assert_eq!(reg.get(kind.name()).unwrap().name(), kind.name());
            assert_eq!(kind.name().parse::<SamplerKind>().unwrap(), kind);
        }
        assert!(reg.get("gibbs").is_err());
        assert_eq!(reg.names().count(), 3);
    }

    #[test]
    fn config_validation_and_flip_counts() {
        let cfg = SamplerConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.flips_per_step(8), 1);
        let wide = SamplerConfig {
            flip_fraction: Some(0.3),
            ..cfg.clone()
        };
        assert_eq!(wide.flips_per_step(11), 3);
        for bad in [
            SamplerConfig { lambda: 1.0, ..cfg.clone() },
            SamplerConfig { samples: 0, ..cfg.clone() },
            SamplerConfig { flip_fraction: Some(0.0), ..cfg.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
