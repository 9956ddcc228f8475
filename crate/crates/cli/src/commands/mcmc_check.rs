use mia_core::graph::MembershipMask;
use mia_core::rng::stream_rng;
use mia_core::sampling::{enumerate_exact, run_mcmc, SamplerConfig, SamplerKind};
use mia_core::shadow::train_shadow_pool;
use mia_core::synth::gen_sbm_graph;

use crate::config::Config;
use crate::error::CliError;
use crate::output::OutDir;
use crate::pipeline::{challenger_split, train_target};

use super::{f, manifest_base};

const CHAIN_STREAM: u64 = 21;

/// Compares the Metropolis-Hastings chain with the exact distribution over
/// all membership configurations of a small graph.
pub fn mcmc_check(cfg: &Config) -> Result<String, CliError> {
    let m = &cfg.mcmc;
    let mut spec = cfg.data_spec(cfg.seed)?;
    spec.n = m.n;
    let g = gen_sbm_graph(&spec).map_err(|e| CliError::Config(format!("[mcmc] {e}")))?;
    if m.target_node >= g.n() {
        return Err(CliError::Config(format!("[mcmc] target_node {} out of range", m.target_node)));
    }
    let truth = challenger_split(g.n(), cfg.train_fraction, cfg.seed, 0);
    let theta = train_target(cfg, &g, &truth, cfg.seed)?;
    let pool = train_shadow_pool(&g, cfg.shadow_arch()?, &cfg.shadow_train(0)?, m.shadows, cfg.seed)?;
    let exact = enumerate_exact(m.target_node, &theta, &pool, &g)?;
    let sampler = SamplerConfig {
        kind: SamplerKind::Mcmc,
        samples: m.samples,
        flip_fraction: m.flip_fraction,
        burn_in: m.burn_in,
        thinning: m.thinning,
        ..SamplerConfig::default()
    };
    sampler.validate().map_err(|e| CliError::Config(format!("[mcmc] {e}")))?;
    let run = run_mcmc(&sampler, m.target_node, &theta, &pool, &g, &mut stream_rng(cfg.seed, CHAIN_STREAM))?;
    let tv = exact.total_variation(&run.masks);

    let mut counts = vec![0usize; exact.masks.len()];
    for mask in &run.masks {
        counts[exact.index_of(mask)] += 1;
    }
    let mut table = String::from("mask,exact,empirical\n");
    for (i, mask) in exact.masks.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{}\n",
            mask.to_bit_string(),
            f(exact.probs[i]),
            f(counts[i] as f64 / run.masks.len() as f64)
        ));
    }
    let report = format!(
        "nodes {}\ntarget_node {}\nsamples {}\nburn_in {}\nthinning {}\nacceptance_rate {}\ntotal_variation {}\ntrue_membership {}\n",
        g.n(),
        m.target_node,
        run.masks.len(),
        m.burn_in,
        m.thinning,
        f(run.acceptance_rate()),
        f(tv),
        mask_string(&truth, m.target_node)
    );
    let mut out = OutDir::create(&cfg.out)?;
    out.write("mcmc_distribution.csv", &table)?;
    out.write("mcmc_check.txt", &report)?;
    out.finish(&manifest_base("mcmc-check", cfg))?;
    Ok(format!(
        "total variation {tv:.4} over {} samples, acceptance {:.3}",
        run.masks.len(),
        run.acceptance_rate()
    ))
}

fn mask_string(truth: &MembershipMask, target: usize) -> String {
    truth.with(target, false).to_bit_string()
}
