use crate::config::Config;
use crate::error::CliError;
use crate::output::OutDir;
use crate::pipeline::{build_graph, challenger_split};

use super::manifest_base;

/// Writes the population graph and the challenger's membership mask.
pub fn gen(cfg: &Config) -> Result<String, CliError> {
    let g = build_graph(cfg, cfg.seed)?;
    let truth = challenger_split(g.n(), cfg.train_fraction, cfg.seed, 0);
    let mut out = OutDir::create(&cfg.out)?;
    out.write("graph.txt", &g.to_text())?;
    out.write("membership.txt", &format!("{}\n", truth.to_bit_string()))?;
    out.finish(&manifest_base("gen", cfg))?;
    Ok(format!(
        "generated {} nodes, {} edges, {} members",
        g.n(),
        g.edges().len(),
        truth.count()
    ))
}
