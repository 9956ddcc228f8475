mod attack_signals;
mod audit;
mod gen;
mod mcmc_check;
mod threshold;

pub use attack_signals::attack_signals;
pub use audit::audit;
pub use gen::gen;
pub use mcmc_check::mcmc_check;
pub use threshold::threshold;

use mia_core::metrics::{roc_auc, tpr_at_fpr, RocCurve};
use mia_core::numeric::fmt_f64;
use mia_core::attacks::ScoreVector;

use crate::config::Config;
use crate::error::CliError;

/// Manifest entries shared by every command; paths are left out so runs in
/// different directories stay byte-identical.
pub(crate) fn manifest_base(command: &str, cfg: &Config) -> Vec<(String, String)> {
    let d = &cfg.data;
    let t = &cfg.target;
    let mut e = vec![
        ("tool".to_string(), format!("mia {}", env!("CARGO_PKG_VERSION"))),
        ("command".to_string(), command.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("repetitions".to_string(), cfg.repetitions.to_string()),
        ("shadows".to_string(), cfg.shadows.to_string()),
        ("train_fraction".to_string(), cfg.train_fraction.to_string()),
        ("signals".to_string(), cfg.signals.clone()),
        (
            "data".to_string(),
            format!(
                "kind={} n={} classes={} p_in={} p_out={} dim={} radius={} noise={}",
                d.kind, d.n, d.classes, d.p_in, d.p_out, d.dim, d.radius, d.noise
            ),
        ),
        (
            "target".to_string(),
            format!(
                "arch={} lr={} epochs={} weight_decay={} hidden={}",
                t.arch, t.lr, t.epochs, t.weight_decay, t.hidden
            ),
        ),
        ("shadow_overrides".to_string(), format!("{:?}", cfg.shadow)),
        (
            "evaluation_targets".to_string(),
            "all nodes, larger of members/non-members subsampled to balance".to_string(),
        ),
    ];
    for (name, sec) in &cfg.attack {
        e.push((format!("attack.{name}"), format!("{sec:?}")));
    }
    e
}

/// AUC and TPR at 1% and 0.1% FPR of one score vector.
pub(crate) struct Metrics {
    pub roc: RocCurve,
    pub auc: f64,
    pub tpr_1pct: f64,
    pub tpr_01pct: f64,
}

pub(crate) fn metrics(s: &ScoreVector) -> Result<Metrics, CliError> {
    let roc = roc_auc(&s.scores, &s.members)?;
    Ok(Metrics {
        auc: roc.auc,
        tpr_1pct: tpr_at_fpr(&roc, 0.01)?.tpr,
        tpr_01pct: tpr_at_fpr(&roc, 0.001)?.tpr,
        roc,
    })
}

pub(crate) fn f(x: f64) -> String {
    fmt_f64(x)
}
