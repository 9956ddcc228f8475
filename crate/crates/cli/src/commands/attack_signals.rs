use mia_core::attacks::{AttackInput, AttackRegistry};
use mia_core::signals::SignalMatrix;

use crate::config::Config;
use crate::error::CliError;
use crate::output::OutDir;

use super::{f, manifest_base, metrics};

/// Runs the signal attacks on a signal CSV produced elsewhere.
pub fn attack_signals(cfg: &Config) -> Result<String, CliError> {
    let path = cfg
        .signal_file
        .as_ref()
        .ok_or_else(|| CliError::Config("attack-signals needs `signal_file`".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let signals = SignalMatrix::parse_csv(&text)?;
    let registry = AttackRegistry::default();
    let plans = cfg.attack_plans()?;
    if plans.is_empty() {
        return Err(CliError::Config("attack-signals needs at least one [attack.NAME] section".into()));
    }
    let mut out = OutDir::create(&cfg.out)?;
    let mut summary = String::from("attack,mode,auc,tpr_at_1pct,tpr_at_0.1pct,n,k,seed\n");
    let mut report = String::new();
    for plan in &plans {
        if plan.auto_alpha {
            return Err(CliError::Config(format!(
                "[attack.{}] offline alpha must be set explicitly for external signals",
                plan.label
            )));
        }
        let attack = registry.get(&plan.config.method)?;
        if attack.needs_graph() {
            return Err(CliError::Config(format!("attack `{}` needs models and a graph", plan.config.method)));
        }
        let mut ac = plan.config.clone();
        if let Some(frac) = plan.population_fraction {
            let take = ((frac * signals.len() as f64).ceil() as usize).max(1);
            ac.population = Some((0..take).collect());
        }
        let scores = attack.score(
            &AttackInput {
                signals: Some(&signals),
                graph: None,
            },
            &ac,
        )?;
        let mode = ac.mode.to_string();
        let stem = format!("{}_{mode}", plan.label);
        out.write(&format!("scores_{stem}.csv"), &scores.to_csv())?;
        let has_both = scores.members.iter().any(|&m| m) && scores.members.iter().any(|&m| !m);
        if has_both {
            let m = metrics(&scores)?;
            out.write(&format!("roc_{stem}.csv"), &m.roc.to_csv())?;
            summary.push_str(&format!(
                "{},{mode},{},{},{},{},{},{}\n",
                plan.label,
                f(m.auc),
                f(m.tpr_1pct),
                f(m.tpr_01pct),
                scores.len(),
                signals.num_shadows(),
                cfg.seed
            ));
            report.push_str(&format!("{} {mode}: auc {:.4}\n", plan.label, m.auc));
        } else {
            report.push_str(&format!("{} {mode}: scored {} samples\n", plan.label, scores.len()));
        }
    }
    out.write("summary.csv", &summary)?;
    out.finish(&manifest_base("attack-signals", cfg))?;
    Ok(report.trim_end().to_string())
}
