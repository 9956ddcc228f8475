use std::collections::BTreeMap;

use mia_core::attacks::AttackRegistry;

use crate::config::Config;
use crate::error::CliError;
use crate::output::{mean_std, OutDir};
use crate::pipeline::{repetition_seed, run_attack, run_trial, train_report};

use super::{f, manifest_base, metrics};

#[derive(Default)]
struct Tally {
    auc: Vec<f64>,
    tpr_1pct: Vec<f64>,
    tpr_01pct: Vec<f64>,
    alphas: Vec<f64>,
    n: usize,
}

/// Runs the membership game `repetitions` times and scores every
/// configured attack on each target model.
pub fn audit(cfg: &Config) -> Result<String, CliError> {
    let plans = cfg.attack_plans()?;
    if plans.is_empty() {
        return Err(CliError::Config("audit needs at least one [attack.NAME] section".into()));
    }
    let registry = AttackRegistry::default();
    let mut out = OutDir::create(&cfg.out)?;
    let mut tallies: BTreeMap<(String, String), Tally> = BTreeMap::new();
    let mut training = String::from("repetition,seed,train_accuracy,test_accuracy,gap\n");
    for r in 0..cfg.repetitions {
        let seed = repetition_seed(cfg.seed, r);
        let trial = run_trial(cfg, seed)?;
        let rep = train_report(&trial.target, &trial.graph, &trial.truth)?;
        training.push_str(&format!(
            "{r},{seed},{},{},{}\n",
            f(rep.train_accuracy),
            f(rep.test_accuracy),
            f(rep.train_accuracy - rep.test_accuracy)
        ));
        for plan in &plans {
            let run = run_attack(
                cfg,
                plan,
                &registry,
                &trial.target,
                &trial.pool,
                &trial.graph,
                &trial.targets,
                &trial.truth,
                seed,
            )?;
            let m = metrics(&run.scores)?;
            let mode = plan.config.mode.to_string();
            let stem = format!("{}_{}_r{r}", plan.label, mode);
            out.write(&format!("scores_{stem}.csv"), &run.scores.to_csv())?;
            out.write(&format!("roc_{stem}.csv"), &m.roc.to_csv())?;
            let t = tallies.entry((plan.label.clone(), mode)).or_default();
            t.auc.push(m.auc);
            t.tpr_1pct.push(m.tpr_1pct);
            t.tpr_01pct.push(m.tpr_01pct);
            t.n = run.scores.len();
            if let Some(sel) = run.alpha {
                t.alphas.push(sel.alpha);
            }
        }
    }
    out.write("training.csv", &training)?;

    let mut summary = String::from("attack,mode,auc,tpr_at_1pct,tpr_at_0.1pct,n,k,seed\n");
    let mut text = String::new();
    for ((label, mode), t) in &tallies {
        let (auc, auc_sd) = mean_std(&t.auc);
        let (t1, t1_sd) = mean_std(&t.tpr_1pct);
        let (t01, t01_sd) = mean_std(&t.tpr_01pct);
        summary.push_str(&format!(
            "{label},{mode},{},{},{},{},{},{}\n",
            f(auc),
            f(t1),
            f(t01),
            t.n,
            cfg.shadows,
            cfg.seed
        ));
        text.push_str(&format!(
            "{label} {mode}: auc {auc:.4} ± {auc_sd:.4}, tpr@1% {t1:.4} ± {t1_sd:.4}, tpr@0.1% {t01:.4} ± {t01_sd:.4}"
        ));
        if !t.alphas.is_empty() {
            let alphas: Vec<String> = t.alphas.iter().map(|a| format!("{a:.1}")).collect();
            text.push_str(&format!(", alpha {}", alphas.join("/")));
        }
        text.push('\n');
    }
    out.write("summary.csv", &summary)?;
    out.write("summary.txt", &text)?;
    out.finish(&manifest_base("audit", cfg))?;
    Ok(text.trim_end().to_string())
}
