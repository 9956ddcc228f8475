use mia_core::attacks::{select_alpha, AttackRegistry};
use mia_core::metrics::{estimate_threshold, rate_above, ThresholdSetup};

use crate::config::Config;
use crate::error::CliError;
use crate::output::OutDir;
use crate::pipeline::{alpha_grid, build_graph, challenger_split, evaluation_targets, run_attack, train_pool, train_target};

use super::{f, manifest_base};

/// Realized rates of a fixed threshold on one fresh target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Realized {
    pub fpr: f64,
    pub tpr: f64,
}

/// Estimates decision thresholds on simulated targets drawn from the shadow
/// pool, then applies them to freshly trained targets.
pub fn threshold(cfg: &Config) -> Result<String, CliError> {
    let plans = cfg.attack_plans()?;
    if plans.is_empty() {
        return Err(CliError::Config("threshold needs at least one [attack.NAME] section".into()));
    }
    let th = &cfg.threshold;
    if th.simulated > cfg.shadows {
        return Err(CliError::Config(format!(
            "[threshold] simulated = {} exceeds shadows = {}",
            th.simulated, cfg.shadows
        )));
    }
    let registry = AttackRegistry::default();
    let seed = cfg.seed;
    let graph = build_graph(cfg, seed)?;
    let pool = train_pool(cfg, &graph, seed)?;
    let all: Vec<usize> = (0..graph.n()).collect();

    let fresh: Vec<_> = (0..th.fresh)
        .map(|j| {
            let truth = challenger_split(graph.n(), cfg.train_fraction, seed, 1 + j as u64);
            let fresh_seed = mia_core::rng::sub_stream(seed, 1000 + j as u64);
            let model = train_target(cfg, &graph, &truth, fresh_seed)?;
            let targets = evaluation_targets(&truth, fresh_seed);
            Ok((truth, model, targets, fresh_seed))
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = OutDir::create(&cfg.out)?;
    let mut summary = String::from(
        "attack,mode,target_fpr,mean_threshold,max_threshold,realized_fpr_mean,realized_tpr_mean,realized_fpr_max,realized_tpr_max\n",
    );
    let mut detail = String::from("attack,mode,fresh,rule,threshold,fpr,tpr\n");
    let mut per_target = String::from("attack,mode,simulated,threshold\n");
    let mut text = String::new();
    for plan in &plans {
        let mut ac = plan.config.clone();
        if plan.auto_alpha {
            let grid = alpha_grid(&registry, &ac.method)?;
            ac.alpha = select_alpha(&registry, &ac, &pool, &graph, &all, cfg.signal_mode()?, grid)?.alpha;
        }
        let setup = ThresholdSetup {
            pool: &pool,
            graph: &graph,
            targets: &all,
            signal_mode: cfg.signal_mode()?,
        };
        let est = estimate_threshold(&setup, &registry, &ac, th.target_fpr, th.simulated)?;
        let mode = ac.mode.to_string();
        for (i, t) in est.thresholds.iter().enumerate() {
            per_target.push_str(&format!("{},{mode},{i},{}\n", plan.label, f(*t)));
        }
        let fixed = crate::config::AttackPlan {
            config: ac.clone(),
            auto_alpha: false,
            ..plan.clone()
        };
        let mut mean_rates = Vec::new();
        let mut max_rates = Vec::new();
        for (j, (truth, model, targets, fresh_seed)) in fresh.iter().enumerate() {
            let run = run_attack(cfg, &fixed, &registry, model, &pool, &graph, targets, truth, *fresh_seed)?;
            for (rule, tau, acc) in [("mean", est.mean, &mut mean_rates), ("max", est.max, &mut max_rates)] {
                let r = Realized {
                    fpr: rate_above(&run.scores.scores, &run.scores.members, false, tau)?,
                    tpr: rate_above(&run.scores.scores, &run.scores.members, true, tau)?,
                };
                detail.push_str(&format!("{},{mode},{j},{rule},{},{},{}\n", plan.label, f(tau), f(r.fpr), f(r.tpr)));
                acc.push(r);
            }
        }
        let avg = |rs: &[Realized]| {
            let n = rs.len() as f64;
            (rs.iter().map(|r| r.fpr).sum::<f64>() / n, rs.iter().map(|r| r.tpr).sum::<f64>() / n)
        };
        let (mf, mt) = avg(&mean_rates);
        let (xf, xt) = avg(&max_rates);
        summary.push_str(&format!(
            "{},{mode},{},{},{},{},{},{},{}\n",
            plan.label,
            f(th.target_fpr),
            f(est.mean),
            f(est.max),
            f(mf),
            f(mt),
            f(xf),
            f(xt)
        ));
        text.push_str(&format!(
            "{} {mode}: target fpr {:.4}, mean threshold {:.6} -> fpr {mf:.4} tpr {mt:.4}; max threshold {:.6} -> fpr {xf:.4} tpr {xt:.4}\n",
            plan.label, th.target_fpr, est.mean, est.max
        ));
    }
    out.write("threshold_summary.csv", &summary)?;
    out.write("threshold_fresh.csv", &detail)?;
    out.write("threshold_simulated.csv", &per_target)?;
    out.write("threshold.txt", &text)?;
    out.finish(&manifest_base("threshold", cfg))?;
    Ok(text.trim_end().to_string())
}
