use rayon::prelude::*;

use super::{log_ratio, Attack, AttackConfig, AttackInput, Mode, ScoreVector};
use crate::error::{Error, Result};
use crate::numeric::{log_mean_exp, prior_log_odds, sigmoid};
use crate::signals::{SignalMatrix, SignalRow};

/// Largest value a probability score may take; keeps scores inside (0, 1)
/// when the log-odds saturate the sigmoid.
const PROB_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

pub(crate) fn clamp_probability(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, PROB_CEIL)
}

/// Posterior membership probability of a sample with target loss `ℓ_t` and
/// shadow losses `ℓ_k`:
///
/// `σ(−ℓ_t − α·log((1/K) Σ_k e^{−ℓ_k}) + log(λ/(1−λ)))`.
pub fn base_score(target_loss: f64, shadow_losses: &[f64], lambda: f64, alpha: f64) -> Result<f64> {
    if shadow_losses.is_empty() {
        return Err(Error::Empty("shadow losses"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda {lambda} not in (0, 1)")));
    }
    let neg: Vec<f64> = shadow_losses.iter().map(|l| -l).collect();
    let log_ratio = -target_loss - alpha * log_mean_exp(&neg);
    Ok(clamp_probability(sigmoid(log_ratio + prior_log_odds(lambda))))
}

/// Mean-confidence ratio `e^{−ℓ_t} / ((1/K) Σ_k e^{−ℓ_k})` over all shadows.
pub fn mca_score(row: &SignalRow<'_>) -> f64 {
    let neg: Vec<f64> = row.shadow_loss.iter().map(|l| -l).collect();
    (-row.target_loss - log_mean_exp(&neg)).exp()
}

/// Per-row log ratio used by BASE, MCA and RMIA, computed in parallel.
pub(crate) fn log_ratios(signal: &SignalMatrix, cfg: &AttackConfig) -> Result<Vec<f64>> {
    if cfg.mode == Mode::Offline && signal.in_bits.iter().any(|b| b.len() != signal.shadow_loss[0].len()) {
        return Err(Error::invalid("offline attack needs in/out bits for every shadow"));
    }
    (0..signal.len())
        .into_par_iter()
        .map(|i| log_ratio(&signal.row(i), cfg))
        .collect()
}

pub(crate) fn score_vector(signal: &SignalMatrix, cfg: &AttackConfig, scores: Vec<f64>, probability: bool) -> ScoreVector {
    ScoreVector {
        sample_ids: signal.sample_ids.clone(),
        members: signal.members.clone(),
        scores,
        method: cfg.method.clone(),
        mode: cfg.mode,
        probability,
    }
}

fn check_signal(signal: &SignalMatrix) -> Result<()> {
    signal.validate()?;
    if signal.is_empty() {
        return Err(Error::Empty("signal matrix"));
    }
    Ok(())
}

/// BASE over every row of `signal`. Online uses all shadows with `α = 1`;
/// offline uses each row's out-models and `cfg.alpha`.
pub fn attack_base(signal: &SignalMatrix, cfg: &AttackConfig) -> Result<ScoreVector> {
    cfg.validate()?;
    check_signal(signal)?;
    let prior = prior_log_odds(cfg.lambda);
    let scores = log_ratios(signal, cfg)?
        .into_iter()
        .map(|r| clamp_probability(sigmoid(r + prior)))
        .collect();
    Ok(score_vector(signal, cfg, scores, true))
}

/// MCA over every row; offline restricts to out-models and applies `α`.
pub fn attack_mca(signal: &SignalMatrix, cfg: &AttackConfig) -> Result<ScoreVector> {
    cfg.validate()?;
    check_signal(signal)?;
    let scores = log_ratios(signal, cfg)?.into_iter().map(f64::exp).collect();
    Ok(score_vector(signal, cfg, scores, false))
}

pub struct BaseAttack;

impl Attack for BaseAttack {
    fn name(&self) -> &'static str {
        "base"
    }

    fn outputs_probability(&self) -> bool {
        true
    }

    fn score(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector> {
        attack_base(input.signals()?, cfg)
    }
}

pub struct McaAttack;

impl Attack for McaAttack {
    fn name(&self) -> &'static str {
        "mca"
    }

    fn score(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector> {
        attack_mca(input.signals()?, cfg)
    }
}
