use rayon::prelude::*;

use super::base::score_vector;
use super::{Attack, AttackConfig, AttackInput, Mode, ScoreVector};
use crate::error::{Error, Result};
use crate::numeric::{logit, mean_var};
use crate::signals::{SignalMatrix, SignalRow};

const CONF_MIN: f64 = 1e-12;
const CONF_MAX: f64 = 1.0 - 1e-7;

/// Logit-scaled confidence of a loss: `φ(clamp(e^{−ℓ}))`.
pub(crate) fn scaled_confidence(loss: f64) -> f64 {
    logit((-loss).exp().clamp(CONF_MIN, CONF_MAX))
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

fn gaussian(losses: &[f64], floor: f64) -> (f64, f64) {
    let phis: Vec<f64> = losses.iter().map(|&l| scaled_confidence(l)).collect();
    let (mean, var) = mean_var(&phis);
    (mean, var.max(floor))
}

fn lira_row(row: &SignalRow<'_>, cfg: &AttackConfig) -> Result<f64> {
    if row.in_bits.len() != row.shadow_loss.len() {
        return Err(Error::invalid("LiRA needs in/out bits for every shadow"));
    }
    let outs = row.out_losses();
    let phi = scaled_confidence(row.target_loss);
    if outs.len() < 2 {
        return Err(Error::InsufficientModels(format!(
            "LiRA needs at least 2 out models per sample, found {}",
            outs.len()
        )));
    }
    let (mu_out, var_out) = gaussian(&outs, cfg.lira_variance_floor);
    match cfg.mode {
        Mode::Online => {
            let ins = row.in_losses();
            if ins.len() < 2 {
                return Err(Error::InsufficientModels(format!(
                    "online LiRA needs at least 2 in models per sample, found {}",
                    ins.len()
                )));
            }
            let (mu_in, var_in) = gaussian(&ins, cfg.lira_variance_floor);
            Ok(log_normal_pdf(phi, mu_in, var_in) - log_normal_pdf(phi, mu_out, var_out))
        }
        // Members sit above the out distribution, so the standardized
        // deviation is used with a positive sign.
        Mode::Offline => Ok((phi - mu_out) / var_out.sqrt()),
    }
}

/// Gaussian likelihood-ratio attack on logit-scaled confidences.
pub fn attack_lira(signal: &SignalMatrix, cfg: &AttackConfig) -> Result<ScoreVector> {
    cfg.validate()?;
    signal.validate()?;
    if signal.is_empty() {
        return Err(Error::Empty("signal matrix"));
    }
    let scores = (0..signal.len())
        .into_par_iter()
        .map(|i| lira_row(&signal.row(i), cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(score_vector(signal, cfg, scores, false))
}

pub struct LiraAttack;

impl Attack for LiraAttack {
    fn name(&self) -> &'static str {
        "lira"
    }

    fn uses_alpha(&self) -> bool {
        false
    }

    fn score(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector> {
        attack_lira(input.signals()?, cfg)
    }
}
