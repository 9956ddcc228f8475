use rayon::prelude::*;

use super::base::{log_ratios, score_vector};
use super::{Attack, AttackConfig, AttackInput, ScoreVector};
use crate::error::{Error, Result};
use crate::signals::SignalMatrix;

/// Pairwise likelihood-ratio attack:
/// `score_i = |{ j ∈ Z : mca_i / mca_j ≥ γ }| / |Z|`.
///
/// The comparison is carried out on log ratios, so `γ = 0` counts every
/// reference sample. `cfg.population` selects `Z` by row index and defaults
/// to all rows.
pub fn attack_rmia(signal: &SignalMatrix, cfg: &AttackConfig) -> Result<ScoreVector> {
    cfg.validate()?;
    signal.validate()?;
    if signal.is_empty() {
        return Err(Error::Empty("signal matrix"));
    }
    let logs = log_ratios(signal, cfg)?;
    let mut reference: Vec<f64> = match &cfg.population {
        None => logs.clone(),
        Some(z) => {
            if let Some(&bad) = z.iter().find(|&&j| j >= logs.len()) {
                return Err(Error::OutOfRange { index: bad, len: logs.len() });
            }
            z.iter().map(|&j| logs[j]).collect()
        }
    };
    if reference.is_empty() {
        return Err(Error::Empty("RMIA population"));
    }
    reference.sort_by(f64::total_cmp);
    let log_gamma = cfg.gamma.ln();
    let z = reference.len() as f64;
    let scores = logs
        .par_iter()
        .map(|&li| {
            // `li − x ≥ ln γ` holds for a prefix of the ascending references.
            reference.partition_point(|&x| li - x >= log_gamma) as f64 / z
        })
        .collect();
    Ok(score_vector(signal, cfg, scores, false))
}

pub struct RmiaAttack;

impl Attack for RmiaAttack {
    fn name(&self) -> &'static str {
        "rmia"
    }

    fn score(&self, input: &AttackInput<'_>, cfg: &AttackConfig) -> Result<ScoreVector> {
        attack_rmia(input.signals()?, cfg)
    }
}
