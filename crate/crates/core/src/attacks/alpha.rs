use super::{audit_model, AttackConfig, AttackRegistry, Mode};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::roc_auc;
use crate::shadow::ShadowPool;
use crate::signals::SignalMode;

/// Candidate offline scaling factors for signal attacks.
pub const ALPHA_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Candidate offline scaling factors for G-BASE.
pub const GBASE_ALPHA_GRID: [f64; 2] = [0.9, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSelection {
    pub alpha: f64,
    pub auc: f64,
    /// `(α, AUC)` for every candidate, in grid order.
    pub trials: Vec<(f64, f64)>,
}

/// Picks the offline `α` with the highest AUC when pool model 0 plays the
/// target and the rest of the pool the shadows. Ties keep the earlier
/// candidate.
pub fn select_alpha(
    registry: &AttackRegistry,
    cfg: &AttackConfig,
    pool: &ShadowPool,
    g: &Graph,
    targets: &[usize],
    signal_mode: SignalMode,
    grid: &[f64],
) -> Result<AlphaSelection> {
    if grid.is_empty() {
        return Err(Error::Empty("alpha grid"));
    }
    if pool.len() < 3 {
        return Err(Error::InsufficientModels(format!(
            "alpha selection needs at least 3 pool models, found {}",
            pool.len()
        )));
    }
    let shadows = pool.without(0);
    let mut trials = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let trial = AttackConfig {
            alpha,
            mode: Mode::Offline,
            ..cfg.clone()
        };
        let s = audit_model(registry, &trial, &pool.models[0], &shadows, g, targets, &pool.membership[0], signal_mode)?;
        trials.push((alpha, roc_auc(&s.scores, &s.members)?.auc));
    }
    let (alpha, auc) = trials
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, t| if t.1 > best.1 { t } else { best });
    Ok(AlphaSelection { alpha, auc, trials })
}
