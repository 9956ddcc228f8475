use rand::Rng;

use super::SamplerConfig;
use crate::attacks::base_score;
use crate::error::{Error, Result};
use crate::graph::MembershipMask;
use crate::rng::StreamRng;
use crate::signals::SignalMatrix;

/// Independent `Bernoulli(λ)` bits for every node but `target`.
pub fn sample_model_independent(
    cfg: &SamplerConfig,
    n: usize,
    target: usize,
    rng: &mut StreamRng,
) -> Result<MembershipMask> {
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(Error::invalid(format!("lambda {} is not a probability", cfg.lambda)));
    }
    if target >= n {
        return Err(Error::OutOfRange { index: target, len: n });
    }
    let bits = (0..n)
        .map(|u| u != target && rng.random_bool(cfg.lambda))
        .collect();
    Ok(MembershipMask::from_bits(bits))
}

/// Independent bits with per-node probabilities from a 0-hop attack.
pub fn sample_zero_hop_mia(
    cfg: &SamplerConfig,
    target: usize,
    node_probs: &[f64],
    rng: &mut StreamRng,
) -> Result<Vec<MembershipMask>> {
    if target >= node_probs.len() {
        return Err(Error::OutOfRange {
            index: target,
            len: node_probs.len(),
        });
    }
    if let Some(bad) = node_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("membership probability {bad} out of range")));
    }
    Ok((0..cfg.samples)
        .map(|_| {
            let bits = node_probs
                .iter()
                .enumerate()
                .map(|(u, &p)| u != target && rng.random_bool(p))
                .collect();
            MembershipMask::from_bits(bits)
        })
        .collect())
}

/// Online BASE probability for every node, from 0-hop signals covering all
/// `n` nodes.
pub fn membership_probs_from_signals(signal: &SignalMatrix, n: usize, lambda: f64) -> Result<Vec<f64>> {
    let mut probs = vec![f64::NAN; n];
    for i in 0..signal.len() {
        let v = signal.sample_ids[i];
        if v >= n {
            return Err(Error::OutOfRange { index: v, len: n });
        }
        let row = signal.row(i);
        probs[v] = base_score(row.target_loss, row.shadow_loss, lambda, 1.0)?;
    }
    if let Some(v) = probs.iter().position(|p| p.is_nan()) {
        return Err(Error::invalid(format!("signals do not cover node {v}")));
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn degenerate_lambdas() {
        let mut rng = stream_rng(1, 0);
        let ones = SamplerConfig {
            lambda: 1.0,
            ..SamplerConfig::default()
        };
        let m = sample_model_independent(&ones, 6, 2, &mut rng).unwrap();
        assert_eq!(m.to_bit_string(), "110111");
        let zeros = SamplerConfig {
            lambda: 0.0,
            ..SamplerConfig::default()
        };
        assert_eq!(sample_model_independent(&zeros, 6, 2, &mut rng).unwrap().count(), 0);
    }

    #[test]
    fn half_lambda_count_within_three_sigma() {
        let mut rng = stream_rng(2, 0);
        let m = sample_model_independent(&SamplerConfig::default(), 10_001, 0, &mut rng).unwrap();
        let sd = (10_000.0f64 * 0.25).sqrt();
        assert!((m.count() as f64 - 5000.0).abs() < 3.0 * sd);
        assert!(!m.get(0));
    }

    #[test]
    fn zero_hop_probabilities() {
        let mut rng = stream_rng(3, 0);
        let cfg = SamplerConfig {
            samples: 4,
            ..SamplerConfig::default()
        };
        let masks = sample_zero_hop_mia(&cfg, 1, &[1.0; 5], &mut rng).unwrap();
        assert!(masks.iter().all(|m| m.to_bit_string() == "10111"));

        let many = SamplerConfig {
            samples: 2000,
            ..SamplerConfig::default()
        };
        let masks = sample_zero_hop_mia(&many, 0, &[0.5; 6], &mut rng).unwrap();
        let ones: usize = masks.iter().map(MembershipMask::count).sum();
        let trials = 2000.0 * 5.0;
        assert!((ones as f64 - trials / 2.0).abs() < 3.0 * (trials * 0.25f64).sqrt());
        assert!(masks.iter().all(|m| !m.get(0)));
    }
}
