//! Scalar helpers shared by the models and attacks.

/// Smallest probability fed into a log; keeps losses finite.
pub const PROB_FLOOR: f64 = 1e-30;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// `log Σ exp(x_i)`, `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log((1/K) Σ exp(x_i))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// `log(λ / (1 − λ))`.
pub fn prior_log_odds(lambda: f64) -> f64 {
    lambda.ln() - (1.0 - lambda).ln()
}

/// Softmax of a logit row, written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Population mean and variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Formats with 17 significant digits, which round-trips any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2f64.ln()) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_mean_exp_matches_naive() {
        let xs = [-0.3, 1.2, -4.0, 0.7];
        let naive = (xs.iter().map(|x: &f64| x.exp()).sum::<f64>() / 4.0).ln();
        assert!((log_mean_exp(&xs) - naive).abs() < 1e-14);
        // would overflow without the max shift
        let big = [1000.0, 1000.0];
        assert!((log_mean_exp(&big) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn logit_inverts_sigmoid() {
        for &x in &[-5.0, -0.1, 0.0, 3.3] {
            assert!((logit(sigmoid(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn fmt_round_trips() {
        for &x in &[0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
