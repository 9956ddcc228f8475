//! Seeded synthetic populations: stochastic block model graphs and i.i.d.
//! Gaussian-mixture datasets.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::stream_rng;

const EDGE_STREAM: u64 = 1;
const FEATURE_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SbmSpec {
    pub n: usize,
    pub num_classes: usize,
    /// Edge probability within a class.
    pub p_in: f64,
    /// Edge probability across classes.
    pub p_out: f64,
    pub dim: usize,
    /// Class `k` has mean `radius · e_k`.
    pub radius: f64,
    /// Per-coordinate Gaussian noise standard deviation.
    pub noise: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} is not a probability")));
            }
        }
        if self.num_classes == 0 || self.n == 0 || self.n % self.num_classes != 0 {
            return Err(Error::invalid(format!(
                "n = {} must be a positive multiple of num_classes = {}",
                self.n, self.num_classes
            )));
        }
        if self.dim < self.num_classes {
            return Err(Error::invalid(format!(
                "dim = {} is smaller than num_classes = {}",
                self.dim, self.num_classes
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.radius.is_finite()) {
            return Err(Error::invalid("noise must be finite and non-negative"));
        }
        Ok(())
    }

    fn labels(&self) -> Vec<usize> {
        (0..self.n).map(|v| v % self.num_classes).collect()
    }

    fn features(&self, labels: &[usize]) -> Array2<f64> {
        let mut rng = stream_rng(self.seed, FEATURE_STREAM);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut x = Array2::zeros((self.n, self.dim));
        for (v, &y) in labels.iter().enumerate() {
            for j in 0..self.dim {
                let mean = if j == y { self.radius } else { 0.0 };
                x[[v, j]] = mean + self.noise * normal.sample(&mut rng);
            }
        }
        x
    }
}

/// Stochastic block model with one block per class.
pub fn gen_sbm_graph(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let labels = spec.labels();
    let features = spec.features(&labels);
    let mut rng = stream_rng(spec.seed, EDGE_STREAM);
    let mut edges = Vec::new();
    for u in 0..spec.n {
        for w in (u + 1)..spec.n {
            let p = if labels[u] == labels[w] {
                spec.p_in
            } else {
                spec.p_out
            };
            // random_bool panics outside [0, 1]; validated above
            if rng.random_bool(p) {
                edges.push((u, w));
            }
        }
    }
    Graph::new(features, labels, spec.num_classes, edges)
}

/// Same features and labels as [`gen_sbm_graph`], with no edges.
pub fn gen_iid_dataset(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let labels = spec.labels();
    let features = spec.features(&labels);
    Graph::new(features, labels, spec.num_classes, [])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, p_in: f64, p_out: f64, seed: u64) -> SbmSpec {
        SbmSpec {
            n,
            num_classes: 2,
            p_in,
            p_out,
            dim: 4,
            radius: 2.0,
            noise: 0.5,
            seed,
        }
    }

    #[test]
    fn extreme_probabilities() {
        assert!(gen_sbm_graph(&spec(10, 0.0, 0.0, 1)).unwrap().edges().is_empty());
        let full = gen_sbm_graph(&spec(10, 1.0, 1.0, 1)).unwrap();
        assert_eq!(full.edges().len(), 45);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_sbm_graph(&spec(40, 0.3, 0.02, 7)).unwrap();
        let b = gen_sbm_graph(&spec(40, 0.3, 0.02, 7)).unwrap();
        let c = gen_sbm_graph(&spec(40, 0.3, 0.02, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn iid_dataset_shares_features_and_is_balanced() {
        let s = spec(40, 0.3, 0.02, 7);
        let iid = gen_iid_dataset(&s).unwrap();
        assert!(iid.edges().is_empty());
        assert_eq!(iid.features(), gen_sbm_graph(&s).unwrap().features());
        let ones = iid.labels().iter().filter(|&&y| y == 1).count();
        assert_eq!(ones, 20);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(gen_sbm_graph(&spec(10, 1.5, 0.0, 1)).is_err());
        assert!(gen_sbm_graph(&spec(11, 0.5, 0.0, 1)).is_err());
        let mut s = spec(10, 0.5, 0.0, 1);
        s.dim = 1;
        assert!(gen_iid_dataset(&s).is_err());
    }

    #[test]
    fn edge_densities_within_three_sigma() {
        let s = SbmSpec {
            n: 300,
            num_classes: 3,
            p_in: 0.1,
            p_out: 0.01,
            dim: 3,
            radius: 1.0,
            noise: 1.0,
            seed: 11,
        };
        let g = gen_sbm_graph(&s).unwrap();
        let y = g.labels();
        let intra_pairs = 3 * (100 * 99 / 2);
        let inter_pairs = 300 * 299 / 2 - intra_pairs;
        let intra = g.edges().iter().filter(|(u, w)| y[*u] == y[*w]).count();
        let inter = g.edges().len() - intra;
        for (count, pairs, p) in [(intra, intra_pairs, s.p_in), (inter, inter_pairs, s.p_out)] {
            let mean = pairs as f64 * p;
            let sd = (pairs as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - mean).abs() < 3.0 * sd, "{count} vs {mean} ± {sd}");
        }
    }
}
