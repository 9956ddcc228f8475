//! Full-batch gradient descent with manual backpropagation.
//!
//! Training is inductive: the GCN only passes messages along edges whose both
//! endpoints are training members, so the computation is carried out on the
//! induced subgraph of the members alone.

use std::collections::HashMap;

use ndarray::{Array2, Axis};

use super::forward::propagation_row;
use super::{Arch, Dense, ModelParams, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{masked_adjacency, Graph, MembershipMask};
use crate::numeric::{softmax_into, PROB_FLOOR};

/// Same layout as [`ModelParams::layers`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Dense>,
}

impl Gradient {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

/// Row-sparse `Â` over local indices.
struct SparseRows(Vec<Vec<(usize, f64)>>);

impl SparseRows {
    fn mul(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.0.len(), m.ncols()));
        for (i, row) in self.0.iter().enumerate() {
            let mut o = out.row_mut(i);
            for &(j, coef) in row {
                o.scaled_add(coef, &m.row(j));
            }
        }
        out
    }
}

/// Mean training loss over the members plus `weight_decay / 2 · ‖W‖²`.
struct Objective {
    arch: Arch,
    /// `Â X` for the GCN, `X` otherwise; rows are the members.
    inputs: Array2<f64>,
    prop: Option<SparseRows>,
    labels: Vec<usize>,
    weight_decay: f64,
}

impl Objective {
    fn new(arch: Arch, g: &Graph, members: &MembershipMask, weight_decay: f64) -> Result<Self> {
        if members.len() != g.n() {
            return Err(Error::dim("training mask length differs from node count"));
        }
        let nodes: Vec<usize> = members.members().collect();
        if nodes.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let x = g.features().select(Axis(0), &nodes);
        let labels = nodes.iter().map(|&v| g.labels()[v]).collect();
        let (inputs, prop) = if arch.uses_graph() {
            let adj = masked_adjacency(g, members)?;
            let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let rows = nodes
                .iter()
                .map(|&v| propagation_row(&adj, v).map(|(w, c)| (local[&w], c)).collect())
                .collect();
            let prop = SparseRows(rows);
            (prop.mul(&x), Some(prop))
        } else {
            (x, None)
        };
        Ok(Self {
            arch,
            inputs,
            prop,
            labels,
            weight_decay,
        })
    }

    fn check(&self, p: &ModelParams) -> Result<()> {
        if p.arch != self.arch {
            return Err(Error::invalid(format!("expected arch {}, got {}", self.arch, p.arch)));
        }
        if p.input_dim() != self.inputs.ncols() {
            return Err(Error::dim("parameter input dimension differs from features"));
        }
        Ok(())
    }

    /// Returns `∂loss/∂logits` and adds the data loss.
    fn output_grad(&self, logits: &Array2<f64>, loss: &mut f64) -> Array2<f64> {
        let n = logits.nrows() as f64;
        let mut grad = Array2::zeros(logits.raw_dim());
        let mut probs = vec![0.0; logits.ncols()];
        for (i, z) in logits.rows().into_iter().enumerate() {
            softmax_into(z.as_slice().unwrap(), &mut probs);
            let y = self.labels[i];
            *loss += -probs[y].max(PROB_FLOOR).ln() / n;
            let mut g = grad.row_mut(i);
            for (j, &pj) in probs.iter().enumerate() {
                g[j] = (pj - if j == y { 1.0 } else { 0.0 }) / n;
            }
        }
        grad
    }

    fn dense_grad(&self, input: &Array2<f64>, upstream: &Array2<f64>, layer: &Dense) -> Dense {
        let mut weight = input.t().dot(upstream);
        weight.scaled_add(self.weight_decay, &layer.weight);
        Dense {
            weight,
            bias: upstream.sum_axis(Axis(0)),
        }
    }

    fn eval(&self, p: &ModelParams) -> (f64, Gradient) {
        let affine = |x: &Array2<f64>, l: &Dense| x.dot(&l.weight) + &l.bias;
        let mut loss = 0.5
            * self.weight_decay
            * p.layers
                .iter()
                .map(|l| l.weight.iter().map(|w| w * w).sum::<f64>())
                .sum::<f64>();
        let layers = match self.arch {
            Arch::Linear => {
                let logits = affine(&self.inputs, &p.layers[0]);
                let d_out = self.output_grad(&logits, &mut loss);
                vec![self.dense_grad(&self.inputs, &d_out, &p.layers[0])]
            }
            Arch::Mlp1 | Arch::Gcn2 => {
                let pre = affine(&self.inputs, &p.layers[0]);
                let hidden = pre.mapv(|v| v.max(0.0));
                let agg = match &self.prop {
                    Some(prop) => prop.mul(&hidden),
                    None => hidden,
                };
                let logits = affine(&agg, &p.layers[1]);
                let d_out = self.output_grad(&logits, &mut loss);
                let g1 = self.dense_grad(&agg, &d_out, &p.layers[1]);
                let d_agg = d_out.dot(&p.layers[1].weight.t());
                // Â is symmetric, so Âᵀ = Â.
                let d_hidden = match &self.prop {
                    Some(prop) => prop.mul(&d_agg),
                    None => d_agg,
                };
                let mut d_pre = d_hidden;
                d_pre.zip_mut_with(&pre, |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                let g0 = self.dense_grad(&self.inputs, &d_pre, &p.layers[0]);
                vec![g0, g1]
            }
        };
        (loss, Gradient { layers })
    }
}

/// Training objective and its analytic gradient at `p`.
pub fn loss_and_gradient(
    p: &ModelParams,
    g: &Graph,
    members: &MembershipMask,
    weight_decay: f64,
) -> Result<(f64, Gradient)> {
    let obj = Objective::new(p.arch, g, members, weight_decay)?;
    obj.check(p)?;
    Ok(obj.eval(p))
}

/// Trains a fresh model on the members of `train_mask`.
pub fn train(arch: Arch, g: &Graph, train_mask: &MembershipMask, cfg: &TrainConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let obj = Objective::new(arch, g, train_mask, cfg.weight_decay)?;
    let mut params = ModelParams::glorot(arch, g.feature_dim(), cfg.hidden, g.num_classes(), cfg.seed, 0);
    for _ in 0..cfg.epochs {
        let (_, grad) = obj.eval(&params);
        for (l, gl) in params.layers.iter_mut().zip(&grad.layers) {
            l.weight.scaled_add(-cfg.lr, &gl.weight);
            l.bias.scaled_add(-cfg.lr, &gl.bias);
        }
    }
    if !params.is_finite() {
        return Err(Error::invalid("training diverged to non-finite parameters"));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{accuracy, forward, nll_loss};
    use crate::rng::stream_rng;
    use crate::synth::{gen_iid_dataset, gen_sbm_graph, SbmSpec};
    use rand::Rng;

    fn small_graph(seed: u64) -> Graph {
        gen_sbm_graph(&SbmSpec {
            n: 12,
            num_classes: 3,
            p_in: 0.5,
            p_out: 0.1,
            dim: 4,
            radius: 1.0,
            noise: 0.7,
            seed,
        })
        .unwrap()
    }

    fn finite_difference_check(arch: Arch) {
        let g = small_graph(3);
        let members = MembershipMask::from_bits((0..12).map(|v| v % 4 != 1).collect());
        let mut rng = stream_rng(99, arch as u64);
        for point in 0..10 {
            let base = ModelParams::zeros(arch, 4, 5, 3);
            let flat: Vec<f64> = (0..base.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = base.from_flat(&flat).unwrap();
            let (_, grad) = loss_and_gradient(&p, &g, &members, 0.01).unwrap();
            let analytic = grad.to_flat();
            let h = 1e-5;
            let numeric: Vec<f64> = (0..flat.len())
                .map(|i| {
                    let mut up = flat.clone();
                    up[i] += h;
                    let mut down = flat.clone();
                    down[i] -= h;
                    let lu = loss_and_gradient(&p.from_flat(&up).unwrap(), &g, &members, 0.01).unwrap().0;
                    let ld = loss_and_gradient(&p.from_flat(&down).unwrap(), &g, &members, 0.01).unwrap().0;
                    (lu - ld) / (2.0 * h)
                })
                .collect();
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            assert!(diff / scale < 1e-4, "{arch} point {point}: rel err {}", diff / scale);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_difference_check(Arch::Gcn2);
        finite_difference_check(Arch::Mlp1);
        finite_difference_check(Arch::Linear);
    }

    #[test]
    fn objective_matches_forward_losses() {
        let g = small_graph(5);
        let members = MembershipMask::from_bits((0..12).map(|v| v < 8).collect());
        let p = ModelParams::glorot(Arch::Gcn2, 4, 6, 3, 2, 0);
        let (loss, _) = loss_and_gradient(&p, &g, &members, 0.0).unwrap();
        let adj = masked_adjacency(&g, &members).unwrap();
        let probs = forward(&p, &g, &adj).unwrap();
        let expect: f64 = (0..8)
            .map(|v| nll_loss(&probs.row(v).to_vec(), g.labels()[v]).unwrap())
            .sum::<f64>()
            / 8.0;
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let g = small_graph(1);
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 1,
            hidden: 5,
            seed: 4,
            ..TrainConfig::default()
        };
        let p = train(Arch::Gcn2, &g, &MembershipMask::ones(12), &cfg).unwrap();
        assert_eq!(p, ModelParams::glorot(Arch::Gcn2, 4, 5, 3, 4, 0));
    }

    #[test]
    fn training_is_deterministic_and_rejects_empty_sets() {
        let g = small_graph(2);
        let cfg = TrainConfig {
            epochs: 20,
            hidden: 4,
            ..TrainConfig::default()
        };
        let m = MembershipMask::from_bits((0..12).map(|v| v % 2 == 0).collect());
        let a = train(Arch::Gcn2, &g, &m, &cfg).unwrap();
        let b = train(Arch::Gcn2, &g, &m, &cfg).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert!(matches!(
            train(Arch::Gcn2, &g, &MembershipMask::zeros(12), &cfg),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn separable_iid_data_is_fit() {
        let g = gen_iid_dataset(&SbmSpec {
            n: 200,
            num_classes: 2,
            p_in: 0.0,
            p_out: 0.0,
            dim: 5,
            radius: 3.0,
            noise: 0.5,
            seed: 8,
        })
        .unwrap();
        let cfg = TrainConfig {
            lr: 0.5,
            epochs: 500,
            hidden: 8,
            ..TrainConfig::default()
        };
        for arch in [Arch::Linear, Arch::Mlp1] {
            let p = train(arch, &g, &MembershipMask::ones(200), &cfg).unwrap();
            let nodes: Vec<usize> = (0..200).collect();
            let acc = accuracy(&p, &g, &g.full_adjacency(), &nodes).unwrap();
            assert!(acc >= 0.95, "{arch}: {acc}");
        }
    }
}
