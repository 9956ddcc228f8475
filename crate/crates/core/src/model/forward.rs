//! Inference. Every prediction is computed row by row from the rows it
//! depends on, so querying a subset of nodes gives bit-identical values to a
//! whole-graph forward pass.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::{Array2, ArrayView1};

use super::{Arch, Dense, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{Graph, MaskedAdjacency};
use crate::numeric::{softmax_into, PROB_FLOOR};

/// Negative log-likelihood of `label` under a probability row.
pub fn nll_loss(probs: &[f64], label: usize) -> Result<f64> {
    let p = *probs.get(label).ok_or(Error::OutOfRange {
        index: label,
        len: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// `x W + b` for a single row.
fn affine(x: &[f64], layer: &Dense) -> Vec<f64> {
    let mut out = layer.bias.to_vec();
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let w = layer.weight.row(k);
        for (o, &wkj) in out.iter_mut().zip(w.iter()) {
            *o += xk * wkj;
        }
    }
    out
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    v
}

fn softmax(z: Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    softmax_into(&z, &mut out);
    out
}

/// Symmetric-normalized propagation weights of node `u` in `Â = D̃^{-1/2}(A + I)D̃^{-1/2}`:
/// self-loop first, then neighbours in ascending order.
pub(crate) fn propagation_row(adj: &MaskedAdjacency, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let du = (adj.degree(u) + 1) as f64;
    std::iter::once((u, 1.0 / du)).chain(adj.neighbors(u).iter().map(move |&w| {
        let dw = (adj.degree(w) + 1) as f64;
        (w, 1.0 / (du * dw).sqrt())
    }))
}

fn propagate<'a>(
    adj: &MaskedAdjacency,
    u: usize,
    dim: usize,
    row_of: impl Fn(usize) -> ArrayView1<'a, f64>,
) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (w, coef) in propagation_row(adj, u) {
        for (o, &x) in out.iter_mut().zip(row_of(w).iter()) {
            *o += coef * x;
        }
    }
    out
}

fn check_dims(p: &ModelParams, g: &Graph, adj: &MaskedAdjacency) -> Result<()> {
    if p.input_dim() != g.feature_dim() {
        return Err(Error::dim(format!(
            "model expects {} features, graph has {}",
            p.input_dim(),
            g.feature_dim()
        )));
    }
    if p.num_classes() != g.num_classes() {
        return Err(Error::dim(format!(
            "model has {} classes, graph has {}",
            p.num_classes(),
            g.num_classes()
        )));
    }
    if adj.n() != g.n() {
        return Err(Error::dim(format!(
            "adjacency over {} nodes, graph has {}",
            adj.n(),
            g.n()
        )));
    }
    Ok(())
}

/// Probability rows for `nodes`, in the given order.
fn probs_for(p: &ModelParams, g: &Graph, adj: &MaskedAdjacency, nodes: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_dims(p, g, adj)?;
    if let Some(&bad) = nodes.iter().find(|&&v| v >= g.n()) {
        return Err(Error::OutOfRange {
            index: bad,
            len: g.n(),
        });
    }
    let x = g.features();
    let d = g.feature_dim();
    let rows = match p.arch {
        Arch::Linear => nodes
            .iter()
            .map(|&v| softmax(affine(x.row(v).as_slice().unwrap(), &p.layers[0])))
            .collect(),
        Arch::Mlp1 => nodes
            .iter()
            .map(|&v| {
                let hidden = relu(affine(x.row(v).as_slice().unwrap(), &p.layers[0]));
                softmax(affine(&hidden, &p.layers[1]))
            })
            .collect(),
        Arch::Gcn2 => {
            let mut first_hop: BTreeSet<usize> = BTreeSet::new();
            for &v in nodes {
                first_hop.insert(v);
                first_hop.extend(adj.neighbors(v).iter().copied());
            }
            let hidden: HashMap<usize, Vec<f64>> = first_hop
                .into_iter()
                .map(|u| {
                    let h0 = propagate(adj, u, d, |w| x.row(w));
                    (u, relu(affine(&h0, &p.layers[0])))
                })
                .collect();
            let h = p.hidden_dim();
            nodes
                .iter()
                .map(|&v| {
                    let mut agg = vec![0.0; h];
                    for (w, coef) in propagation_row(adj, v) {
                        for (o, &a) in agg.iter_mut().zip(&hidden[&w]) {
                            *o += coef * a;
                        }
                    }
                    softmax(affine(&agg, &p.layers[1]))
                })
                .collect()
        }
    };
    Ok(rows)
}

/// n×c class-probability matrix. Non-GCN architectures ignore `adj`.
pub fn forward(p: &ModelParams, g: &Graph, adj: &MaskedAdjacency) -> Result<Array2<f64>> {
    let nodes: Vec<usize> = (0..g.n()).collect();
    let rows = probs_for(p, g, adj, &nodes)?;
    let c = g.num_classes();
    Ok(Array2::from_shape_vec((g.n(), c), rows.into_iter().flatten().collect())
        .expect("row lengths equal class count"))
}

/// [`forward`] restricted to the two-layer GCN.
pub fn gcn_forward(p: &ModelParams, g: &Graph, adj: &MaskedAdjacency) -> Result<Array2<f64>> {
    if p.arch != Arch::Gcn2 {
        return Err(Error::invalid(format!("gcn_forward called with arch {}", p.arch)));
    }
    forward(p, g, adj)
}

/// Loss of each requested node, computing only the rows those nodes depend on.
pub fn per_node_losses(
    p: &ModelParams,
    g: &Graph,
    adj: &MaskedAdjacency,
    nodes: &BTreeSet<usize>,
) -> Result<BTreeMap<usize, f64>> {
    let list: Vec<usize> = nodes.iter().copied().collect();
    let rows = probs_for(p, g, adj, &list)?;
    list.into_iter()
        .zip(rows)
        .map(|(v, row)| Ok((v, nll_loss(&row, g.labels()[v])?)))
        .collect()
}

/// Fraction of `nodes` whose arg-max prediction equals the label.
pub fn accuracy(p: &ModelParams, g: &Graph, adj: &MaskedAdjacency, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Empty("accuracy node set"));
    }
    let rows = probs_for(p, g, adj, nodes)?;
    let correct = nodes
        .iter()
        .zip(rows)
        .filter(|(&v, row)| {
            let arg = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
                .0;
            arg == g.labels()[v]
        })
        .count();
    Ok(correct as f64 / nodes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{masked_adjacency, MembershipMask};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_graph(n: usize, d: usize, c: usize, p_edge: f64, seed: u64) -> Graph {
        let mut rng = stream_rng(seed, 0);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for w in u + 1..n {
                if rng.random_bool(p_edge) {
                    edges.push((u, w));
                }
            }
        }
        Graph::new(x, y, c, edges).unwrap()
    }

    /// Dense-matrix evaluation of the GCN, independent of the row-wise path.
    fn dense_gcn(p: &ModelParams, g: &Graph, adj: &MaskedAdjacency) -> Array2<f64> {
        let n = g.n();
        let mut a = Array2::<f64>::eye(n);
        for &(u, w) in adj.edges() {
            a[[u, w]] = 1.0;
            a[[w, u]] = 1.0;
        }
        let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
        let norm = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (deg[i] * deg[j]).sqrt());
        let h = norm.dot(g.features()).dot(&p.layers[0].weight) + &p.layers[0].bias;
        let h = h.mapv(|v| v.max(0.0));
        let z = norm.dot(&h).dot(&p.layers[1].weight) + &p.layers[1].bias;
        let mut out = z.clone();
        for (zr, mut or) in z.rows().into_iter().zip(out.rows_mut()) {
            let m = zr.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let s: f64 = zr.iter().map(|v| (v - m).exp()).sum();
            or.iter_mut().zip(zr).for_each(|(o, v)| *o = (v - m).exp() / s);
        }
        out
    }

    #[test]
    fn nll_values() {
        assert_eq!(nll_loss(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert!((nll_loss(&[0.5, 0.5], 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((nll_loss(&[0.25; 4], 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((nll_loss(&[1.0, 0.0], 1).unwrap() - 1e30f64.ln()).abs() < 1e-12);
        assert!(nll_loss(&[1.0], 1).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let g = random_graph(6, 3, 4, 0.4, 1);
        let p = ModelParams::zeros(Arch::Gcn2, 3, 5, 4);
        let probs = gcn_forward(&p, &g, &g.full_adjacency()).unwrap();
        assert!(probs.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn edgeless_gcn_equals_mlp() {
        let g = random_graph(7, 3, 2, 0.5, 2);
        let p = ModelParams::glorot(Arch::Gcn2, 3, 4, 2, 5, 0);
        let mlp = ModelParams {
            arch: Arch::Mlp1,
            ..p.clone()
        };
        let a = gcn_forward(&p, &g, &MaskedAdjacency::edgeless(7)).unwrap();
        let b = forward(&mlp, &g, &g.full_adjacency()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn path_rows_sum_to_one_and_match_dense() {
        let feats = Array2::from_shape_vec((3, 2), vec![0.3, -0.2, 1.1, 0.4, -0.7, 0.9]).unwrap();
        let g = Graph::new(feats, vec![0, 1, 0], 2, [(0, 1), (1, 2)]).unwrap();
        let p = ModelParams::glorot(Arch::Gcn2, 2, 3, 2, 17, 0);
        let probs = gcn_forward(&p, &g, &g.full_adjacency()).unwrap();
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let dense = dense_gcn(&p, &g, &g.full_adjacency());
        assert!(probs.iter().zip(dense.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn dense_oracle_on_random_masked_graphs() {
        for seed in 0..10 {
            let g = random_graph(10, 3, 3, 0.3, seed);
            let p = ModelParams::glorot(Arch::Gcn2, 3, 4, 3, seed, 1);
            let mask = MembershipMask::from_bits((0..10).map(|i| (i * 7 + seed as usize) % 3 != 0).collect());
            let adj = masked_adjacency(&g, &mask).unwrap();
            let probs = gcn_forward(&p, &g, &adj).unwrap();
            let dense = dense_gcn(&p, &g, &adj);
            assert!(probs.iter().zip(dense.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn restricted_losses_equal_full_forward() {
        assert!(per_node_losses(
            &ModelParams::zeros(Arch::Gcn2, 3, 2, 3),
            &random_graph(4, 3, 3, 0.5, 0),
            &MaskedAdjacency::edgeless(4),
            &BTreeSet::new()
        )
        .unwrap()
        .is_empty());
        for seed in 0..10 {
            let g = random_graph(10, 3, 3, 0.35, 100 + seed);
            let p = ModelParams::glorot(Arch::Gcn2, 3, 4, 3, seed, 2);
            let adj = g.full_adjacency();
            let full = forward(&p, &g, &adj).unwrap();
            let nodes: BTreeSet<usize> = [seed as usize % 10, (seed as usize + 3) % 10].into();
            let losses = per_node_losses(&p, &g, &adj, &nodes).unwrap();
            for (&v, &loss) in &losses {
                let row = full.row(v).to_vec();
                let expect = nll_loss(&row, g.labels()[v]).unwrap();
                assert!((loss - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isolated_query_equals_iid_loss() {
        let g = random_graph(5, 2, 2, 0.8, 3);
        let p = ModelParams::glorot(Arch::Gcn2, 2, 3, 2, 1, 0);
        let mlp = ModelParams {
            arch: Arch::Mlp1,
            ..p.clone()
        };
        let nodes = BTreeSet::from([2]);
        let a = per_node_losses(&p, &g, &MaskedAdjacency::edgeless(5), &nodes).unwrap();
        let b = per_node_losses(&mlp, &g, &g.full_adjacency(), &nodes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_errors() {
        let g = random_graph(4, 3, 2, 0.5, 0);
        let p = ModelParams::zeros(Arch::Gcn2, 2, 2, 2);
        assert!(forward(&p, &g, &g.full_adjacency()).is_err());
        let lin = ModelParams::zeros(Arch::Linear, 3, 2, 2);
        assert!(gcn_forward(&lin, &g, &g.full_adjacency()).is_err());
        assert!(forward(&lin, &g, &MaskedAdjacency::edgeless(3)).is_err());
    }
}
