//! Graphs, membership masks and masked adjacencies.
//!
//! Node indices never change under masking: a masked adjacency has the same
//! node count as its source graph, only the edge set shrinks.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::numeric::fmt_f64;

/// Undirected, self-loop-free node-classification graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    /// Sorted, deduplicated, each pair stored as `(min, max)`.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, symmetrizing and deduplicating `edges`.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::dim(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} not below class count {num_classes}"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        let mut set = BTreeSet::new();
        for (u, w) in edges {
            if u >= n || w >= n {
                return Err(Error::OutOfRange {
                    index: u.max(w),
                    len: n,
                });
            }
            if u == w {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            set.insert((u.min(w), u.max(w)));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            edges: set.into_iter().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Same nodes, no edges.
    pub fn without_edges(&self) -> Graph {
        Graph {
            features: self.features.clone(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            edges: Vec::new(),
        }
    }

    /// The adjacency of the whole graph (every node a member).
    pub fn full_adjacency(&self) -> MaskedAdjacency {
        MaskedAdjacency::from_sorted(
            self.n(),
            self.edges.clone(),
            MembershipMask::ones(self.n()),
        )
    }

    /// Serializes in the line-oriented text format:
    /// `n d c`, n feature rows, one label row, then one `u w` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.n(), self.feature_dim(), self.num_classes);
        for row in self.features.rows() {
            let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        let labels: Vec<String> = self.labels.iter().map(|y| y.to_string()).collect();
        s.push_str(&labels.join(" "));
        s.push('\n');
        for &(u, w) in &self.edges {
            let _ = writeln!(s, "{u} {w}");
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let head: Vec<usize> = parse_fields(ln, header)?;
        let [n, d, c] = head[..] else {
            return Err(Error::parse(ln, "header must be `n d c`"));
        };
        let mut features = Array2::zeros((n, d));
        for v in 0..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(ln + v + 1, "missing feature row"))?;
            let row: Vec<f64> = parse_fields(ln, line)?;
            if row.len() != d {
                return Err(Error::parse(ln, format!("expected {d} features, got {}", row.len())));
            }
            for (j, x) in row.into_iter().enumerate() {
                features[[v, j]] = x;
            }
        }
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(n + 2, "missing label row"))?;
        let labels: Vec<usize> = parse_fields(ln, line)?;
        if labels.len() != n {
            return Err(Error::parse(ln, format!("expected {n} labels, got {}", labels.len())));
        }
        let mut edges = Vec::new();
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let pair: Vec<usize> = parse_fields(ln, line)?;
            let [u, w] = pair[..] else {
                return Err(Error::parse(ln, "edge line must be `u w`"));
            };
            edges.push((u, w));
        }
        Graph::new(features, labels, c, edges)
    }
}

fn parse_fields<T: std::str::FromStr>(line_no: usize, line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::parse(line_no, format!("cannot parse `{tok}`")))
        })
        .collect()
}

/// One membership bit per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MembershipMask {
    bits: Vec<bool>,
}

impl MembershipMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// Mask with exactly the listed nodes set.
    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::zeros(n);
        for v in members {
            m.bits[v] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, v: usize) -> bool {
        self.bits[v]
    }

    pub fn set(&mut self, v: usize, value: bool) {
        self.bits[v] = value;
    }

    pub fn flip(&mut self, v: usize) {
        self.bits[v] = !self.bits[v];
    }

    pub fn with(&self, v: usize, value: bool) -> Self {
        let mut m = self.clone();
        m.bits[v] = value;
        m
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// `0/1` string, one character per node.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse(1, format!("invalid mask character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// Edge set of the subgraph induced by a mask, plus neighbour lists.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedAdjacency {
    n: usize,
    edges: Vec<(usize, usize)>,
    mask: MembershipMask,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl MaskedAdjacency {
    fn from_sorted(n: usize, edges: Vec<(usize, usize)>, mask: MembershipMask) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, w) in &edges {
            degree[u] += 1;
            degree[w] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, w) in &edges {
            neighbors[fill[u]] = w;
            fill[u] += 1;
            neighbors[fill[w]] = u;
            fill[w] += 1;
        }
        for u in 0..n {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Self {
            n,
            edges,
            mask,
            offsets,
            neighbors,
        }
    }

    /// No edges at all; every node is its own component.
    pub fn edgeless(n: usize) -> Self {
        Self::from_sorted(n, Vec::new(), MembershipMask::ones(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn source_mask(&self) -> &MembershipMask {
        &self.mask
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Removes every edge incident to `v`.
    pub fn drop_node(&self, v: usize) -> Result<MaskedAdjacency> {
        if v >= self.n {
            return Err(Error::OutOfRange {
                index: v,
                len: self.n,
            });
        }
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|&(u, w)| u != v && w != v)
            .collect();
        Ok(Self::from_sorted(self.n, edges, self.mask.with(v, false)))
    }

    /// Nodes at hop distance `1..=depth` from `v`, excluding `v`.
    pub fn l_hop_neighborhood(&self, v: usize, depth: usize) -> Result<BTreeSet<usize>> {
        if v >= self.n {
            return Err(Error::OutOfRange {
                index: v,
                len: self.n,
            });
        }
        if depth == 0 {
            return Err(Error::invalid("neighbourhood depth must be at least 1"));
        }
        let mut seen = BTreeSet::from([v]);
        let mut frontier = vec![v];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in self.neighbors(u) {
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen.remove(&v);
        Ok(seen)
    }
}

/// Adjacency of the subgraph induced by the members of `mask`.
pub fn masked_adjacency(g: &Graph, mask: &MembershipMask) -> Result<MaskedAdjacency> {
    if mask.len() != g.n() {
        return Err(Error::dim(format!(
            "mask of length {} for graph with {} nodes",
            mask.len(),
            g.n()
        )));
    }
    let edges = g
        .edges
        .iter()
        .copied()
        .filter(|&(u, w)| mask.get(u) && mask.get(w))
        .collect();
    Ok(MaskedAdjacency::from_sorted(g.n(), edges, mask.clone()))
}
