//! Per-sample loss signals: the interchange format between model querying
//! and the signal-based attacks.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, MaskedAdjacency, MembershipMask};
use crate::model::{per_node_losses, ModelParams};
use crate::numeric::fmt_f64;
use crate::shadow::ShadowPool;

/// Which adjacency the models are queried on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalMode {
    /// Each node in isolation (self-loop only).
    ZeroHop,
    /// The full population graph.
    FullGraph,
    /// Read from a file; provenance unknown.
    External,
}

impl SignalMode {
    pub fn name(self) -> &'static str {
        match self {
            SignalMode::ZeroHop => "zero_hop",
            SignalMode::FullGraph => "full_graph",
            SignalMode::External => "external",
        }
    }
}

impl std::str::FromStr for SignalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_hop" => Ok(SignalMode::ZeroHop),
            "full_graph" => Ok(SignalMode::FullGraph),
            "external" => Ok(SignalMode::External),
            other => Err(Error::UnknownStrategy {
                kind: "signal mode",
                name: other.to_string(),
            }),
        }
    }
}

/// N samples × K shadow models.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalMatrix {
    pub sample_ids: Vec<usize>,
    pub members: Vec<bool>,
    pub target_loss: Vec<f64>,
    pub shadow_loss: Vec<Vec<f64>>,
    pub in_bits: Vec<Vec<bool>>,
    pub mode: SignalMode,
}

/// Borrowed view of one sample.
#[derive(Clone, Copy, Debug)]
pub struct SignalRow<'a> {
    pub target_loss: f64,
    pub shadow_loss: &'a [f64],
    pub in_bits: &'a [bool],
}

impl<'a> SignalRow<'a> {
    /// Shadow losses of the models that did not train on this sample.
    pub fn out_losses(&self) -> Vec<f64> {
        self.shadow_loss
            .iter()
            .zip(self.in_bits)
            .filter(|(_, &b)| !b)
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn in_losses(&self) -> Vec<f64> {
        self.shadow_loss
            .iter()
            .zip(self.in_bits)
            .filter(|(_, &b)| b)
            .map(|(&l, _)| l)
            .collect()
    }
}

impl SignalMatrix {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn num_shadows(&self) -> usize {
        self.shadow_loss.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> SignalRow<'_> {
        SignalRow {
            target_loss: self.target_loss[i],
            shadow_loss: &self.shadow_loss[i],
            in_bits: &self.in_bits[i],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let k = self.num_shadows();
        if self.members.len() != n
            || self.target_loss.len() != n
            || self.shadow_loss.len() != n
            || self.in_bits.len() != n
        {
            return Err(Error::dim("signal columns differ in length"));
        }
        if self.shadow_loss.iter().any(|r| r.len() != k) || self.in_bits.iter().any(|r| r.len() != k) {
            return Err(Error::dim("ragged shadow columns"));
        }
        Ok(())
    }

    /// CSV with header `sample_id,member,target_loss,sh0..,in0..`.
    pub fn to_csv(&self) -> String {
        let k = self.num_shadows();
        let mut s = String::from("sample_id,member,target_loss");
        for j in 0..k {
            let _ = write!(s, ",sh{j}");
        }
        for j in 0..k {
            let _ = write!(s, ",in{j}");
        }
        s.push('\n');
        for i in 0..self.len() {
            let _ = write!(
                s,
                "{},{},{}",
                self.sample_ids[i],
                u8::from(self.members[i]),
                fmt_f64(self.target_loss[i])
            );
            for &l in &self.shadow_loss[i] {
                s.push(',');
                s.push_str(&fmt_f64(l));
            }
            for &b in &self.in_bits[i] {
                let _ = write!(s, ",{}", u8::from(b));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty signals file"))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[..3] != ["sample_id", "member", "target_loss"] {
            return Err(Error::parse(1, "header must start with sample_id,member,target_loss"));
        }
        let rest = cols.len() - 3;
        if rest % 2 != 0 {
            return Err(Error::parse(1, "unequal number of shadow-loss and in-bit columns"));
        }
        let k = rest / 2;
        for j in 0..k {
            if cols[3 + j] != format!("sh{j}") || cols[3 + k + j] != format!("in{j}") {
                return Err(Error::parse(1, format!("unexpected column names near shadow {j}")));
            }
        }
        let mut m = SignalMatrix {
            sample_ids: Vec::new(),
            members: Vec::new(),
            target_loss: Vec::new(),
            shadow_loss: Vec::new(),
            in_bits: Vec::new(),
            mode: SignalMode::External,
        };
        let bit = |ln: usize, t: &str| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::parse(ln, format!("expected 0 or 1, got `{other}`"))),
        };
        let real = |ln: usize, t: &str| -> Result<f64> {
            let x: f64 = t.parse().map_err(|_| Error::parse(ln, format!("bad number `{t}`")))?;
            if !x.is_finite() {
                return Err(Error::parse(ln, format!("non-finite loss `{t}`")));
            }
            Ok(x)
        };
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::parse(ln, format!("expected {} fields, got {}", cols.len(), f.len())));
            }
            m.sample_ids
                .push(f[0].parse().map_err(|_| Error::parse(ln, format!("bad sample id `{}`", f[0])))?);
            m.members.push(bit(ln, f[1])?);
            m.target_loss.push(real(ln, f[2])?);
            m.shadow_loss
                .push(f[3..3 + k].iter().map(|t| real(ln, t)).collect::<Result<_>>()?);
            m.in_bits.push(f[3 + k..].iter().map(|t| bit(ln, t)).collect::<Result<_>>()?);
        }
        Ok(m)
    }
}

/// Queries the target and every shadow model on `targets`.
pub fn signal_matrix(
    target: &ModelParams,
    pool: &ShadowPool,
    g: &Graph,
    targets: &[usize],
    ground_truth: &MembershipMask,
    mode: SignalMode,
) -> Result<SignalMatrix> {
    if ground_truth.len() != g.n() || pool.node_count() != g.n() {
        return Err(Error::dim("membership masks must cover every node"));
    }
    let adj = match mode {
        SignalMode::ZeroHop => MaskedAdjacency::edgeless(g.n()),
        SignalMode::FullGraph => g.full_adjacency(),
        SignalMode::External => return Err(Error::invalid("cannot compute external signals")),
    };
    let nodes: BTreeSet<usize> = targets.iter().copied().collect();
    let query = |m: &ModelParams| -> Result<Vec<f64>> {
        let losses = per_node_losses(m, g, &adj, &nodes)?;
        Ok(targets.iter().map(|v| losses[v]).collect())
    };
    let target_loss = query(target)?;
    let per_model: Vec<Vec<f64>> = pool.models.par_iter().map(query).collect::<Result<_>>()?;
    let shadow_loss = (0..targets.len())
        .map(|i| per_model.iter().map(|col| col[i]).collect())
        .collect();
    let in_bits = targets
        .iter()
        .map(|&v| (0..pool.len()).map(|k| pool.is_in(k, v)).collect())
        .collect();
    Ok(SignalMatrix {
        sample_ids: targets.to_vec(),
        members: targets.iter().map(|&v| ground_truth.get(v)).collect(),
        target_loss,
        shadow_loss,
        in_bits,
        mode,
    })
}
