//! Small classifiers with hand-written gradients: a two-layer GCN for graphs
//! and softmax-linear / one-hidden-layer MLP models for i.i.d. data.

mod forward;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::fmt_f64;
use crate::rng::stream_rng;

pub use forward::{accuracy, forward, gcn_forward, nll_loss, per_node_losses};
pub use train::{loss_and_gradient, train, Gradient};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arch {
    /// `softmax(Â · ReLU(Â X W0 + b0) · W1 + b1)`.
    Gcn2,
    /// `softmax(X W0 + b0)`.
    Linear,
    /// `softmax(ReLU(X W0 + b0) W1 + b1)`.
    Mlp1,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Gcn2 => "gcn2",
            Arch::Linear => "linear",
            Arch::Mlp1 => "mlp1",
        }
    }

    /// Whether the forward pass aggregates over edges.
    pub fn uses_graph(self) -> bool {
        matches!(self, Arch::Gcn2)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn2" => Ok(Arch::Gcn2),
            "linear" => Ok(Arch::Linear),
            "mlp1" => Ok(Arch::Mlp1),
            other => Err(Error::UnknownStrategy {
                kind: "architecture",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Weights of one trained (or initialized) classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub layers: Vec<Dense>,
}

impl ModelParams {
    /// All-zero parameters; hidden width is ignored for [`Arch::Linear`].
    pub fn zeros(arch: Arch, d: usize, h: usize, c: usize) -> Self {
        let layers = match arch {
            Arch::Linear => vec![Dense::zeros(d, c)],
            Arch::Gcn2 | Arch::Mlp1 => vec![Dense::zeros(d, h), Dense::zeros(h, c)],
        };
        Self { arch, layers }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot(arch: Arch, d: usize, h: usize, c: usize, seed: u64, stream: u64) -> Self {
        let mut p = Self::zeros(arch, d, h, c);
        let mut rng = stream_rng(seed, stream);
        for layer in &mut p.layers {
            let (fan_in, fan_out) = layer.weight.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer
                .weight
                .mapv_inplace(|_| rng.random_range(-limit..=limit));
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        match self.arch {
            Arch::Linear => 0,
            _ => self.layers[0].weight.ncols(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Weights then bias, layer by layer, row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::dim(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut p = self.clone();
        let mut it = flat.iter().copied();
        for l in &mut p.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    /// Text form: header `arch d h c`, then one line per weight row and one
    /// per bias vector, 17 significant digits each.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {} {}\n",
            self.arch,
            self.input_dim(),
            self.hidden_dim(),
            self.num_classes()
        );
        let push = |s: &mut String, vals: &mut dyn Iterator<Item = &f64>| {
            let line: Vec<String> = vals.map(|&x| fmt_f64(x)).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        };
        for l in &self.layers {
            for row in l.weight.rows() {
                push(&mut s, &mut row.iter());
            }
            push(&mut s, &mut l.bias.iter());
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::parse(1, "header must be `arch d h c`"));
        }
        let arch: Arch = toks[0].parse()?;
        let dims: Vec<usize> = toks[1..]
            .iter()
            .map(|t| t.parse().map_err(|_| Error::parse(1, format!("bad dimension `{t}`"))))
            .collect::<Result<_>>()?;
        let mut p = Self::zeros(arch, dims[0], dims[1], dims[2]);
        let mut next_row = |want: usize| -> Result<Vec<f64>> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "unexpected end of parameters"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(ln, format!("bad value `{t}`"))))
                .collect::<Result<_>>()?;
            if row.len() != want {
                return Err(Error::parse(ln, format!("expected {want} values, got {}", row.len())));
            }
            Ok(row)
        };
        for l in &mut p.layers {
            let cols = l.weight.ncols();
            for r in 0..l.weight.nrows() {
                for (j, x) in next_row(cols)?.into_iter().enumerate() {
                    l.weight[[r, j]] = x;
                }
            }
            for (j, x) in next_row(cols)?.into_iter().enumerate() {
                l.bias[j] = x;
            }
        }
        if !p.is_finite() {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(p)
    }
}

/// Full-batch gradient-descent settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            epochs: 200,
            weight_decay: 0.0,
            hidden: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be >= 0", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be >= 0"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shapes_per_arch() {
        let g = ModelParams::zeros(Arch::Gcn2, 5, 7, 3);
        assert_eq!((g.input_dim(), g.hidden_dim(), g.num_classes()), (5, 7, 3));
        assert_eq!(g.num_params(), 5 * 7 + 7 + 7 * 3 + 3);
        let l = ModelParams::zeros(Arch::Linear, 5, 7, 3);
        assert_eq!((l.hidden_dim(), l.num_params()), (0, 18));
    }

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let a = ModelParams::glorot(Arch::Mlp1, 4, 6, 2, 3, 0);
        let b = ModelParams::glorot(Arch::Mlp1, 4, 6, 2, 3, 0);
        assert_eq!(a, b);
        let limit = (6.0f64 / 10.0).sqrt();
        assert!(a.layers[0].weight.iter().all(|w| w.abs() <= limit));
        assert!(a.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(ModelParams::parse_text("cnn 1 1 1\n").is_err());
        assert!(ModelParams::parse_text("linear 1 0 2\n0.1\n0 0\n").is_err());
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_bit_exact(seed in any::<u64>(), arch in 0usize..3) {
            let arch = [Arch::Gcn2, Arch::Linear, Arch::Mlp1][arch];
            let p = ModelParams::glorot(arch, 3, 4, 2, seed, 9);
            let p = p.from_flat(&p.to_flat().iter().map(|x| x * 1.0e3 + 1e-7).collect::<Vec<_>>()).unwrap();
            let text = p.to_text();
            let back = ModelParams::parse_text(&text).unwrap();
            prop_assert_eq!(back.to_text(), text);
            prop_assert!(back.to_flat().iter().zip(p.to_flat()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
