use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::RationalMatrix;
use crate::rational::{serde_qvec, Q};

/// Layer widths `n_0..n_L` and whether every layer carries a bias.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ArchitectureRepr", into = "ArchitectureRepr")]
pub struct Architecture {
    widths: Vec<usize>,
    has_bias: bool,
}

#[derive(Serialize, Deserialize)]
struct ArchitectureRepr {
    widths: Vec<usize>,
    #[serde(default)]
    bias: bool,
}

impl TryFrom<ArchitectureRepr> for Architecture {
    type Error = Error;
    fn try_from(r: ArchitectureRepr) -> Result<Self> {
        Architecture::new(r.widths, r.bias)
    }
}

impl From<Architecture> for ArchitectureRepr {
    fn from(a: Architecture) -> Self {
        ArchitectureRepr {
            widths: a.widths,
            bias: a.has_bias,
        }
    }
}

impl Architecture {
    pub fn new(widths: Vec<usize>, has_bias: bool) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Architecture(format!(
                "need at least input and output widths, got {} entries",
                widths.len()
            )));
        }
        if let Some(i) = widths.iter().position(|&w| w == 0) {
            return Err(Error::Architecture(format!("width n_{i} is zero")));
        }
        Ok(Self { widths, has_bias })
    }

    /// Bias-free architecture; panics on invalid widths.
    pub fn plain(widths: &[usize]) -> Self {
        Self::new(widths.to_vec(), false).expect("valid widths")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.depth()]
    }

    /// `n_1..n_{L-1}`.
    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.depth()]
    }

    pub fn hidden_neurons(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub fn weight_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn param_count(&self) -> usize {
        let biases = if self.has_bias { self.widths[1..].iter().sum() } else { 0 };
        self.weight_count() + biases
    }

    /// Number of input-to-output paths through one neuron per hidden layer.
    pub fn path_count(&self) -> usize {
        self.hidden_widths().iter().product()
    }
}

/// Binary activation vectors `A^1..A^{L-1}`, one per hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    layers: Vec<Vec<bool>>,
}

impl Pattern {
    pub fn new(layers: Vec<Vec<bool>>) -> Self {
        Self { layers }
    }

    /// From 0/1 rows; any nonzero entry counts as active.
    pub fn from_bits(layers: &[&[u8]]) -> Self {
        Self::new(layers.iter().map(|l| l.iter().map(|&b| b != 0).collect()).collect())
    }

    pub fn all_active(arch: &Architecture) -> Self {
        Self::new(arch.hidden_widths().iter().map(|&w| vec![true; w]).collect())
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    /// Activation vector of hidden layer `l` (1-based, as `A^l`).
    pub fn layer(&self, l: usize) -> &[bool] {
        &self.layers[l - 1]
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let hidden = arch.hidden_widths();
        if self.layers.len() != hidden.len() {
            return Err(Error::Pattern(format!(
                "expected {} hidden layers, got {}",
                hidden.len(),
                self.layers.len()
            )));
        }
        for (l, (layer, &w)) in self.layers.iter().zip(hidden).enumerate() {
            if layer.len() != w {
                return Err(Error::Pattern(format!(
                    "layer {} has {} entries, width is {}",
                    l + 1,
                    layer.len(),
                    w
                )));
            }
        }
        Ok(())
    }

    /// Elementwise AND; both patterns must have the same shape.
    pub fn and(&self, other: &Pattern) -> Pattern {
        Pattern::new(
            self.layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x && y).collect())
                .collect(),
        )
    }

    pub fn active_count(&self, l: usize) -> usize {
        self.layer(l).iter().filter(|&&b| b).count()
    }

    /// Layer vectors concatenated, as a string of `0`/`1`.
    pub fn bit_string(&self) -> String {
        self.layers
            .iter()
            .map(|l| l.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>())
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let bits: Vec<Vec<u8>> = self.layers.iter().map(|l| l.iter().map(|&b| b as u8).collect()).collect();
        bits.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<Vec<u8>>::deserialize(d)?;
        if bits.iter().flatten().any(|&b| b > 1) {
            return Err(serde::de::Error::custom("activation entries must be 0 or 1"));
        }
        Ok(Pattern::new(bits.into_iter().map(|l| l.into_iter().map(|b| b == 1).collect()).collect()))
    }
}

/// Ordered list of distinct patterns, one per block of data columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPattern {
    pub blocks: Vec<Pattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<usize>>,
}

impl BlockPattern {
    pub fn new(blocks: Vec<Pattern>) -> Result<Self> {
        let bp = Self {
            blocks,
            multiplicities: None,
        };
        bp.check_distinct()?;
        Ok(bp)
    }

    pub fn with_multiplicities(mut self, m: Vec<usize>) -> Result<Self> {
        if m.len() != self.blocks.len() {
            return Err(Error::Shape(format!(
                "{} multiplicities for {} blocks",
                m.len(),
                self.blocks.len()
            )));
        }
        self.multiplicities = Some(m);
        Ok(self)
    }

    fn check_distinct(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Pattern("at least one block is required".into()));
        }
        for i in 0..self.blocks.len() {
            for j in i + 1..self.blocks.len() {
                if self.blocks[i] == self.blocks[j] {
                    return Err(Error::Pattern(format!("blocks {i} and {j} have the same pattern")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        self.check_distinct()?;
        self.blocks.iter().try_for_each(|p| p.check(arch))
    }
}

/// Weight matrices `W^(l)` (shape `n_l x n_{l-1}`) and optional bias vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamAssignment {
    pub weights: Vec<RationalMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_bias")]
    pub biases: Option<Vec<Vec<Q>>>,
}

mod opt_bias {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Row(#[serde(with = "serde_qvec")] Vec<Q>);

    pub fn serialize<S: Serializer>(b: &Option<Vec<Vec<Q>>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        b.as_ref()
            .map(|v| v.iter().map(|r| Row(r.clone())).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Vec<Q>>>, D::Error> {
        Ok(Option::<Vec<Row>>::deserialize(d)?.map(|v| v.into_iter().map(|r| r.0).collect()))
    }
}

impl ParamAssignment {
    /// Builds parameters from a flat list: weights layer by layer in row-major
    /// order, then biases layer by layer.
    pub fn from_flat(arch: &Architecture, flat: &[Q]) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, architecture has {}",
                flat.len(),
                arch.param_count()
            )));
        }
        let w = arch.widths();
        let mut pos = 0;
        let mut weights = Vec::with_capacity(arch.depth());
        for l in 1..w.len() {
            let n = w[l] * w[l - 1];
            weights.push(RationalMatrix::from_vec(w[l], w[l - 1], flat[pos..pos + n].to_vec())?);
            pos += n;
        }
        let biases = arch.has_bias().then(|| {
            w[1..]
                .iter()
                .map(|&n| {
                    let b = flat[pos..pos + n].to_vec();
                    pos += n;
                    b
                })
                .collect()
        });
        Ok(Self { weights, biases })
    }

    pub fn to_flat(&self) -> Vec<Q> {
        let mut out: Vec<Q> = self.weights.iter().flat_map(|m| m.entries().iter().cloned()).collect();
        if let Some(b) = &self.biases {
            out.extend(b.iter().flatten().cloned());
        }
        out
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let w = arch.widths();
        if self.weights.len() != arch.depth() {
            return Err(Error::Shape(format!(
                "{} weight matrices for depth {}",
                self.weights.len(),
                arch.depth()
            )));
        }
        for (l, m) in self.weights.iter().enumerate() {
            if m.shape() != (w[l + 1], w[l]) {
                return Err(Error::Shape(format!(
                    "W^({}) is {}x{}, expected {}x{}",
                    l + 1,
                    m.rows(),
                    m.cols(),
                    w[l + 1],
                    w[l]
                )));
            }
        }
        match (&self.biases, arch.has_bias()) {
            (None, false) => Ok(()),
            (Some(b), true) => {
                if b.len() != arch.depth() {
                    return Err(Error::Shape(format!("{} bias vectors for depth {}", b.len(), arch.depth())));
                }
                for (l, v) in b.iter().enumerate() {
                    if v.len() != w[l + 1] {
                        return Err(Error::Shape(format!(
                            "b^({}) has length {}, expected {}",
                            l + 1,
                            v.len(),
                            w[l + 1]
                        )));
                    }
                }
                Ok(())
            }
            (Some(_), false) => Err(Error::Shape("biases given for a bias-free architecture".into())),
            (None, true) => Err(Error::Shape("architecture has biases but none were given".into())),
        }
    }
}

/// Set of paths `(p_1..p_{L-1})`, one 0-based neuron index per hidden layer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: BTreeSet<Vec<usize>>,
}

impl PathSet {
    pub fn new(paths: impl IntoIterator<Item = Vec<usize>>) -> Self {
        Self {
            paths: paths.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.paths.iter()
    }

    pub fn difference(&self, other: &PathSet) -> PathSet {
        PathSet {
            paths: self.paths.difference(&other.paths).cloned().collect(),
        }
    }

    pub fn intersection(&self, other: &PathSet) -> PathSet {
        PathSet {
            paths: self.paths.intersection(&other.paths).cloned().collect(),
        }
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let hidden = arch.hidden_widths();
        for p in &self.paths {
            if p.len() != hidden.len() || p.iter().zip(hidden).any(|(&i, &w)| i >= w) {
                return Err(Error::Pattern(format!("path {p:?} does not fit hidden widths {hidden:?}")));
            }
        }
        Ok(())
    }
}
