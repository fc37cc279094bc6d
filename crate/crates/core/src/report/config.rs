use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RationalMatrix, DEFAULT_MINOR_CAP};
use crate::model::{Architecture, BlockPattern, Pattern};
use crate::rational::{serde_q, serde_qvec, Q};
use crate::verify::{SampleSpec, DEFAULT_COEFF_BOUND, DEFAULT_RANK_SAMPLES, DEFAULT_SEED, DEFAULT_VERIFY_SAMPLES};

pub const SCHEMA_VERSION: &str = "v1";

fn default_version() -> String {
    SCHEMA_VERSION.to_string()
}

/// Input document for every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub architecture: ArchitectureConfig,
    /// One entry per block: the 0/1 vectors of hidden layers `1..L-1`.
    pub blocks: Vec<Vec<Vec<u8>>>,
    /// One entry per block: its data points, each a list of `n_0` rationals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<Vec<Vec<DataPoint>>>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionsConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub widths: Vec<usize>,
    #[serde(default)]
    pub bias: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DataPoint(#[serde(with = "serde_qvec")] pub Vec<Q>);

/// Parsed one entry at a time so that errors point at the bad coordinate.
impl<'de> Deserialize<'de> for DataPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(transparent)]
        struct Entry(#[serde(with = "serde_q")] Q);
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(DataPoint(entries.into_iter().map(|e| e.0).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub master_seed: u64,
    pub num_samples: usize,
    pub coeff_bound: i64,
    /// Samples used when estimating generic ranks that feed constraint bounds.
    pub rank_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            master_seed: DEFAULT_SEED,
            num_samples: DEFAULT_VERIFY_SAMPLES,
            coeff_bound: DEFAULT_COEFF_BOUND,
            rank_samples: DEFAULT_RANK_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMatrixConfig {
    pub lambdas: Vec<Vec<i64>>,
    pub layout: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Run the sparse linear-combination search; by default only with three
    /// or more blocks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    pub coeff_bound: i64,
    /// Largest combination support; defaults to the width of the first hidden layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_support: Option<usize>,
    pub max_rows: usize,
    pub max_cols: usize,
    /// Non-vacuous block matrices kept from the layout enumeration (0 disables it).
    pub max_layouts: usize,
    pub block_matrices: Vec<BlockMatrixConfig>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            enabled: None,
            coeff_bound: 2,
            max_support: None,
            max_rows: 2,
            max_cols: 2,
            max_layouts: 0,
            block_matrices: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub max_minors: usize,
    /// Constraints with at most this many minors (of size at most 3) get
    /// their minors printed as polynomials.
    pub max_polynomials: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            max_minors: DEFAULT_MINOR_CAP,
            max_polynomials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceKind {
    Input,
    Parameter,
}

/// Plane scanned by the `regions` subcommand. Unset vectors are filled
/// deterministically: input slices use the first two coordinate axes and
/// sampled parameters, parameter slices use sampled base point and directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub kind: SliceKind,
    #[serde(default = "default_grid")]
    pub width: usize,
    #[serde(default = "default_grid")]
    pub height: usize,
    #[serde(with = "serde_q", default = "default_radius")]
    pub radius: Q,
    /// Flat parameters (input slices) or base point (parameter slices).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<DataPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<DataPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir_u: Option<DataPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir_v: Option<DataPoint>,
    /// Dataset block evaluated by parameter slices.
    #[serde(default)]
    pub block: usize,
}

fn default_grid() -> usize {
    64
}

fn default_radius() -> Q {
    Q::from_integer(2.into())
}

impl Default for RegionsConfig {
    fn default() -> Self {
        Self {
            kind: SliceKind::Input,
            width: default_grid(),
            height: default_grid(),
            radius: default_radius(),
            theta: None,
            origin: None,
            dir_u: None,
            dir_v: None,
            block: 0,
        }
    }
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses a config document; errors carry the JSON path of the offending field.
pub fn parse_config(text: &str) -> Result<AnalysisConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: AnalysisConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// The typed objects a config describes.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub arch: Architecture,
    pub patterns: BlockPattern,
    pub data: Option<Vec<RationalMatrix>>,
}

impl AnalysisConfig {
    pub fn new(widths: &[usize], blocks: &[&[&[u8]]]) -> Self {
        Self {
            version: default_version(),
            name: None,
            architecture: ArchitectureConfig {
                widths: widths.to_vec(),
                bias: false,
            },
            blocks: blocks
                .iter()
                .map(|b| b.iter().map(|l| l.to_vec()).collect())
                .collect(),
            dataset: None,
            verify: VerifyConfig::default(),
            search: SearchConfig::default(),
            limits: LimitsConfig::default(),
            regions: None,
        }
    }

    pub fn sample_spec(&self) -> SampleSpec {
        SampleSpec::new(self.verify.master_seed, self.verify.num_samples, self.verify.coeff_bound)
    }

    pub fn rank_spec(&self) -> SampleSpec {
        SampleSpec::new(self.verify.master_seed, self.verify.rank_samples, self.verify.coeff_bound)
    }

    /// Checks the fields that deserialization cannot.
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.version != SCHEMA_VERSION {
            return Err(config_err(
                "version",
                format!("unsupported version {:?}, expected {SCHEMA_VERSION:?}", self.version),
            ));
        }
        let arch = Architecture::new(self.architecture.widths.clone(), self.architecture.bias)
            .map_err(|e| config_err("architecture.widths", e.to_string()))?;
        let hidden = arch.hidden_widths().to_vec();
        if self.blocks.is_empty() {
            return Err(config_err("blocks", "at least one block is required"));
        }
        let mut patterns = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            if b.len() != hidden.len() {
                return Err(config_err(
                    format!("blocks[{i}]"),
                    format!("expected {} hidden layers, got {}", hidden.len(), b.len()),
                ));
            }
            let mut layers = Vec::with_capacity(b.len());
            for (l, bits) in b.iter().enumerate() {
                if bits.len() != hidden[l] {
                    return Err(config_err(
                        format!("blocks[{i}][{l}]"),
                        format!("expected {} entries, got {}", hidden[l], bits.len()),
                    ));
                }
                if let Some(j) = bits.iter().position(|&x| x > 1) {
                    return Err(config_err(format!("blocks[{i}][{l}][{j}]"), "entries must be 0 or 1"));
                }
                layers.push(bits.iter().map(|&x| x == 1).collect());
            }
            patterns.push(Pattern::new(layers));
        }
        let patterns = BlockPattern::new(patterns).map_err(|e| config_err("blocks", e.to_string()))?;

        let data = match &self.dataset {
            None => None,
            Some(ds) => {
                if ds.len() != patterns.len() {
                    return Err(config_err(
                        "dataset",
                        format!("expected {} blocks, got {}", patterns.len(), ds.len()),
                    ));
                }
                let n0 = arch.input_dim();
                let mut blocks = Vec::with_capacity(ds.len());
                for (i, pts) in ds.iter().enumerate() {
                    if pts.is_empty() {
                        return Err(config_err(format!("dataset[{i}]"), "block has no data points"));
                    }
                    if let Some(j) = pts.iter().position(|p| p.0.len() != n0) {
                        return Err(config_err(
                            format!("dataset[{i}][{j}]"),
                            format!("expected {n0} coordinates, got {}", pts[j].0.len()),
                        ));
                    }
                    blocks.push(RationalMatrix::from_columns(&pts.iter().map(|p| p.0.clone()).collect::<Vec<_>>())?);
                }
                Some(blocks)
            }
        };

        if self.verify.num_samples == 0 {
            return Err(config_err("verify.num_samples", "must be positive"));
        }
        if self.verify.rank_samples == 0 {
            return Err(config_err("verify.rank_samples", "must be positive"));
        }
        if self.verify.coeff_bound <= 0 {
            return Err(config_err("verify.coeff_bound", "must be positive"));
        }
        if self.search.coeff_bound <= 0 {
            return Err(config_err("search.coeff_bound", "must be positive"));
        }
        for (i, bm) in self.search.block_matrices.iter().enumerate() {
            if let Some(j) = bm.lambdas.iter().position(|l| l.len() != patterns.len()) {
                return Err(config_err(
                    format!("search.block_matrices[{i}].lambdas[{j}]"),
                    format!("expected {} coefficients", patterns.len()),
                ));
            }
            crate::invariants::check_layout(&bm.layout, bm.lambdas.len())
                .map_err(|e| config_err(format!("search.block_matrices[{i}].layout"), e.to_string()))?;
        }
        if let Some(r) = &self.regions {
            if r.width == 0 || r.height == 0 {
                return Err(config_err("regions", "grid needs at least one point per axis"));
            }
            if r.kind == SliceKind::Parameter && data.as_ref().is_none_or(|d| r.block >= d.len()) {
                return Err(config_err("regions.block", "parameter slices need the dataset block they evaluate"));
            }
        }
        Ok(Resolved { arch, patterns, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = parse_config(r#"{"architecture": {"widths": [2, 2, 2]}, "blocks": [[[1, 0]]]}"#).unwrap();
        assert_eq!(cfg.verify, VerifyConfig::default());
        assert_eq!(cfg.resolve().unwrap().patterns.len(), 1);
    }

    #[test]
    fn bad_rational_reports_path() {
        let text = r#"{"architecture": {"widths": [2, 1, 2]}, "blocks": [[[1]]],
                       "dataset": [[["1", "2"], ["3", "1/0"]]]}"#;
        match parse_config(text).unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "dataset[0][1][1]");
                assert!(message.contains("zero denominator"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn shape_errors_report_paths() {
        let err = parse_config(r#"{"architecture": {"widths": [2, 3, 2]}, "blocks": [[[1, 0]]]}"#).unwrap_err();
        assert!(err.to_string().starts_with("blocks[0][0]:"), "{err}");
        let err = parse_config(r#"{"architecture": {"widths": [2, 2, 2]}, "blocks": [[[1, 2]]]}"#).unwrap_err();
        assert!(err.to_string().starts_with("blocks[0][0][1]:"), "{err}");
        let err = parse_config(r#"{"architecture": {"widths": [2, 2, 2]}, "blocks": [[[1, 0]]], "extra": 1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }
}
