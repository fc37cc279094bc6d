use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::constraint::{Cell, RankConstraint, Symbol, Term};
use crate::linalg::{binomial, combinations, independent_columns, kernel_basis, rank_exact, RationalMatrix};
use crate::model::{width_rank, Architecture, Pattern};
use crate::rational::{q, serde_qvec, Q};

/// Upper limit on column subsets inspected by the general-position check.
const POSITION_CHECK_LIMIT: u64 = 5_000;

/// `sum_j coefficients[j] * y[row][j] = 0` on output block `block`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRelation {
    pub block: usize,
    pub row: usize,
    #[serde(with = "serde_qvec")]
    pub coefficients: Vec<Q>,
}

impl LinearRelation {
    pub fn evaluate(&self, y_blocks: &[RationalMatrix]) -> Result<Q> {
        let y = y_blocks
            .get(self.block)
            .ok_or_else(|| Error::Shape(format!("relation refers to missing block {}", self.block)))?;
        if self.coefficients.len() != y.cols() || self.row >= y.rows() {
            return Err(Error::Shape(format!(
                "relation on row {} with {} coefficients does not fit a {}x{} block",
                self.row,
                self.coefficients.len(),
                y.rows(),
                y.cols()
            )));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(y.row(self.row))
            .fold(Q::from_integer(0.into()), |acc, (c, v)| acc + c * v))
    }
}

/// One relation per kernel vector per output row.
pub fn relations_from_kernel(block: usize, kernel: &[Vec<Q>], n_out: usize) -> Vec<LinearRelation> {
    kernel
        .iter()
        .flat_map(|v| {
            (0..n_out).map(move |row| LinearRelation {
                block,
                row,
                coefficients: v.clone(),
            })
        })
        .collect()
}

/// Constraints on `Y = M(θ) X (+ b 1^T)` for one block of data sharing pattern `A`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleBlockAnalysis {
    /// Generic rank `r` of the masked product.
    pub rank: usize,
    pub general_position: bool,
    /// Columns whose outputs carry the minor constraint.
    pub independent_columns: Vec<usize>,
    #[serde(with = "kernel_serde")]
    pub kernel: Vec<Vec<Q>>,
    pub linear: Vec<LinearRelation>,
    /// `n_L * max(m - n_0, 0)` (or `max(m - n_0 - 1, 0)` with bias).
    pub expected_linear: usize,
    pub minors: RankConstraint,
    pub warnings: Vec<String>,
}

mod kernel_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::{serde_qvec, Q};

    #[derive(Serialize, Deserialize)]
    struct V(#[serde(with = "serde_qvec")] Vec<Q>);

    pub fn serialize<S: Serializer>(k: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
        k.iter().map(|v| V(v.clone())).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
        Ok(Vec::<V>::deserialize(d)?.into_iter().map(|v| v.0).collect())
    }
}

fn ones_augmented(x: &RationalMatrix) -> RationalMatrix {
    RationalMatrix::ones(1, x.cols()).vcat(x).expect("same column count")
}

/// Every `min(rows, m)`-subset of columns has full rank. `None` when there
/// are too many subsets to check.
fn in_general_position(x: &RationalMatrix) -> Option<bool> {
    let k = x.rows().min(x.cols());
    if binomial(x.cols(), k) > POSITION_CHECK_LIMIT {
        return None;
    }
    Some(combinations(x.cols(), k).all(|cols| rank_exact(&x.select_columns(&cols)) == k))
}

pub fn single_block_constraints(
    arch: &Architecture,
    a: &Pattern,
    x: &RationalMatrix,
    bias: bool,
    cap: usize,
) -> Result<SingleBlockAnalysis> {
    let n0 = arch.input_dim();
    let n_out = arch.output_dim();
    if x.rows() != n0 {
        return Err(Error::Shape(format!("data has {} rows, expected {}", x.rows(), n0)));
    }
    let m = x.cols();
    let r = width_rank(arch, a)?;
    let mut warnings = Vec::new();

    let design = if bias { ones_augmented(x) } else { x.clone() };
    let general_position = match in_general_position(&design) {
        Some(g) => g,
        None => {
            warnings.push("too many column subsets to check general position; assumed".to_string());
            rank_exact(&design) == design.rows().min(m)
        }
    };
    if !general_position {
        warnings.push(if bias {
            "data columns are not affinely in general position; relations come from the exact kernel".to_string()
        } else {
            "data columns are not in general position; relations come from the exact kernel".to_string()
        });
    }

    let independent = independent_columns(&design, (0..m).rev());
    let kernel = kernel_basis(&design);
    let linear = relations_from_kernel(0, &kernel, n_out);
    let free = if bias { n0 + 1 } else { n0 };
    let expected_linear = n_out * m.saturating_sub(free);
    if m > free {
        warnings.push(format!(
            "linear relation count uses n_L*max(m-{0},0) = {1}; the published count formula writes min(m-{0},0)",
            if bias { "n0-1" } else { "n0" },
            expected_linear
        ));
    }

    let mut select = RationalMatrix::zeros(m, independent.len());
    for (j, &c) in independent.iter().enumerate() {
        select.set(c, j, q(1));
    }
    let shapes = [(n_out, m)];
    let term = |sel: Option<RationalMatrix>| Term {
        coeff: q(1),
        block: 0,
        transpose: false,
        right: sel,
    };
    let sel = if independent.len() == m { None } else { Some(select) };
    let width = independent.len();
    let minors = if bias {
        let grid = vec![vec![Cell::Ones { rows: 1, cols: width }], vec![Cell::Sum(vec![term(sel)])]];
        let mut c = RankConstraint::new("single-block-bias", Symbol::Y, grid, &shapes, r + 1, cap)?;
        let k = n0.min(m.saturating_sub(1));
        c.counts.generators = Some(binomial(n_out, r + 1).saturating_mul(binomial(k, r + 1)));
        c
    } else {
        let mut c = RankConstraint::single("single-block", Symbol::Y, Cell::Sum(vec![term(sel)]), &shapes, r, cap)?;
        c.counts.generators = Some(binomial(n_out, r + 1).saturating_mul(binomial(n0.min(m), r + 1)));
        c
    };

    Ok(SingleBlockAnalysis {
        rank: r,
        general_position,
        independent_columns: independent,
        kernel,
        linear,
        expected_linear,
        minors,
        warnings,
    })
}

/// Expected dimension of the single-block output variety:
/// `k r + n_L r - r^2` with `k = min(n_0, m)`, or with bias
/// `k r + n_L (r + 1) - r^2` with `k = min(n_0, m - 1)`. The rank is capped at
/// `k` since at most `k` independent columns can realize it.
pub fn single_block_dimension(arch: &Architecture, a: &Pattern, m: usize, bias: bool) -> Result<usize> {
    let n0 = arch.input_dim();
    let n_out = arch.output_dim();
    let r0 = width_rank(arch, a)?;
    if bias {
        if m == 0 {
            return Ok(0);
        }
        let k = n0.min(m - 1);
        let r = r0.min(k);
        Ok(k * r + n_out * (r + 1) - r * r)
    } else {
        let k = n0.min(m);
        let r = r0.min(k);
        Ok(k * r + n_out * r - r * r)
    }
}
