//! Moving constraints between pattern blocks `M_i` and output blocks
//! `Y_i = M_i X_i` for a fixed dataset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::{relations_from_kernel, Cell, LinearRelation, RankConstraint, Symbol};
use crate::linalg::{independent_columns, invert, kernel_basis, rank_exact, RationalMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BlockStatus {
    /// Square and full rank.
    Invertible,
    /// More than `n_0` columns with rank `n_0`; `core` lists the earliest
    /// columns forming a basis.
    Oversized { core: Vec<usize> },
    /// Full column rank but fewer than `n_0` columns.
    Undersized,
    /// Rank below `min(m_i, n_0)`.
    Deficient { rank: usize },
}

impl BlockStatus {
    pub fn is_transformable(&self) -> bool {
        matches!(self, BlockStatus::Invertible | BlockStatus::Oversized { .. })
    }
}

/// Dataset split into blocks `X_i` (each `n_0 x m_i`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetBlocks {
    pub blocks: Vec<RationalMatrix>,
    pub status: Vec<BlockStatus>,
}

impl DatasetBlocks {
    /// Checks that all blocks share their row count and classifies them.
    pub fn new(blocks: Vec<RationalMatrix>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            let n0 = first.rows();
            if let Some((i, b)) = blocks.iter().enumerate().find(|(_, b)| b.rows() != n0) {
                return Err(Error::Shape(format!(
                    "dataset block {i} has {} rows, block 0 has {n0}",
                    b.rows()
                )));
            }
        }
        Ok(classify_blocks(blocks))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.rows())
    }
}

fn classify(x: &RationalMatrix) -> BlockStatus {
    let (n0, m) = x.shape();
    let rank = rank_exact(x);
    if rank < m.min(n0) {
        BlockStatus::Deficient { rank }
    } else if m == n0 {
        BlockStatus::Invertible
    } else if m > n0 {
        BlockStatus::Oversized {
            core: independent_columns(x, 0..m),
        }
    } else {
        BlockStatus::Undersized
    }
}

pub fn classify_blocks(blocks: Vec<RationalMatrix>) -> DatasetBlocks {
    let status = blocks.iter().map(classify).collect();
    DatasetBlocks { blocks, status }
}

/// The `m_i x n_0` matrix `F_i` with `M_i = Y_i F_i`.
fn recovery_factor(x: &DatasetBlocks, block: usize) -> Result<RationalMatrix> {
    let xi = x.blocks.get(block).ok_or_else(|| Error::DeficientBlock {
        block,
        reason: format!("dataset has only {} blocks", x.len()),
    })?;
    match &x.status[block] {
        BlockStatus::Invertible => invert(xi),
        BlockStatus::Oversized { core } => {
            let rows: Vec<usize> = (0..xi.rows()).collect();
            let inv = invert(&xi.submatrix(&rows, core))?;
            let mut f = RationalMatrix::zeros(xi.cols(), xi.rows());
            for (k, &c) in core.iter().enumerate() {
                for j in 0..xi.rows() {
                    f.set(c, j, inv.get(k, j).clone());
                }
            }
            Ok(f)
        }
        BlockStatus::Undersized => Err(Error::DeficientBlock {
            block,
            reason: format!("{} columns cannot determine {} input dimensions", xi.cols(), xi.rows()),
        }),
        BlockStatus::Deficient { rank } => Err(Error::DeficientBlock {
            block,
            reason: format!(
                "columns are linearly dependent (rank {rank} of {}); add dependency rows instead",
                xi.cols().min(xi.rows())
            ),
        }),
    }
}

/// Replaces every `S_i` in the grid by `S'_i F_i`.
fn substitute(
    c: &RankConstraint,
    factors: &[Option<RationalMatrix>],
    symbol: Symbol,
    label: String,
) -> RankConstraint {
    let grid = c
        .grid
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| match cell {
                    Cell::Sum(terms) => Cell::Sum(
                        terms
                            .iter()
                            .map(|t| {
                                let f = factors[t.block].as_ref().expect("factor for every referenced block");
                                let mut t = t.clone();
                                t.right = Some(match &t.right {
                                    Some(r) => f * r,
                                    None => f.clone(),
                                });
                                t
                            })
                            .collect(),
                    ),
                    other => other.clone(),
                })
                .collect()
        })
        .collect();
    RankConstraint {
        label,
        symbol,
        grid,
        ..c.clone()
    }
}

fn factors_for(c: &RankConstraint, n: usize, f: impl Fn(usize) -> Result<RationalMatrix>) -> Result<Vec<Option<RationalMatrix>>> {
    let mut out = vec![None; n];
    for b in c.blocks() {
        if b >= n {
            return Err(Error::Shape(format!("constraint {} refers to block {b} of {n}", c.label)));
        }
        out[b] = Some(f(b)?);
    }
    Ok(out)
}

/// Carries a constraint on the `M_i` to one on the `Y_i` by substituting
/// `M_i = Y_i X_i^{-1}` (restricted to the core columns of oversized blocks).
/// The rank bound is unchanged.
pub fn psi_inverse(c: &RankConstraint, x: &DatasetBlocks) -> Result<RankConstraint> {
    if c.symbol != Symbol::M {
        return Err(Error::Unsupported(format!("constraint {} is already over output blocks", c.label)));
    }
    let factors = factors_for(c, x.len(), |b| recovery_factor(x, b))?;
    Ok(substitute(c, &factors, Symbol::Y, format!("{}-data", c.label)))
}

/// The forward substitution `Y_i = M_i X_i`, mapping output constraints back
/// to pattern constraints.
pub fn psi(c: &RankConstraint, x: &DatasetBlocks) -> Result<RankConstraint> {
    if c.symbol != Symbol::Y {
        return Err(Error::Unsupported(format!("constraint {} is already over pattern blocks", c.label)));
    }
    let factors = factors_for(c, x.len(), |b| Ok(x.blocks[b].clone()))?;
    let label = c.label.strip_suffix("-data").unwrap_or(&c.label).to_string();
    Ok(substitute(c, &factors, Symbol::M, label))
}

/// Linear relations among the outputs of one block forced by dependencies
/// among its columns (of `[1; X_i]` when `bias` is set).
pub fn dependency_rows(block: usize, x: &RationalMatrix, bias: bool, n_out: usize) -> Vec<LinearRelation> {
    let kernel = if bias {
        let ones = RationalMatrix::ones(1, x.cols());
        kernel_basis(&ones.vcat(x).expect("same column count"))
    } else {
        kernel_basis(x)
    };
    relations_from_kernel(block, &kernel, n_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::m_shapes;
    use crate::rational::{q, qr};

    fn mat(rows: &[&[i64]]) -> RationalMatrix {
        RationalMatrix::from_i64(rows)
    }

    #[test]
    fn classification() {
        let d = DatasetBlocks::new(vec![
            mat(&[&[1, 2], &[1, 3]]),
            mat(&[&[1, 2], &[1, 2]]),
            mat(&[&[3, 1, 1], &[1, 1, 3]]),
            mat(&[&[0, 3, 1], &[0, 1, 1]]),
            mat(&[&[1], &[0]]),
        ])
        .unwrap();
        assert_eq!(d.status[0], BlockStatus::Invertible);
        assert_eq!(d.status[1], BlockStatus::Deficient { rank: 1 });
        assert_eq!(d.status[2], BlockStatus::Oversized { core: vec![0, 1] });
        assert_eq!(d.status[3], BlockStatus::Oversized { core: vec![1, 2] });
        assert_eq!(d.status[4], BlockStatus::Undersized);
        assert!(DatasetBlocks::new(vec![mat(&[&[1]]), mat(&[&[1], &[2]])]).is_err());
    }

    fn stacked(cap: usize) -> RankConstraint {
        RankConstraint::new(
            "stack",
            Symbol::M,
            vec![vec![Cell::block(0)], vec![Cell::block(1)]],
            &m_shapes(2, 2, 2),
            1,
            cap,
        )
        .unwrap()
    }

    #[test]
    fn identity_data_changes_nothing_numerically() {
        let c = stacked(100);
        let x = DatasetBlocks::new(vec![RationalMatrix::identity(2), RationalMatrix::identity(2)]).unwrap();
        let t = psi_inverse(&c, &x).unwrap();
        let blocks = vec![mat(&[&[1, 2], &[3, 4]]), mat(&[&[5, 6], &[7, 8]])];
        assert_eq!(t.evaluate(&blocks).unwrap(), c.evaluate(&blocks).unwrap());
        assert_eq!(t.bound, c.bound);
        assert_eq!(t.symbol, Symbol::Y);
    }

    #[test]
    fn scaled_identity_scales_entries() {
        let c = stacked(100);
        let three = RationalMatrix::identity(2).scale(&q(3));
        let x = DatasetBlocks::new(vec![three.clone(), three]).unwrap();
        let t = psi_inverse(&c, &x).unwrap();
        let blocks = vec![mat(&[&[1, 2], &[3, 4]]), mat(&[&[5, 6], &[7, 8]])];
        assert_eq!(
            t.evaluate(&blocks).unwrap(),
            c.evaluate(&blocks).unwrap().scale(&qr(1, 3))
        );
    }

    #[test]
    fn deficient_block_is_refused() {
        let c = stacked(100);
        let x = DatasetBlocks::new(vec![mat(&[&[1, 2], &[1, 2]]), mat(&[&[1, 2], &[0, 1]])]).unwrap();
        assert!(matches!(psi_inverse(&c, &x), Err(Error::DeficientBlock { block: 0, .. })));
    }

    #[test]
    fn round_trip() {
        let c = stacked(100);
        let x = DatasetBlocks::new(vec![mat(&[&[1, 2], &[1, 3]]), mat(&[&[1, 3], &[2, 1]])]).unwrap();
        let back = psi(&psi_inverse(&c, &x).unwrap(), &x).unwrap();
        let blocks = vec![mat(&[&[1, -2], &[3, 4]]), mat(&[&[5, 0], &[7, 8]])];
        assert_eq!(back.evaluate(&blocks).unwrap(), c.evaluate(&blocks).unwrap());
        assert_eq!(back.label, "stack");
    }

    #[test]
    fn oversized_uses_core_columns() {
        let c = stacked(100);
        let x = DatasetBlocks::new(vec![mat(&[&[3, 1, 1], &[1, 1, 3]]), RationalMatrix::identity(2)]).unwrap();
        let t = psi_inverse(&c, &x).unwrap();
        let m1 = mat(&[&[1, 2], &[3, 4]]);
        let y1 = &m1 * &x.blocks[0];
        let m2 = mat(&[&[5, 6], &[7, 8]]);
        assert_eq!(
            t.evaluate(&[y1, m2.clone()]).unwrap(),
            c.evaluate(&[m1, m2]).unwrap()
        );
    }

    #[test]
    fn dependency_relations() {
        let rels = dependency_rows(0, &mat(&[&[3, 1, 1], &[1, 1, 3]]), false, 2);
        assert_eq!(rels.len(), 2);
        assert_eq!(rels[0].coefficients, vec![q(1), q(-4), q(1)]);
        assert_eq!(rels[1].row, 1);
        assert!(dependency_rows(0, &mat(&[&[1, 2], &[1, 3]]), false, 2).is_empty());
        let dup = dependency_rows(0, &mat(&[&[1, 2, 1], &[4, 5, 4]]), false, 1);
        assert_eq!(dup[0].coefficients, vec![q(1), q(0), q(-1)]);
        let affine = dependency_rows(0, &mat(&[&[0, 1, 2]]), true, 1);
        assert_eq!(affine[0].coefficients, vec![q(1), q(-2), q(1)]);
    }
}
