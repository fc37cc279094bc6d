use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{minor_count, RationalMatrix};
use crate::rational::{q, serde_q, Q};

/// Which family of block matrices a constraint is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Pattern-variety blocks `M_i` (each `n_L x n_0`).
    M,
    /// Output blocks `Y_i` (each `n_L x m_i`).
    Y,
}

/// `coeff * op(S_block * right)` where `op` transposes when `transpose` is
/// set and `right` defaults to the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    #[serde(with = "serde_q")]
    pub coeff: Q,
    pub block: usize,
    #[serde(default)]
    pub transpose: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<RationalMatrix>,
}

impl Term {
    pub fn block(block: usize) -> Self {
        Self::scaled(q(1), block)
    }

    pub fn scaled(coeff: Q, block: usize) -> Self {
        Self {
            coeff,
            block,
            transpose: false,
            right: None,
        }
    }

    pub fn transposed(mut self) -> Self {
        self.transpose = !self.transpose;
        self
    }

    fn shape(&self, shapes: &[(usize, usize)]) -> Result<(usize, usize)> {
        let &(r, c) = shapes
            .get(self.block)
            .ok_or_else(|| Error::Shape(format!("term refers to block {} of {}", self.block, shapes.len())))?;
        let c = match &self.right {
            Some(m) if m.rows() != c => {
                return Err(Error::Shape(format!(
                    "right factor has {} rows, block {} has {} columns",
                    m.rows(),
                    self.block,
                    c
                )))
            }
            Some(m) => m.cols(),
            None => c,
        };
        Ok(if self.transpose { (c, r) } else { (r, c) })
    }

    fn evaluate(&self, blocks: &[RationalMatrix]) -> RationalMatrix {
        let base = &blocks[self.block];
        let v = match &self.right {
            Some(m) => base * m,
            None => base.clone(),
        };
        let v = if self.transpose { v.transpose() } else { v };
        if self.coeff.is_one() {
            v
        } else {
            v.scale(&self.coeff)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Zero { rows: usize, cols: usize },
    Ones { rows: usize, cols: usize },
    Sum(Vec<Term>),
}

impl Cell {
    pub fn block(i: usize) -> Self {
        Cell::Sum(vec![Term::block(i)])
    }

    pub fn block_t(i: usize) -> Self {
        Cell::Sum(vec![Term::block(i).transposed()])
    }

    /// `sum_i lambda_i S_i`, skipping zero coefficients.
    pub fn combination(lambda: &[Q]) -> Self {
        Cell::Sum(
            lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.is_zero())
                .map(|(i, l)| Term::scaled(l.clone(), i))
                .collect(),
        )
    }

    fn shape(&self, shapes: &[(usize, usize)]) -> Result<Option<(usize, usize)>> {
        match self {
            Cell::Zero { rows, cols } | Cell::Ones { rows, cols } => Ok(Some((*rows, *cols))),
            Cell::Sum(terms) => {
                let mut shape = None;
                for t in terms {
                    let s = t.shape(shapes)?;
                    match shape {
                        None => shape = Some(s),
                        Some(prev) if prev != s => {
                            return Err(Error::Shape(format!("terms of one cell have shapes {prev:?} and {s:?}")))
                        }
                        _ => {}
                    }
                }
                Ok(shape)
            }
        }
    }

    pub fn blocks(&self) -> Vec<usize> {
        match self {
            Cell::Sum(terms) => terms.iter().map(|t| t.block).collect(),
            _ => Vec::new(),
        }
    }
}

/// Exact minor bookkeeping for one constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub rows: usize,
    pub cols: usize,
    /// Size of the vanishing minors, `bound + 1`.
    pub minor_size: usize,
    /// `C(rows, minor_size) * C(cols, minor_size)`.
    pub minors: u64,
    /// How many of those are materialized for per-minor checks.
    pub materialized: u64,
    pub truncated: bool,
    /// Published generator count when it differs from the plain minor count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<u64>,
    /// Minors taking at most the rank-allowed number of columns from each block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_minors: Option<u64>,
    /// `mixed_minors` minus the dependencies induced by the difference minors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent_estimate: Option<u64>,
}

/// "Every `(bound+1)`-minor of this block matrix vanishes", i.e. its rank is
/// at most `bound`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankConstraint {
    pub label: String,
    pub symbol: Symbol,
    pub grid: Vec<Vec<Cell>>,
    pub row_dims: Vec<usize>,
    pub col_dims: Vec<usize>,
    pub bound: usize,
    #[serde(default)]
    pub redundant: bool,
    pub counts: ConstraintCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RankConstraint {
    /// Validates the grid against the block shapes, clips the bound to the
    /// matrix shape, and fills in the minor counts (materializing at most
    /// `cap` minors).
    pub fn new(
        label: impl Into<String>,
        symbol: Symbol,
        grid: Vec<Vec<Cell>>,
        shapes: &[(usize, usize)],
        bound: usize,
        cap: usize,
    ) -> Result<Self> {
        let (row_dims, col_dims) = grid_dims(&grid, shapes)?;
        let rows: usize = row_dims.iter().sum();
        let cols: usize = col_dims.iter().sum();
        let bound = bound.min(rows.min(cols));
        let minors = minor_count(rows, cols, bound + 1);
        let materialized = minors.min(cap as u64);
        Ok(Self {
            label: label.into(),
            symbol,
            grid,
            row_dims,
            col_dims,
            bound,
            redundant: false,
            counts: ConstraintCounts {
                rows,
                cols,
                minor_size: bound + 1,
                minors,
                materialized,
                truncated: materialized < minors,
                generators: None,
                mixed_minors: None,
                independent_estimate: None,
            },
            note: None,
        })
    }

    /// Single cell.
    pub fn single(
        label: impl Into<String>,
        symbol: Symbol,
        cell: Cell,
        shapes: &[(usize, usize)],
        bound: usize,
        cap: usize,
    ) -> Result<Self> {
        Self::new(label, symbol, vec![vec![cell]], shapes, bound, cap)
    }

    pub fn rows(&self) -> usize {
        self.counts.rows
    }

    pub fn cols(&self) -> usize {
        self.counts.cols
    }

    /// True when the bound is at least the smaller side, so nothing is asserted.
    pub fn is_vacuous(&self) -> bool {
        self.bound >= self.rows().min(self.cols())
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Blocks referenced by some term, sorted and deduplicated.
    pub fn blocks(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.grid.iter().flatten().flat_map(Cell::blocks).collect();
        b.sort_unstable();
        b.dedup();
        b
    }

    /// Assembles the block matrix with `blocks[i]` substituted for `S_i`.
    pub fn evaluate(&self, blocks: &[RationalMatrix]) -> Result<RationalMatrix> {
        let shapes: Vec<(usize, usize)> = blocks.iter().map(|b| b.shape()).collect();
        let (row_dims, col_dims) = grid_dims(&self.grid, &shapes)?;
        if row_dims != self.row_dims || col_dims != self.col_dims {
            return Err(Error::Shape(format!(
                "constraint {} expects block dimensions {:?}x{:?}, got {:?}x{:?}",
                self.label, self.row_dims, self.col_dims, row_dims, col_dims
            )));
        }
        let grid: Vec<Vec<RationalMatrix>> = self
            .grid
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, cell)| {
                        let (r, c) = (row_dims[i], col_dims[j]);
                        match cell {
                            Cell::Zero { .. } => RationalMatrix::zeros(r, c),
                            Cell::Ones { .. } => RationalMatrix::ones(r, c),
                            Cell::Sum(terms) => terms
                                .iter()
                                .fold(RationalMatrix::zeros(r, c), |acc, t| &acc + &t.evaluate(blocks)),
                        }
                    })
                    .collect()
            })
            .collect();
        RationalMatrix::block(&grid)
    }

    /// Human-readable form of the matrix expression, e.g. `[M1 | M2]`.
    pub fn expression(&self) -> String {
        let sym = match self.symbol {
            Symbol::M => "M",
            Symbol::Y => "Y",
        };
        let cell_str = |c: &Cell| match c {
            Cell::Zero { .. } => "0".to_string(),
            Cell::Ones { .. } => "1".to_string(),
            Cell::Sum(terms) if terms.is_empty() => "0".to_string(),
            Cell::Sum(terms) => {
                let mut s = String::new();
                for (k, t) in terms.iter().enumerate() {
                    let neg = t.coeff < Q::zero();
                    let mag = if neg { -t.coeff.clone() } else { t.coeff.clone() };
                    if k == 0 {
                        if neg {
                            s.push('-');
                        }
                    } else {
                        s.push_str(if neg { " - " } else { " + " });
                    }
                    if !mag.is_one() {
                        s.push_str(&format!("{mag}*"));
                    }
                    let base = if t.right.is_some() {
                        format!("{sym}{}*R", t.block + 1)
                    } else {
                        format!("{sym}{}", t.block + 1)
                    };
                    if t.transpose {
                        if t.right.is_some() {
                            s.push_str(&format!("({base})^T"));
                        } else {
                            s.push_str(&format!("{base}^T"));
                        }
                    } else {
                        s.push_str(&base);
                    }
                }
                s
            }
        };
        let rows: Vec<String> = self
            .grid
            .iter()
            .map(|row| row.iter().map(cell_str).collect::<Vec<_>>().join(" | "))
            .collect();
        format!("[{}]", rows.join("; "))
    }
}

fn grid_dims(grid: &[Vec<Cell>], shapes: &[(usize, usize)]) -> Result<(Vec<usize>, Vec<usize>)> {
    if grid.is_empty() || grid[0].is_empty() {
        return Err(Error::Shape("constraint grid is empty".into()));
    }
    let beta = grid[0].len();
    if grid.iter().any(|r| r.len() != beta) {
        return Err(Error::Shape("constraint grid rows have different lengths".into()));
    }
    let mut row_dims: Vec<Option<usize>> = vec![None; grid.len()];
    let mut col_dims: Vec<Option<usize>> = vec![None; beta];
    for (i, row) in grid.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some((r, c)) = cell.shape(shapes)? {
                for (slot, v, what, idx) in [(&mut row_dims[i], r, "row", i), (&mut col_dims[j], c, "column", j)] {
                    match *slot {
                        None => *slot = Some(v),
                        Some(prev) if prev != v => {
                            return Err(Error::Shape(format!(
                                "block {what} {idx} has cells with {prev} and {v} {what}s"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    let unwrap = |v: Vec<Option<usize>>, what: &str| -> Result<Vec<usize>> {
        v.into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| Error::Shape(format!("block {what} {i} has no sized cell"))))
            .collect()
    };
    Ok((unwrap(row_dims, "row")?, unwrap(col_dims, "column")?))
}

/// Shapes of `k` pattern blocks `M_i`, each `n_L x n_0`.
pub fn m_shapes(k: usize, n_out: usize, n_in: usize) -> Vec<(usize, usize)> {
    vec![(n_out, n_in); k]
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_clipping() {
        let shapes = m_shapes(2, 4, 4);
        let c = RankConstraint::single("d", Symbol::M, Cell::combination(&[q(1), q(-1)]), &shapes, 2, 10_000).unwrap();
        assert_eq!((c.rows(), c.cols(), c.counts.minors), (4, 4, 16));
        assert!(!c.is_vacuous());
        let wide = RankConstraint::new("w", Symbol::M, vec![vec![Cell::block(0), Cell::block(1)]], &shapes, 9, 10).unwrap();
        assert_eq!(wide.bound, 4);
        assert!(wide.is_vacuous());
        assert_eq!(wide.counts.minors, 0);
        assert_eq!(wide.expression(), "[M1 | M2]");
    }

    #[test]
    fn evaluation_assembles_blocks() {
        let shapes = m_shapes(2, 1, 2);
        let grid = vec![
            vec![Cell::Ones { rows: 1, cols: 2 }, Cell::block(1)],
            vec![Cell::combination(&[q(2), q(-1)]), Cell::Zero { rows: 1, cols: 2 }],
        ];
        let c = RankConstraint::new("t", Symbol::M, grid, &shapes, 1, 100).unwrap();
        let m1 = RationalMatrix::from_i64(&[&[1, 2]]);
        let m2 = RationalMatrix::from_i64(&[&[3, 5]]);
        let v = c.evaluate(&[m1, m2]).unwrap();
        assert_eq!(v, RationalMatrix::from_i64(&[&[1, 1, 3, 5], &[-1, -1, 0, 0]]));
        assert_eq!(c.expression(), "[1 | M2; 2*M1 - M2 | 0]");
    }

    #[test]
    fn mismatched_cells_rejected() {
        let shapes = vec![(2, 3), (3, 2)];
        let err = RankConstraint::single("x", Symbol::M, Cell::combination(&[q(1), q(1)]), &shapes, 1, 10);
        assert!(matches!(err, Err(Error::Shape(_))));
        let ok = RankConstraint::new(
            "y",
            Symbol::M,
            vec![vec![Cell::block(0)], vec![Cell::block_t(1)]],
            &shapes,
            1,
            10,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn json_shape() {
        let shapes = m_shapes(1, 2, 2);
        let c = RankConstraint::single("a", Symbol::M, Cell::block(0), &shapes, 1, 10).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["grid"][0][0]["sum"][0]["coeff"], "1");
        let back: RankConstraint = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
