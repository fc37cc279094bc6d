//! Exact linear algebra over the rationals.
//!
//! Ranks and determinants run fraction-free (Bareiss) on rows scaled to
//! integers; kernels and inverses use Gauss-Jordan over `Q`.

mod matrix;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

pub use matrix::RationalMatrix;

use crate::error::{Error, Result};
use crate::rational::{lcm_denominators, primitive_integer, Q};

/// Each row multiplied by the lcm of its denominators.
fn integer_rows(m: &RationalMatrix) -> Vec<Vec<BigInt>> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let l = Q::from_integer(lcm_denominators(row));
            row.iter().map(|x| (x * &l).to_integer()).collect()
        })
        .collect()
}

/// Fraction-free elimination in place. Returns the pivot positions and the
/// number of row swaps performed.
fn bareiss(a: &mut [Vec<BigInt>], cols: usize) -> (Vec<(usize, usize)>, usize) {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut swaps = 0;
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        if p != r {
            a.swap(p, r);
            swaps += 1;
        }
        let (head, tail) = a.split_at_mut(r + 1);
        let pivot_row = &head[r];
        let pivot = &pivot_row[c];
        for row in tail.iter_mut() {
            let factor = row[c].clone();
            for j in c + 1..cols {
                let v = pivot * &row[j] - &factor * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = pivot.clone();
        pivots.push((r, c));
        r += 1;
    }
    (pivots, swaps)
}

/// Exact rank over `Q`.
pub fn rank_exact(m: &RationalMatrix) -> usize {
    if m.rows() == 0 || m.cols() == 0 {
        return 0;
    }
    // eliminate along the shorter side
    let m = if m.cols() > m.rows() { m.transpose() } else { m.clone() };
    let mut a = integer_rows(&m);
    bareiss(&mut a, m.cols()).0.len()
}

pub fn determinant(m: &RationalMatrix) -> Result<Q> {
    if m.rows() != m.cols() {
        return Err(Error::Shape(format!("determinant of {}x{} matrix", m.rows(), m.cols())));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Q::one());
    }
    if n <= 4 {
        return Ok(cofactor_det(m, &(0..n).collect::<Vec<_>>(), &(0..n).collect::<Vec<_>>()));
    }
    Ok(bareiss_det(m))
}

fn bareiss_det(m: &RationalMatrix) -> Q {
    let n = m.rows();
    let scale = (0..n).fold(BigInt::one(), |acc, i| acc * lcm_denominators(m.row(i)));
    let mut a = integer_rows(m);
    let (pivots, swaps) = bareiss(&mut a, n);
    if pivots.len() < n {
        return Q::zero();
    }
    let mut det = Q::new(a[n - 1][n - 1].clone(), scale);
    if swaps % 2 == 1 {
        det = -det;
    }
    det
}

fn cofactor_det(m: &RationalMatrix, rows: &[usize], cols: &[usize]) -> Q {
    match rows.len() {
        0 => Q::one(),
        1 => m.get(rows[0], cols[0]).clone(),
        2 => {
            m.get(rows[0], cols[0]) * m.get(rows[1], cols[1])
                - m.get(rows[0], cols[1]) * m.get(rows[1], cols[0])
        }
        _ => {
            let rest = &rows[1..];
            let mut acc = Q::zero();
            for (k, &c) in cols.iter().enumerate() {
                let a = m.get(rows[0], c);
                if a.is_zero() {
                    continue;
                }
                let sub: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let term = a * cofactor_det(m, rest, &sub);
                if k % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

/// Value of a minor: cofactor expansion up to size 4, elimination above.
pub fn minor_value(m: &RationalMatrix, idx: &MinorIndex) -> Q {
    if idx.size() <= 4 {
        cofactor_det(m, &idx.rows, &idx.cols)
    } else {
        bareiss_det(&m.submatrix(&idx.rows, &idx.cols))
    }
}

/// Reduced row echelon form and its pivot columns.
pub fn rref(m: &RationalMatrix) -> (RationalMatrix, Vec<usize>) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a.get(i, c).is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..cols {
                let x = a.get(p, j).clone();
                let y = a.get(r, j).clone();
                a.set(p, j, y);
                a.set(r, j, x);
            }
        }
        let inv = a.get(r, c).recip();
        for j in 0..cols {
            let v = a.get(r, j) * &inv;
            a.set(r, j, v);
        }
        for i in 0..rows {
            if i == r || a.get(i, c).is_zero() {
                continue;
            }
            let f = a.get(i, c).clone();
            for j in 0..cols {
                let v = a.get(i, j) - &f * a.get(r, j);
                a.set(i, j, v);
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

/// Basis of the right null space. Each vector is a primitive integer vector
/// whose first nonzero entry is positive; there are `cols - rank` of them.
pub fn kernel_basis(m: &RationalMatrix) -> Vec<Vec<Q>> {
    let (r, pivots) = rref(m);
    let cols = m.cols();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); cols];
            v[f] = Q::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -r.get(row, f).clone();
            }
            primitive_integer(&v)
        })
        .collect()
}

pub fn invert(m: &RationalMatrix) -> Result<RationalMatrix> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::Shape(format!("cannot invert {}x{} matrix", n, m.cols())));
    }
    let aug = m.hcat(&RationalMatrix::identity(n))?;
    let (r, pivots) = rref(&aug);
    if pivots.len() < n || pivots[n - 1] >= n {
        return Err(Error::Singular);
    }
    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (n..2 * n).collect();
    Ok(r.submatrix(&rows, &cols))
}

/// Greedy column selection: walks columns in the given order and keeps each
/// one that raises the rank.
pub fn independent_columns(m: &RationalMatrix, order: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for c in order {
        let mut trial = kept.clone();
        trial.push(c);
        if rank_exact(&m.select_columns(&trial)) == trial.len() {
            kept = trial;
        }
    }
    kept.sort_unstable();
    kept
}

/// A square minor: strictly increasing row and column index lists of equal size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MinorIndex {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl MinorIndex {
    pub fn size(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinorEnumeration {
    /// Exact count `C(rows, size) * C(cols, size)`, saturating at `u64::MAX`.
    pub total: u64,
    pub indices: Vec<MinorIndex>,
    pub truncated: bool,
}

pub const DEFAULT_MINOR_CAP: usize = 10_000;

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub fn minor_count(rows: usize, cols: usize, size: usize) -> u64 {
    if size == 0 {
        return 0;
    }
    binomial(rows, size).saturating_mul(binomial(cols, size))
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut state: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let current = state.clone()?;
        let mut next = current.clone();
        let mut i = k;
        loop {
            if i == 0 {
                state = None;
                break;
            }
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                state = Some(next);
                break;
            }
        }
        Some(current)
    })
}

/// Enumerates `size`-minors of a `rows x cols` matrix, row subsets outermost,
/// materializing at most `cap` of them.
pub fn enumerate_minors(rows: usize, cols: usize, size: usize, cap: Option<usize>) -> MinorEnumeration {
    let total = minor_count(rows, cols, size);
    let cap = cap.unwrap_or(usize::MAX);
    let mut indices = Vec::new();
    if size > 0 && total > 0 {
        'outer: for r in combinations(rows, size) {
            for c in combinations(cols, size) {
                if indices.len() >= cap {
                    break 'outer;
                }
                indices.push(MinorIndex { rows: r.clone(), cols: c });
            }
        }
    }
    let truncated = (indices.len() as u64) < total;
    MinorEnumeration {
        total,
        indices,
        truncated,
    }
}

/// Sign of a rational, for callers that only need it.
pub fn sign(x: &Q) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}
