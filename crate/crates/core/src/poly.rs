//! Sparse multivariate polynomials in the block entries `s^(b)_{ij}`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::{Cell, RankConstraint, Symbol};
use crate::linalg::{MinorIndex, RationalMatrix};
use crate::rational::{fmt_q, q, Q};

/// Entry `(row, col)` of block `block`, all 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl Var {
    pub fn new(block: usize, row: usize, col: usize) -> Self {
        Self { block, row, col }
    }
}

/// Polynomial with exact coefficients; monomials are sorted variable lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    pub symbol: Symbol,
    terms: BTreeMap<Vec<Var>, Q>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coeff: String,
    vars: Vec<Var>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    symbol: Symbol,
    terms: Vec<TermRepr>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            symbol: self.symbol,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermRepr {
                    coeff: fmt_q(c),
                    vars: m.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolyRepr::deserialize(d)?;
        let mut p = Polynomial::zero(r.symbol);
        for t in r.terms {
            let c = crate::rational::parse_q(&t.coeff).map_err(serde::de::Error::custom)?;
            p.add_term(t.vars, c);
        }
        Ok(p)
    }
}

impl Polynomial {
    pub fn zero(symbol: Symbol) -> Self {
        Self {
            symbol,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(symbol: Symbol, c: Q) -> Self {
        let mut p = Self::zero(symbol);
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(symbol: Symbol, v: Var) -> Self {
        let mut p = Self::zero(symbol);
        p.add_term(vec![v], q(1));
        p
    }

    /// Builds from `(coefficient, variables)` pairs.
    pub fn from_terms(symbol: Symbol, terms: impl IntoIterator<Item = (Q, Vec<Var>)>) -> Self {
        let mut p = Self::zero(symbol);
        for (c, vars) in terms {
            p.add_term(vars, c);
        }
        p
    }

    pub fn add_term(&mut self, mut vars: Vec<Var>, c: Q) {
        if c.is_zero() {
            return;
        }
        vars.sort_unstable();
        let entry = self.terms.entry(vars).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Var>, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn coefficient(&self, vars: &[Var]) -> Q {
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.terms.get(&key).cloned().unwrap_or_else(Q::zero)
    }

    pub fn scale(&self, c: &Q) -> Self {
        let mut p = Self::zero(self.symbol);
        for (m, v) in &self.terms {
            p.add_term(m.clone(), v * c);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (m, v) in &other.terms {
            p.add_term(m.clone(), v.clone());
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&q(-1)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.symbol);
        for (ma, a) in &self.terms {
            for (mb, b) in &other.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                p.add_term(m, a * b);
            }
        }
        p
    }

    /// Evaluates with `blocks[b]` supplying the values of block `b`.
    pub fn evaluate(&self, blocks: &[RationalMatrix]) -> Result<Q> {
        let mut acc = Q::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for v in m {
                let b = blocks
                    .get(v.block)
                    .ok_or_else(|| Error::Shape(format!("polynomial uses missing block {}", v.block)))?;
                if v.row >= b.rows() || v.col >= b.cols() {
                    return Err(Error::Shape(format!(
                        "variable ({}, {}) outside a {}x{} block",
                        v.row,
                        v.col,
                        b.rows(),
                        b.cols()
                    )));
                }
                t *= b.get(v.row, v.col);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Some nonzero `c` with `self = c * other`, if one exists.
    pub fn ratio_to(&self, other: &Self) -> Option<Q> {
        if self.terms.len() != other.terms.len() || self.is_zero() {
            return None;
        }
        let (m0, c0) = self.terms.iter().next()?;
        let ratio = c0 / other.terms.get(m0)?;
        self.terms
            .iter()
            .all(|(m, c)| other.terms.get(m).is_some_and(|d| *c == d * &ratio))
            .then_some(ratio)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let sym = match self.symbol {
            Symbol::M => 'm',
            Symbol::Y => 'y',
        };
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = *c < Q::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let vars: Vec<String> = m
                .iter()
                .map(|v| format!("{sym}{}_{}{}", v.block + 1, v.row + 1, v.col + 1))
                .collect();
            if vars.is_empty() {
                write!(f, "{}", fmt_q(&mag))?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{}*{}", fmt_q(&mag), vars.join("*"))?;
            }
        }
        Ok(())
    }
}

fn locate(dims: &[usize], i: usize) -> Option<(usize, usize)> {
    let mut start = 0;
    for (k, &d) in dims.iter().enumerate() {
        if i < start + d {
            return Some((k, i - start));
        }
        start += d;
    }
    None
}

/// Entry `(i, j)` of the constraint matrix as a polynomial of degree at most one.
pub fn entry_form(c: &RankConstraint, i: usize, j: usize) -> Result<Polynomial> {
    let (bi, li) = locate(&c.row_dims, i).ok_or_else(|| Error::Shape(format!("row {i} out of range")))?;
    let (bj, lj) = locate(&c.col_dims, j).ok_or_else(|| Error::Shape(format!("column {j} out of range")))?;
    let mut p = Polynomial::zero(c.symbol);
    match &c.grid[bi][bj] {
        Cell::Zero { .. } => {}
        Cell::Ones { .. } => p.add_term(Vec::new(), q(1)),
        Cell::Sum(terms) => {
            for t in terms {
                // entry (r, s) of S*R, read transposed when flagged
                let (r, s) = if t.transpose { (lj, li) } else { (li, lj) };
                match &t.right {
                    None => p.add_term(vec![Var::new(t.block, r, s)], t.coeff.clone()),
                    Some(rm) => {
                        for k in 0..rm.rows() {
                            let w = rm.get(k, s);
                            if !w.is_zero() {
                                p.add_term(vec![Var::new(t.block, r, k)], &t.coeff * w);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(p)
}

/// Largest minor expanded symbolically.
pub const MAX_SYMBOLIC_MINOR: usize = 6;

fn det(entries: &[Vec<Polynomial>], rows: &[usize], cols: &[usize], symbol: Symbol) -> Polynomial {
    if rows.is_empty() {
        return Polynomial::constant(symbol, q(1));
    }
    let mut acc = Polynomial::zero(symbol);
    let rest = &rows[1..];
    for (k, &c) in cols.iter().enumerate() {
        let e = &entries[rows[0]][c];
        if e.is_zero() {
            continue;
        }
        let sub: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = e.mul(&det(entries, rest, &sub, symbol));
        acc = if k % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// Symbolic expansion of one minor of the constraint matrix.
pub fn minor_polynomial(c: &RankConstraint, idx: &MinorIndex) -> Result<Polynomial> {
    if idx.size() > MAX_SYMBOLIC_MINOR {
        return Err(Error::Unsupported(format!(
            "symbolic expansion limited to minors of size {MAX_SYMBOLIC_MINOR}, got {}",
            idx.size()
        )));
    }
    let entries: Vec<Vec<Polynomial>> = idx
        .rows
        .iter()
        .map(|&i| idx.cols.iter().map(|&j| entry_form(c, i, j)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let local: Vec<usize> = (0..idx.size()).collect();
    Ok(det(&entries, &local, &local, c.symbol))
}
