//! Activation-pattern scans over a 2D affine slice of input or parameter space.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank_exact, RationalMatrix};
use crate::model::eval::forward_with_zeros;
use crate::model::types::{Architecture, ParamAssignment, Pattern};
use crate::par::{map_range, Execution};
use crate::rational::{fmt_q, q, Q};

/// Identifier given to grid points where some pre-activation is exactly zero.
pub const BOUNDARY_ID: &str = "boundary";

/// The plane being scanned, parametrized by `(u, v)`.
#[derive(Debug, Clone)]
pub enum Slice {
    /// Inputs `x = origin + u*dir_u + v*dir_v` for fixed parameters.
    Input {
        theta: ParamAssignment,
        origin: Vec<Q>,
        dir_u: Vec<Q>,
        dir_v: Vec<Q>,
    },
    /// Flat parameters `theta0 + u*dir_u + v*dir_v` (see
    /// [`ParamAssignment::from_flat`]) evaluated on every column of `data`.
    Parameter {
        theta0: Vec<Q>,
        dir_u: Vec<Q>,
        dir_v: Vec<Q>,
        data: RationalMatrix,
    },
}

/// `width x height` points spanning the closed ranges; a single point sits at
/// the lower end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub u_range: (Q, Q),
    pub v_range: (Q, Q),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCell {
    #[serde(with = "crate::rational::serde_q")]
    pub u: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub v: Q,
    pub pattern_id: String,
}

/// Scan result in row-major order: `v` indexes rows, `u` indexes columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionScan {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<RegionCell>,
}

impl RegionScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v,pattern_id\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{}", fmt_q(&c.u), fmt_q(&c.v), c.pattern_id);
        }
        out
    }

    /// Distinct region ids, excluding the boundary id.
    pub fn region_ids(&self) -> BTreeSet<&str> {
        self.cells
            .iter()
            .map(|c| c.pattern_id.as_str())
            .filter(|id| *id != BOUNDARY_ID)
            .collect()
    }
}

/// Stable content hash (64-bit FNV-1a, hex) of a sequence of patterns.
pub fn pattern_id<'a>(patterns: impl IntoIterator<Item = &'a Pattern>) -> String {
    let key = patterns.into_iter().map(Pattern::bit_string).collect::<Vec<_>>().join(";");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn grid_point(range: &(Q, Q), n: usize, i: usize) -> Q {
    if n <= 1 {
        return range.0.clone();
    }
    &range.0 + (&range.1 - &range.0) * Q::new((i as i64).into(), ((n - 1) as i64).into())
}

fn affine(origin: &[Q], du: &[Q], dv: &[Q], u: &Q, v: &Q) -> Vec<Q> {
    origin
        .iter()
        .zip(du)
        .zip(dv)
        .map(|((o, a), b)| o + a * u + b * v)
        .collect()
}

fn check_directions(origin_len: usize, du: &[Q], dv: &[Q]) -> Result<()> {
    if du.len() != origin_len || dv.len() != origin_len {
        return Err(Error::Shape(format!(
            "slice directions have lengths {} and {}, expected {}",
            du.len(),
            dv.len(),
            origin_len
        )));
    }
    let m = RationalMatrix::from_rows(vec![du.to_vec(), dv.to_vec()])?;
    if rank_exact(&m) < 2 {
        return Err(Error::DegenerateSlice("slice directions are linearly dependent".into()));
    }
    Ok(())
}

/// Classifies every grid point of the slice by activation pattern.
pub fn region_scan(arch: &Architecture, slice: &Slice, grid: &Grid, exec: Execution) -> Result<RegionScan> {
    if grid.width == 0 || grid.height == 0 {
        return Err(Error::Shape("grid must have at least one point per axis".into()));
    }
    match slice {
        Slice::Input {
            theta,
            origin,
            dir_u,
            dir_v,
        } => {
            theta.check(arch)?;
            if origin.len() != arch.input_dim() {
                return Err(Error::Shape(format!(
                    "slice origin has length {}, expected {}",
                    origin.len(),
                    arch.input_dim()
                )));
            }
            check_directions(origin.len(), dir_u, dir_v)?;
        }
        Slice::Parameter {
            theta0,
            dir_u,
            dir_v,
            data,
        } => {
            ParamAssignment::from_flat(arch, theta0)?;
            check_directions(theta0.len(), dir_u, dir_v)?;
            if data.rows() != arch.input_dim() {
                return Err(Error::Shape(format!(
                    "data has {} rows, expected {}",
                    data.rows(),
                    arch.input_dim()
                )));
            }
        }
    }
    let rows = map_range(exec, grid.height, |j| {
        let v = grid_point(&grid.v_range, grid.height, j);
        (0..grid.width)
            .map(|i| {
                let u = grid_point(&grid.u_range, grid.width, i);
                let pattern_id = classify(arch, slice, &u, &v);
                RegionCell { u, v: v.clone(), pattern_id }
            })
            .collect::<Vec<_>>()
    });
    Ok(RegionScan {
        width: grid.width,
        height: grid.height,
        cells: rows.into_iter().flatten().collect(),
    })
}

fn classify(arch: &Architecture, slice: &Slice, u: &Q, v: &Q) -> String {
    match slice {
        Slice::Input {
            theta,
            origin,
            dir_u,
            dir_v,
        } => {
            let x = affine(origin, dir_u, dir_v, u, v);
            let (_, pattern, boundary) = forward_with_zeros(arch, theta, &x);
            if boundary {
                BOUNDARY_ID.to_string()
            } else {
                pattern_id([&pattern])
            }
        }
        Slice::Parameter {
            theta0,
            dir_u,
            dir_v,
            data,
        } => {
            let flat = affine(theta0, dir_u, dir_v, u, v);
            let theta = ParamAssignment::from_flat(arch, &flat).expect("length checked");
            let mut patterns = Vec::with_capacity(data.cols());
            for c in 0..data.cols() {
                let (_, pattern, boundary) = forward_with_zeros(arch, &theta, &data.column(c));
                if boundary {
                    return BOUNDARY_ID.to_string();
                }
                patterns.push(pattern);
            }
            pattern_id(&patterns)
        }
    }
}

/// Symmetric grid over `[-r, r]^2`.
pub fn square_grid(width: usize, height: usize, r: i64) -> Grid {
    Grid {
        width,
        height,
        u_range: (q(-r), q(r)),
        v_range: (q(-r), q(r)),
    }
}
