use num_traits::{One, Zero};

use crate::error::Result;
use crate::linalg::RationalMatrix;
use crate::model::types::{Architecture, ParamAssignment, PathSet, Pattern};
use crate::rational::Q;

/// All tuples over the given per-layer index sets, in lexicographic order.
fn product_paths(choices: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        out = out
            .into_iter()
            .flat_map(|p| {
                c.iter().map(move |&i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every path of the architecture, lexicographically ordered.
pub fn all_paths(arch: &Architecture) -> Vec<Vec<usize>> {
    let choices: Vec<Vec<usize>> = arch.hidden_widths().iter().map(|&w| (0..w).collect()).collect();
    product_paths(&choices)
}

/// Paths whose every neuron is active under `A`.
pub fn enumerate_active_paths(arch: &Architecture, a: &Pattern) -> Result<PathSet> {
    a.check(arch)?;
    let choices: Vec<Vec<usize>> = a
        .layers()
        .iter()
        .map(|l| l.iter().enumerate().filter(|(_, &on)| on).map(|(i, _)| i).collect())
        .collect();
    Ok(PathSet::new(product_paths(&choices)))
}

/// Path-sum matrix restricted to `P`:
/// `M_ij = sum_p W^(L)_{i p_{L-1}} ... W^(2)_{p_2 p_1} W^(1)_{p_1 j}`.
pub fn path_matrix(arch: &Architecture, theta: &ParamAssignment, p: &PathSet) -> Result<RationalMatrix> {
    theta.check(arch)?;
    p.check(arch)?;
    let depth = arch.depth();
    let w = &theta.weights;
    let mut m = RationalMatrix::zeros(arch.output_dim(), arch.input_dim());
    for path in p.iter() {
        if path.is_empty() {
            m = &m + &w[0];
            continue;
        }
        let mut scalar = Q::one();
        for l in 1..depth - 1 {
            scalar *= w[l].get(path[l], path[l - 1]);
        }
        if scalar.is_zero() {
            continue;
        }
        let first = path[0];
        let last = path[depth - 2];
        for i in 0..m.rows() {
            let left = w[depth - 1].get(i, last) * &scalar;
            if left.is_zero() {
                continue;
            }
            for j in 0..m.cols() {
                let v = m.get(i, j) + &left * w[0].get(first, j);
                m.set(i, j, v);
            }
        }
    }
    Ok(m)
}

/// `(n_0, n_1^A, ..., n_{L-1}^A, n_L)` where `n_l^A` counts active units.
pub fn effective_widths(arch: &Architecture, a: &Pattern) -> Result<Vec<usize>> {
    a.check(arch)?;
    let mut out = vec![arch.input_dim()];
    out.extend((1..arch.depth()).map(|l| a.active_count(l)));
    out.push(arch.output_dim());
    Ok(out)
}

/// Generic rank of the masked product: the smallest effective width.
pub fn width_rank(arch: &Architecture, a: &Pattern) -> Result<usize> {
    Ok(effective_widths(arch, a)?.into_iter().min().unwrap_or(0))
}

/// Indicator of the active paths over [`all_paths`] order. For one hidden
/// layer this is the activation vector itself.
pub fn path_indicator(arch: &Architecture, a: &Pattern) -> Result<Vec<Q>> {
    a.check(arch)?;
    Ok(all_paths(arch)
        .iter()
        .map(|p| {
            let on = p.iter().enumerate().all(|(l, &i)| a.layers()[l][i]);
            if on {
                Q::one()
            } else {
                Q::zero()
            }
        })
        .collect())
}
