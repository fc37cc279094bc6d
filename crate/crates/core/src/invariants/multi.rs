use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::invariants::constraint::{m_shapes, Cell, RankConstraint, Symbol};
use crate::model::{path_indicator, Architecture, BlockPattern};
use crate::rational::{q, Q};

fn check_lambda(patterns: &BlockPattern, lambda: &[i64]) -> Result<()> {
    if lambda.len() != patterns.len() {
        return Err(Error::Shape(format!(
            "coefficient vector has length {}, there are {} blocks",
            lambda.len(),
            patterns.len()
        )));
    }
    Ok(())
}

/// `sum_i lambda_i Q_{A_i}` over all paths; for one hidden layer this is
/// `sum_i lambda_i A_i` over neurons.
pub fn combination_vector(arch: &Architecture, patterns: &BlockPattern, lambda: &[i64]) -> Result<Vec<Q>> {
    patterns.check(arch)?;
    check_lambda(patterns, lambda)?;
    let mut v = vec![Q::zero(); arch.path_count()];
    for (a, &l) in patterns.blocks.iter().zip(lambda) {
        if l == 0 {
            continue;
        }
        for (x, ind) in v.iter_mut().zip(path_indicator(arch, a)?) {
            *x += ind * q(l);
        }
    }
    Ok(v)
}

fn support_set(v: &[Q]) -> BTreeSet<usize> {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, _)| i).collect()
}

fn lambda_cell(lambda: &[i64]) -> Cell {
    Cell::combination(&lambda.iter().map(|&l| q(l)).collect::<Vec<_>>())
}

fn lin_comb(arch: &Architecture, patterns: &BlockPattern, lambda: &[i64], label: &str, cap: usize) -> Result<RankConstraint> {
    let v = combination_vector(arch, patterns, lambda)?;
    let bound = support_set(&v).len();
    let shapes = m_shapes(patterns.len(), arch.output_dim(), arch.input_dim());
    RankConstraint::single(label, Symbol::M, lambda_cell(lambda), &shapes, bound, cap)
}

/// `rank(sum_i lambda_i M_i) <= |supp(sum_i lambda_i A_i)|` for one hidden layer.
pub fn lin_comb_constraint(arch: &Architecture, patterns: &BlockPattern, lambda: &[i64], cap: usize) -> Result<RankConstraint> {
    if arch.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "neuron-support bound needs L = 2, got L = {}; use the path-support bound",
            arch.depth()
        )));
    }
    lin_comb(arch, patterns, lambda, "lincomb", cap)
}

/// `rank(sum_i lambda_i M_i) <= |supp(sum_i lambda_i Q_{A_i})|` for any depth.
pub fn deep_lin_comb_constraint(
    arch: &Architecture,
    patterns: &BlockPattern,
    lambda: &[i64],
    cap: usize,
) -> Result<RankConstraint> {
    lin_comb(arch, patterns, lambda, "lincomb-deep", cap)
}

/// Scales to coprime entries with the first nonzero entry positive.
pub fn canonical_lambda(lambda: &[i64]) -> Vec<i64> {
    let g = lambda.iter().fold(0i64, |acc, &x| acc.gcd(&x));
    if g == 0 {
        return lambda.to_vec();
    }
    let sign = lambda.iter().find(|&&x| x != 0).map_or(1, |x| x.signum());
    lambda.iter().map(|&x| x / g * sign).collect()
}

/// Coefficient vectors in `[-coeff_bound, coeff_bound]^k`, up to scaling,
/// whose combination has support of size at most `max_support` and is not
/// dominated: no other candidate's nonempty support is a strict subset of
/// its support. Combinations with empty support are always kept. Ordered by
/// support size, then lexicographically in decreasing coefficient order.
pub fn search_sparse_lambdas(
    arch: &Architecture,
    patterns: &BlockPattern,
    coeff_bound: i64,
    max_support: usize,
) -> Result<Vec<Vec<i64>>> {
    patterns.check(arch)?;
    let k = patterns.len();
    let b = coeff_bound.max(1);
    let indicators: Vec<Vec<Q>> = patterns
        .blocks
        .iter()
        .map(|a| path_indicator(arch, a))
        .collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    let mut candidates: Vec<(Vec<i64>, BTreeSet<usize>)> = Vec::new();
    let mut lambda = vec![-b; k];
    loop {
        if lambda.iter().any(|&x| x != 0) {
            let c = canonical_lambda(&lambda);
            if seen.insert(c.clone()) {
                let mut v = vec![Q::zero(); indicators[0].len()];
                for (ind, &l) in indicators.iter().zip(&c) {
                    for (x, y) in v.iter_mut().zip(ind) {
                        *x += y * q(l);
                    }
                }
                let supp = support_set(&v);
                if supp.len() <= max_support {
                    candidates.push((c, supp));
                }
            }
        }
        // odometer over [-b, b]^k
        let mut i = 0;
        while i < k && lambda[i] == b {
            lambda[i] = -b;
            i += 1;
        }
        if i == k {
            break;
        }
        lambda[i] += 1;
    }
    let kept: Vec<&(Vec<i64>, BTreeSet<usize>)> = candidates
        .iter()
        .filter(|(_, s)| {
            s.is_empty()
                || !candidates
                    .iter()
                    .any(|(_, o)| !o.is_empty() && o.len() < s.len() && o.is_subset(s))
        })
        .collect();
    let mut out: Vec<(usize, Vec<i64>)> = kept.into_iter().map(|(l, s)| (s.len(), l.clone())).collect();
    out.sort_by(|(sa, la), (sb, lb)| sa.cmp(sb).then_with(|| lb.cmp(la)));
    Ok(out.into_iter().map(|(_, l)| l).collect())
}

/// Checks that cells in different block rows and different block columns
/// never share a combination.
pub fn check_layout(layout: &[Vec<usize>], n_lambdas: usize) -> Result<()> {
    if layout.is_empty() || layout[0].is_empty() {
        return Err(Error::Layout("layout is empty".into()));
    }
    let beta = layout[0].len();
    if layout.iter().any(|r| r.len() != beta) {
        return Err(Error::Layout("layout rows have different lengths".into()));
    }
    if let Some(&bad) = layout.iter().flatten().find(|&&i| i >= n_lambdas) {
        return Err(Error::Layout(format!("cell refers to combination {bad} of {n_lambdas}")));
    }
    for (j1, r1) in layout.iter().enumerate() {
        for (j2, r2) in layout.iter().enumerate().skip(j1 + 1) {
            for (k1, &x) in r1.iter().enumerate() {
                for (k2, &y) in r2.iter().enumerate() {
                    if k1 != k2 && x == y {
                        return Err(Error::Layout(format!(
                            "combination {x} appears at ({j1},{k1}) and ({j2},{k2}), in different rows and columns"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Rank bound for a block matrix of combinations `T_j`: the part shared by
/// every used `T_j` (paths where all combination vectors carry the same
/// nonzero coefficient) counts once, the rest of each `t_j` once per `j`.
pub fn block_matrix_bound(vectors: &[Vec<Q>], used: &[usize]) -> usize {
    let first = &vectors[used[0]];
    let common: BTreeSet<usize> = (0..first.len())
        .filter(|&p| !first[p].is_zero() && used.iter().all(|&j| vectors[j][p] == first[p]))
        .collect();
    common.len()
        + used
            .iter()
            .map(|&j| support_set(&vectors[j]).difference(&common).count())
            .sum::<usize>()
}

pub fn block_matrix_constraint(
    arch: &Architecture,
    patterns: &BlockPattern,
    lambdas: &[Vec<i64>],
    layout: &[Vec<usize>],
    cap: usize,
) -> Result<RankConstraint> {
    check_layout(layout, lambdas.len())?;
    let vectors: Vec<Vec<Q>> = lambdas
        .iter()
        .map(|l| combination_vector(arch, patterns, l))
        .collect::<Result<_>>()?;
    let used: Vec<usize> = layout.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let bound = block_matrix_bound(&vectors, &used);
    let grid: Vec<Vec<Cell>> = layout
        .iter()
        .map(|row| row.iter().map(|&i| lambda_cell(&lambdas[i])).collect())
        .collect();
    let shapes = m_shapes(patterns.len(), arch.output_dim(), arch.input_dim());
    RankConstraint::new("block-T", Symbol::M, grid, &shapes, bound, cap)
}

/// Layouts up to `max_rows x max_cols` over `n` combinations satisfying the
/// distinctness rule, excluding single cells, one representative per orbit
/// under block-row and block-column permutations.
pub fn enumerate_layouts(n: usize, max_rows: usize, max_cols: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = BTreeSet::new();
    if n == 0 {
        return Vec::new();
    }
    for alpha in 1..=max_rows {
        for beta in 1..=max_cols {
            if alpha * beta < 2 {
                continue;
            }
            let cells = alpha * beta;
            let total = (n as u64).checked_pow(cells as u32).unwrap_or(u64::MAX);
            if total > 1_000_000 {
                continue;
            }
            let mut idx = vec![0usize; cells];
            loop {
                let layout: Vec<Vec<usize>> = idx.chunks(beta).map(|c| c.to_vec()).collect();
                if check_layout(&layout, n).is_ok() {
                    out.insert(canonical_layout(&layout));
                }
                let mut done = true;
                for i in (0..cells).rev() {
                    if idx[i] + 1 < n {
                        idx[i] += 1;
                        idx[i + 1..].iter_mut().for_each(|x| *x = 0);
                        done = false;
                        break;
                    }
                }
                if done {
                    break;
                }
            }
        }
    }
    out.into_iter().collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn canonical_layout(layout: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let rows = permutations(layout.len());
    let cols = permutations(layout[0].len());
    rows.iter()
        .flat_map(|rp| {
            cols.iter()
                .map(move |cp| rp.iter().map(|&r| cp.iter().map(|&c| layout[r][c]).collect()).collect())
        })
        .min()
        .expect("at least one permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pattern;

    fn three_blocks() -> (Architecture, BlockPattern) {
        let arch = Architecture::plain(&[3, 4, 3]);
        let bp = BlockPattern::new(vec![
            Pattern::from_bits(&[&[1, 1, 0, 0]]),
            Pattern::from_bits(&[&[1, 0, 1, 0]]),
            Pattern::from_bits(&[&[1, 0, 0, 1]]),
        ])
        .unwrap();
        (arch, bp)
    }

    #[test]
    fn lambda_search_finds_sparse_combinations() {
        let (arch, bp) = three_blocks();
        let found = search_sparse_lambdas(&arch, &bp, 1, 4).unwrap();
        let expected: Vec<Vec<i64>> = vec![
            vec![1, 0, 0],
            vec![1, 0, -1],
            vec![1, -1, 0],
            vec![0, 1, 0],
            vec![0, 1, -1],
            vec![0, 0, 1],
        ];
        let got: BTreeSet<_> = found.iter().cloned().collect();
        assert_eq!(got, expected.into_iter().collect());
        assert_eq!(found.len(), 6);
    }

    #[test]
    fn scaling_collapses() {
        assert_eq!(canonical_lambda(&[2, -4, 0]), vec![1, -2, 0]);
        assert_eq!(canonical_lambda(&[0, -3, 6]), vec![0, 1, -2]);
        let arch = Architecture::plain(&[2, 2, 2]);
        let bp = BlockPattern::new(vec![Pattern::from_bits(&[&[1, 0]])]).unwrap();
        assert_eq!(search_sparse_lambdas(&arch, &bp, 2, 2).unwrap(), vec![vec![1]]);
    }

    #[test]
    fn lin_comb_bounds() {
        let (arch, bp) = three_blocks();
        let c = lin_comb_constraint(&arch, &bp, &[1, -1, 0], 100).unwrap();
        assert_eq!((c.bound, c.counts.minors), (2, 1));
        let c = lin_comb_constraint(&arch, &bp, &[1, 0, 0], 100).unwrap();
        assert_eq!(c.bound, 2);
    }

    #[test]
    fn block_matrix_with_shared_neuron() {
        let (arch, bp) = three_blocks();
        let lambdas = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        let c = block_matrix_constraint(&arch, &bp, &lambdas, &[vec![0, 1], vec![2, 1]], 10_000).unwrap();
        assert_eq!(c.bound, 4);
        assert_eq!((c.rows(), c.cols()), (6, 6));
        assert_eq!(c.counts.minors, 36);
        let same = block_matrix_constraint(&arch, &bp, &lambdas, &[vec![0, 0, 0]], 10).unwrap();
        assert_eq!(same.bound, 2);
        let one = block_matrix_constraint(&arch, &bp, &lambdas, &[vec![1]], 10).unwrap();
        assert_eq!(one.bound, lin_comb_constraint(&arch, &bp, &[0, 1, 0], 10).unwrap().bound);
    }

    #[test]
    fn layout_rule() {
        assert!(check_layout(&[vec![0, 1], vec![2, 1]], 3).is_ok());
        assert!(matches!(check_layout(&[vec![0, 1], vec![1, 2]], 3), Err(Error::Layout(_))));
        assert!(matches!(check_layout(&[vec![0, 3]], 3), Err(Error::Layout(_))));
        let layouts = enumerate_layouts(3, 2, 2);
        assert!(layouts.contains(&canonical_layout(&[vec![0, 1], vec![2, 1]])));
        assert!(layouts.iter().all(|l| check_layout(l, 3).is_ok()));
    }
}
