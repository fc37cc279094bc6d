//! Functional dimension from exact Jacobian ranks, and the closed-form
//! expected dimensions for one hidden layer.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank_exact, RationalMatrix};
use crate::model::{Architecture, BlockPattern, ParamAssignment, Pattern};
use crate::par::map_range;
use crate::verify::{sample_params, SampleSpec};

fn mask_rows(m: &mut RationalMatrix, mask: &[bool]) {
    for (i, &on) in mask.iter().enumerate() {
        if !on {
            for j in 0..m.cols() {
                m.set(i, j, Zero::zero());
            }
        }
    }
}

fn mask_cols(m: &mut RationalMatrix, mask: &[bool]) {
    for (j, &on) in mask.iter().enumerate() {
        if !on {
            for i in 0..m.rows() {
                m.set(i, j, Zero::zero());
            }
        }
    }
}

/// Row offset of layer `l` (1-based) in the flat weight ordering.
fn layer_offsets(arch: &Architecture) -> Vec<usize> {
    let w = arch.widths();
    let mut out = vec![0];
    for l in 1..w.len() {
        out.push(out[l - 1] + w[l] * w[l - 1]);
    }
    out
}

/// Jacobian of `θ -> [M_1(θ) | ... | M_k(θ)]` with respect to the weights.
///
/// Rows follow the weights layer by layer in row-major order; columns list
/// the entries of each `M_i` column by column, block after block. With
/// `M = Left_l W^(l) Right_l`, the derivative of `M_pq` in `w^(l)_ab` is
/// `Left_l[p, a] * Right_l[b, q]`.
pub fn jacobian(arch: &Architecture, patterns: &BlockPattern, theta: &ParamAssignment) -> Result<RationalMatrix> {
    if arch.has_bias() {
        return Err(Error::Unsupported("dimension analysis covers bias-free networks only".into()));
    }
    theta.check(arch)?;
    patterns.check(arch)?;
    let w = arch.widths();
    let depth = arch.depth();
    let (n0, n_out) = (arch.input_dim(), arch.output_dim());
    let per_block = n0 * n_out;
    let offsets = layer_offsets(arch);
    let mut jac = RationalMatrix::zeros(arch.weight_count(), patterns.len() * per_block);
    for (blk, a) in patterns.blocks.iter().enumerate() {
        // right[l] = D_{l-1} W^(l-1) ... D_1 W^(1), shape n_{l-1} x n_0
        let mut right = vec![RationalMatrix::identity(n0)];
        for l in 1..depth {
            let mut next = &theta.weights[l - 1] * &right[l - 1];
            mask_rows(&mut next, a.layer(l));
            right.push(next);
        }
        // left[l] = W^(L) D_{L-1} ... W^(l+1) D_l, shape n_L x n_l
        let mut left = vec![RationalMatrix::zeros(0, 0); depth];
        left[depth - 1] = RationalMatrix::identity(n_out);
        for l in (1..depth).rev() {
            let mut next = &left[l] * &theta.weights[l];
            mask_cols(&mut next, a.layer(l));
            left[l - 1] = next;
        }
        for l in 1..=depth {
            let (lm, rm) = (&left[l - 1], &right[l - 1]);
            for a_idx in 0..w[l] {
                for b_idx in 0..w[l - 1] {
                    let row = offsets[l - 1] + a_idx * w[l - 1] + b_idx;
                    for q in 0..n0 {
                        let rv = rm.get(b_idx, q);
                        if rv.is_zero() {
                            continue;
                        }
                        for p in 0..n_out {
                            let lv = lm.get(p, a_idx);
                            if !lv.is_zero() {
                                jac.set(row, blk * per_block + q * n_out + p, lv * rv);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// Dimension of the variety of rank-`<= w` matrices of size `n2 x n0`.
pub fn linear_model_dimension(w: usize, n0: usize, n2: usize) -> usize {
    let r = w.min(n0).min(n2);
    r * (n0 + n2) - r * r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoBlockDimensions {
    pub d_a: usize,
    pub d_b: usize,
    pub d_c: usize,
    /// `min(d_a + d_b + d_c, 2 n_0 n_2)`.
    pub expected: usize,
}

fn shallow_pair(arch: &Architecture, a1: &Pattern, a2: &Pattern) -> Result<(usize, usize, usize)> {
    if arch.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "closed-form dimensions need L = 2, got L = {}",
            arch.depth()
        )));
    }
    a1.check(arch)?;
    a2.check(arch)?;
    let (l1, l2) = (a1.layer(1), a2.layer(1));
    let r1 = l1.iter().filter(|&&b| b).count();
    let r2 = l2.iter().filter(|&&b| b).count();
    let s = l1.iter().zip(l2).filter(|(&x, &y)| x && y).count();
    Ok((r1, r2, s))
}

/// `d_a + d_b + d_c` from the neurons active only in block 1, only in
/// block 2, and in both. Each term is the dimension of the corresponding
/// full linear model, so widths beyond `min(n_0, n_2)` are capped there.
pub fn expected_dimension_two_block(arch: &Architecture, a1: &Pattern, a2: &Pattern) -> Result<TwoBlockDimensions> {
    let (r1, r2, s) = shallow_pair(arch, a1, a2)?;
    let (n0, n2) = (arch.input_dim(), arch.output_dim());
    let d_a = linear_model_dimension(r1 - s, n0, n2);
    let d_b = linear_model_dimension(r2 - s, n0, n2);
    let d_c = linear_model_dimension(s, n0, n2);
    Ok(TwoBlockDimensions {
        d_a,
        d_b,
        d_c,
        expected: (d_a + d_b + d_c).min(2 * n0 * n2),
    })
}

/// `(lower, upper)` with lower `max(dim_1 + d_b, dim_2 + d_a)` where `dim_i`
/// is the single-block dimension of block `i`, and upper the expected dimension.
pub fn dimension_bounds(arch: &Architecture, a1: &Pattern, a2: &Pattern) -> Result<(usize, usize)> {
    let (r1, r2, _) = shallow_pair(arch, a1, a2)?;
    let d = expected_dimension_two_block(arch, a1, a2)?;
    let (n0, n2) = (arch.input_dim(), arch.output_dim());
    let lower = (linear_model_dimension(r1, n0, n2) + d.d_b).max(linear_model_dimension(r2, n0, n2) + d.d_a);
    Ok((lower.min(d.expected), d.expected))
}

/// Hidden neurons grouped by the set of blocks in which they are active
/// (the sets `C_I`), keyed by the sorted block indices.
pub fn neuron_classes(arch: &Architecture, patterns: &BlockPattern) -> Result<BTreeMap<Vec<usize>, Vec<usize>>> {
    if arch.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "neuron classes need L = 2, got L = {}",
            arch.depth()
        )));
    }
    patterns.check(arch)?;
    let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for n in 0..arch.widths()[1] {
        let members: Vec<usize> = (0..patterns.len()).filter(|&i| patterns.blocks[i].layer(1)[n]).collect();
        classes.entry(members).or_default().push(n);
    }
    Ok(classes)
}

/// `sum_{I nonempty} dim(linear model of width |C_I|)`, capped at the ambient
/// dimension. Neurons dead in every block contribute nothing.
pub fn expected_dimension_multi_block(arch: &Architecture, patterns: &BlockPattern) -> Result<usize> {
    let classes = neuron_classes(arch, patterns)?;
    let (n0, n2) = (arch.input_dim(), arch.output_dim());
    let total: usize = classes
        .iter()
        .filter(|(members, _)| !members.is_empty())
        .map(|(_, neurons)| linear_model_dimension(neurons.len(), n0, n2))
        .sum();
    Ok(total.min(patterns.len() * n0 * n2))
}

/// Jacobian rows of one neuron class: its row of `W^(1)` and column of `W^(2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowGroup {
    /// Blocks in which the neurons are active.
    pub blocks: Vec<usize>,
    pub neurons: Vec<usize>,
    pub rank: usize,
}

fn row_groups(arch: &Architecture, patterns: &BlockPattern, jac: &RationalMatrix) -> Result<Vec<RowGroup>> {
    let classes = neuron_classes(arch, patterns)?;
    let (n0, n1) = (arch.input_dim(), arch.widths()[1]);
    let offset2 = n1 * n0;
    let n2 = arch.output_dim();
    Ok(classes
        .into_iter()
        .filter(|(members, _)| !members.is_empty())
        .map(|(blocks, neurons)| {
            let mut rows = Vec::new();
            for &n in &neurons {
                rows.extend((0..n0).map(|b| n * n0 + b));
                rows.extend((0..n2).map(|p| offset2 + p * n1 + n));
            }
            let cols: Vec<usize> = (0..jac.cols()).collect();
            let rank = rank_exact(&jac.submatrix(&rows, &cols));
            RowGroup { blocks, neurons, rank }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub jacobian_rank: usize,
    /// `k n_L n_0`.
    pub ambient_dim: usize,
    pub param_dim: usize,
    pub samples_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agrees: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<TwoBlockDimensions>,
    /// Ranks of the per-class row groups at the first sample reaching the maximum rank.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_groups: Vec<RowGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Maximum Jacobian rank over the samples, plus the closed-form values when
/// the network has one hidden layer.
pub fn functional_dimension(arch: &Architecture, patterns: &BlockPattern, spec: &SampleSpec) -> Result<DimensionReport> {
    if arch.has_bias() {
        return Err(Error::Unsupported("dimension analysis covers bias-free networks only".into()));
    }
    patterns.check(arch)?;
    let ranks = map_range(spec.execution, spec.num_samples, |i| {
        jacobian(arch, patterns, &sample_params(arch, spec, i)).map(|j| rank_exact(&j))
    });
    let ranks: Vec<usize> = ranks.into_iter().collect::<Result<_>>()?;
    let jacobian_rank = ranks.iter().copied().max().unwrap_or(0);
    let mut report = DimensionReport {
        jacobian_rank,
        ambient_dim: patterns.len() * arch.input_dim() * arch.output_dim(),
        param_dim: arch.weight_count(),
        samples_used: ranks.len(),
        expected: None,
        lower_bound: None,
        upper_bound: None,
        agrees: None,
        components: None,
        row_groups: Vec::new(),
        warnings: Vec::new(),
    };
    if arch.depth() == 2 {
        let expected = expected_dimension_multi_block(arch, patterns)?;
        report.expected = Some(expected);
        report.agrees = Some(expected == jacobian_rank);
        if patterns.len() == 2 {
            let (a1, a2) = (&patterns.blocks[0], &patterns.blocks[1]);
            let comps = expected_dimension_two_block(arch, a1, a2)?;
            let (lower, upper) = dimension_bounds(arch, a1, a2)?;
            report.components = Some(comps);
            report.lower_bound = Some(lower);
            report.upper_bound = Some(upper);
            report.warnings.push(
                "lower bound uses d_b in its first term; the published statement writes d_2 there".to_string(),
            );
        }
        let best = ranks.iter().position(|&r| r == jacobian_rank).unwrap_or(0);
        let jac = jacobian(arch, patterns, &sample_params(arch, spec, best))?;
        report.row_groups = row_groups(arch, patterns, &jac)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::masked_matrix;
    use crate::rational::{q, Q};

    fn flat_outputs(arch: &Architecture, bp: &BlockPattern, theta: &ParamAssignment) -> Vec<Q> {
        let mut out = Vec::new();
        for a in &bp.blocks {
            let m = masked_matrix(arch, theta, a).unwrap().0;
            for c in 0..m.cols() {
                out.extend(m.column(c));
            }
        }
        out
    }

    #[test]
    fn jacobian_matches_divided_differences() {
        let arch = Architecture::plain(&[2, 3, 2, 2]);
        let bp = BlockPattern::new(vec![
            Pattern::from_bits(&[&[1, 1, 0], &[1, 1]]),
            Pattern::from_bits(&[&[0, 1, 1], &[1, 0]]),
        ])
        .unwrap();
        let spec = SampleSpec::new(3, 3, 5);
        for i in 0..3 {
            let theta = sample_params(&arch, &spec, i);
            let jac = jacobian(&arch, &bp, &theta).unwrap();
            let base = flat_outputs(&arch, &bp, &theta);
            let flat = theta.to_flat();
            for p in 0..flat.len() {
                let mut bumped = flat.clone();
                bumped[p] += q(1);
                let moved = flat_outputs(&arch, &bp, &ParamAssignment::from_flat(&arch, &bumped).unwrap());
                for c in 0..base.len() {
                    assert_eq!(jac.get(p, c), &(&moved[c] - &base[c]));
                }
            }
        }
    }

    #[test]
    fn two_block_formulas() {
        let arch = Architecture::plain(&[4, 4, 4]);
        let a1 = Pattern::from_bits(&[&[1, 1, 1, 0]]);
        let a2 = Pattern::from_bits(&[&[0, 1, 1, 1]]);
        let d = expected_dimension_two_block(&arch, &a1, &a2).unwrap();
        assert_eq!((d.d_a, d.d_b, d.d_c, d.expected), (7, 7, 12, 26));
        assert_eq!(dimension_bounds(&arch, &a1, &a2).unwrap(), (22, 26));
        let bp = BlockPattern::new(vec![a1, a2]).unwrap();
        assert_eq!(expected_dimension_multi_block(&arch, &bp).unwrap(), 26);
    }

    #[test]
    fn single_full_block() {
        let arch = Architecture::plain(&[4, 2, 3]);
        let bp = BlockPattern::new(vec![Pattern::all_active(&arch)]).unwrap();
        let rep = functional_dimension(&arch, &bp, &SampleSpec::default().with_samples(3)).unwrap();
        assert_eq!(rep.jacobian_rank, 2 * 7 - 4);
        assert_eq!(rep.expected, Some(10));
    }

    #[test]
    fn bias_is_rejected() {
        let arch = Architecture::new(vec![2, 2, 2], true).unwrap();
        let bp = BlockPattern::new(vec![Pattern::all_active(&arch)]).unwrap();
        assert!(matches!(
            functional_dimension(&arch, &bp, &SampleSpec::default()),
            Err(Error::Unsupported(_))
        ));
    }

    fn shallow(widths: &[usize], blocks: &[&[u8]]) -> (Architecture, BlockPattern) {
        let arch = Architecture::plain(widths);
        let bp = BlockPattern::new(blocks.iter().map(|b| Pattern::from_bits(&[b])).collect()).unwrap();
        (arch, bp)
    }

    #[test]
    fn generic_dimension_reaches_expected() {
        let (arch, bp) = shallow(&[4, 4, 4], &[&[1, 1, 1, 0], &[0, 1, 1, 1]]);
        let rep = functional_dimension(&arch, &bp, &SampleSpec::default().with_samples(4)).unwrap();
        assert_eq!((rep.jacobian_rank, rep.agrees), (26, Some(true)));
        assert_eq!((rep.lower_bound, rep.upper_bound), (Some(22), Some(26)));
    }

    #[test]
    fn dimension_defect_below_expected() {
        let (arch, bp) = shallow(&[3, 4, 3], &[&[1, 1, 1, 0], &[0, 1, 1, 1]]);
        let rep = functional_dimension(&arch, &bp, &SampleSpec::default().with_samples(4)).unwrap();
        assert_eq!(rep.expected, Some(18));
        assert_eq!(rep.jacobian_rank, 17);
        assert_eq!(rep.agrees, Some(false));
    }

    #[test]
    fn three_blocks_split_into_classes() {
        let (arch, bp) = shallow(&[4, 5, 5], &[&[1, 0, 0, 1, 1], &[0, 1, 0, 1, 1], &[0, 0, 1, 0, 1]]);
        let rep = functional_dimension(&arch, &bp, &SampleSpec::default().with_samples(4)).unwrap();
        assert_eq!((rep.jacobian_rank, rep.expected, rep.ambient_dim), (40, Some(40), 60));
        assert_eq!(rep.row_groups.len(), 5);
        assert!(rep.row_groups.iter().all(|g| g.rank == 8));
    }
}
