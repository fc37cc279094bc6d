//! Randomized exact verification: integer parameter samples, exact ranks,
//! and exact vanishing checks.

mod sample;

use serde::{Deserialize, Serialize};

pub use sample::{
    sample_integers, sample_params, SampleSpec, DEFAULT_COEFF_BOUND, DEFAULT_RANK_SAMPLES, DEFAULT_SEED,
    DEFAULT_VERIFY_SAMPLES,
};

use crate::error::{Error, Result};
use crate::invariants::{LinearRelation, RankConstraint, Symbol};
use crate::linalg::{minor_value, rank_exact, MinorIndex, RationalMatrix};
use crate::model::{masked_unchecked, path_matrix, Architecture, BlockPattern, ParamAssignment, PathSet, Pattern};
use crate::par::map_range;
use crate::poly::Polynomial;
use num_traits::Zero;

/// Outcome of checking a rank bound (or a set of vanishing conditions) on
/// every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    /// For rank checks the largest exact rank seen; for vanishing checks the
    /// largest number of items that failed to vanish on one sample.
    pub max_rank_observed: usize,
    pub bound: usize,
    /// `max_rank_observed == bound`.
    pub tight: bool,
    pub samples_used: usize,
    pub violations: usize,
    /// Sample index (the stream id under `master_seed`) of the first violation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation_seed: Option<u64>,
}

impl Verdict {
    fn from_observations(bound: usize, observed: &[usize]) -> Self {
        let violations = observed.iter().filter(|&&r| r > bound).count();
        let max = observed.iter().copied().max().unwrap_or(0);
        Verdict {
            holds: violations == 0,
            max_rank_observed: max,
            bound,
            tight: max == bound,
            samples_used: observed.len(),
            violations,
            first_violation_seed: observed.iter().position(|&r| r > bound).map(|i| i as u64),
        }
    }
}

/// Maximum exact rank of `f(θ)` over the samples of `spec`.
pub fn generic_rank_with<F>(arch: &Architecture, spec: &SampleSpec, f: F) -> Result<usize>
where
    F: Fn(&ParamAssignment) -> Result<RationalMatrix> + Sync + Send,
{
    let ranks = map_range(spec.execution, spec.num_samples, |i| {
        f(&sample_params(arch, spec, i)).map(|m| rank_exact(&m))
    });
    ranks.into_iter().try_fold(0, |acc, r| Ok(acc.max(r?)))
}

/// Generic rank of the masked product of one pattern.
pub fn generic_rank_pattern(arch: &Architecture, a: &Pattern, spec: &SampleSpec) -> Result<usize> {
    a.check(arch)?;
    generic_rank_with(arch, spec, |theta| Ok(masked_unchecked(arch, theta, a).0))
}

/// Generic rank of a path network.
pub fn generic_rank_paths(arch: &Architecture, paths: &PathSet, spec: &SampleSpec) -> Result<usize> {
    paths.check(arch)?;
    generic_rank_with(arch, spec, |theta| path_matrix(arch, theta, paths))
}

/// Generic rank of a constraint's matrix expression.
pub fn generic_rank_constraint(
    c: &RankConstraint,
    arch: &Architecture,
    patterns: &BlockPattern,
    data: Option<&[RationalMatrix]>,
    spec: &SampleSpec,
) -> Result<usize> {
    patterns.check(arch)?;
    generic_rank_with(arch, spec, |theta| eval_constraint_matrix(c, arch, patterns, theta, data))
}

/// What to estimate a generic rank of.
#[derive(Debug, Clone, Copy)]
pub enum RankTarget<'a> {
    Constraint(&'a RankConstraint),
    Paths(&'a PathSet),
    Pattern(&'a Pattern),
}

pub fn generic_rank(
    target: RankTarget<'_>,
    arch: &Architecture,
    patterns: &BlockPattern,
    data: Option<&[RationalMatrix]>,
    spec: &SampleSpec,
) -> Result<usize> {
    match target {
        RankTarget::Constraint(c) => generic_rank_constraint(c, arch, patterns, data, spec),
        RankTarget::Paths(p) => generic_rank_paths(arch, p, spec),
        RankTarget::Pattern(a) => generic_rank_pattern(arch, a, spec),
    }
}

/// `Y_i = M_i X_i + b_i 1^T` for every block.
pub fn output_blocks(
    arch: &Architecture,
    theta: &ParamAssignment,
    patterns: &BlockPattern,
    data: &[RationalMatrix],
) -> Result<Vec<RationalMatrix>> {
    if data.len() != patterns.len() {
        return Err(Error::Shape(format!("{} data blocks for {} patterns", data.len(), patterns.len())));
    }
    patterns
        .blocks
        .iter()
        .zip(data)
        .map(|(a, x)| {
            let (m, b) = masked_unchecked(arch, theta, a);
            let mut y = m.try_mul(x)?;
            for r in 0..y.rows() {
                for c in 0..y.cols() {
                    let v = y.get(r, c) + &b[r];
                    y.set(r, c, v);
                }
            }
            Ok(y)
        })
        .collect()
}

fn symbol_blocks(
    symbol: Symbol,
    arch: &Architecture,
    theta: &ParamAssignment,
    patterns: &BlockPattern,
    data: Option<&[RationalMatrix]>,
) -> Result<Vec<RationalMatrix>> {
    match symbol {
        Symbol::M => Ok(patterns.blocks.iter().map(|a| masked_unchecked(arch, theta, a).0).collect()),
        Symbol::Y => {
            let data = data.ok_or_else(|| Error::Shape("output-block constraint needs a dataset".into()))?;
            output_blocks(arch, theta, patterns, data)
        }
    }
}

/// The constraint's block matrix at parameters `θ`: `M_i(θ)` or, for output
/// constraints, `Y_i = M_i(θ) X_i (+ b_i)`.
pub fn eval_constraint_matrix(
    c: &RankConstraint,
    arch: &Architecture,
    patterns: &BlockPattern,
    theta: &ParamAssignment,
    data: Option<&[RationalMatrix]>,
) -> Result<RationalMatrix> {
    if let Some(&b) = c.blocks().last() {
        if b >= patterns.len() {
            return Err(Error::Shape(format!(
                "constraint {} refers to block {} of {}",
                c.label,
                b,
                patterns.len()
            )));
        }
    }
    let blocks = symbol_blocks(c.symbol, arch, theta, patterns, data)?;
    c.evaluate(&blocks)
}

/// Checks `rank <= bound` on every sample; any exceedance is a violation.
pub fn check_constraint(
    c: &RankConstraint,
    arch: &Architecture,
    patterns: &BlockPattern,
    data: Option<&[RationalMatrix]>,
    spec: &SampleSpec,
) -> Result<Verdict> {
    patterns.check(arch)?;
    let ranks = map_range(spec.execution, spec.num_samples, |i| {
        let theta = sample_params(arch, spec, i);
        eval_constraint_matrix(c, arch, patterns, &theta, data).map(|m| rank_exact(&m))
    });
    let ranks: Vec<usize> = ranks.into_iter().collect::<Result<_>>()?;
    Ok(Verdict::from_observations(c.bound, &ranks))
}

/// Something that should evaluate to zero on every sample.
#[derive(Debug, Clone)]
pub enum VanishingItem {
    Linear(LinearRelation),
    Poly(Polynomial),
    Minor { constraint: RankConstraint, index: MinorIndex },
}

/// Evaluates every item on every sample and counts samples where some item
/// is nonzero.
pub fn check_vanishing(
    items: &[VanishingItem],
    arch: &Architecture,
    patterns: &BlockPattern,
    data: Option<&[RationalMatrix]>,
    spec: &SampleSpec,
) -> Result<Verdict> {
    patterns.check(arch)?;
    let failures = map_range(spec.execution, spec.num_samples, |i| -> Result<usize> {
        let theta = sample_params(arch, spec, i);
        let mut m_blocks = None;
        let mut y_blocks = None;
        let mut blocks_for = |sym: Symbol| -> Result<Vec<RationalMatrix>> {
            let slot = match sym {
                Symbol::M => &mut m_blocks,
                Symbol::Y => &mut y_blocks,
            };
            if slot.is_none() {
                *slot = Some(symbol_blocks(sym, arch, &theta, patterns, data)?);
            }
            Ok(slot.clone().expect("filled above"))
        };
        let mut nonzero = 0;
        for item in items {
            let v = match item {
                VanishingItem::Linear(rel) => rel.evaluate(&blocks_for(Symbol::Y)?)?,
                VanishingItem::Poly(p) => p.evaluate(&blocks_for(p.symbol)?)?,
                VanishingItem::Minor { constraint, index } => {
                    let m = constraint.evaluate(&blocks_for(constraint.symbol)?)?;
                    minor_value(&m, index)
                }
            };
            if !v.is_zero() {
                nonzero += 1;
            }
        }
        Ok(nonzero)
    });
    let failures: Vec<usize> = failures.into_iter().collect::<Result<_>>()?;
    Ok(Verdict::from_observations(0, &failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{m_shapes, two_block_shallow, Cell};
    use crate::rational::q;

    fn overlapping_444() -> (Architecture, BlockPattern) {
        let arch = Architecture::plain(&[4, 4, 4]);
        let bp = BlockPattern::new(vec![Pattern::from_bits(&[&[1, 1, 1, 0]]), Pattern::from_bits(&[&[0, 1, 1, 1]])]).unwrap();
        (arch, bp)
    }

    #[test]
    fn difference_bound_is_tight() {
        let (arch, bp) = overlapping_444();
        let res = two_block_shallow(&arch, &bp.blocks[0], &bp.blocks[1], 10_000).unwrap();
        let c = res.constraints.iter().find(|c| c.label == "type4-shallow").unwrap();
        let v = check_constraint(c, &arch, &bp, None, &SampleSpec::default()).unwrap();
        assert!(v.holds && v.tight);
        assert_eq!((v.max_rank_observed, v.samples_used), (2, 64));
    }

    #[test]
    fn wrong_bound_fails_on_first_sample() {
        let (arch, bp) = overlapping_444();
        let c = RankConstraint::single("wrong", Symbol::M, Cell::block(0), &m_shapes(2, 4, 4), 2, 10).unwrap();
        let v = check_constraint(&c, &arch, &bp, None, &SampleSpec::default().with_samples(8)).unwrap();
        assert!(!v.holds);
        assert_eq!(v.first_violation_seed, Some(0));
        assert_eq!(v.violations, 8);
    }

    #[test]
    fn equal_patterns_give_zero_difference() {
        let arch = Architecture::plain(&[3, 3, 3]);
        let a = Pattern::from_bits(&[&[1, 0, 1]]);
        let bp = BlockPattern {
            blocks: vec![a.clone(), a],
            multiplicities: None,
        };
        let c = RankConstraint::single("d", Symbol::M, Cell::combination(&[q(1), q(-1)]), &m_shapes(2, 3, 3), 0, 10)
            .unwrap();
        let theta = sample_params(&arch, &SampleSpec::default(), 0);
        assert!(eval_constraint_matrix(&c, &arch, &bp, &theta, None).unwrap().is_zero());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (arch, bp) = overlapping_444();
        let c = RankConstraint::new(
            "cat",
            Symbol::M,
            vec![vec![Cell::block(0), Cell::block(1)]],
            &m_shapes(2, 4, 4),
            3,
            10,
        )
        .unwrap();
        let spec = SampleSpec::default().with_samples(12);
        let a = check_constraint(&c, &arch, &bp, None, &spec.with_execution(crate::par::Execution::Sequential)).unwrap();
        let b = check_constraint(&c, &arch, &bp, None, &spec.with_execution(crate::par::Execution::Parallel)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generic_ranks() {
        let arch = Architecture::plain(&[2, 2, 2, 2, 2]);
        let dead = Pattern::from_bits(&[&[0, 0], &[1, 1], &[1, 1]]);
        assert_eq!(generic_rank_pattern(&arch, &dead, &SampleSpec::default()).unwrap(), 0);
        let paths = PathSet::new(vec![vec![0, 1, 0], vec![1, 1, 0], vec![0, 1, 1]]);
        assert_eq!(generic_rank_paths(&arch, &paths, &SampleSpec::default()).unwrap(), 2);
    }
}
