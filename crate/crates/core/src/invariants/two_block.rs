use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::constraint::{m_shapes, Cell, RankConstraint, Symbol};
use crate::linalg::binomial;
use crate::model::{enumerate_active_paths, width_rank, Architecture, BlockPattern, Pattern};
use crate::rational::q;
use crate::verify::{generic_rank_paths, generic_rank_pattern, generic_rank_with, SampleSpec};

/// Rank data for a pair of activation patterns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoBlockStats {
    pub r1: usize,
    pub r2: usize,
    pub s: usize,
    /// Bound on `rank(M_1 - M_2)`, `r_a + r_b`.
    pub t: usize,
    pub r_a: usize,
    pub r_b: usize,
    pub n_min: usize,
    pub l_min_minus: usize,
    pub l_min_plus: usize,
    pub gate3a: bool,
    pub gate3b: bool,
    /// True when no active path of one block meets an active path of the other.
    pub disjoint_paths: bool,
    /// Sampled generic rank of `M_1 - M_2`, which can be below `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_difference_rank: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipReason {
    /// The bound is at least the smaller side of the matrix.
    Vacuous,
    /// Implied by the single-block constraints.
    Redundant,
    /// The layer-equality condition for this family fails.
    Gated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedConstraint {
    pub label: String,
    pub reason: SkipReason,
    /// Present for vacuous and redundant families, which still hold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<RankConstraint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoBlockAnalysis {
    pub stats: TwoBlockStats,
    pub constraints: Vec<RankConstraint>,
    pub skipped: Vec<SkippedConstraint>,
}

impl TwoBlockAnalysis {
    fn push(&mut self, c: RankConstraint, redundant: bool) {
        if c.is_vacuous() {
            self.skipped.push(SkippedConstraint {
                label: c.label.clone(),
                reason: SkipReason::Vacuous,
                constraint: Some(c),
            });
        } else if redundant {
            let mut c = c;
            c.redundant = true;
            self.skipped.push(SkippedConstraint {
                label: c.label.clone(),
                reason: SkipReason::Redundant,
                constraint: Some(c),
            });
        } else {
            self.constraints.push(c);
        }
    }

    fn gated(&mut self, label: &str) {
        self.skipped.push(SkippedConstraint {
            label: label.to_string(),
            reason: SkipReason::Gated,
            constraint: None,
        });
    }
}

fn support(layer: &[bool]) -> usize {
    layer.iter().filter(|&&b| b).count()
}

fn paths_disjoint(a1: &Pattern, a2: &Pattern) -> bool {
    let empty = a1.layers().iter().any(|l| support(l) == 0) || a2.layers().iter().any(|l| support(l) == 0);
    // two paths meet iff they share a neuron in some layer
    empty
        || a1
            .layers()
            .iter()
            .zip(a2.layers())
            .all(|(x, y)| x.iter().zip(y).all(|(&p, &q)| !(p && q)))
}

fn check_pair(arch: &Architecture, a1: &Pattern, a2: &Pattern) -> Result<()> {
    a1.check(arch)?;
    a2.check(arch)?;
    if arch.depth() < 2 {
        return Err(Error::Unsupported("two-block invariants need at least one hidden layer".into()));
    }
    Ok(())
}

/// Minors of `[B_1 | B_2]` (blocks `rows x cols`) that take at most `cap1`
/// columns from the first block and `cap2` from the second.
fn mixed_minor_count(rows: usize, cols: usize, size: usize, cap1: usize, cap2: usize) -> u64 {
    let col_choices: u64 = (0..=size)
        .filter(|&a| a <= cap1 && size - a <= cap2)
        .map(|a| binomial(cols, a).saturating_mul(binomial(cols, size - a)))
        .fold(0u64, u64::saturating_add);
    binomial(rows, size).saturating_mul(col_choices)
}

fn pair_shapes(arch: &Architecture) -> Vec<(usize, usize)> {
    m_shapes(2, arch.output_dim(), arch.input_dim())
}

/// Invariants of a two-block pattern for a network with one hidden layer.
pub fn two_block_shallow(arch: &Architecture, a1: &Pattern, a2: &Pattern, cap: usize) -> Result<TwoBlockAnalysis> {
    check_pair(arch, a1, a2)?;
    if arch.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "shallow two-block invariants need L = 2, got L = {}",
            arch.depth()
        )));
    }
    let (l1, l2) = (a1.layer(1), a2.layer(1));
    let r1 = support(l1);
    let r2 = support(l2);
    let s = l1.iter().zip(l2).filter(|(&x, &y)| x && y).count();
    let n1 = arch.widths()[1];
    let disjoint = s == 0;
    let stats = TwoBlockStats {
        r1,
        r2,
        s,
        t: r1 + r2 - 2 * s,
        r_a: r1 - s,
        r_b: r2 - s,
        n_min: n1,
        l_min_minus: 1,
        l_min_plus: 1,
        gate3a: true,
        gate3b: true,
        disjoint_paths: disjoint,
        observed_difference_rank: None,
    };
    let mut out = TwoBlockAnalysis {
        stats: stats.clone(),
        constraints: Vec::new(),
        skipped: Vec::new(),
    };
    let shapes = pair_shapes(arch);
    out.push(RankConstraint::single("type1-shallow", Symbol::M, Cell::block(0), &shapes, r1, cap)?, false);
    out.push(RankConstraint::single("type2-shallow", Symbol::M, Cell::block(1), &shapes, r2, cap)?, false);

    // rank([M1 | M2]) <= rank of the R1\S, R2\S and S parts combined
    let b3 = r1 + r2 - s;
    let (n0, n_out) = (arch.input_dim(), arch.output_dim());
    let rank1 = r1.min(n0).min(n_out);
    let rank2 = r2.min(n0).min(n_out);
    let type4 = RankConstraint::single(
        "type4-shallow",
        Symbol::M,
        Cell::combination(&[q(1), q(-1)]),
        &shapes,
        stats.t,
        cap,
    )?;
    let type4_minors = if type4.is_vacuous() { 0 } else { type4.counts.minors };
    for (label, grid, rows, cols) in [
        ("type3-shallow", vec![vec![Cell::block(0), Cell::block(1)]], n_out, n0),
        ("type3-shallow-transpose", vec![vec![Cell::block_t(0), Cell::block_t(1)]], n0, n_out),
    ] {
        let mut c = RankConstraint::new(label, Symbol::M, grid, &shapes, b3, cap)?;
        if b3 != n1 {
            c = c.with_note(format!("bound r1 + r2 - s = {b3} used in place of the hidden width {n1}"));
        }
        if !c.is_vacuous() {
            let mixed = mixed_minor_count(rows, cols, c.counts.minor_size, rank1, rank2);
            c.counts.mixed_minors = Some(mixed);
            c.counts.independent_estimate = Some(mixed.saturating_sub(type4_minors));
        }
        out.push(c, disjoint);
    }
    out.push(type4, disjoint);
    Ok(out)
}

/// Rank statistics shared by the shallow and deep analyses; `r_a`, `r_b`
/// and `s` are sampled generic ranks of path networks.
pub fn two_block_stats(arch: &Architecture, a1: &Pattern, a2: &Pattern, spec: &SampleSpec) -> Result<TwoBlockStats> {
    check_pair(arch, a1, a2)?;
    let r1 = width_rank(arch, a1)?;
    let r2 = width_rank(arch, a2)?;
    let both = a1.and(a2);
    let s = generic_rank_pattern(arch, &both, spec)?;
    let p1 = enumerate_active_paths(arch, a1)?;
    let p2 = enumerate_active_paths(arch, a2)?;
    let shared = p1.intersection(&p2);
    let r_a = generic_rank_paths(arch, &p1.difference(&shared), spec)?;
    let r_b = generic_rank_paths(arch, &p2.difference(&shared), spec)?;

    let hidden = arch.hidden_widths();
    let n_min = *hidden.iter().min().expect("at least one hidden layer");
    let i_min: Vec<usize> = (1..=hidden.len()).filter(|&l| hidden[l - 1] == n_min).collect();
    let l_min_minus = i_min[0];
    let l_min_plus = *i_min.last().expect("nonempty");
    let depth = arch.depth();
    let gate3a = (l_min_plus + 1..depth).all(|l| a1.layer(l) == a2.layer(l));
    let gate3b = (1..l_min_minus).all(|l| a1.layer(l) == a2.layer(l));

    let blocks = [a1.clone(), a2.clone()];
    let observed = generic_rank_with(arch, spec, |theta| {
        let m1 = crate::model::masked_unchecked(arch, theta, &blocks[0]).0;
        let m2 = crate::model::masked_unchecked(arch, theta, &blocks[1]).0;
        Ok(&m1 - &m2)
    })?;
    Ok(TwoBlockStats {
        r1,
        r2,
        s,
        t: r_a + r_b,
        r_a,
        r_b,
        n_min,
        l_min_minus,
        l_min_plus,
        gate3a,
        gate3b,
        disjoint_paths: paths_disjoint(a1, a2),
        observed_difference_rank: Some(observed),
    })
}

/// Invariants of a two-block pattern for a network with at least two hidden layers.
pub fn two_block_deep(
    arch: &Architecture,
    a1: &Pattern,
    a2: &Pattern,
    spec: &SampleSpec,
    cap: usize,
) -> Result<TwoBlockAnalysis> {
    check_pair(arch, a1, a2)?;
    if arch.depth() < 3 {
        return Err(Error::Unsupported(format!(
            "deep two-block invariants need L >= 3, got L = {}",
            arch.depth()
        )));
    }
    let stats = two_block_stats(arch, a1, a2, spec)?;
    let shapes = pair_shapes(arch);
    let disjoint = stats.disjoint_paths;
    let mut out = TwoBlockAnalysis {
        stats: stats.clone(),
        constraints: Vec::new(),
        skipped: Vec::new(),
    };
    out.push(RankConstraint::single("type1-deep", Symbol::M, Cell::block(0), &shapes, stats.r1, cap)?, false);
    out.push(RankConstraint::single("type2-deep", Symbol::M, Cell::block(1), &shapes, stats.r2, cap)?, false);
    if stats.gate3a {
        let grid = vec![vec![Cell::block(0), Cell::block(1)]];
        out.push(RankConstraint::new("type3a-deep", Symbol::M, grid, &shapes, stats.n_min, cap)?, disjoint);
    } else {
        out.gated("type3a-deep");
    }
    if stats.gate3b {
        let grid = vec![vec![Cell::block_t(0), Cell::block_t(1)]];
        out.push(RankConstraint::new("type3b-deep", Symbol::M, grid, &shapes, stats.n_min, cap)?, disjoint);
    } else {
        out.gated("type3b-deep");
    }
    let mut type4 = RankConstraint::single(
        "type4-deep",
        Symbol::M,
        Cell::combination(&[q(1), q(-1)]),
        &shapes,
        stats.t,
        cap,
    )?;
    if let Some(obs) = stats.observed_difference_rank {
        if obs < type4.bound {
            type4 = type4.with_note(format!("sampled generic rank of M1 - M2 is {obs}, below the bound"));
        }
    }
    out.push(type4, disjoint);
    Ok(out)
}

/// Shallow or deep analysis depending on the depth of `arch`.
pub fn two_block_constraints(
    arch: &Architecture,
    blocks: &BlockPattern,
    spec: &SampleSpec,
    cap: usize,
) -> Result<TwoBlockAnalysis> {
    if blocks.len() != 2 {
        return Err(Error::Pattern(format!("expected 2 blocks, got {}", blocks.len())));
    }
    let (a1, a2) = (&blocks.blocks[0], &blocks.blocks[1]);
    if arch.depth() == 2 {
        two_block_shallow(arch, a1, a2, cap)
    } else {
        two_block_deep(arch, a1, a2, spec, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(a: &TwoBlockAnalysis) -> Vec<&str> {
        a.constraints.iter().map(|c| c.label.as_str()).collect()
    }

    #[test]
    fn four_by_four_overlapping_blocks() {
        let arch = Architecture::plain(&[4, 4, 4]);
        let a1 = Pattern::from_bits(&[&[1, 1, 1, 0]]);
        let a2 = Pattern::from_bits(&[&[0, 1, 1, 1]]);
        let res = two_block_shallow(&arch, &a1, &a2, 10_000).unwrap();
        let s = &res.stats;
        assert_eq!((s.r1, s.r2, s.s, s.t), (3, 3, 2, 2));
        assert_eq!(labels(&res), vec!["type1-shallow", "type2-shallow", "type4-shallow"]);
        let minors: Vec<u64> = res.constraints.iter().map(|c| c.counts.minors).collect();
        assert_eq!(minors, vec![1, 1, 16]);
        assert!(res.skipped.iter().all(|k| k.reason == SkipReason::Vacuous));
    }

    #[test]
    fn narrow_hidden_layer_counts() {
        let arch = Architecture::plain(&[4, 3, 4]);
        let a1 = Pattern::from_bits(&[&[1, 1, 0]]);
        let a2 = Pattern::from_bits(&[&[0, 1, 1]]);
        let res = two_block_shallow(&arch, &a1, &a2, 10_000).unwrap();
        let cubic: u64 = res
            .constraints
            .iter()
            .filter(|c| c.counts.minor_size == 3)
            .map(|c| c.counts.minors)
            .sum();
        assert_eq!(cubic, 48);
        let type3: Vec<&RankConstraint> = res.constraints.iter().filter(|c| c.label.starts_with("type3")).collect();
        assert_eq!(type3.len(), 2);
        for c in type3 {
            assert_eq!(c.counts.minor_size, 4);
            assert_eq!(c.counts.mixed_minors, Some(36));
            assert_eq!(c.counts.independent_estimate, Some(20));
        }
    }

    #[test]
    fn disjoint_supports_keep_only_single_blocks() {
        let arch = Architecture::plain(&[3, 2, 3]);
        let a1 = Pattern::from_bits(&[&[1, 0]]);
        let a2 = Pattern::from_bits(&[&[0, 1]]);
        let res = two_block_shallow(&arch, &a1, &a2, 10_000).unwrap();
        assert_eq!(labels(&res), vec!["type1-shallow", "type2-shallow"]);
        assert!(res.skipped.iter().any(|k| k.reason == SkipReason::Redundant));
    }

    #[test]
    fn depth_checks() {
        let deep = Architecture::plain(&[2, 2, 2, 2]);
        let p = Pattern::all_active(&deep);
        let q = Pattern::from_bits(&[&[1, 0], &[1, 1]]);
        assert!(matches!(two_block_shallow(&deep, &p, &q, 10), Err(Error::Unsupported(_))));
        let shallow = Architecture::plain(&[2, 2, 2]);
        let p = Pattern::all_active(&shallow);
        let q = Pattern::from_bits(&[&[1, 0]]);
        assert!(matches!(
            two_block_deep(&shallow, &p, &q, &SampleSpec::default(), 10),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mixed_counts() {
        assert_eq!(mixed_minor_count(4, 4, 4, 2, 2), 36);
        assert_eq!(mixed_minor_count(4, 4, 4, 4, 4), 70);
    }
}
