use nalgebra::DMatrix;
use proptest::prelude::*;

use relu_varieties::invariants::two_block_constraints;
use relu_varieties::linalg::{
    determinant, enumerate_minors, invert, kernel_basis, minor_count, rank_exact, RationalMatrix,
};
use relu_varieties::model::{
    enumerate_active_paths, masked_matrix, path_matrix, width_rank, Architecture, BlockPattern, ParamAssignment,
    Pattern,
};
use relu_varieties::par::Execution;
use relu_varieties::rational::{fmt_q, parse_q, primitive_integer, q, qr, Q};
use relu_varieties::verify::{check_constraint, sample_params, SampleSpec};

fn int_matrix(max_dim: usize, range: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(move |(r, c)| {
        prop::collection::vec(prop::collection::vec(-range..=range, c), r)
    })
}

/// Rows repeated from a few generators so that rank deficiency is common.
fn low_rank_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=3, 1usize..=5, 1usize..=5).prop_flat_map(|(k, r, c)| {
        (
            prop::collection::vec(prop::collection::vec(-4i64..=4, c), k),
            prop::collection::vec(prop::collection::vec(-3i64..=3, k), r),
        )
            .prop_map(|(gens, mix)| {
                mix.iter()
                    .map(|m| (0..gens[0].len()).map(|j| m.iter().zip(&gens).map(|(a, g)| a * g[j]).sum()).collect())
                    .collect()
            })
    })
}

fn to_rational(rows: &[Vec<i64>]) -> RationalMatrix {
    let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
    RationalMatrix::from_i64(&refs)
}

fn svd_rank(rows: &[Vec<i64>]) -> usize {
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j] as f64);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > top * 1e-9 * 8.0).count()
}

fn square(n: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-6i64..=6, n), n)
}

fn arch_and_pattern() -> impl Strategy<Value = (Vec<usize>, Vec<bool>, u64)> {
    (
        prop::collection::vec(1usize..=4, 2..=5),
        prop::collection::vec(any::<bool>(), 12),
        any::<u64>(),
    )
}

fn pattern_from(arch: &Architecture, bits: &[bool]) -> Pattern {
    let mut it = bits.iter().copied();
    Pattern::new(
        arch.hidden_widths()
            .iter()
            .map(|&n| (0..n).map(|_| it.next().unwrap_or(true)).collect())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rank_matches_svd(rows in low_rank_matrix()) {
        prop_assert_eq!(rank_exact(&to_rational(&rows)), svd_rank(&rows));
    }

    #[test]
    fn rank_is_transpose_invariant(rows in int_matrix(5, 5)) {
        let m = to_rational(&rows);
        prop_assert_eq!(rank_exact(&m), rank_exact(&m.transpose()));
    }

    #[test]
    fn kernel_is_annihilated_and_complementary(rows in low_rank_matrix()) {
        let m = to_rational(&rows);
        let ker = kernel_basis(&m);
        prop_assert_eq!(ker.len() + rank_exact(&m), m.cols());
        for v in &ker {
            prop_assert!(m.mul_vec(v).unwrap().iter().all(|x| *x == q(0)));
            let first = v.iter().find(|x| **x != q(0)).unwrap();
            prop_assert!(*first > q(0));
            prop_assert!(v.iter().all(|x| x.is_integer()));
        }
    }

    #[test]
    fn inverse_is_two_sided(rows in (1usize..=4).prop_flat_map(square)) {
        let m = to_rational(&rows);
        let det = determinant(&m).unwrap();
        match invert(&m) {
            Ok(inv) => {
                prop_assert!(det != q(0));
                let id = RationalMatrix::identity(m.rows());
                prop_assert_eq!(m.try_mul(&inv).unwrap(), id.clone());
                prop_assert_eq!(inv.try_mul(&m).unwrap(), id);
            }
            Err(_) => prop_assert_eq!(det, q(0)),
        }
    }

    #[test]
    fn determinant_is_multiplicative((a, b) in (1usize..=4).prop_flat_map(|n| (square(n), square(n)))) {
        let (a, b) = (to_rational(&a), to_rational(&b));
        let ab = a.try_mul(&b).unwrap();
        prop_assert_eq!(determinant(&ab).unwrap(), determinant(&a).unwrap() * determinant(&b).unwrap());
    }

    #[test]
    fn minor_enumeration_matches_count(r in 1usize..=6, c in 1usize..=6, k in 1usize..=4) {
        let e = enumerate_minors(r, c, k, None);
        prop_assert_eq!(e.total, minor_count(r, c, k));
        prop_assert_eq!(e.indices.len() as u64, e.total);
        prop_assert!(!e.truncated);
        let capped = enumerate_minors(r, c, k, Some(3));
        prop_assert_eq!(capped.indices.len() as u64, e.total.min(3));
        prop_assert_eq!(capped.truncated, e.total > 3);
    }

    #[test]
    fn primitive_vector_is_scale_invariant(v in prop::collection::vec(-9i64..=9, 1..6), num in 1i64..20, den in 1i64..20) {
        let v: Vec<Q> = v.into_iter().map(q).collect();
        let s = qr(num, den);
        let scaled: Vec<Q> = v.iter().map(|x| x * &s).collect();
        prop_assert_eq!(primitive_integer(&v), primitive_integer(&scaled));
    }

    #[test]
    fn rationals_round_trip_through_text(num in -1000i64..1000, den in 1i64..1000) {
        let x = qr(num, den);
        prop_assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
    }

    #[test]
    fn masked_product_equals_path_sum((widths, bits, seed) in arch_and_pattern()) {
        let arch = Architecture::plain(&widths);
        let pat = pattern_from(&arch, &bits);
        let theta = sample_params(&arch, &SampleSpec::new(seed, 1, 9), 0);
        let (m, _) = masked_matrix(&arch, &theta, &pat).unwrap();
        let p = path_matrix(&arch, &theta, &enumerate_active_paths(&arch, &pat).unwrap()).unwrap();
        prop_assert_eq!(m, p);
    }

    #[test]
    fn masked_product_rank_is_bounded_by_widths((widths, bits, seed) in arch_and_pattern()) {
        let arch = Architecture::plain(&widths);
        let pat = pattern_from(&arch, &bits);
        let theta = sample_params(&arch, &SampleSpec::new(seed, 1, 9), 0);
        let (m, _) = masked_matrix(&arch, &theta, &pat).unwrap();
        prop_assert!(rank_exact(&m) <= width_rank(&arch, &pat).unwrap());
    }

    #[test]
    fn masked_product_is_affine_in_each_weight((widths, bits, seed) in arch_and_pattern(), pick in any::<prop::sample::Index>()) {
        let arch = Architecture::plain(&widths);
        let pat = pattern_from(&arch, &bits);
        let flat = sample_params(&arch, &SampleSpec::new(seed, 1, 9), 0).to_flat();
        let p = pick.index(flat.len());
        let at = |t: i64| {
            let mut f = flat.clone();
            f[p] += q(t);
            let theta = ParamAssignment::from_flat(&arch, &f).unwrap();
            masked_matrix(&arch, &theta, &pat).unwrap().0
        };
        // second difference vanishes
        let second = at(2).try_sub(&at(1).scale(&q(2))).unwrap().try_add(&at(0)).unwrap();
        prop_assert!(second.is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn two_block_constraints_hold_on_samples(
        n in (1usize..=3, 1usize..=4, 1usize..=3),
        b1 in prop::collection::vec(any::<bool>(), 4),
        b2 in prop::collection::vec(any::<bool>(), 4),
        deep in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (n0, n1, n2) = n;
        let widths = if deep { vec![n0, n1, n1, n2] } else { vec![n0, n1, n2] };
        let arch = Architecture::plain(&widths);
        let a1 = pattern_from(&arch, &b1.iter().chain(&b2).copied().collect::<Vec<_>>());
        let a2 = pattern_from(&arch, &b2.iter().chain(&b1).copied().collect::<Vec<_>>());
        prop_assume!(a1 != a2);
        let blocks = BlockPattern::new(vec![a1, a2]).unwrap();
        let spec = SampleSpec::new(seed, 8, 50);
        let analysis = two_block_constraints(&arch, &blocks, &spec, 1000).unwrap();
        for c in &analysis.constraints {
            let v = check_constraint(c, &arch, &blocks, None, &spec).unwrap();
            prop_assert!(v.holds, "{} exceeded bound {}: {:?}", c.label, c.bound, v);
        }
    }

    #[test]
    fn execution_mode_does_not_change_results(seed in any::<u64>()) {
        let arch = Architecture::plain(&[3, 4, 3]);
        let blocks = BlockPattern::new(vec![
            Pattern::from_bits(&[&[1, 1, 1, 0]]),
            Pattern::from_bits(&[&[0, 1, 1, 1]]),
        ]).unwrap();
        let spec = SampleSpec::new(seed, 8, 50);
        let analysis = two_block_constraints(&arch, &blocks, &spec, 1000).unwrap();
        for c in &analysis.constraints {
            let seq = check_constraint(c, &arch, &blocks, None, &spec.with_execution(Execution::Sequential)).unwrap();
            let par = check_constraint(c, &arch, &blocks, None, &spec.with_execution(Execution::Parallel)).unwrap();
            prop_assert_eq!(seq, par);
        }
    }
}
