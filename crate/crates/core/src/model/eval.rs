use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::RationalMatrix;
use crate::model::types::{Architecture, BlockPattern, ParamAssignment, Pattern};
use crate::rational::Q;

fn relu_mask(v: &[Q]) -> Vec<bool> {
    v.iter().map(|x| x.is_positive()).collect()
}

fn apply_mask(v: &mut [Q], mask: &[bool]) {
    for (x, &on) in v.iter_mut().zip(mask) {
        if !on {
            *x = Q::zero();
        }
    }
}

fn add_bias(v: &mut [Q], theta: &ParamAssignment, layer: usize) {
    if let Some(b) = &theta.biases {
        for (x, bi) in v.iter_mut().zip(&b[layer]) {
            *x += bi;
        }
    }
}

/// Network output at `x` and the activation pattern there (a unit with
/// pre-activation exactly zero is recorded inactive).
pub fn forward_eval(arch: &Architecture, theta: &ParamAssignment, x: &[Q]) -> Result<(Vec<Q>, Pattern)> {
    theta.check(arch)?;
    if x.len() != arch.input_dim() {
        return Err(Error::Shape(format!("input has length {}, expected {}", x.len(), arch.input_dim())));
    }
    let (out, pattern, _) = forward_with_zeros(arch, theta, x);
    Ok((out, pattern))
}

/// Like [`forward_eval`] without validation; also reports whether some
/// pre-activation was exactly zero.
pub(crate) fn forward_with_zeros(arch: &Architecture, theta: &ParamAssignment, x: &[Q]) -> (Vec<Q>, Pattern, bool) {
    let depth = arch.depth();
    let mut h = x.to_vec();
    let mut layers = Vec::with_capacity(depth - 1);
    let mut boundary = false;
    for l in 0..depth {
        let mut z = theta.weights[l].mul_vec(&h).expect("shapes checked");
        add_bias(&mut z, theta, l);
        if l + 1 < depth {
            boundary |= z.iter().any(|v| v.is_zero());
            let mask = relu_mask(&z);
            apply_mask(&mut z, &mask);
            layers.push(mask);
        }
        h = z;
    }
    (h, Pattern::new(layers), boundary)
}

/// The affine map `x -> M x + b` that the network computes on the region of
/// pattern `A`.
pub fn masked_matrix(arch: &Architecture, theta: &ParamAssignment, a: &Pattern) -> Result<(RationalMatrix, Vec<Q>)> {
    theta.check(arch)?;
    a.check(arch)?;
    Ok(masked_unchecked(arch, theta, a))
}

pub(crate) fn masked_unchecked(arch: &Architecture, theta: &ParamAssignment, a: &Pattern) -> (RationalMatrix, Vec<Q>) {
    let depth = arch.depth();
    let mut m = theta.weights[0].clone();
    let mut b = match &theta.biases {
        Some(bs) => bs[0].clone(),
        None => vec![Q::zero(); arch.widths()[1]],
    };
    for l in 1..depth {
        let mask = &a.layers()[l - 1];
        mask_rows(&mut m, mask);
        apply_mask(&mut b, mask);
        m = &theta.weights[l] * &m;
        b = theta.weights[l].mul_vec(&b).expect("shapes checked");
        add_bias(&mut b, theta, l);
    }
    (m, b)
}

fn mask_rows(m: &mut RationalMatrix, mask: &[bool]) {
    for (i, &on) in mask.iter().enumerate() {
        if !on {
            for j in 0..m.cols() {
                m.set(i, j, Q::zero());
            }
        }
    }
}

/// `[M_1 X_1 + b_1 1^T | ... | M_k X_k + b_k 1^T]`.
pub fn block_output(
    arch: &Architecture,
    theta: &ParamAssignment,
    blocks: &BlockPattern,
    xs: &[RationalMatrix],
) -> Result<RationalMatrix> {
    theta.check(arch)?;
    blocks.check(arch)?;
    if xs.len() != blocks.len() {
        return Err(Error::Shape(format!("{} data blocks for {} patterns", xs.len(), blocks.len())));
    }
    let mut out = RationalMatrix::zeros(arch.output_dim(), 0);
    for (i, (a, x)) in blocks.blocks.iter().zip(xs).enumerate() {
        if x.rows() != arch.input_dim() {
            return Err(Error::Shape(format!(
                "data block {i} has {} rows, expected {}",
                x.rows(),
                arch.input_dim()
            )));
        }
        let (m, b) = masked_unchecked(arch, theta, a);
        let mut y = &m * x;
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                let v = y.get(r, c) + &b[r];
                y.set(r, c, v);
            }
        }
        out = out.hcat(&y)?;
    }
    Ok(out)
}

/// `M_i(θ)` for every block.
pub fn block_matrices(arch: &Architecture, theta: &ParamAssignment, blocks: &BlockPattern) -> Result<Vec<RationalMatrix>> {
    theta.check(arch)?;
    blocks.check(arch)?;
    Ok(blocks.blocks.iter().map(|a| masked_unchecked(arch, theta, a).0).collect())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn two_layer(w1: &[&[i64]], w2: &[&[i64]]) -> (Architecture, ParamAssignment) {
        let arch = Architecture::plain(&[2, 2, 2]);
        let theta = ParamAssignment {
            weights: vec![RationalMatrix::from_i64(w1), RationalMatrix::from_i64(w2)],
            biases: None,
        };
        (arch, theta)
    }

    #[test]
    fn forward_identity_net() {
        let (arch, theta) = two_layer(&[&[1, 0], &[0, 1]], &[&[1, 0], &[0, 1]]);
        let (y, a) = forward_eval(&arch, &theta, &[q(1), q(-1)]).unwrap();
        assert_eq!(y, vec![q(1), q(0)]);
        assert_eq!(a, Pattern::from_bits(&[&[1, 0]]));
        let (y, a) = forward_eval(&arch, &theta, &[q(0), q(0)]).unwrap();
        assert_eq!(y, vec![q(0), q(0)]);
        assert_eq!(a, Pattern::from_bits(&[&[0, 0]]));
    }

    #[test]
    fn forward_and_masked_product() {
        let (arch, theta) = two_layer(&[&[1, 2], &[3, 4]], &[&[5, 6], &[7, 8]]);
        let (y, a) = forward_eval(&arch, &theta, &[q(1), q(0)]).unwrap();
        assert_eq!(y, vec![q(23), q(31)]);
        assert_eq!(a, Pattern::from_bits(&[&[1, 1]]));
        let (m, b) = masked_matrix(&arch, &theta, &Pattern::from_bits(&[&[1, 0]])).unwrap();
        assert_eq!(m, RationalMatrix::from_i64(&[&[5, 10], &[7, 14]]));
        assert_eq!(b, vec![q(0), q(0)]);
        let (m, _) = masked_matrix(&arch, &theta, &Pattern::from_bits(&[&[0, 0]])).unwrap();
        assert!(m.is_zero());
    }

    #[test]
    fn masked_bias_matches_forward() {
        let arch = Architecture::new(vec![2, 2, 1], true).unwrap();
        let theta = ParamAssignment {
            weights: vec![RationalMatrix::from_i64(&[&[1, -1], &[2, 1]]), RationalMatrix::from_i64(&[&[3, -2]])],
            biases: Some(vec![vec![q(1), q(-1)], vec![q(5)]]),
        };
        let x = [q(2), q(1)];
        let (y, a) = forward_eval(&arch, &theta, &x).unwrap();
        let (m, b) = masked_matrix(&arch, &theta, &a).unwrap();
        let mx = m.mul_vec(&x).unwrap();
        assert_eq!(y, vec![&mx[0] + &b[0]]);
    }

    #[test]
    fn block_output_with_identity_data_is_m() {
        let (arch, theta) = two_layer(&[&[1, 2], &[3, 4]], &[&[5, 6], &[7, 8]]);
        let bp = BlockPattern::new(vec![Pattern::from_bits(&[&[1, 0]])]).unwrap();
        let y = block_output(&arch, &theta, &bp, &[RationalMatrix::identity(2)]).unwrap();
        assert_eq!(y, RationalMatrix::from_i64(&[&[5, 10], &[7, 14]]));
    }

    #[test]
    fn shape_errors() {
        let (arch, theta) = two_layer(&[&[1, 2], &[3, 4]], &[&[5, 6], &[7, 8]]);
        assert!(matches!(forward_eval(&arch, &theta, &[q(1)]), Err(Error::Shape(_))));
        assert!(matches!(
            masked_matrix(&arch, &theta, &Pattern::from_bits(&[&[1]])),
            Err(Error::Pattern(_))
        ));
    }
}
