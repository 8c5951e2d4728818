use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{Scalar, Tensor};

/// Concatenate along `axis`; every other extent must agree.
pub fn concat<T: Scalar>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let Some(first) = parts.first() else {
        bail!(InvalidArgument, "concat", "nothing to concatenate");
    };
    let rank = first.rank();
    if axis >= rank {
        bail!(Index, "concat", "axis {} for rank {}", axis, rank);
    }
    for p in parts {
        let ok = p.rank() == rank
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(a, (x, y))| a == axis || x == y);
        if !ok {
            bail!(
                Shape,
                "concat",
                "{:?} vs {:?} away from axis {}",
                p.shape(),
                first.shape(),
                axis
            );
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let total: usize = parts.iter().map(|p| p.shape()[axis]).sum();
    let mut data = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for p in parts {
            let chunk = p.shape()[axis] * inner;
            data.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    Tensor::new(&shape, data)
}

/// Inverse of [`concat`]: cut `axis` into consecutive pieces of `sizes`.
pub fn split<T: Scalar>(input: &Tensor<T>, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
    if axis >= input.rank() || sizes.iter().sum::<usize>() != input.shape()[axis] {
        bail!(Shape, "split", "sizes {:?} along axis {} of {:?}", sizes, axis, input.shape());
    }
    let mut start = 0;
    let mut out = Vec::with_capacity(sizes.len());
    for &len in sizes {
        out.push(input.narrow(axis, start, len)?);
        start += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feature_vectors_concatenate() {
        let a = Tensor::<f32>::full(&[1, 512], 1.0);
        let b = Tensor::<f32>::full(&[1, 512], 2.0);
        assert_eq!(concat(&[&a, &b], 1).unwrap().shape(), &[1, 1024]);
    }

    #[test]
    fn single_part_is_identity() {
        let a = Tensor::from_fn(&[2, 3], |i| i as f32);
        assert_eq!(concat(&[&a], 1).unwrap(), a);
    }

    #[test]
    fn mismatched_extents() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[3, 3]);
        assert!(concat(&[&a, &b], 1).is_err());
        assert!(concat(&[&a, &b], 0).is_ok());
    }

    proptest! {
        #[test]
        fn split_recovers_parts(rows in 1usize..4, wa in 1usize..6, wb in 1usize..6, axis in 0usize..2) {
            let (sa, sb) = if axis == 0 { ([wa, rows], [wb, rows]) } else { ([rows, wa], [rows, wb]) };
            let a = Tensor::from_fn(&sa, |i| i as f32 * 0.5);
            let b = Tensor::from_fn(&sb, |i| -(i as f32));
            let c = concat(&[&a, &b], axis).unwrap();
            let parts = split(&c, axis, &[wa, wb]).unwrap();
            prop_assert_eq!(&parts[0], &a);
            prop_assert_eq!(&parts[1], &b);
        }
    }
}
