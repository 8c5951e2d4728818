//! `AVT1` tensor files: magic, little-endian `u32` rank and extents, then
//! the `f32` payload in row-major order.

use std::fs;
use std::path::Path;

use avfuse_core::tensor::MAX_RANK;
use avfuse_core::Tensor;

use crate::error::{AppError, AppResult, IoContext};

pub const MAGIC: &[u8; 4] = b"AVT1";

pub fn encode(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

/// Parses an AVT buffer; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> AppResult<Tensor<f32>> {
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(AppError::format(path, "not an AVT1 file (bad magic)"));
    }
    let rank = u32_at(bytes, 4).ok_or_else(|| AppError::format(path, "truncated header"))? as usize;
    if rank == 0 || rank > MAX_RANK {
        return Err(AppError::format(path, format!("rank {rank} outside 1..={MAX_RANK}")));
    }
    let shape = (0..rank)
        .map(|i| u32_at(bytes, 8 + 4 * i).map(|d| d as usize))
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| AppError::format(path, "truncated extents"))?;
    let start = 8 + 4 * rank;
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| AppError::format(path, "extent product overflows"))?;
    if bytes.len() != start + 4 * n {
        return Err(AppError::format(
            path,
            format!("shape {:?} needs {} payload bytes, found {}", shape, 4 * n, bytes.len().saturating_sub(start)),
        ));
    }
    let data = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Tensor::new(&shape, data).map_err(|e| AppError::format(path, e.to_string()))
}

pub fn write(path: &Path, t: &Tensor<f32>) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, encode(t)).at(path)
}

pub fn read(path: &Path) -> AppResult<Tensor<f32>> {
    decode(&fs::read(path).at(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let t = Tensor::new(&[2, 1], vec![1.0f32, -2.5]).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..4], b"AVT1");
        assert_eq!(&b[4..16], &[2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[16..20], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 24);
    }

    #[test]
    fn rejects_corruption() {
        let p = Path::new("x.avt");
        let t = Tensor::new(&[3], vec![1.0f32, 2.0, 3.0]).unwrap();
        let b = encode(&t);
        assert!(decode(&b[..b.len() - 1], p).is_err());
        assert!(decode(b"AVT2\x01\0\0\0", p).is_err());
        let mut zero = b.clone();
        zero[8] = 0;
        assert!(decode(&zero, p).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(shape in prop::collection::vec(1usize..5, 1..=5), seed in any::<u64>()) {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = (0..n).map(|i| f32::from_bits((seed as u32).wrapping_mul(i as u32 + 1) & 0x7f7f_ffff)).collect();
            let t = Tensor::new(&shape, data).unwrap();
            let back = decode(&encode(&t), Path::new("p")).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
