//! Fast Walsh–Hadamard transform over power-of-two lengths.
//!
//! The transform is the unnormalized ±1 Sylvester matrix
//! `H_1 = [1]`, `H_2d = [[H_d, H_d], [H_d, -H_d]]`, so `H^T H = d·I`.
//! No `1/√d` factor is applied anywhere in this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A logical input dimension together with its zero-padded power-of-two size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HadamardDim {
    logical_d: usize,
    padded_d: usize,
}

impl HadamardDim {
    pub fn logical(&self) -> usize {
        self.logical_d
    }

    pub fn padded(&self) -> usize {
        self.padded_d
    }

    /// `log2(padded_d)`.
    pub fn log2(&self) -> u32 {
        self.padded_d.trailing_zeros()
    }

    /// Zero-extends `x` (of length `logical_d`) into `out` (of length `padded_d`).
    pub fn pad_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.logical_d);
        debug_assert_eq!(out.len(), self.padded_d);
        out[..self.logical_d].copy_from_slice(x);
        out[self.logical_d..].fill(0.0);
    }

    pub fn pad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.padded_d];
        self.pad_into(x, &mut out);
        out
    }
}

/// Smallest power of two that holds `logical_d` coordinates.
pub fn next_pow2(logical_d: usize) -> Result<HadamardDim> {
    if logical_d == 0 {
        return Err(Error::ZeroDimension);
    }
    let padded_d = logical_d
        .checked_next_power_of_two()
        .ok_or(Error::DimensionOverflow(logical_d))?;
    Ok(HadamardDim { logical_d, padded_d })
}

/// Overwrites `buffer` with `H·buffer` using `len·log2(len)` additions.
pub fn fwht_in_place(buffer: &mut [f64]) -> Result<()> {
    let n = buffer.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    fwht_unchecked(buffer);
    Ok(())
}

/// Radix-2 butterflies with doubling stride. Caller guarantees a power-of-two length.
pub(crate) fn fwht_unchecked(buffer: &mut [f64]) {
    let n = buffer.len();
    let mut half = 1;
    while half < n {
        for block in buffer.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half <<= 1;
    }
}

/// Sign of `H[row][col]`, i.e. `(-1)^popcount(row & col)`.
#[inline]
pub fn hadamard_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Quadratic-time `H·x` evaluated entry by entry. Test and benchmark oracle.
pub fn naive_hadamard_apply(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok((0..n)
        .map(|k| x.iter().enumerate().map(|(i, &v)| hadamard_entry(k, i) * v).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn next_pow2_examples() {
        assert_eq!(next_pow2(1).unwrap().padded(), 1);
        let d = next_pow2(5).unwrap();
        assert_eq!((d.logical(), d.padded()), (5, 8));
        assert_eq!(next_pow2(64).unwrap().padded(), 64);
        assert_eq!(next_pow2(0), Err(Error::ZeroDimension));
        assert!(matches!(next_pow2(usize::MAX), Err(Error::DimensionOverflow(_))));
    }

    #[test]
    fn small_transforms() {
        let mut v = [3.0, 5.0];
        fwht_in_place(&mut v).unwrap();
        assert_eq!(v, [8.0, -2.0]);

        let mut e1 = [1.0, 0.0, 0.0, 0.0];
        fwht_in_place(&mut e1).unwrap();
        assert_eq!(e1, [1.0; 4]);

        assert_eq!(
            naive_hadamard_apply(&[1.0, 1.0, 1.0, 1.0]).unwrap(),
            vec![4.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(naive_hadamard_apply(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut v = vec![1.0; 6];
        assert_eq!(fwht_in_place(&mut v), Err(Error::NotPowerOfTwo(6)));
        assert_eq!(naive_hadamard_apply(&v), Err(Error::NotPowerOfTwo(6)));
        assert_eq!(fwht_in_place(&mut []), Err(Error::NotPowerOfTwo(0)));
    }

    #[test]
    fn sign_rule_matches_block_recursion() {
        // Build H_d from the block recursion and compare with the popcount rule.
        let mut h = vec![vec![1.0]];
        while h.len() < 64 {
            let n = h.len();
            let mut next = vec![vec![0.0; 2 * n]; 2 * n];
            for r in 0..n {
                for c in 0..n {
                    next[r][c] = h[r][c];
                    next[r][c + n] = h[r][c];
                    next[r + n][c] = h[r][c];
                    next[r + n][c + n] = -h[r][c];
                }
            }
            h = next;
            for (r, row) in h.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    assert_eq!(v, hadamard_entry(r, c));
                }
            }
        }
    }

    fn pow2_vec() -> impl Strategy<Value = Vec<f64>> {
        (0u32..=8).prop_flat_map(|l| prop::collection::vec(-1e3f64..1e3, 1usize << l))
    }

    proptest! {
        #[test]
        fn matches_naive(x in pow2_vec()) {
            let expected = naive_hadamard_apply(&x).unwrap();
            let mut y = x.clone();
            fwht_in_place(&mut y).unwrap();
            let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            for (a, b) in y.iter().zip(&expected) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn involution_up_to_scale(x in pow2_vec()) {
            let n = x.len() as f64;
            let mut y = x.clone();
            fwht_in_place(&mut y).unwrap();
            fwht_in_place(&mut y).unwrap();
            let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0) * n;
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - n * b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn linear(x in pow2_vec(), a in -10.0f64..10.0, b in -10.0f64..10.0, seed in any::<u64>()) {
            let y: Vec<f64> = x.iter().enumerate()
                .map(|(i, v)| ((i as u64 ^ seed) % 97) as f64 - 48.0 + v * 0.5)
                .collect();
            let mut combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let (mut hx, mut hy) = (x.clone(), y.clone());
            fwht_in_place(&mut combo).unwrap();
            fwht_in_place(&mut hx).unwrap();
            fwht_in_place(&mut hy).unwrap();
            let scale = combo.len() as f64 * 1e4 * (a.abs() + b.abs() + 1.0);
            for i in 0..combo.len() {
                prop_assert!((combo[i] - (a * hx[i] + b * hy[i])).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn scaled_orthogonality(x in pow2_vec()) {
            let y: Vec<f64> = x.iter().rev().map(|v| v * 0.7 + 1.0).collect();
            let (mut hx, mut hy) = (x.clone(), y.clone());
            fwht_in_place(&mut hx).unwrap();
            fwht_in_place(&mut hy).unwrap();
            let lhs: f64 = hx.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.len() as f64 * x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            let scale = x.len() as f64
                * x.iter().map(|v| v * v).sum::<f64>().sqrt()
                * y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1.0));
        }
    }
}
