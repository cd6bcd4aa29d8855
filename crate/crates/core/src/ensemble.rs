//! Ensembles of randomized Hadamard transforms with Gaussian diagonals.
//!
//! An ensemble holds `m` diagonals `D^1..D^m`, each of length `padded_d` with
//! i.i.d. `N(0, 1)` entries. The embedding of `z` stacks the blocks
//! `H·D^j·pad(z)` into one vector of length `m·padded_d`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, invalid, Error, Result};
use crate::hadamard::{fwht_unchecked, next_pow2, HadamardDim};
use crate::rng::{fill_standard_normal, keyed_rng, StreamKind};

pub const HEADER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RhtEnsemble {
    dim: HadamardDim,
    m: usize,
    seed: u64,
    /// Row-major `m × padded_d`; row `j` is `diag(D^j)`.
    diagonals: Vec<f64>,
}

/// Persisted form of an ensemble. Diagonals are regenerated from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub schema_version: u32,
    pub logical_d: usize,
    pub padded_d: usize,
    pub m: usize,
    pub seed: u64,
}

/// The stacked transform outputs `h̃(z)` for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    padded_d: usize,
    m: usize,
}

pub(crate) fn total_len(dim: HadamardDim, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(invalid("m", "number of blocks must be at least 1"));
    }
    let len = m
        .checked_mul(dim.padded())
        .filter(|len| {
            len.checked_mul(std::mem::size_of::<f64>())
                .is_some_and(|b| b <= isize::MAX as usize)
        })
        .ok_or(Error::DimensionOverflow(dim.padded()))?;
    Ok(len)
}

impl RhtEnsemble {
    /// Draws `m` Gaussian diagonals for inputs of dimension `logical_d`.
    ///
    /// Block `j` comes from its own keyed stream, so the result does not
    /// depend on how blocks are scheduled across threads.
    pub fn new(logical_d: usize, m: usize, seed: u64) -> Result<Self> {
        let dim = next_pow2(logical_d)?;
        let len = total_len(dim, m)?;
        let mut diagonals = vec![0.0; len];
        diagonals.par_chunks_mut(dim.padded()).enumerate().for_each(|(j, row)| {
            let mut rng = keyed_rng(seed, StreamKind::Diagonal, j as u64);
            fill_standard_normal(&mut rng, row);
        });
        Ok(Self {
            dim,
            m,
            seed,
            diagonals,
        })
    }

    pub fn from_header(header: &EnsembleHeader) -> Result<Self> {
        if header.schema_version != HEADER_SCHEMA_VERSION {
            return Err(Error::Header(format!(
                "unsupported schema_version {}",
                header.schema_version
            )));
        }
        let ensemble = Self::new(header.logical_d, header.m, header.seed)?;
        if ensemble.dim.padded() != header.padded_d {
            return Err(Error::Header(format!(
                "padded_d {} does not match logical_d {}",
                header.padded_d, header.logical_d
            )));
        }
        Ok(ensemble)
    }

    pub fn header(&self) -> EnsembleHeader {
        EnsembleHeader {
            schema_version: HEADER_SCHEMA_VERSION,
            logical_d: self.dim.logical(),
            padded_d: self.dim.padded(),
            m: self.m,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.header()).expect("header serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let header: EnsembleHeader = serde_json::from_str(s).map_err(|e| Error::Header(e.to_string()))?;
        Self::from_header(&header)
    }

    pub fn dim(&self) -> HadamardDim {
        self.dim
    }

    pub fn logical_d(&self) -> usize {
        self.dim.logical()
    }

    pub fn padded_d(&self) -> usize {
        self.dim.padded()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of embedding coordinates, `m·padded_d`.
    pub fn output_len(&self) -> usize {
        self.diagonals.len()
    }

    /// `diag(D^j)`.
    pub fn diagonal(&self, j: usize) -> &[f64] {
        let d = self.dim.padded();
        &self.diagonals[j * d..(j + 1) * d]
    }

    pub fn diagonals(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.diagonals.chunks_exact(self.dim.padded())
    }

    pub(crate) fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim.logical() {
            return Err(Error::DimensionMismatch {
                expected: self.dim.logical(),
                got: z.len(),
            });
        }
        check_finite(z)
    }

    /// `h̃(z)`, computing the blocks in parallel.
    pub fn embed(&self, z: &[f64]) -> Result<Embedding> {
        self.embed_with(z, true)
    }

    /// `h̃(z)` on the calling thread only. Bit-identical to [`Self::embed`].
    pub fn embed_serial(&self, z: &[f64]) -> Result<Embedding> {
        self.embed_with(z, false)
    }

    fn embed_with(&self, z: &[f64], parallel: bool) -> Result<Embedding> {
        self.check_input(z)?;
        let d = self.dim.padded();
        let mut values = vec![0.0; self.output_len()];
        let fill_block = |(out, diag): (&mut [f64], &[f64])| {
            for ((o, &dv), &zv) in out.iter_mut().zip(diag).zip(z) {
                *o = dv * zv;
            }
            // Padding coordinates of `out` stay zero.
            fwht_unchecked(out);
        };
        if parallel {
            values
                .par_chunks_mut(d)
                .zip(self.diagonals.par_chunks(d))
                .for_each(fill_block);
        } else {
            values.chunks_mut(d).zip(self.diagonals.chunks(d)).for_each(fill_block);
        }
        Ok(Embedding {
            values,
            padded_d: d,
            m: self.m,
        })
    }

    /// Worst relative deviation of `‖h̃(x) − h̃(y)‖ / (√(m·padded_d)·‖x − y‖)` from 1.
    ///
    /// Uses linearity: `h̃(x) − h̃(y) = h̃(x − y)`.
    pub fn distortion_check<A, B>(&self, pairs: &[(A, B)]) -> Result<f64>
    where
        A: AsRef<[f64]>,
        B: AsRef<[f64]>,
    {
        if pairs.is_empty() {
            return Err(Error::Empty("distortion_check needs at least one pair"));
        }
        let normalizer = (self.output_len() as f64).sqrt();
        let mut worst: f64 = 0.0;
        for (i, (x, y)) in pairs.iter().enumerate() {
            let (x, y) = (x.as_ref(), y.as_ref());
            self.check_input(x)?;
            self.check_input(y)?;
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let dist = norm(&diff);
            if dist == 0.0 {
                return Err(Error::CoincidentPair(i));
            }
            let ratio = self.embed(&diff)?.norm() / (normalizer * dist);
            worst = worst.max((ratio - 1.0).abs());
        }
        Ok(worst)
    }
}

impl Embedding {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn padded_d(&self) -> usize {
        self.padded_d
    }

    /// `h̃^j(z) = H·D^j·z`.
    pub fn block(&self, j: usize) -> &[f64] {
        &self.values[j * self.padded_d..(j + 1) * self.padded_d]
    }

    /// `h̃_{j,k}(z)`.
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.padded_d + k]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
