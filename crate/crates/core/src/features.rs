//! Random Fourier features for the unit-bandwidth RBF kernel built on an
//! RHT ensemble: `h(x) = √(2/(m·d))·cos(h̃(x) + b)`, with `d = padded_d`.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{Embedding, RhtEnsemble};
use crate::error::{invalid, Error, Result};
use crate::gaussian::rbf_kernel;
use crate::report::{CaseDeviation, DeviationReport, ReportParams};
use crate::rng::{keyed_rng, StreamKind};

const SWEEP_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatureMap {
    ensemble: RhtEnsemble,
    /// `b`, laid out like an [`Embedding`].
    phases: Vec<f64>,
    phase_seed: u64,
}

/// The two averages whose sum is `⟨h(x), h(y)⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDecomposition {
    /// `(1/md)·Σ cos(h̃(x+y) + 2b)`; vanishes in the limit.
    pub sum_term: f64,
    /// `(1/md)·Σ cos(h̃(x−y))`; tends to `K_RBF(x, y)`.
    pub diff_term: f64,
}

/// Default block count `⌈8·ε⁻²·max(1, diam²)·ln(2/δ)⌉` for kernel error `ε`
/// over a set of the given diameter.
pub fn default_feature_blocks(eps: f64, delta: f64, diameter: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", "must lie in (0, 1/2)"));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(invalid("delta", "must lie in (0, 1/2)"));
    }
    if !(diameter.is_finite() && diameter >= 0.0) {
        return Err(invalid("diameter", "must be finite and nonnegative"));
    }
    let m = 8.0 / (eps * eps) * (diameter * diameter).max(1.0) * (2.0 / delta).ln();
    Ok(m.ceil() as usize)
}

impl FourierFeatureMap {
    /// Draws `b ~ Unif[0, 2π)` per coordinate from the phase streams of `phase_seed`.
    pub fn new(ensemble: RhtEnsemble, phase_seed: u64) -> Self {
        let d = ensemble.padded_d();
        let mut phases = vec![0.0; ensemble.output_len()];
        phases.par_chunks_mut(d).enumerate().for_each(|(j, row)| {
            let mut rng = keyed_rng(phase_seed, StreamKind::Phase, j as u64);
            for b in row {
                let v = rng.random::<f64>() * TAU;
                *b = if v < TAU { v } else { 0.0 };
            }
        });
        Self {
            ensemble,
            phases,
            phase_seed,
        }
    }

    pub fn ensemble(&self) -> &RhtEnsemble {
        &self.ensemble
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phase_seed(&self) -> u64 {
        self.phase_seed
    }

    /// Feature dimension `m·padded_d`.
    pub fn output_len(&self) -> usize {
        self.phases.len()
    }

    fn scale(&self) -> f64 {
        (2.0 / self.output_len() as f64).sqrt()
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let emb = self.ensemble.embed(x)?;
        Ok(self.features_of_embedding(&emb))
    }

    fn features_of_embedding(&self, emb: &Embedding) -> Vec<f64> {
        let scale = self.scale();
        emb.values()
            .iter()
            .zip(&self.phases)
            .map(|(v, b)| scale * (v + b).cos())
            .collect()
    }

    /// `⟨h(x), h(y)⟩`.
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_same_len(x, y)?;
        let (fx, fy) = (self.features(x)?, self.features(y)?);
        Ok(dot(&fx, &fy))
    }

    /// Splits `⟨h(x), h(y)⟩` with `2·cos(a)·cos(c) = cos(a + c) + cos(a − c)`
    /// and the linearity of `h̃`.
    pub fn kerdec_decompose(&self, x: &[f64], y: &[f64]) -> Result<KernelDecomposition> {
        check_same_len(x, y)?;
        let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let h_sum = self.ensemble.embed(&sum)?;
        let h_diff = self.ensemble.embed(&diff)?;
        let n = self.output_len() as f64;
        let sum_term = h_sum
            .values()
            .iter()
            .zip(&self.phases)
            .map(|(v, b)| (v + 2.0 * b).cos())
            .sum::<f64>()
            / n;
        let diff_term = h_diff.values().iter().map(|v| v.cos()).sum::<f64>() / n;
        Ok(KernelDecomposition { sum_term, diff_term })
    }

    /// `|⟨h(x_i), h(x_j)⟩ − K_RBF(x_i, x_j)|` over all ordered pairs `i ≠ j`.
    pub fn kernel_error_sweep<P: AsRef<[f64]> + Sync>(&self, points: &[P]) -> Result<DeviationReport> {
        if points.len() < 2 {
            return Err(Error::Empty("kernel_error_sweep needs at least two points"));
        }
        let start = Instant::now();
        let feats = points
            .par_iter()
            .map(|p| self.features(p.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let n = points.len();
        let per_case = (0..n * n)
            .into_par_iter()
            .filter(|idx| idx / n != idx % n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let exact = rbf_kernel(points[i].as_ref(), points[j].as_ref())?;
                Ok(CaseDeviation {
                    case_id: format!("{i}-{j}"),
                    deviation: (dot(&feats[i], &feats[j]) - exact).abs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = ReportParams {
            d: self.ensemble.logical_d(),
            m: self.ensemble.m(),
            seed: self.ensemble.seed(),
            eps: None,
            trials: n,
        };
        Ok(
            DeviationReport::new("kernel_error_sweep", params, per_case, start.elapsed())
                .with_histogram(SWEEP_HISTOGRAM_BINS)
                .with_diagnostic("phase_seed", self.phase_seed as f64),
        )
    }
}

fn check_same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(d: usize, m: usize, seed: u64) -> FourierFeatureMap {
        FourierFeatureMap::new(RhtEnsemble::new(d, m, seed).unwrap(), seed ^ 0xfeed)
    }

    fn point(seed: u64, d: usize, radius: f64) -> Vec<f64> {
        let mut rng = keyed_rng(seed, StreamKind::Experiment, 1);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter().map(|a| a * radius / n).collect()
    }

    #[test]
    fn phases_are_reproducible_and_in_range() {
        let e = RhtEnsemble::new(10, 4, 3).unwrap();
        let a = FourierFeatureMap::new(e.clone(), 5);
        let b = FourierFeatureMap::new(e.clone(), 5);
        assert_eq!(a, b);
        assert_ne!(a.phases(), FourierFeatureMap::new(e, 6).phases());
        assert!(a.phases().iter().all(|&p| (0.0..TAU).contains(&p)));
        assert_eq!(a.output_len(), 4 * 16);
    }

    #[test]
    fn phase_moments() {
        let m = FourierFeatureMap::new(RhtEnsemble::new(100, 800, 1).unwrap(), 1);
        let n = m.output_len() as f64;
        let mean = m.phases().iter().sum::<f64>() / n;
        assert!((mean - std::f64::consts::PI).abs() <= 4.0 * (TAU / 12f64.sqrt()) / n.sqrt());
    }

    #[test]
    fn phase_and_diagonal_streams_differ_at_same_seed() {
        let e = RhtEnsemble::new(16, 8, 77).unwrap();
        let m = FourierFeatureMap::new(e.clone(), 77);
        let diag: Vec<f64> = e.diagonals().flatten().copied().collect();
        assert!(m.phases().iter().all(|p| !diag.contains(p)));
    }

    #[test]
    fn feature_range_and_self_inner_product() {
        let fm = map(12, 30, 4);
        let x = point(2, 12, 3.0);
        let f = fm.features(&x).unwrap();
        let bound = (2.0 / fm.output_len() as f64).sqrt();
        assert!(f.iter().all(|v| v.abs() <= bound + 1e-15));
        let self_ip = dot(&f, &f);
        assert!((0.0..=2.0).contains(&self_ip));
        assert!(fm.features(&x[..5]).is_err());
    }

    #[test]
    fn zero_input_features_are_phase_cosines() {
        let fm = map(64, 64, 8);
        let f = fm.features(&[0.0; 64]).unwrap();
        let scale = (2.0 / fm.output_len() as f64).sqrt();
        for (v, b) in f.iter().zip(fm.phases()) {
            assert_eq!(*v, scale * (0.0 + b).cos());
        }
        let ip = dot(&f, &f);
        assert!((ip - 1.0).abs() <= 5.0 / (fm.output_len() as f64).sqrt());
    }

    #[test]
    fn decomposition_identity_and_symmetry() {
        let fm = map(20, 40, 9);
        for s in 0..5 {
            let x = point(10 + s, 20, 0.8);
            let y = point(20 + s, 20, 1.1);
            let k = fm.approx_kernel(&x, &y).unwrap();
            assert_eq!(k, fm.approx_kernel(&y, &x).unwrap());
            let dec = fm.kerdec_decompose(&x, &y).unwrap();
            assert!((dec.sum_term + dec.diff_term - k).abs() <= 1e-10);
        }
        let zero = vec![0.0; 20];
        let dec = fm.kerdec_decompose(&zero, &zero).unwrap();
        assert_eq!(dec.diff_term, 1.0);
        let expected = fm.phases().iter().map(|b| (2.0 * b).cos()).sum::<f64>() / fm.output_len() as f64;
        assert!((dec.sum_term - expected).abs() <= 1e-15);
    }

    #[test]
    fn diff_term_is_shift_invariant() {
        let fm = map(16, 10, 2);
        let x = point(1, 16, 1.0);
        let y = point(2, 16, 1.0);
        let w = point(3, 16, 0.25);
        let xs: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
        let ys: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a + b).collect();
        let a = fm.kerdec_decompose(&x, &y).unwrap();
        let b = fm.kerdec_decompose(&xs, &ys).unwrap();
        assert!((a.diff_term - b.diff_term).abs() <= 1e-12);
        assert!((a.sum_term - b.sum_term).abs() > 1e-6);
    }

    #[test]
    fn sweep_on_repeated_and_zero_points() {
        let fm = map(8, 50, 3);
        let x = point(4, 8, 0.5);
        let r = fm.kernel_error_sweep(&[x.clone(), x.clone()]).unwrap();
        let expected = (fm.approx_kernel(&x, &x).unwrap() - 1.0).abs();
        assert_eq!(r.per_case.len(), 2);
        assert!((r.max_deviation - expected).abs() <= 1e-15);

        let zeros = vec![vec![0.0; 8]; 3];
        let r = fm.kernel_error_sweep(&zeros).unwrap();
        let direct = 2.0 / fm.output_len() as f64 * fm.phases().iter().map(|b| b.cos().powi(2)).sum::<f64>();
        assert!((r.max_deviation - (direct - 1.0).abs()).abs() <= 1e-12);
        assert!(fm.kernel_error_sweep(&zeros[..1]).is_err());
    }

    #[test]
    fn default_blocks() {
        // 8·100·1·ln(200) = 4238.66…
        assert_eq!(default_feature_blocks(0.1, 0.01, 1.0).unwrap(), 4239);
        assert_eq!(default_feature_blocks(0.1, 0.01, 0.5).unwrap(), 4239);
        assert!(default_feature_blocks(0.6, 0.01, 1.0).is_err());
    }
}
