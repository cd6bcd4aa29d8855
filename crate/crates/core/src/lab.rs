//! Empirical concentration measurements over RHT ensembles.
//!
//! The supremum over the unit ball is approximated by a finite suite of
//! adversarial directions: `e_1`, the flat vector `𝟙/√d`, one equal-magnitude
//! vector per dyadic sparsity level `2^l`, and random directions.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{norm, RhtEnsemble};
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_expectation, std_normal_cdf, ScalarFunctional};
use crate::report::{CaseDeviation, DeviationReport, ReportParams, TrialStatistics};
use crate::rng::{fill_standard_normal, keyed_rng, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorLabel {
    Basis,
    Flat,
    /// `2^l` equal nonzero coordinates.
    Dyadic(u32),
    Random(usize),
}

impl VectorLabel {
    pub fn case_id(&self) -> String {
        match self {
            VectorLabel::Basis => "basis".into(),
            VectorLabel::Flat => "flat".into(),
            VectorLabel::Dyadic(l) => format!("dyadic_{l}"),
            VectorLabel::Random(i) => format!("random_{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub label: VectorLabel,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestVectorSuite {
    pub vectors: Vec<TestVector>,
}

impl TestVectorSuite {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, label: VectorLabel) -> Option<&[f64]> {
        self.vectors
            .iter()
            .find(|v| v.label == label)
            .map(|v| v.values.as_slice())
    }
}

fn equal_magnitude(d: usize, support: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    let a = 1.0 / (support as f64).sqrt();
    v[..support].fill(a);
    v
}

pub fn test_vector_suite(logical_d: usize, n_random: usize, seed: u64) -> Result<TestVectorSuite> {
    if logical_d < 2 {
        return Err(crate::error::invalid(
            "logical_d",
            "suite needs at least two coordinates",
        ));
    }
    let mut vectors = vec![
        TestVector {
            label: VectorLabel::Basis,
            values: equal_magnitude(logical_d, 1),
        },
        TestVector {
            label: VectorLabel::Flat,
            values: equal_magnitude(logical_d, logical_d),
        },
    ];
    let levels = logical_d.ilog2();
    for l in 1..=levels {
        vectors.push(TestVector {
            label: VectorLabel::Dyadic(l),
            values: equal_magnitude(logical_d, 1 << l),
        });
    }
    let mut rng = keyed_rng(seed, StreamKind::Experiment, 0);
    for i in 0..n_random {
        let mut v = vec![0.0; logical_d];
        loop {
            fill_standard_normal(&mut rng, &mut v);
            let n = norm(&v);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
                break;
            }
        }
        vectors.push(TestVector {
            label: VectorLabel::Random(i),
            values: v,
        });
    }
    Ok(TestVectorSuite { vectors })
}

/// Per vector `z`:
/// `|(1/(m·d))·Σ f(h̃_{j,k}(z)) − E_{Z~N(0,‖z‖²)} f(Z)| / Lip(f)`, `d = padded_d`.
pub fn lipschitz_deviation(
    ensemble: &RhtEnsemble,
    f: &ScalarFunctional,
    suite: &TestVectorSuite,
) -> Result<DeviationReport> {
    if suite.is_empty() {
        return Err(Error::Empty("lipschitz_deviation needs a nonempty suite"));
    }
    let start = Instant::now();
    let per_case = suite
        .vectors
        .par_iter()
        .map(|v| {
            let dev = single_lipschitz_deviation(ensemble, f, &v.values)?;
            Ok(CaseDeviation {
                case_id: v.label.case_id(),
                deviation: dev,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ReportParams {
        d: ensemble.logical_d(),
        m: ensemble.m(),
        seed: ensemble.seed(),
        eps: None,
        trials: suite.len(),
    };
    Ok(DeviationReport::new(
        format!("lipschitz_deviation/{}", f.label()),
        params,
        per_case,
        start.elapsed(),
    ))
}

/// The deviation for one input vector.
pub fn single_lipschitz_deviation(ensemble: &RhtEnsemble, f: &ScalarFunctional, z: &[f64]) -> Result<f64> {
    let y = ensemble.embed(z)?;
    let empirical = y.values().iter().map(|&v| f.eval(v)).sum::<f64>() / y.len() as f64;
    let expected = gaussian_expectation(f, norm(z))?;
    Ok((empirical - expected).abs() / f.lipschitz_constant())
}

/// `−5, −4.99, …, 5`.
pub fn default_t_grid() -> Vec<f64> {
    (-500..=500).map(|i| i as f64 * 0.01).collect()
}

/// `max_t |(1/(m·d))·#{h̃_{j,k}(z) ≤ t} − Φ(t)|` over the grid.
///
/// Off-grid the gap can exceed the grid value by at most `φ(0)·spacing`
/// plus the ECDF jumps inside one cell.
pub fn ecdf_deviation(ensemble: &RhtEnsemble, z: &[f64], t_grid: &[f64]) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::Empty("t_grid"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::UnsortedGrid);
    }
    let mut values = ensemble.embed(z)?.values().to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let below = values.partition_point(|&v| v <= t) as f64;
            (below / n - std_normal_cdf(t)).abs()
        })
        .fold(0.0, f64::max))
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    keyed_rng(seed, StreamKind::Experiment, trial as u64).random()
}

/// Per trial, `max_{i < d} |(1/m)·Σ_j D^j_{i,i}|` for a fresh ensemble; this is
/// the identity-functional deviation at `z = e_i`.
///
/// Trial seeds depend only on `(seed, trial)`, and coordinate `i` of block `j`
/// is the `i`-th draw of that block's stream, so runs at different `d` share
/// their leading coordinates.
pub fn basis_max_experiment(logical_d: usize, m: usize, trials: usize, seed: u64) -> Result<TrialStatistics> {
    if trials == 0 {
        return Err(crate::error::invalid("trials", "must be at least 1"));
    }
    let start = Instant::now();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ensemble = RhtEnsemble::new(logical_d, m, trial_seed(seed, t))?;
            let mut sums = vec![0.0; logical_d];
            for row in ensemble.diagonals() {
                sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            Ok(sums.iter().map(|s| (s / m as f64).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ReportParams {
        d: logical_d,
        m,
        seed,
        eps: None,
        trials,
    };
    Ok(TrialStatistics::new("basis_max", params, per_trial, start.elapsed()))
}

const BASELINE_STREAM_OFFSET: u64 = 1 << 40;

/// Per trial, `‖(1/n)·Σ_i g_i‖` for `n` i.i.d. `N(0, I_d)` vectors: the
/// supremum over the unit ball of the identity-functional deviation for a
/// dense Gaussian matrix with `n` rows.
pub fn gaussian_baseline_max(n: usize, logical_d: usize, trials: usize, seed: u64) -> Result<TrialStatistics> {
    if trials == 0 {
        return Err(crate::error::invalid("trials", "must be at least 1"));
    }
    if n == 0 || logical_d == 0 {
        return Err(Error::ZeroDimension);
    }
    let start = Instant::now();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = keyed_rng(seed, StreamKind::Experiment, BASELINE_STREAM_OFFSET + t as u64);
            let mut sum = vec![0.0; logical_d];
            let mut g = vec![0.0; logical_d];
            for _ in 0..n {
                fill_standard_normal(&mut rng, &mut g);
                sum.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
            }
            norm(&sum) / n as f64
        })
        .collect();
    let params = ReportParams {
        d: logical_d,
        m: n,
        seed,
        eps: None,
        trials,
    };
    Ok(TrialStatistics::new(
        "gaussian_baseline_max",
        params,
        per_trial,
        start.elapsed(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_contents() {
        let s = test_vector_suite(4, 3, 1).unwrap();
        assert_eq!(s.get(VectorLabel::Basis).unwrap(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.get(VectorLabel::Flat).unwrap(), &[0.5; 4]);
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(s.get(VectorLabel::Dyadic(1)).unwrap(), &[h, h, 0.0, 0.0]);
        assert!(s.get(VectorLabel::Dyadic(2)).is_some());
        assert_eq!(s.len(), 2 + 2 + 3);
        for v in &s.vectors {
            assert!((norm(&v.values) - 1.0).abs() <= 1e-12, "{:?}", v.label);
        }
        let s = test_vector_suite(100, 5, 2).unwrap();
        assert_eq!(s.len(), 2 + 6 + 5);
        assert!(s.vectors.iter().all(|v| (norm(&v.values) - 1.0).abs() <= 1e-12));
        assert!(test_vector_suite(1, 3, 1).is_err());
    }

    #[test]
    fn identity_deviation_on_basis_is_block_average() {
        let e = RhtEnsemble::new(16, 40, 3).unwrap();
        let mut e1 = vec![0.0; 16];
        e1[0] = 1.0;
        let dev = single_lipschitz_deviation(&e, &ScalarFunctional::identity(), &e1).unwrap();
        let w = e.diagonals().map(|row| row[0]).sum::<f64>() / 40.0;
        assert!((dev - w.abs()).abs() <= 1e-12);
    }

    #[test]
    fn zero_vector_has_zero_deviation() {
        let e = RhtEnsemble::new(8, 4, 3).unwrap();
        let dev = single_lipschitz_deviation(&e, &ScalarFunctional::cos(), &[0.0; 8]).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn deviation_invariances() {
        let e = RhtEnsemble::new(32, 16, 5).unwrap();
        let suite = test_vector_suite(32, 4, 9).unwrap();
        let f = ScalarFunctional::cos();
        let base = lipschitz_deviation(&e, &f, &suite).unwrap();
        let shifted = lipschitz_deviation(&e, &f.shifted(7.5), &suite).unwrap();
        let scaled = lipschitz_deviation(&e, &f.scaled(3.0).unwrap(), &suite).unwrap();
        for ((a, b), c) in base.per_case.iter().zip(&shifted.per_case).zip(&scaled.per_case) {
            assert!((a.deviation - b.deviation).abs() <= 1e-12);
            assert!((a.deviation - c.deviation).abs() <= 1e-12);
        }
        let empty = TestVectorSuite { vectors: vec![] };
        assert!(lipschitz_deviation(&e, &f, &empty).is_err());
    }

    #[test]
    fn ecdf_bounds_and_errors() {
        let e = RhtEnsemble::new(1, 1, 3).unwrap();
        let gap = ecdf_deviation(&e, &[1.0], &default_t_grid()).unwrap();
        // A single sample: the ECDF jumps from 0 to 1, so the gap reaches at least 1/2 − (grid slack).
        assert!((0.5 - 0.01..=1.0).contains(&gap));
        assert_eq!(ecdf_deviation(&e, &[1.0], &[0.0, -1.0]), Err(Error::UnsortedGrid));
        assert!(ecdf_deviation(&e, &[1.0], &[]).is_err());
        let e = RhtEnsemble::new(16, 8, 4).unwrap();
        let gap = ecdf_deviation(&e, &[0.25; 16], &default_t_grid()).unwrap();
        assert!((0.0..=1.0).contains(&gap));
    }

    #[test]
    fn basis_max_in_one_dimension_is_half_normal() {
        // Median of |N(0, 1/m)| is Φ⁻¹(3/4)/√m = 0.67449/√m.
        let m = 25;
        let stats = basis_max_experiment(1, m, 2001, 5).unwrap();
        let expected = 0.674_489_750_196_082 / (m as f64).sqrt();
        // The sample median of 2001 draws has sd ≈ 1/(2·f(med)·√n) ≈ 0.0047 here.
        assert!((stats.median - expected).abs() < 0.02, "{}", stats.median);
    }

    #[test]
    fn baseline_small_cases() {
        let s = gaussian_baseline_max(400, 1, 1001, 3).unwrap();
        // |mean of 400 scalars| is half-normal with scale 1/20.
        assert!((s.median - 0.674_489_75 / 20.0).abs() < 0.004, "{}", s.median);
        assert!(gaussian_baseline_max(0, 1, 1, 1).is_err());
        assert!(basis_max_experiment(4, 4, 0, 1).is_err());
    }
}
