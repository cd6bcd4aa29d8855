//! Adaptive Euclidean distance estimation over RHT embeddings.
//!
//! Every stored point `x_i` is kept only as its embedding `y_i = h̃(x_i)`. A
//! query `q` embeds once, samples `k` coordinates of `[m·d]` with replacement,
//! and for each `i` returns the truncated mean
//!
//! ```text
//! r_i = 2·√(ln 1/ε) · quant_α({y_l − (y_i)_l})
//! d_i = √(π/2) · (1/k) · Σ_l min(|y_l − (y_i)_l|, r_i)
//! ```
//!
//! Each entry of `h̃(q − x_i)` is `N(0, ‖q − x_i‖²)`, and `√(π/2)·E|Z| = σ`,
//! so `d_i` estimates `‖q − x_i‖`. The same sampled coordinates serve every
//! stored point and both the quantile and the mean.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{norm, Embedding, RhtEnsemble};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{psi, std_normal_cdf};
use crate::report::{CaseDeviation, DeviationReport, ReportParams};
use crate::rng::{fill_standard_normal, keyed_rng, StreamKind};

pub const DEFAULT_M_FACTOR: f64 = 8.0;
pub const DEFAULT_K_FACTOR: f64 = 8.0;

/// `quant_α` of the signed differences, as a multiple of the true distance:
/// the Gaussian value is `Φ⁻¹(Φ(3)) = 3`, and the admissible window is `[2, 4]`.
const QUANTILE_WINDOW: (f64, f64) = (2.0, 4.0);

/// `α = Φ(3)`.
pub fn default_alpha() -> f64 {
    std_normal_cdf(3.0)
}

/// `⌈8·ε⁻²·ln(d/δ)⌉`.
pub fn default_m(eps: f64, delta: f64, logical_d: usize) -> Result<usize> {
    check_eps_delta(eps, delta)?;
    let d = logical_d.max(1) as f64;
    Ok((DEFAULT_M_FACTOR / (eps * eps) * (d / delta).ln()).ceil().max(1.0) as usize)
}

/// `⌈8·ε⁻²·ln(4n/δ)⌉`.
pub fn default_k(eps: f64, delta: f64, n: usize) -> Result<usize> {
    check_eps_delta(eps, delta)?;
    let n = n.max(1) as f64;
    Ok((DEFAULT_K_FACTOR / (eps * eps) * (4.0 * n / delta).ln())
        .ceil()
        .max(1.0) as usize)
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", "must lie in (0, 1/2)"));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(invalid("delta", "must lie in (0, 1/2)"));
    }
    Ok(())
}

/// Element at 1-based rank `⌈α·n⌉` (clamped to `[1, n]`) of the ascending order.
pub fn quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile of an empty list"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    let mut scratch = values.to_vec();
    Ok(quantile_in_place(&mut scratch, alpha))
}

fn quantile_rank(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64).ceil() as usize).clamp(1, n) - 1
}

fn quantile_in_place(values: &mut [f64], alpha: f64) -> f64 {
    let rank = quantile_rank(values.len(), alpha);
    *values.select_nth_unstable_by(rank, f64::total_cmp).1
}

/// `ψ_r(x) = min(|x|, r)`, rejecting negative `r`.
pub fn psi_checked(r: f64, x: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(invalid("r", "truncation level must be nonnegative"));
    }
    Ok(psi(r, x))
}

/// `√(π/2) · mean(ψ_r(diffs))`.
pub fn truncated_mean(diffs: &[f64], r: f64) -> f64 {
    let sum: f64 = diffs.iter().map(|&v| psi(r, v)).sum();
    (PI / 2.0).sqrt() * sum / diffs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    pub eps: f64,
    pub delta: f64,
    /// Sample count; `None` means [`default_k`] for the current point count.
    pub k: Option<usize>,
    pub alpha: f64,
    pub query_seed: u64,
}

impl QueryParams {
    pub fn new(eps: f64, delta: f64, query_seed: u64) -> Result<Self> {
        let params = Self {
            eps,
            delta,
            k: None,
            alpha: default_alpha(),
            query_seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, query_seed: u64) -> Self {
        self.query_seed = query_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_eps_delta(self.eps, self.delta)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if self.k == Some(0) {
            return Err(invalid("k", "must be positive"));
        }
        Ok(())
    }

    pub fn resolved_k(&self, n: usize) -> Result<usize> {
        match self.k {
            Some(k) => Ok(k),
            None => default_k(self.eps, self.delta, n),
        }
    }

    /// `2·√(ln 1/ε)`.
    pub fn radius_factor(&self) -> f64 {
        2.0 * (1.0 / self.eps).ln().sqrt()
    }
}

/// Per-point query output including the intermediate quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateDetail {
    pub estimate: f64,
    /// `quant_α` of the sampled signed differences.
    pub quantile: f64,
    /// Truncation level `r_i`, clamped at 0.
    pub radius: f64,
}

/// Samples `k` coordinates of `[0, len)` uniformly with replacement.
pub fn sample_indices(query_seed: u64, len: usize, k: usize) -> Vec<usize> {
    let mut rng = keyed_rng(query_seed, StreamKind::QueryIndices, 0);
    (0..k).map(|_| rng.random_range(0..len)).collect()
}

#[derive(Debug, Clone)]
pub struct DistanceEstimator {
    ensemble: RhtEnsemble,
    embeddings: Vec<Embedding>,
}

impl DistanceEstimator {
    /// An empty structure over a fresh ensemble.
    pub fn new(logical_d: usize, m: usize, seed: u64) -> Result<Self> {
        Ok(Self::from_ensemble(RhtEnsemble::new(logical_d, m, seed)?))
    }

    /// As [`Self::new`] with `m` from [`default_m`].
    pub fn with_accuracy(logical_d: usize, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        Self::new(logical_d, default_m(eps, delta, logical_d)?, seed)
    }

    pub fn from_ensemble(ensemble: RhtEnsemble) -> Self {
        Self {
            ensemble,
            embeddings: Vec::new(),
        }
    }

    pub fn ensemble(&self) -> &RhtEnsemble {
        &self.ensemble
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embedding(&self, i: usize) -> Option<&Embedding> {
        self.embeddings.get(i)
    }

    /// Stores `h̃(x)` and returns its index.
    pub fn insert(&mut self, x: &[f64]) -> Result<usize> {
        let y = self.ensemble.embed(x)?;
        self.embeddings.push(y);
        Ok(self.embeddings.len() - 1)
    }

    pub fn extend<P: AsRef<[f64]>>(&mut self, points: &[P]) -> Result<()> {
        for p in points {
            self.insert(p.as_ref())?;
        }
        Ok(())
    }

    /// Distance estimates from `q` to every stored point, in insertion order.
    pub fn query(&self, q: &[f64], params: &QueryParams) -> Result<Vec<f64>> {
        Ok(self
            .query_detailed(q, params)?
            .into_iter()
            .map(|d| d.estimate)
            .collect())
    }

    pub fn query_detailed(&self, q: &[f64], params: &QueryParams) -> Result<Vec<EstimateDetail>> {
        params.validate()?;
        let y = self.ensemble.embed(q)?;
        if self.embeddings.is_empty() {
            return Ok(Vec::new());
        }
        let k = params.resolved_k(self.len())?;
        let indices = sample_indices(params.query_seed, y.len(), k);
        let sampled: Vec<f64> = indices.iter().map(|&l| y.values()[l]).collect();
        let factor = params.radius_factor();
        Ok(self
            .embeddings
            .par_iter()
            .map_init(
                || (vec![0.0; k], vec![0.0; k]),
                |(diffs, scratch), yi| {
                    for ((d, &l), &yl) in diffs.iter_mut().zip(&indices).zip(&sampled) {
                        *d = yl - yi.values()[l];
                    }
                    scratch.copy_from_slice(diffs);
                    let quantile = quantile_in_place(scratch, params.alpha);
                    let radius = (factor * quantile).max(0.0);
                    EstimateDetail {
                        estimate: truncated_mean(diffs, radius),
                        quantile,
                        radius,
                    }
                },
            )
            .collect())
    }

    /// Runs `rounds` queries chosen by `adversary` from earlier answers and
    /// reports, per round, the worst relative error `|d_i / ‖q − x_i‖ − 1|`.
    ///
    /// `points` are the stored points in insertion order; they supply the
    /// exact distances and are never consulted by the estimator itself.
    pub fn adaptive_stress<P: AsRef<[f64]>>(
        &self,
        points: &[P],
        rounds: usize,
        adversary: Adversary,
        params: &QueryParams,
        seed: u64,
    ) -> Result<DeviationReport> {
        if self.is_empty() {
            return Err(Error::Empty("adaptive_stress needs stored points"));
        }
        if points.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: points.len(),
            });
        }
        params.validate()?;
        let start = Instant::now();
        let d = self.ensemble.logical_d();
        let mut noise = keyed_rng(seed, StreamKind::Adversary, 0);
        let mut per_case = Vec::with_capacity(rounds);
        let mut window_misses = 0usize;
        let mut q = basis_query(d, 0);
        for round in 0..rounds {
            if adversary == Adversary::Basis {
                q = basis_query(d, round);
            }
            let round_params = params.with_seed(round_query_seed(seed, round));
            let details = self.query_detailed(&q, &round_params)?;
            let mut worst = (0.0, 0usize);
            for (i, (det, x)) in details.iter().zip(points).enumerate() {
                let truth = distance(&q, x.as_ref());
                let err = relative_error(det.estimate, truth);
                if err > worst.0 || i == 0 {
                    worst = (err, i);
                }
                let (lo, hi) = QUANTILE_WINDOW;
                if !(lo * truth <= det.quantile && det.quantile <= hi * truth) {
                    window_misses += 1;
                }
            }
            per_case.push(CaseDeviation {
                case_id: format!("round_{round}"),
                deviation: worst.0,
            });
            if adversary == Adversary::GreedyFeedback {
                q = greedy_next(&q, points[worst.1].as_ref(), &mut noise);
            }
        }
        let params_out = ReportParams {
            d,
            m: self.ensemble.m(),
            seed,
            eps: Some(params.eps),
            trials: rounds,
        };
        Ok(DeviationReport::new(
            format!("adaptive_stress/{}", adversary.name()),
            params_out,
            per_case,
            start.elapsed(),
        )
        .with_diagnostic("quantile_window_misses", window_misses as f64)
        .with_diagnostic("estimates_checked", (rounds * self.len()) as f64))
    }
}

/// How [`DistanceEstimator::adaptive_stress`] picks the next query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// Round `t` queries `(1 + ⌊t/d⌋)·e_{t mod d}`.
    Basis,
    /// Re-centres on the worst-estimated point of the previous round and
    /// perturbs the direction that produced it.
    GreedyFeedback,
}

impl Adversary {
    pub fn name(&self) -> &'static str {
        match self {
            Adversary::Basis => "basis",
            Adversary::GreedyFeedback => "greedy-feedback",
        }
    }
}

/// Per-round query seed; every round draws fresh indices.
pub fn round_query_seed(seed: u64, round: usize) -> u64 {
    keyed_rng(seed, StreamKind::QueryIndices, 1 + round as u64).random()
}

fn basis_query(d: usize, round: usize) -> Vec<f64> {
    let mut q = vec![0.0; d];
    q[round % d] = 1.0 + (round / d) as f64;
    q
}

/// `x_w + ρ·unit((q − x_w) + ½·‖q − x_w‖·g)`, `ρ = clamp(‖q − x_w‖, ¼, 2)`.
fn greedy_next(q: &[f64], worst: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut g = vec![0.0; q.len()];
    fill_standard_normal(rng, &mut g);
    let g_norm = norm(&g).max(f64::MIN_POSITIVE);
    let offset: Vec<f64> = q.iter().zip(worst).map(|(a, b)| a - b).collect();
    let radius = norm(&offset);
    let spread = 0.5 * radius.max(0.25);
    let dir: Vec<f64> = offset.iter().zip(&g).map(|(o, gi)| o + spread * gi / g_norm).collect();
    let dir_norm = norm(&dir).max(f64::MIN_POSITIVE);
    let rho = radius.clamp(0.25, 2.0);
    worst.iter().zip(&dir).map(|(w, u)| w + rho * u / dir_norm).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `|estimate/truth − 1|`; a zero truth counts as exact only for a zero estimate.
pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    if truth == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate / truth - 1.0).abs()
    }
}
