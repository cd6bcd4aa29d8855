//! Randomized Hadamard transform sketches with Gaussian diagonals.
//!
//! - [`hadamard`]: in-place fast Walsh–Hadamard transform and its quadratic oracle.
//! - [`ensemble`]: ensembles of `m` transforms `z ↦ H·D^j·z` and their stacked embedding.
//! - [`gaussian`]: Gaussian expectations, `Φ`, and the RBF kernel.
//! - [`features`]: random Fourier features for the RBF kernel.
//! - [`distance`]: the adaptive distance-estimation structure.
//! - [`lab`]: empirical concentration measurements.

pub mod distance;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod gaussian;
pub mod hadamard;
pub mod lab;
pub mod report;
pub mod rng;

pub use distance::{Adversary, DistanceEstimator, EstimateDetail, QueryParams};
pub use ensemble::{Embedding, EnsembleHeader, RhtEnsemble};
pub use error::{Error, Result};
pub use features::{FourierFeatureMap, KernelDecomposition};
pub use gaussian::{gaussian_expectation, rbf_kernel, std_normal_cdf, std_normal_pdf, ScalarFunctional};
pub use hadamard::{fwht_in_place, naive_hadamard_apply, next_pow2, HadamardDim};
pub use lab::{TestVector, TestVectorSuite, VectorLabel};
pub use report::{CaseDeviation, DeviationReport, Histogram, ReportParams, TrialStatistics};
