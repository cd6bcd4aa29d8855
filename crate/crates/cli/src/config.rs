use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rht_core::Adversary;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "RHT_SEED";

#[derive(Debug, Parser)]
#[command(name = "rht", version, about = "Randomized Hadamard transform sketching experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time the fast transform and the embedding against the quadratic apply.
    Bench(BenchArgs),
    /// Lipschitz, ECDF and distortion concentration checks.
    Verify(VerifyArgs),
    /// RBF kernel approximation error over all pairs of points.
    Kernel(KernelArgs),
    /// Build, insert and query the distance estimator, optionally under an adaptive adversary.
    Distest(DistestArgs),
    /// Basis-vector and dense-Gaussian lower-bound experiments.
    Lowerbound(LowerboundArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Seed for every random stream; falls back to $RHT_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Largest dimension; the sweep covers powers of two from 64 up to it.
    #[arg(long, default_value_t = 4096)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Timed repetitions per dimension; the minimum is reported.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 256)]
    pub d: usize,
    #[arg(long, default_value_t = 1024)]
    pub m: usize,
    /// Random directions added to the structured test vectors.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Truncation accuracy for the ψ_r functional, r = 2·√(ln 1/ε).
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Random pairs for the distortion check.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Points as CSV; without it, `n` points are drawn uniformly from the unit ball.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Dimension; defaults to the input column count, else 64.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Blocks; defaults to ⌈8·ε⁻²·max(1, diam²)·ln(2/δ)⌉.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Kernel bandwidth; inputs are divided by it.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DistestArgs {
    /// Stored points as CSV; without it, `n` random unit vectors are used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Query points as CSV; without it, `queries` random unit vectors are used.
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Dimension; defaults to the input column count, else 128.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub queries: usize,
    /// Blocks; defaults to ⌈8·ε⁻²·ln(d/δ)⌉.
    #[arg(long)]
    pub m: Option<usize>,
    /// Sampled coordinates per query; defaults to ⌈8·ε⁻²·ln(4n/δ)⌉.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Adaptive rounds run after the plain queries.
    #[arg(long, default_value_t = 0)]
    pub rounds: usize,
    #[arg(long, value_enum, default_value_t = AdversaryArg::GreedyFeedback)]
    pub adversary: AdversaryArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdversaryArg {
    Basis,
    GreedyFeedback,
}

impl From<AdversaryArg> for Adversary {
    fn from(a: AdversaryArg) -> Self {
        match a {
            AdversaryArg::Basis => Adversary::Basis,
            AdversaryArg::GreedyFeedback => Adversary::GreedyFeedback,
        }
    }
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    /// Dimensions for the basis-vector experiment.
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 256, 1024])]
    pub d: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Target deviation for the dense-Gaussian baseline, n = ⌈(2ε)⁻²·d⌉ rows.
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    /// Dimension for the dense-Gaussian baseline.
    #[arg(long, default_value_t = 64)]
    pub baseline_d: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Bench,
    Verify,
    Kernel,
    Distest,
    Lowerbound,
}

/// The fully resolved settings of one run; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub d: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    pub format: Format,
    /// Command-specific settings (trials, rounds, bandwidth, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunConfig {
    pub fn new(command: CommandName, d: usize, m: usize, seed: u64, common: &CommonArgs) -> Self {
        Self {
            command,
            d,
            m,
            k: None,
            n: None,
            eps: None,
            delta: None,
            seed,
            input_path: None,
            query_path: None,
            output_path: common.output.clone(),
            format: common.format,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.extra.insert(key.to_owned(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.d == 0 || self.m == 0 {
            return Err(CliError::Usage("--d and --m must be at least 1".into()));
        }
        for (name, value) in [("eps", self.eps), ("delta", self.delta)] {
            if let Some(v) = value {
                if !(v > 0.0 && v < 0.5) {
                    return Err(CliError::Usage(format!("--{name} must lie in (0, 1/2), got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// `--seed`, else `$RHT_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
    match (flag, env) {
        (Some(s), _) => Ok(s),
        (None, Some(raw)) => raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got {raw:?}"))),
        (None, None) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("9")).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(" 9 ")).unwrap(), 9);
        assert_eq!(resolve_seed(None, None).unwrap(), 0);
        assert!(matches!(resolve_seed(None, Some("x")), Err(CliError::Usage(_))));
    }

    #[test]
    fn config_validation() {
        let common = CommonArgs {
            seed: None,
            output: None,
            format: Format::Json,
        };
        let mut c = RunConfig::new(CommandName::Verify, 4, 2, 0, &common);
        assert!(c.validate().is_ok());
        c.eps = Some(0.5);
        assert!(c.validate().is_err());
        c.eps = Some(0.1);
        c.m = 0;
        assert!(c.validate().is_err());
    }
}
