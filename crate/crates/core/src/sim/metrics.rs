//! Replication summaries.

use alloc::string::String;
use alloc::vec::Vec;

/// One estimator's output on one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replicate {
    pub estimate: f64,
    /// Whether the Wald interval covered the truth, for methods with one.
    pub covered: Option<bool>,
    pub r1n: Option<f64>,
    pub n1: usize,
    pub n0: usize,
    pub clip_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub estimator: String,
    pub config: String,
    /// Configured trial size, or the realized mean when sizes are random.
    pub n1: f64,
    pub n0: f64,
    pub reps: usize,
    pub truth: f64,
    pub mean_estimate: f64,
    pub abs_bias: f64,
    /// Population standard deviation over replications.
    pub sd: f64,
    pub rmse: f64,
    pub sqrt_n_rmse: f64,
    pub coverage: Option<f64>,
    pub r1n_diag: Option<f64>,
    pub clip_count: usize,
}

impl MetricsRow {
    /// Monte-Carlo standard error of the mean estimate, `sd / sqrt(reps)`.
    pub fn mc_se(&self) -> f64 {
        self.sd / libm::sqrt(self.reps as f64)
    }

    /// Signed bias.
    pub fn bias(&self) -> f64 {
        self.mean_estimate - self.truth
    }
}

/// Aggregates replications of one estimator. `scale_n` is the sample size
/// used to scale the RMSE; `sizes_random` reports realized mean sample
/// sizes instead of `configured`.
pub fn summarize(
    estimator: &str,
    config: &str,
    truth: f64,
    configured: (usize, usize),
    sizes_random: bool,
    scale_n: f64,
    reps: &[Replicate],
) -> MetricsRow {
    let k = reps.len().max(1) as f64;
    let mean = reps.iter().map(|r| r.estimate).sum::<f64>() / k;
    let sd = libm::sqrt(reps.iter().map(|r| (r.estimate - mean) * (r.estimate - mean)).sum::<f64>() / k);
    let rmse = libm::sqrt(reps.iter().map(|r| (r.estimate - truth) * (r.estimate - truth)).sum::<f64>() / k);
    let coverage = if reps.iter().all(|r| r.covered.is_some()) && !reps.is_empty() {
        Some(reps.iter().filter(|r| r.covered == Some(true)).count() as f64 / k)
    } else {
        None
    };
    let r1n_diag = if reps.iter().all(|r| r.r1n.is_some()) && !reps.is_empty() {
        Some(reps.iter().map(|r| r.r1n.unwrap_or(0.0)).sum::<f64>() / k)
    } else {
        None
    };
    let (n1, n0) = if sizes_random {
        (
            reps.iter().map(|r| r.n1 as f64).sum::<f64>() / k,
            reps.iter().map(|r| r.n0 as f64).sum::<f64>() / k,
        )
    } else {
        (configured.0 as f64, configured.1 as f64)
    };
    MetricsRow {
        estimator: estimator.into(),
        config: config.into(),
        n1,
        n0,
        reps: reps.len(),
        truth,
        mean_estimate: mean,
        abs_bias: (mean - truth).abs(),
        sd,
        rmse,
        sqrt_n_rmse: libm::sqrt(scale_n) * rmse,
        coverage,
        r1n_diag,
        clip_count: reps.iter().map(|r| r.clip_count).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    pub warnings: Vec<String>,
}

impl MetricsTable {
    pub fn find(&self, estimator: &str, config: &str, n1: f64) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.config == config && r.n1 == n1)
    }
}
