//! Error summaries, batch-means standard errors and regression through the
//! origin.

use serde::Serialize;

/// Batches used for Monte Carlo standard errors.
pub const DEFAULT_BATCHES: usize = 100;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub value: f64,
    pub se: f64,
}

impl MeanSe {
    /// `|x - value| <= k * se`. A zero standard error demands agreement to
    /// rounding.
    pub fn agrees(&self, x: f64, k: f64) -> bool {
        let slack = if self.se > 0.0 { k * self.se } else { 1e-12 * self.value.abs().max(1.0) };
        (x - self.value).abs() <= slack
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Splits `xs` into `batches` contiguous batches (the last absorbs the
/// remainder). Returns `None` if there are fewer values than batches.
fn split(xs: &[f64], batches: usize) -> Option<Vec<&[f64]>> {
    if batches < 2 || xs.len() < batches {
        return None;
    }
    let size = xs.len() / batches;
    Some(
        (0..batches)
            .map(|b| {
                let end = if b + 1 == batches { xs.len() } else { (b + 1) * size };
                &xs[b * size..end]
            })
            .collect(),
    )
}

/// Standard error of `stat` over all of `xs` from the spread of per-batch
/// values of `stat`.
fn batch_se(xs: &[f64], batches: usize, stat: fn(&[f64]) -> f64) -> f64 {
    match split(xs, batches) {
        Some(parts) => {
            let values: Vec<f64> = parts.iter().map(|b| stat(b)).collect();
            (sample_variance(&values) / values.len() as f64).sqrt()
        }
        None => f64::NAN,
    }
}

/// Sample mean with a batch-means standard error.
pub fn batch_means(xs: &[f64], batches: usize) -> MeanSe {
    MeanSe {
        value: mean(xs),
        se: batch_se(xs, batches, mean),
    }
}

/// Sample variance with a batch-means standard error.
pub fn batch_variance(xs: &[f64], batches: usize) -> MeanSe {
    MeanSe {
        value: sample_variance(xs),
        se: batch_se(xs, batches, sample_variance),
    }
}

/// Empirical accuracy of one estimator over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub mean_true: f64,
    pub mean_est: f64,
    /// Mean of `D = N - estimate`.
    pub bias: f64,
    pub v_d: f64,
    pub vmr: f64,
    pub cov: f64,
    pub mae: f64,
    pub n_cycles: u64,
    pub n_replications: u32,
    pub std_err_bias: f64,
    pub std_err_v_d: f64,
}

/// Collects `(N, estimate)` pairs in visiting order.
#[derive(Debug, Clone, Default)]
pub struct ErrorAccumulator {
    truth: Vec<f64>,
    errors: Vec<f64>,
    estimates_sum: f64,
}

impl ErrorAccumulator {
    pub fn with_capacity(n: usize) -> Self {
        ErrorAccumulator {
            truth: Vec::with_capacity(n),
            errors: Vec::with_capacity(n),
            estimates_sum: 0.0,
        }
    }

    pub fn push(&mut self, true_n: f64, estimate: f64) {
        self.truth.push(true_n);
        self.errors.push(true_n - estimate);
        self.estimates_sum += estimate;
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn summarize(&self, n_replications: u32) -> ErrorSummary {
        let n = self.errors.len();
        let mean_true = mean(&self.truth);
        let bias = batch_means(&self.errors, DEFAULT_BATCHES);
        let v_d = batch_variance(&self.errors, DEFAULT_BATCHES);
        ErrorSummary {
            mean_true,
            mean_est: self.estimates_sum / n as f64,
            bias: bias.value,
            v_d: v_d.value,
            vmr: v_d.value / mean_true,
            cov: v_d.value.sqrt() / mean_true,
            mae: self.errors.iter().map(|d| d.abs()).sum::<f64>() / n as f64,
            n_cycles: n as u64,
            n_replications,
            std_err_bias: bias.se,
            std_err_v_d: v_d.se,
        }
    }
}

/// Least-squares line `y = b x` with `R^2 = 1 - SSE / sum(y^2)` (the
/// uncentred coefficient used for fits without an intercept).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginFit {
    pub slope: f64,
    pub r2: f64,
    pub n: usize,
}

pub fn regression_through_origin(x: &[f64], y: &[f64]) -> OriginFit {
    assert_eq!(x.len(), y.len(), "paired samples");
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let slope = sxy / sxx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    OriginFit {
        slope,
        r2: 1.0 - sse / syy,
        n: x.len(),
    }
}
