// SPDX-License-Identifier: Apache-2.0

//! Empirical distributions with step-function semantics.
//!
//! Every quantile and every draw returns one of the stored samples; nothing
//! is ever interpolated. Quantiles use the nearest-rank rule
//! (`rank = ceil(q * n)`, generalised to cumulative weight when weights are
//! present).

mod cache;
mod rng;

pub use cache::{read_ecdf_cache, source_digest, write_ecdf_cache, CacheError, EcdfCache, SampleUnits};
pub use rng::SeededRng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("weight at index {0} is not a positive finite number")]
    InvalidWeight(usize),
    #[error("{samples} samples but {weights} weights")]
    WeightLengthMismatch { samples: usize, weights: usize },
    #[error("quantile {0} outside [0, 1]")]
    QuantileOutOfRange(f64),
}

// Relative slack when comparing a cumulative weight against q * total, so that
// e.g. 0.95 * 100 lands on rank 95 rather than 96.
const RANK_EPS: f64 = 1e-9;

/// One-based nearest-rank index for quantile `q` over `n` equally weighted
/// samples. `q = 0` maps to rank 1 (the minimum).
pub fn nearest_rank(q: f64, n: usize) -> usize {
    assert!(n > 0, "nearest_rank over an empty set");
    if q <= 0.0 {
        return 1;
    }
    let x = q * n as f64;
    let rounded = x.round();
    let rank = if (x - rounded).abs() <= RANK_EPS * x.max(1.0) {
        rounded
    } else {
        x.ceil()
    };
    (rank as usize).clamp(1, n)
}

/// Sorted samples with optional positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    weights: Option<Vec<f64>>,
    cumulative: Vec<f64>,
}

/// Builds an unweighted ECDF from raw samples in any order.
pub fn build_ecdf(samples: Vec<f64>) -> Result<EmpiricalDistribution, DistributionError> {
    EmpiricalDistribution::new(samples)
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, DistributionError> {
        if samples.is_empty() {
            return Err(DistributionError::EmptyInput);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DistributionError::NonFiniteSample(i));
        }
        samples.sort_by(f64::total_cmp);
        let cumulative = (1..=samples.len()).map(|i| i as f64).collect();
        Ok(Self {
            samples,
            weights: None,
            cumulative,
        })
    }

    pub fn with_weights(samples: Vec<f64>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        if samples.len() != weights.len() {
            return Err(DistributionError::WeightLengthMismatch {
                samples: samples.len(),
                weights: weights.len(),
            });
        }
        if samples.is_empty() {
            return Err(DistributionError::EmptyInput);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DistributionError::NonFiniteSample(i));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(DistributionError::InvalidWeight(i));
        }
        let mut pairs: Vec<(f64, f64)> = samples.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (samples, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            samples,
            weights: Some(weights),
            cumulative,
        })
    }

    pub fn point_mass(value: f64) -> Result<Self, DistributionError> {
        Self::new(vec![value])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; construction rejects empty input.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn total_weight(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        *self.samples.last().expect("non-empty")
    }

    pub fn mean(&self) -> f64 {
        match &self.weights {
            None => self.samples.iter().sum::<f64>() / self.len() as f64,
            Some(w) => {
                let num: f64 = self.samples.iter().zip(w).map(|(s, w)| s * w).sum();
                num / self.total_weight()
            }
        }
    }

    /// Fraction of weight on samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.samples.partition_point(|s| *s <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1] / self.total_weight()
        }
    }

    /// Index of the first sample whose cumulative weight reaches `target`.
    fn first_reaching(&self, target: f64) -> usize {
        let slack = RANK_EPS * self.total_weight().max(1.0);
        let idx = self.cumulative.partition_point(|c| *c < target - slack);
        idx.min(self.len() - 1)
    }

    pub fn quantile(&self, q: f64) -> Result<f64, DistributionError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(DistributionError::QuantileOutOfRange(q));
        }
        if self.weights.is_none() {
            return Ok(self.samples[nearest_rank(q, self.len()) - 1]);
        }
        if q == 0.0 {
            return Ok(self.min());
        }
        Ok(self.samples[self.first_reaching(q * self.total_weight())])
    }

    /// Inverse-CDF draw: the smallest sample whose CDF is at least `u`,
    /// with `u` uniform on `[0, 1)`.
    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        let u = rng.uniform();
        let target = u * self.total_weight();
        let idx = self.cumulative.partition_point(|c| *c < target);
        self.samples[idx.min(self.len() - 1)]
    }

    pub fn summarize(&self) -> QuantileSummary {
        let q = |p| self.quantile(p).expect("fixed quantile in range");
        QuantileSummary {
            q25: q(0.25),
            q50: q(0.50),
            q95: q(0.95),
        }
    }

    /// Weight per half-open bin `[lo, lo + width)`, covering the sample range.
    pub fn histogram(&self, width: f64) -> Vec<HistogramBin> {
        assert!(width > 0.0 && width.is_finite(), "histogram width must be positive");
        let start = (self.min() / width).floor() * width;
        let n_bins = (((self.max() - start) / width).floor() as usize) + 1;
        let mut bins: Vec<HistogramBin> = (0..n_bins)
            .map(|i| HistogramBin {
                lo: start + i as f64 * width,
                hi: start + (i + 1) as f64 * width,
                weight: 0.0,
            })
            .collect();
        for (i, s) in self.samples.iter().enumerate() {
            let b = (((s - start) / width).floor() as usize).min(n_bins - 1);
            bins[b].weight += self.weights.as_ref().map_or(1.0, |w| w[i]);
        }
        bins
    }
}

/// 25%, 50% and 95% nearest-rank quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub q25: f64,
    pub q50: f64,
    pub q95: f64,
}

impl QuantileSummary {
    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        QuantileSummary {
            q25: f(self.q25),
            q50: f(self.q50),
            q95: f(self.q95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}
