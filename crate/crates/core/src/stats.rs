//! Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Monte Carlo result with its seed provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
}

impl Estimate {
    /// Mean and standard error of the mean, summed in slice order.
    ///
    /// Panics on an empty slice.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        assert!(!samples.is_empty(), "an estimate needs at least one sample");
        let mut acc = Welford::default();
        for &s in samples {
            acc.push(s);
        }
        acc.estimate(seed)
    }

    /// `self * factor`, standard error scaled by `|factor|`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            ..self
        }
    }

    /// Lower edge of the `k`-standard-error interval.
    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.std_error
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.mean + k * self.std_error
    }

    pub fn relative_error(&self) -> f64 {
        self.std_error / self.mean.abs()
    }

    /// Combined standard error of two independent estimates.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// Whether `|a - b| <= k * combined SE`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.combined_se(other)
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self, seed: u64) -> Estimate {
        Estimate {
            mean: self.mean,
            std_error: self.std_error(),
            n: self.count,
            seed,
        }
    }
}
