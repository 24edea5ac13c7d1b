//! Estimators with standard errors for the simulator.

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Standard error of a Bernoulli frequency `successes / trials`.
pub fn binomial_std_error(successes: u64, trials: u64) -> Option<f64> {
    if trials == 0 {
        return None;
    }
    let p = successes as f64 / trials as f64;
    Some((p * (1.0 - p) / trials as f64).sqrt())
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    pub fn sample_variance(&self) -> Option<f64> {
        (self.n > 1).then(|| self.m2 / (self.n - 1) as f64)
    }
}

/// Non-overlapping batch means for autocorrelated series.
///
/// Observations are grouped into consecutive batches of `batch_len`; the
/// standard error of the grand mean comes from the spread of the batch
/// means. A trailing partial batch contributes to the mean only.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: u64,
    current_sum: f64,
    current_n: u64,
    total_sum: f64,
    total_n: u64,
    batches: Welford,
}

impl BatchMeans {
    pub fn new(batch_len: u64) -> Self {
        Self {
            batch_len: batch_len.max(1),
            current_sum: 0.0,
            current_n: 0,
            total_sum: 0.0,
            total_n: 0,
            batches: Welford::default(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.current_sum += x;
        self.current_n += 1;
        self.total_sum += x;
        self.total_n += 1;
        if self.current_n == self.batch_len {
            self.batches.push(self.current_sum / self.batch_len as f64);
            self.current_sum = 0.0;
            self.current_n = 0;
        }
    }

    pub fn count(&self) -> u64 {
        self.total_n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total_n > 0).then(|| self.total_sum / self.total_n as f64)
    }

    /// Needs at least two complete batches.
    pub fn std_error(&self) -> Option<f64> {
        let var = self.batches.sample_variance()?;
        Some((var / self.batches.count() as f64).sqrt())
    }

    pub fn num_batches(&self) -> u64 {
        self.batches.count()
    }
}
