//! Streaming mean/variance accumulation (Welford's algorithm).

use crate::real::{real, Real};

/// Single-pass accumulator for count, mean, and centered second moment.
#[derive(Debug, Clone)]
pub(crate) struct Welford<T> {
    pub(crate) count: usize,
    mean: T,
    m2: T,
}

impl<T: Real> Default for Welford<T> {
    fn default() -> Self {
        Self { count: 0, mean: T::zero(), m2: T::zero() }
    }
}

impl<T: Real> Welford<T> {
    pub(crate) fn push(&mut self, value: T) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / real(self.count as f64);
        self.m2 += delta * (value - self.mean);
    }

    pub(crate) fn mean(&self) -> T {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub(crate) fn variance(&self) -> T {
        if self.count < 2 {
            T::zero()
        } else {
            (self.m2 / real((self.count - 1) as f64)).max(T::zero())
        }
    }

    pub(crate) fn sd(&self) -> T {
        self.variance().sqrt()
    }
}
