//! The false-zero observation mechanism: a positive mediator up to a known
//! ceiling can still be recorded as zero, with a probability that decays in
//! the true value. Values above the ceiling are always recorded faithfully.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{exp, log1m_exp};

/// Recording model for the mediator: true zeros are always recorded as zero,
/// and a positive value `m <= ceiling` is recorded as zero with probability
/// `exp(-eta² m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Decay parameter; enters squared, so only |eta| matters.
    pub eta: f64,
    /// Largest value that can be masked (the instrument's floor), `B`.
    pub ceiling: f64,
}

impl Detection {
    pub fn new(eta: f64, ceiling: f64) -> Self {
        Detection { eta, ceiling }
    }

    /// P(recorded as zero | true value `m`).
    pub fn prob_observed_zero(&self, m: f64) -> f64 {
        if m == 0.0 {
            1.0
        } else if m > self.ceiling {
            0.0
        } else {
            exp(-self.eta * self.eta * m)
        }
    }

    /// log P(recorded faithfully | true value `m > 0`).
    ///
    /// # Errors
    ///
    /// [`Error::DegenerateLikelihood`] when the probability is exactly zero,
    /// which only happens at `eta == 0` with `m` under the ceiling: such a
    /// value can never be observed, so its likelihood contribution is log 0.
    pub fn log_prob_observed_positive(&self, m: f64) -> Result<f64> {
        debug_assert!(m > 0.0);
        if m > self.ceiling {
            return Ok(0.0);
        }
        let rate = self.eta * self.eta * m;
        if rate == 0.0 {
            return Err(Error::DegenerateLikelihood { m });
        }
        Ok(log1m_exp(-rate))
    }

    /// Push one true value through the recording process.
    pub fn observe<R: Rng + ?Sized>(&self, m: f64, rng: &mut R) -> f64 {
        if m == 0.0 {
            return 0.0;
        }
        if m <= self.ceiling && rng.random::<f64>() < self.prob_observed_zero(m) {
            0.0
        } else {
            m
        }
    }
}
