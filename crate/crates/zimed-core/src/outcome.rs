//! Gaussian outcome regression with a jump and slope change at mediator zero:
//! the conditional mean carries separate terms for "any mediator at all"
//! (the indicator) and "how much" (the level), each optionally interacting
//! with the exposure.

use crate::math::normal_logpdf;

/// Coefficients of the outcome mean
/// `b0 + b1·m + b2·1(m>0) + b3·x + b4·x·1(m>0) + b5·x·m`
/// plus the residual standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeParams {
    pub beta: [f64; 6],
    /// Residual standard deviation, must be positive.
    pub delta: f64,
}

impl OutcomeParams {
    /// Conditional mean of the outcome given exposure and true mediator.
    /// `m` must be non-negative; zero switches the indicator terms off.
    pub fn mean(&self, x: f64, m: f64) -> f64 {
        debug_assert!(m >= 0.0, "negative mediator {m}");
        let b = &self.beta;
        let ind = if m > 0.0 { 1.0 } else { 0.0 };
        b[0] + b[1] * m + b[2] * ind + b[3] * x + b[4] * x * ind + b[5] * x * m
    }

    /// Gaussian log-density of `y` around [`Self::mean`].
    pub fn logpdf(&self, y: f64, x: f64, m: f64) -> f64 {
        normal_logpdf(y, self.mean(x, m), self.delta)
    }

    pub fn is_valid(&self) -> bool {
        self.delta > 0.0 && self.delta.is_finite() && self.beta.iter().all(|b| b.is_finite())
    }
}
