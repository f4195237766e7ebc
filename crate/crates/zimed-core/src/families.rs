//! Zero-inflated mediator families. Each family is a two-part law: a point
//! mass at zero and a distribution `G` over the positive values, with the
//! location of `G` and the zero mass both linked to the exposure.
//!
//! For the lognormal family the linked zero mass is the entire zero
//! probability. For the count families the link controls the structural zero
//! mass on top of whatever mass `G`'s untruncated form already puts at zero,
//! and `G` itself is the zero-truncated count distribution.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};

use crate::error::{Error, Result};
use crate::math::{
    self, exp, log, log1m_exp, log1p, log_logistic, log_sum_exp2, logistic, LN_2PI,
};

/// Distribution of the positive part of the mediator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MediatorFamily {
    /// Zero mass plus lognormal positives; mediator is continuous.
    LogNormal,
    /// Structural zeros mixed with a negative binomial count.
    NegBinomial,
    /// Structural zeros mixed with a Poisson count.
    Poisson,
}

impl MediatorFamily {
    pub fn is_count(self) -> bool {
        !matches!(self, MediatorFamily::LogNormal)
    }

    pub const fn name(self) -> &'static str {
        match self {
            MediatorFamily::LogNormal => "zilon",
            MediatorFamily::NegBinomial => "zinb",
            MediatorFamily::Poisson => "zip",
        }
    }
}

/// Link coefficients of one mediator law. `sigma` only matters for the
/// lognormal family and `r` only for the negative binomial; both are carried
/// so the same struct serves every family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Intercept of the location link: `mu = alpha0 + alpha1 x` for the
    /// lognormal family, `log(mean) = alpha0 + alpha1 x` for the counts.
    pub alpha0: f64,
    pub alpha1: f64,
    /// Intercept of the zero link: `logit(zero mass) = gamma0 + gamma1 x`.
    pub gamma0: f64,
    pub gamma1: f64,
    /// Lognormal scale on the log axis.
    pub sigma: f64,
    /// Negative binomial size (inverse dispersion).
    pub r: f64,
}

/// One family's law at a fixed exposure value: the zero mass and the positive
/// part, with every derived quantity precomputed in log space.
#[derive(Debug, Clone, Copy)]
pub struct MediatorLaw {
    family: MediatorFamily,
    /// Lognormal log-scale mean, or the count mean (natural scale).
    location: f64,
    sigma: f64,
    r: f64,
    /// Linked zero mass on the logit scale.
    zero_lin: f64,
    /// log P(untruncated count = 0); unused for the lognormal family.
    log_p0: f64,
    /// log P(M = 0), all sources of zeros combined.
    log_zero: f64,
    /// log P(M > 0).
    log_nonzero: f64,
}

impl MediatorLaw {
    /// Build the law at exposure `x`.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidParameter`] for non-finite links or non-positive
    /// `sigma`/`r` where the family needs them, and
    /// [`Error::NonFiniteLocation`] when the exponential location link
    /// overflows.
    pub fn new(family: MediatorFamily, params: &LinkParams, x: f64) -> Result<Self> {
        let lin_loc = params.alpha0 + params.alpha1 * x;
        let zero_lin = params.gamma0 + params.gamma1 * x;
        if !lin_loc.is_finite() || !zero_lin.is_finite() {
            return Err(Error::NonFiniteLocation { linear_predictor: lin_loc });
        }
        match family {
            MediatorFamily::LogNormal => {
                if !(params.sigma > 0.0) || !params.sigma.is_finite() {
                    return Err(Error::InvalidParameter { name: "sigma", value: params.sigma });
                }
                let log_zero = log_logistic(zero_lin);
                let log_nonzero = log_logistic(-zero_lin);
                Ok(MediatorLaw {
                    family,
                    location: lin_loc,
                    sigma: params.sigma,
                    r: params.r,
                    zero_lin,
                    log_p0: f64::NEG_INFINITY,
                    log_zero,
                    log_nonzero,
                })
            }
            MediatorFamily::NegBinomial | MediatorFamily::Poisson => {
                if family == MediatorFamily::NegBinomial
                    && (!(params.r > 0.0) || !params.r.is_finite())
                {
                    return Err(Error::InvalidParameter { name: "r", value: params.r });
                }
                let location = exp(lin_loc);
                if !location.is_finite() || location <= 0.0 {
                    return Err(Error::NonFiniteLocation { linear_predictor: lin_loc });
                }
                let log_p0 = match family {
                    // r·log(r/(r+mu)) through log1p: the two-log form loses
                    // whole nats once the r multiplier passes 1/ulp(log r)
                    MediatorFamily::NegBinomial => -params.r * log1p(location / params.r),
                    MediatorFamily::Poisson => -location,
                    MediatorFamily::LogNormal => unreachable!(),
                };
                let log_star = log_logistic(zero_lin);
                let log_one_minus_star = log_logistic(-zero_lin);
                let log_zero = log_sum_exp2(log_star, log_one_minus_star + log_p0);
                let log_nonzero = log_one_minus_star + log1m_exp(log_p0);
                Ok(MediatorLaw {
                    family,
                    location,
                    sigma: params.sigma,
                    r: params.r,
                    zero_lin,
                    log_p0,
                    log_zero,
                    log_nonzero,
                })
            }
        }
    }

    pub fn family(&self) -> MediatorFamily {
        self.family
    }

    /// Location of the positive part on its natural scale: the log-scale mean
    /// for the lognormal family, the untruncated mean for the counts.
    pub fn location(&self) -> f64 {
        self.location
    }

    /// Total probability of observing a true zero, every source combined.
    pub fn zero_prob(&self) -> f64 {
        exp(self.log_zero).clamp(0.0, 1.0)
    }

    /// Structural (linked) zero mass: equals [`Self::zero_prob`] for the
    /// lognormal family, and the mixing weight `Δ*` for the counts.
    pub fn structural_zero_prob(&self) -> f64 {
        logistic(self.zero_lin)
    }

    pub fn log_zero_prob(&self) -> f64 {
        self.log_zero
    }

    pub fn log_nonzero_prob(&self) -> f64 {
        self.log_nonzero
    }

    /// E(M) including the zero mass.
    ///
    /// # Errors
    ///
    /// [`Error::NonFinite`] when the lognormal mean overflows.
    pub fn mean(&self) -> Result<f64> {
        let mean = match self.family {
            MediatorFamily::LogNormal => {
                exp(self.log_nonzero + self.location + 0.5 * self.sigma * self.sigma)
            }
            // (1 - Δ*) · untruncated mean: the truncation weight cancels
            // against the zero-truncated mean's normalizer
            MediatorFamily::NegBinomial | MediatorFamily::Poisson => {
                exp(log_logistic(-self.zero_lin)) * self.location
            }
        };
        if mean.is_finite() {
            Ok(mean)
        } else {
            Err(Error::NonFinite { context: "mediator mean" })
        }
    }

    /// log G(m), the density (or mass) of the positive part at `m > 0`.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidMediator`] for `m <= 0`, non-finite `m`, or a
    /// non-integer `m` under a count family. Zero is handled by the mixture,
    /// never by `G`.
    pub fn log_density_positive(&self, m: f64) -> Result<f64> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidMediator { value: m });
        }
        match self.family {
            MediatorFamily::LogNormal => {
                let lm = log(m);
                let z = (lm - self.location) / self.sigma;
                Ok(-lm - log(self.sigma) - 0.5 * z * z - 0.5 * LN_2PI)
            }
            MediatorFamily::NegBinomial => {
                let k = integer_mediator(m)?;
                let r = self.r;
                let mu = self.location;
                let log_unnorm = math::ln_gamma_diff(r, k) - math::ln_gamma(k + 1.0)
                    + k * (log(mu) - log(r + mu))
                    + self.log_p0;
                Ok(log_unnorm - log1m_exp(self.log_p0))
            }
            MediatorFamily::Poisson => {
                let k = integer_mediator(m)?;
                let lambda = self.location;
                Ok(k * log(lambda) - math::ln_gamma(k + 1.0) - lambda - log1m_exp(-lambda))
            }
        }
    }

    /// Draw one true mediator value from the full mixture (zeros included).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            MediatorFamily::LogNormal => {
                if rng.random::<f64>() < self.zero_prob() {
                    0.0
                } else {
                    LogNormal::new(self.location, self.sigma)
                        .expect("validated sigma")
                        .sample(rng)
                }
            }
            MediatorFamily::NegBinomial => {
                if rng.random::<f64>() < self.structural_zero_prob() {
                    0.0
                } else {
                    // gamma-mixed Poisson with shape r and mean `location`
                    let lambda: f64 = Gamma::new(self.r, self.location / self.r)
                        .expect("validated r")
                        .sample(rng);
                    if lambda <= 0.0 {
                        return 0.0;
                    }
                    Poisson::new(lambda).expect("positive rate").sample(rng)
                }
            }
            MediatorFamily::Poisson => {
                if rng.random::<f64>() < self.structural_zero_prob() {
                    0.0
                } else {
                    Poisson::new(self.location).expect("positive rate").sample(rng)
                }
            }
        }
    }
}

fn integer_mediator(m: f64) -> Result<f64> {
    let k = libm::round(m);
    if (m - k).abs() > 1e-8 {
        return Err(Error::InvalidMediator { value: m });
    }
    Ok(k)
}

/// Log-likelihood table of the positive part at `m = 1..=top`, computed by
/// forward recursion so the per-entry cost is a few flops. Entry `j` holds
/// `log G(j + 1)`.
pub(crate) fn log_positive_table(law: &MediatorLaw, top: usize, out: &mut alloc::vec::Vec<f64>) {
    out.clear();
    match law.family {
        MediatorFamily::LogNormal => panic!("count table requested for a continuous family"),
        MediatorFamily::NegBinomial => {
            let r = law.r;
            let mu = law.location;
            let log_frac = log(mu) - log(r + mu);
            let log_norm = log1m_exp(law.log_p0);
            // log NB(1) = log r + log_frac + r (log r - log(r+mu)) = log_p0 + log r + log_frac
            let mut acc = law.log_p0 + log(r) + log_frac;
            for k in 1..=top {
                out.push(acc - log_norm);
                let kf = k as f64;
                acc += log((r + kf) / (kf + 1.0)) + log_frac;
            }
        }
        MediatorFamily::Poisson => {
            let lambda = law.location;
            let log_lambda = log(lambda);
            let log_norm = lambda + log1m_exp(-lambda);
            let mut acc = log_lambda; // log(lambda^1 / 1!)
            for k in 1..=top {
                out.push(acc - log_norm);
                acc += log_lambda - log1p(k as f64);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_exp_log, QuadConfig, Seed};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn params(alpha0: f64, gamma0: f64, sigma: f64, r: f64) -> LinkParams {
        LinkParams { alpha0, alpha1: 0.0, gamma0, gamma1: 0.0, sigma, r }
    }

    #[test]
    fn zero_prob_composes_structural_and_count_zeros() {
        // logit(0.3) intercept, mu = 2, r = 1: total = 0.3 + 0.7 · (1/3)
        let p = params((2.0f64).ln(), (0.3f64 / 0.7).ln(), 1.0, 1.0);
        let law = MediatorLaw::new(MediatorFamily::NegBinomial, &p, 0.0).unwrap();
        assert_relative_eq!(law.zero_prob(), 0.3 + 0.7 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(law.structural_zero_prob(), 0.3, max_relative = 1e-12);

        let zip = MediatorLaw::new(MediatorFamily::Poisson, &p, 0.0).unwrap();
        assert_relative_eq!(zip.zero_prob(), 0.3 + 0.7 * (-2.0f64).exp(), max_relative = 1e-12);

        let ziln = MediatorLaw::new(MediatorFamily::LogNormal, &p, 0.0).unwrap();
        assert_relative_eq!(ziln.zero_prob(), 0.3, max_relative = 1e-12);
    }

    #[test]
    fn zero_prob_stays_inside_unit_interval_under_extreme_links() {
        for gamma0 in [-200.0, -30.0, 0.0, 30.0, 200.0] {
            for family in [
                MediatorFamily::LogNormal,
                MediatorFamily::NegBinomial,
                MediatorFamily::Poisson,
            ] {
                let p = params(1.0, gamma0, 1.0, 2.0);
                let law = MediatorLaw::new(family, &p, 0.0).unwrap();
                let d = law.zero_prob();
                assert!((0.0..=1.0).contains(&d), "{family:?} gamma0={gamma0} gave {d}");
                assert!(law.log_zero_prob() <= 0.0);
                assert!(law.log_nonzero_prob() <= 0.0);
            }
        }
    }

    #[test]
    fn mediator_means_match_closed_forms() {
        // lognormal: (1 - 0.5) · exp(0 + 1/2)
        let p = params(0.0, 0.0, 1.0, 1.0);
        let law = MediatorLaw::new(MediatorFamily::LogNormal, &p, 0.0).unwrap();
        assert_relative_eq!(law.mean().unwrap(), 0.5 * (0.5f64).exp(), max_relative = 1e-12);

        // counts: (1 - Δ*) · mean, independent of r
        let p = params((4.0f64).ln(), 0.0, 1.0, 3.0);
        for fam in [MediatorFamily::NegBinomial, MediatorFamily::Poisson] {
            let law = MediatorLaw::new(fam, &p, 0.0).unwrap();
            assert_relative_eq!(law.mean().unwrap(), 2.0, max_relative = 1e-12);
        }

        // overflow must surface as an error, not infinity
        let p = params(400.0, 0.0, 40.0, 1.0);
        let law = MediatorLaw::new(MediatorFamily::LogNormal, &p, 0.0).unwrap();
        assert!(law.mean().is_err());
    }

    #[test]
    fn exploding_count_link_is_rejected() {
        let p = params(800.0, 0.0, 1.0, 1.0);
        let err = MediatorLaw::new(MediatorFamily::Poisson, &p, 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLocation { .. }));
    }

    #[test]
    fn positive_density_rejects_zero_and_non_integers() {
        let p = params(1.0, 0.0, 1.0, 2.0);
        let nb = MediatorLaw::new(MediatorFamily::NegBinomial, &p, 0.0).unwrap();
        assert!(nb.log_density_positive(0.0).is_err());
        assert!(nb.log_density_positive(2.5).is_err());
        assert!(nb.log_density_positive(-1.0).is_err());
        let ln = MediatorLaw::new(MediatorFamily::LogNormal, &p, 0.0).unwrap();
        assert!(ln.log_density_positive(0.0).is_err());
        assert!(ln.log_density_positive(2.5).is_ok());
    }

    #[test]
    fn positive_parts_are_normalized() {
        // lognormal: integrate m·G(m) over u = log m against du
        let p = params(0.7, -0.4, 1.3, 2.0);
        let law = MediatorLaw::new(MediatorFamily::LogNormal, &p, 0.0).unwrap();
        let g = |u: f64| law.log_density_positive(u.exp()).unwrap() + u;
        let cfg = QuadConfig::default();
        let (res, _) =
            integrate_exp_log(g, 0.7 - 16.0 * 1.3, 0.7 + 16.0 * 1.3, &[Seed::peak(0.7, 1.3)], &cfg)
                .unwrap();
        assert_relative_eq!(res.log_value, 0.0, epsilon = 1e-6);

        // counts: sum the mass table until the tail is negligible
        for fam in [MediatorFamily::NegBinomial, MediatorFamily::Poisson] {
            let law = MediatorLaw::new(fam, &p, 0.0).unwrap();
            let mut total = 0.0;
            for k in 1..10_000 {
                total += law.log_density_positive(k as f64).unwrap().exp();
                if 1.0 - total < 1e-12 {
                    break;
                }
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn recursion_table_matches_direct_evaluation() {
        let p = params(1.4, -0.2, 1.0, 2.7);
        let mut buf = alloc::vec::Vec::new();
        for fam in [MediatorFamily::NegBinomial, MediatorFamily::Poisson] {
            let law = MediatorLaw::new(fam, &p, 0.3).unwrap();
            log_positive_table(&law, 20, &mut buf);
            for (j, &lg) in buf.iter().enumerate() {
                let direct = law.log_density_positive((j + 1) as f64).unwrap();
                assert_relative_eq!(lg, direct, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn poisson_is_the_large_r_limit_of_negbinomial() {
        // the gap shrinks like 1/r and the evaluation must not decay into
        // cancellation noise even at absurd r, where optimizers like to roam
        for (r, tol) in [(1e6, 1e-3), (5e13, 1e-6), (1e120, 1e-9)] {
            let mut p = params((3.0f64).ln(), -0.5, 1.0, r);
            let nb = MediatorLaw::new(MediatorFamily::NegBinomial, &p, 0.0).unwrap();
            p.r = 1.0;
            let zip = MediatorLaw::new(MediatorFamily::Poisson, &p, 0.0).unwrap();
            for m in 1..=20 {
                let a = nb.log_density_positive(m as f64).unwrap();
                let b = zip.log_density_positive(m as f64).unwrap();
                assert!((a - b).abs() < tol, "r={r} m={m}: {a} vs {b}");
            }
            assert!((nb.zero_prob() - zip.zero_prob()).abs() < tol, "r={r}");
        }
    }

    #[test]
    fn gamma_ratio_stays_exact_for_large_arguments() {
        for a in [0.7, 3.0, 1e5, 1e7, 5e13, 1e300] {
            for k in [1.0, 2.0, 37.0, 256.0] {
                let by_sum: f64 = (0..k as usize).map(|j| (a + j as f64).ln()).sum();
                assert_relative_eq!(
                    math::ln_gamma_diff(a, k),
                    by_sum,
                    max_relative = 1e-12
                );
            }
        }
        // the Stirling branch against the exact sum
        let a = 2e6;
        let k = 400.0;
        let by_sum: f64 = (0..400).map(|j| (a + j as f64).ln()).sum();
        assert_relative_eq!(math::ln_gamma_diff(a, k), by_sum, max_relative = 1e-9);
    }

    #[test]
    fn sampler_agrees_with_analytic_zero_mass_and_mean() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7321);
        let n = 1_000_000usize;
        let p = params(1.1, -0.3, 0.8, 2.0);
        for fam in [
            MediatorFamily::LogNormal,
            MediatorFamily::NegBinomial,
            MediatorFamily::Poisson,
        ] {
            let law = MediatorLaw::new(fam, &p, 0.5).unwrap();
            let mut zeros = 0usize;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let m = law.sample(&mut rng);
                if m == 0.0 {
                    zeros += 1;
                } else {
                    assert!(m > 0.0);
                }
                sum += m;
                sum_sq += m * m;
            }
            let nf = n as f64;
            let p0 = law.zero_prob();
            let se_zero = (p0 * (1.0 - p0) / nf).sqrt();
            assert!(
                ((zeros as f64 / nf) - p0).abs() < 3.0 * se_zero,
                "{fam:?}: zero fraction {} vs {}",
                zeros as f64 / nf,
                p0
            );
            let mean_hat = sum / nf;
            let var_hat = (sum_sq / nf - mean_hat * mean_hat).max(0.0);
            let se_mean = (var_hat / nf).sqrt();
            let mean = law.mean().unwrap();
            assert!(
                (mean_hat - mean).abs() < 3.0 * se_mean,
                "{fam:?}: mean {mean_hat} vs {mean}"
            );
        }
    }
}
