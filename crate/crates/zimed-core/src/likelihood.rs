//! Observed-data likelihood of the mediation model and the EM quantities
//! built from it.
//!
//! Records split into two groups. A positive recorded mediator pins down the
//! complete data, so its contribution is a product of closed-form factors. A
//! recorded zero is a mixture: either the mediator is truly zero, or it is a
//! masked positive, in which case the unknown true value is integrated (or
//! summed) out up to the detection ceiling. For the lognormal family that
//! marginal is a one-dimensional integral evaluated adaptively on the log
//! axis; for the count families it is a finite sum.
//!
//! The E step caches the adaptive quadrature nodes of every zero record.
//! Inside one M step those frozen nodes make the objective a smooth, cheap
//! function of the parameters; the EM driver re-checks ascent against the
//! adaptive evaluation, so the cache is a speedup, not an approximation of
//! record.

use alloc::vec::Vec;

use crate::data::{Dataset, Record};
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::families::{log_positive_table, MediatorFamily};
use crate::math::{exp, floor, log, log_sum_exp, log_sum_exp2, LN_2PI};
use crate::quad::{integrate_exp_log, FrozenGrid, QuadConfig, Seed};
use crate::theta::Theta;

/// Evaluation settings shared by every likelihood entry point.
#[derive(Debug, Clone, Copy)]
pub struct LoglikOptions {
    /// Detection ceiling `B`: positives above it are never masked.
    pub ceiling: f64,
    pub quad: QuadConfig,
}

impl Default for LoglikOptions {
    fn default() -> Self {
        LoglikOptions { ceiling: 20.0, quad: QuadConfig::default() }
    }
}

/// Posterior split of one recorded zero between its two explanations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Responsibilities {
    pub true_zero: f64,
    pub false_zero: f64,
}

/// log f(y, m*, recorded | mediator positive) for a record with `m_obs > 0`:
/// outcome density, survival of the detection step, and the positive-part
/// density of the mediator. The mixture weight log P(M > 0) is not included.
///
/// # Errors
///
/// Degenerate detection (`eta == 0` with `m_obs` under the ceiling) and
/// invalid mediator values surface as errors.
pub fn loglik_pos(theta: &Theta, rec: &Record, opts: &LoglikOptions) -> Result<f64> {
    debug_assert!(rec.m_obs > 0.0);
    let law = theta.law_at(rec.x, &rec.z)?;
    let det = Detection::new(theta.eta, opts.ceiling);
    let outcome = theta.outcome_at(&rec.z);
    Ok(outcome.logpdf(rec.y, rec.x, rec.m_obs)
        + det.log_prob_observed_positive(rec.m_obs)?
        + law.log_density_positive(rec.m_obs)?)
}

/// log f(y | mediator truly zero) for a record with `m_obs == 0`.
pub fn loglik_true_zero(theta: &Theta, rec: &Record) -> f64 {
    theta.outcome_at(&rec.z).logpdf(rec.y, rec.x, 0.0)
}

/// log f(y, recorded zero | mediator positive) for a record with
/// `m_obs == 0`: the masked-positive marginal over `(0, B]`.
///
/// # Errors
///
/// Link and quadrature failures propagate.
pub fn loglik_false_zero(theta: &Theta, rec: &Record, opts: &LoglikOptions) -> Result<f64> {
    let ctx = ThetaCtx::new(theta, opts)?;
    match theta.family {
        MediatorFamily::LogNormal => Ok(ctx.false_zero_adaptive(theta, rec)?.0),
        _ => {
            let mut buf = Vec::new();
            let mut terms = Vec::new();
            ctx.false_zero_counts(theta, rec, &mut buf, &mut terms)
        }
    }
}

/// Posterior probabilities of the two explanations of a recorded zero.
///
/// # Errors
///
/// Propagates likelihood evaluation failures.
pub fn responsibilities(theta: &Theta, rec: &Record, opts: &LoglikOptions) -> Result<Responsibilities> {
    let law = theta.law_at(rec.x, &rec.z)?;
    let branch0 = law.log_zero_prob() + loglik_true_zero(theta, rec);
    let branch1 = law.log_nonzero_prob() + loglik_false_zero(theta, rec, opts)?;
    Ok(split(branch0, branch1))
}

fn split(branch0: f64, branch1: f64) -> Responsibilities {
    let marginal = log_sum_exp2(branch0, branch1);
    if marginal == f64::NEG_INFINITY {
        // the record is impossible under this parameter value; attribute it
        // to whichever branch decays slower so downstream stays finite
        let t0 = if branch0 >= branch1 { 1.0 } else { 0.0 };
        return Responsibilities { true_zero: t0, false_zero: 1.0 - t0 };
    }
    let t0 = exp(branch0 - marginal).clamp(0.0, 1.0);
    Responsibilities { true_zero: t0, false_zero: 1.0 - t0 }
}

/// Observed-data log-likelihood, summed in record order.
///
/// # Errors
///
/// Propagates evaluation failures; a NaN sum reports as non-finite.
pub fn observed_loglik(theta: &Theta, data: &Dataset, opts: &LoglikOptions) -> Result<f64> {
    let estep = e_step(theta, data, opts)?;
    Ok(estep.loglik)
}

/// EM surrogate `Q(theta | theta0)`: expected complete-data log-likelihood
/// with responsibilities held at `theta0`.
///
/// # Errors
///
/// Propagates evaluation failures at either parameter value.
pub fn q_function(theta: &Theta, theta0: &Theta, data: &Dataset, opts: &LoglikOptions) -> Result<f64> {
    let estep = e_step(theta0, data, opts)?;
    q_at(theta, data, opts, &estep)
}

/// Everything the M step needs from one E step: responsibilities, the frozen
/// quadrature grids of the lognormal zero records, and the observed
/// log-likelihood at the E-step point (a free byproduct of the integrals).
#[derive(Debug, Clone)]
pub struct EStep {
    pub loglik: f64,
    pub tau: Vec<Responsibilities>,
    grids: Vec<ZeroGrid>,
}

/// Run the E step at `theta0`.
///
/// # Errors
///
/// Propagates evaluation failures.
pub fn e_step(theta0: &Theta, data: &Dataset, opts: &LoglikOptions) -> Result<EStep> {
    let ctx = ThetaCtx::new(theta0, opts)?;
    let lognormal = theta0.family == MediatorFamily::LogNormal;
    let mut tau = Vec::with_capacity(data.n_zero());
    let mut grids = Vec::with_capacity(if lognormal { data.n_zero() } else { 0 });
    let mut buf = Vec::new();
    let mut terms = Vec::new();
    let mut total = 0.0;
    for rec in data.records() {
        if rec.m_obs > 0.0 {
            total += ctx.positive_loglik(theta0, rec)?;
        } else {
            let law = theta0.law_at(rec.x, &rec.z)?;
            let branch0 = law.log_zero_prob() + loglik_true_zero(theta0, rec);
            let ll21 = if lognormal {
                let (v, grid) = ctx.false_zero_adaptive(theta0, rec)?;
                grids.push(grid);
                v
            } else {
                ctx.false_zero_counts(theta0, rec, &mut buf, &mut terms)?
            };
            let branch1 = law.log_nonzero_prob() + ll21;
            total += log_sum_exp2(branch0, branch1).max(f64::NEG_INFINITY);
            tau.push(split(branch0, branch1));
        }
    }
    if total.is_nan() {
        return Err(Error::NonFinite { context: "observed log-likelihood" });
    }
    Ok(EStep { loglik: total, tau, grids })
}

/// `Q(theta | ·)` with responsibilities and quadrature nodes frozen by
/// `estep`. This is the objective the M step climbs.
///
/// # Errors
///
/// Propagates evaluation failures.
pub fn q_at(theta: &Theta, data: &Dataset, opts: &LoglikOptions, estep: &EStep) -> Result<f64> {
    zero_branch_fold(theta, data, opts, Some(&estep.grids), |j, branch0, branch1| {
        weigh_branches(&estep.tau[j], branch0, branch1)
    })
}

/// Same surrogate as [`q_at`] but with the integrals of the lognormal zero
/// records evaluated adaptively at `theta` instead of on the freeze-point
/// nodes. Slower and node-independent; the M step retries on this path when
/// the frozen surrogate disagrees with the honest likelihood.
///
/// # Errors
///
/// Propagates evaluation failures.
pub fn q_adaptive(theta: &Theta, data: &Dataset, opts: &LoglikOptions, estep: &EStep) -> Result<f64> {
    zero_branch_fold(theta, data, opts, None, |j, branch0, branch1| {
        weigh_branches(&estep.tau[j], branch0, branch1)
    })
}

fn weigh_branches(t: &Responsibilities, branch0: f64, branch1: f64) -> f64 {
    let mut q = 0.0;
    if t.true_zero > 0.0 {
        q += t.true_zero * branch0;
    }
    if t.false_zero > 0.0 {
        q += t.false_zero * branch1;
    }
    q
}

/// Observed log-likelihood on the frozen quadrature nodes of `estep`. Used
/// where many evaluations at parameters near the freeze point are needed,
/// like the finite-difference information matrix.
///
/// # Errors
///
/// Propagates evaluation failures.
pub fn observed_loglik_at(
    theta: &Theta,
    data: &Dataset,
    opts: &LoglikOptions,
    estep: &EStep,
) -> Result<f64> {
    zero_branch_fold(theta, data, opts, Some(&estep.grids), |_, branch0, branch1| {
        log_sum_exp2(branch0, branch1)
    })
}

fn zero_branch_fold(
    theta: &Theta,
    data: &Dataset,
    opts: &LoglikOptions,
    grids: Option<&[ZeroGrid]>,
    mut combine: impl FnMut(usize, f64, f64) -> f64,
) -> Result<f64> {
    let ctx = ThetaCtx::new(theta, opts)?;
    let lognormal = theta.family == MediatorFamily::LogNormal;
    let mut buf = Vec::new();
    let mut terms = Vec::new();
    let mut scratch = Vec::new();
    let mut j = 0usize;
    let mut total = 0.0;
    for rec in data.records() {
        if rec.m_obs > 0.0 {
            total += ctx.positive_loglik(theta, rec)?;
        } else {
            let law = theta.law_at(rec.x, &rec.z)?;
            let branch0 = law.log_zero_prob() + loglik_true_zero(theta, rec);
            let ll21 = if !lognormal {
                ctx.false_zero_counts(theta, rec, &mut buf, &mut terms)?
            } else if let Some(grids) = grids {
                ctx.false_zero_frozen(theta, rec, &grids[j], &mut scratch)
            } else {
                ctx.false_zero_adaptive(theta, rec)?.0
            };
            let branch1 = law.log_nonzero_prob() + ll21;
            total += combine(j, branch0, branch1);
            j += 1;
        }
    }
    if total.is_nan() {
        return Err(Error::NonFinite { context: "likelihood objective" });
    }
    Ok(total)
}

/// Quadrature nodes of one zero record with `exp(u)` cached.
#[derive(Debug, Clone)]
struct ZeroGrid {
    u: Vec<f64>,
    m: Vec<f64>,
    w: Vec<f64>,
}

impl ZeroGrid {
    fn from_frozen(grid: FrozenGrid) -> Self {
        let m = grid.nodes.iter().map(|&u| exp(u)).collect();
        ZeroGrid { u: grid.nodes, m, w: grid.weights }
    }
}

/// Per-parameter-value scalars shared across records.
struct ThetaCtx {
    det: Detection,
    inv_two_delta_sq: f64,
    log_delta: f64,
    eta_sq: f64,
    /// Lognormal only.
    inv_two_sigma_sq: f64,
    log_sigma: f64,
    /// Count families: largest integer that can be masked.
    count_top: usize,
    quad: QuadConfig,
}

impl ThetaCtx {
    fn new(theta: &Theta, opts: &LoglikOptions) -> Result<ThetaCtx> {
        theta.validate()?;
        let delta = theta.outcome.delta;
        let sigma = theta.link.sigma;
        Ok(ThetaCtx {
            det: Detection::new(theta.eta, opts.ceiling),
            inv_two_delta_sq: 0.5 / (delta * delta),
            log_delta: log(delta),
            eta_sq: theta.eta * theta.eta,
            inv_two_sigma_sq: 0.5 / (sigma * sigma),
            log_sigma: if theta.family == MediatorFamily::LogNormal { log(sigma) } else { 0.0 },
            count_top: floor(opts.ceiling).max(0.0) as usize,
            quad: opts.quad,
        })
    }

    /// Full observed contribution of a positive record, mixture weight
    /// included.
    fn positive_loglik(&self, theta: &Theta, rec: &Record) -> Result<f64> {
        let law = theta.law_at(rec.x, &rec.z)?;
        let outcome = theta.outcome_at(&rec.z);
        Ok(law.log_nonzero_prob()
            + outcome.logpdf(rec.y, rec.x, rec.m_obs)
            + self.det.log_prob_observed_positive(rec.m_obs)?
            + law.log_density_positive(rec.m_obs)?)
    }

    /// Pieces of the lognormal masked-positive integrand for one record:
    /// residual intercept `a`, mediator slope `b`, and the log-scale mean.
    fn lognormal_pieces(&self, theta: &Theta, rec: &Record) -> Result<(f64, f64, f64)> {
        let law = theta.law_at(rec.x, &rec.z)?;
        let beta = theta.outcome_at(&rec.z).beta;
        let a = rec.y - beta[0] - beta[2] - (beta[3] + beta[4]) * rec.x;
        let b = beta[1] + beta[5] * rec.x;
        Ok((a, b, law.location()))
    }

    /// log of the masked-positive marginal for a lognormal zero record,
    /// integrating on the log axis, plus the frozen node set.
    fn false_zero_adaptive(&self, theta: &Theta, rec: &Record) -> Result<(f64, ZeroGrid)> {
        let (a, b, mu) = self.lognormal_pieces(theta, rec)?;
        let ceiling = self.det.ceiling;
        let log_b = log(ceiling);
        let sigma = theta.link.sigma;

        // Left edge: below `mu - sigma²·slope_bound` the Gaussian part of the
        // integrand dominates every other factor's slope, so mass decays at
        // least geometrically and a generous margin makes the truncation
        // error irrelevant next to the quadrature tolerance.
        let slope_bound = ((a.abs() + b.abs() * ceiling) * b.abs() * ceiling)
            * (2.0 * self.inv_two_delta_sq)
            + self.eta_sq * ceiling;
        let u_ref = (mu - sigma * sigma * slope_bound).min(log_b);
        let u_lo = u_ref - 16.0 * sigma - 5.0;

        let g = |u: f64| {
            let m = exp(u);
            let zr = (u - mu) * (u - mu) * self.inv_two_sigma_sq;
            let res = a - b * m;
            -zr - res * res * self.inv_two_delta_sq - self.eta_sq * m
        };
        // seed both candidate peaks with their analytic widths: the mediator
        // law's center (width sigma on the log axis) and the outcome
        // residual's root, where the residual factor has log-axis width
        // delta / |a|
        let mut seeds = [Seed::peak(mu, sigma), Seed::at(f64::NAN)];
        if b != 0.0 && a / b > 0.0 {
            seeds[1] = Seed::peak(log(a / b), theta.outcome.delta / a.abs());
        }
        let (integral, grid) = integrate_exp_log(g, u_lo, log_b, &seeds[..], &self.quad)?;
        let ll = -LN_2PI - self.log_delta - self.log_sigma + integral.log_value;
        Ok((ll, ZeroGrid::from_frozen(grid)))
    }

    /// Same marginal evaluated on a frozen node set.
    fn false_zero_frozen(
        &self,
        theta: &Theta,
        rec: &Record,
        grid: &ZeroGrid,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        let Ok((a, b, mu)) = self.lognormal_pieces(theta, rec) else {
            return f64::NEG_INFINITY;
        };
        scratch.clear();
        let mut hi = f64::NEG_INFINITY;
        for (&u, &m) in grid.u.iter().zip(&grid.m) {
            let zr = (u - mu) * (u - mu) * self.inv_two_sigma_sq;
            let res = a - b * m;
            let lg = -zr - res * res * self.inv_two_delta_sq - self.eta_sq * m;
            if lg > hi {
                hi = lg;
            }
            scratch.push(lg);
        }
        if hi == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut acc = 0.0;
        for (lg, &w) in scratch.iter().zip(&grid.w) {
            acc += w * exp(lg - hi);
        }
        if acc <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -LN_2PI - self.log_delta - self.log_sigma + hi + log(acc)
    }

    /// log of the masked-positive marginal for a count-family zero record:
    /// a finite sum over the integers that can be masked.
    fn false_zero_counts(
        &self,
        theta: &Theta,
        rec: &Record,
        table: &mut Vec<f64>,
        terms: &mut Vec<f64>,
    ) -> Result<f64> {
        if self.count_top == 0 {
            return Ok(f64::NEG_INFINITY);
        }
        let law = theta.law_at(rec.x, &rec.z)?;
        log_positive_table(&law, self.count_top, table);
        let beta = theta.outcome_at(&rec.z).beta;
        let c0 = rec.y - beta[0] - beta[2] - (beta[3] + beta[4]) * rec.x;
        let c1 = beta[1] + beta[5] * rec.x;
        let base = -self.log_delta - 0.5 * LN_2PI;
        terms.clear();
        for (j, &log_g) in table.iter().enumerate() {
            let m = (j + 1) as f64;
            let res = c0 - c1 * m;
            terms.push(base - res * res * self.inv_two_delta_sq - self.eta_sq * m + log_g);
        }
        Ok(log_sum_exp(terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::LinkParams;
    use crate::outcome::OutcomeParams;
    use crate::theta::ConfounderCoefs;
    use approx::assert_relative_eq;

    fn theta(family: MediatorFamily) -> Theta {
        Theta {
            family,
            outcome: OutcomeParams { beta: [90.0, -0.4, -1.5, 0.2, -0.05, 0.0], delta: 2.0 },
            link: LinkParams {
                alpha0: 0.8,
                alpha1: 0.02,
                gamma0: -0.5,
                gamma1: 0.01,
                sigma: 1.1,
                r: 2.0,
            },
            eta: 0.6,
            confounders: ConfounderCoefs::default(),
        }
    }

    fn opts() -> LoglikOptions {
        LoglikOptions::default()
    }

    // Brute-force composition of the same likelihood, written directly from
    // the density formulas with none of the crate's evaluation machinery.
    mod oracle {
        pub fn normal_pdf(y: f64, mean: f64, sd: f64) -> f64 {
            let z = (y - mean) / sd;
            (-0.5 * z * z).exp() / (sd * (2.0 * core::f64::consts::PI).sqrt())
        }

        pub fn outcome_mean(beta: &[f64; 6], x: f64, m: f64) -> f64 {
            let ind = if m > 0.0 { 1.0 } else { 0.0 };
            beta[0] + beta[1] * m + beta[2] * ind + beta[3] * x + beta[4] * x * ind + beta[5] * x * m
        }

        pub fn lognormal_pdf(m: f64, mu: f64, sigma: f64) -> f64 {
            let z = (m.ln() - mu) / sigma;
            (-0.5 * z * z).exp() / (m * sigma * (2.0 * core::f64::consts::PI).sqrt())
        }

        /// masked-positive marginal by trapezoid on the log axis
        pub fn false_zero_lognormal(
            beta: &[f64; 6],
            delta: f64,
            mu: f64,
            sigma: f64,
            eta: f64,
            ceiling: f64,
            y: f64,
            x: f64,
            n_grid: usize,
        ) -> f64 {
            let lo = mu - 40.0 * sigma;
            let hi = ceiling.ln();
            let h = (hi - lo) / n_grid as f64;
            let f = |u: f64| {
                let m = u.exp();
                normal_pdf(y, outcome_mean(beta, x, m), delta)
                    * lognormal_pdf(m, mu, sigma)
                    * m // Jacobian of m = exp(u)
                    * (-eta * eta * m).exp()
            };
            let mut acc = 0.5 * (f(lo) + f(hi));
            for k in 1..n_grid {
                acc += f(lo + h * k as f64);
            }
            acc * h
        }
    }

    #[test]
    fn lognormal_observed_loglik_matches_brute_force() {
        let t = theta(MediatorFamily::LogNormal);
        let o = opts();
        let recs = vec![
            Record::new(93.0, 4.0, 50.0),
            Record::new(88.0, 0.0, 60.0),
            Record::new(95.5, 25.0, 40.0), // above the ceiling
            Record::new(91.0, 0.0, 30.0),
        ];
        let data = Dataset::new(recs.clone()).unwrap();
        let got = observed_loglik(&t, &data, &o).unwrap();

        let mut want = 0.0;
        for rec in &recs {
            let mu = t.link.alpha0 + t.link.alpha1 * rec.x;
            let delta_zero = 1.0 / (1.0 + (-(t.link.gamma0 + t.link.gamma1 * rec.x)).exp());
            if rec.m_obs > 0.0 {
                let det = if rec.m_obs <= o.ceiling {
                    1.0 - (-t.eta * t.eta * rec.m_obs).exp()
                } else {
                    1.0
                };
                want += ((1.0 - delta_zero)
                    * oracle::normal_pdf(
                        rec.y,
                        oracle::outcome_mean(&t.outcome.beta, rec.x, rec.m_obs),
                        t.outcome.delta,
                    )
                    * det
                    * oracle::lognormal_pdf(rec.m_obs, mu, t.link.sigma))
                .ln();
            } else {
                let f0 = oracle::normal_pdf(
                    rec.y,
                    oracle::outcome_mean(&t.outcome.beta, rec.x, 0.0),
                    t.outcome.delta,
                );
                let f1 = oracle::false_zero_lognormal(
                    &t.outcome.beta,
                    t.outcome.delta,
                    mu,
                    t.link.sigma,
                    t.eta,
                    o.ceiling,
                    rec.y,
                    rec.x,
                    400_000,
                );
                want += (delta_zero * f0 + (1.0 - delta_zero) * f1).ln();
            }
        }
        assert_relative_eq!(got, want, max_relative = 1e-8);
    }

    #[test]
    fn count_observed_loglik_matches_brute_force() {
        for family in [MediatorFamily::NegBinomial, MediatorFamily::Poisson] {
            let t = theta(family);
            let o = opts();
            let recs = vec![
                Record::new(91.0, 3.0, 1.2),
                Record::new(87.0, 0.0, -0.5),
                Record::new(94.0, 30.0, 0.4),
            ];
            let data = Dataset::new(recs.clone()).unwrap();
            let got = observed_loglik(&t, &data, &o).unwrap();

            let mut want = 0.0;
            for rec in &recs {
                let mean = (t.link.alpha0 + t.link.alpha1 * rec.x).exp();
                let star = 1.0 / (1.0 + (-(t.link.gamma0 + t.link.gamma1 * rec.x)).exp());
                // untruncated pmf evaluated naively
                let pmf = |k: f64| -> f64 {
                    match family {
                        MediatorFamily::NegBinomial => {
                            let r = t.link.r;
                            (libm::lgamma(r + k) - libm::lgamma(r) - libm::lgamma(k + 1.0)
                                + k * (mean / (r + mean)).ln()
                                + r * (r / (r + mean)).ln())
                            .exp()
                        }
                        MediatorFamily::Poisson => {
                            (k * mean.ln() - libm::lgamma(k + 1.0) - mean).exp()
                        }
                        MediatorFamily::LogNormal => unreachable!(),
                    }
                };
                let p0 = pmf(0.0);
                let delta_total = star + (1.0 - star) * p0;
                if rec.m_obs > 0.0 {
                    let det = if rec.m_obs <= o.ceiling {
                        1.0 - (-t.eta * t.eta * rec.m_obs).exp()
                    } else {
                        1.0
                    };
                    let g = pmf(rec.m_obs) / (1.0 - p0);
                    want += ((1.0 - delta_total)
                        * oracle::normal_pdf(
                            rec.y,
                            oracle::outcome_mean(&t.outcome.beta, rec.x, rec.m_obs),
                            t.outcome.delta,
                        )
                        * det
                        * g)
                        .ln();
                } else {
                    let f0 = oracle::normal_pdf(
                        rec.y,
                        oracle::outcome_mean(&t.outcome.beta, rec.x, 0.0),
                        t.outcome.delta,
                    );
                    let mut f1 = 0.0;
                    for k in 1..=(o.ceiling as usize) {
                        let m = k as f64;
                        f1 += oracle::normal_pdf(
                            rec.y,
                            oracle::outcome_mean(&t.outcome.beta, rec.x, m),
                            t.outcome.delta,
                        ) * (-t.eta * t.eta * m).exp()
                            * pmf(m)
                            / (1.0 - p0);
                    }
                    want += (delta_total * f0 + (1.0 - delta_total) * f1).ln();
                }
            }
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn positive_contribution_decomposes_into_three_terms() {
        let t = theta(MediatorFamily::LogNormal);
        let o = opts();
        let rec = Record::new(92.0, 7.0, 45.0);
        let got = loglik_pos(&t, &rec, &o).unwrap();
        let law = t.law_at(rec.x, &[]).unwrap();
        let det = Detection::new(t.eta, o.ceiling);
        let want = t.outcome.logpdf(rec.y, rec.x, rec.m_obs)
            + det.log_prob_observed_positive(rec.m_obs).unwrap()
            + law.log_density_positive(rec.m_obs).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-15);
        // above the ceiling the detection term is exactly zero
        let rec_hi = Record::new(92.0, 21.0, 45.0);
        let got_hi = loglik_pos(&t, &rec_hi, &o).unwrap();
        let want_hi = t.outcome.logpdf(rec_hi.y, rec_hi.x, rec_hi.m_obs)
            + t.law_at(rec_hi.x, &[]).unwrap().log_density_positive(rec_hi.m_obs).unwrap();
        assert_relative_eq!(got_hi, want_hi, max_relative = 1e-15);
    }

    #[test]
    fn zero_eta_makes_positive_records_degenerate() {
        let mut t = theta(MediatorFamily::LogNormal);
        t.eta = 0.0;
        let rec = Record::new(92.0, 7.0, 45.0);
        assert!(matches!(
            loglik_pos(&t, &rec, &opts()),
            Err(Error::DegenerateLikelihood { .. })
        ));
    }

    #[test]
    fn responsibilities_sum_to_one_and_follow_bayes() {
        let t = theta(MediatorFamily::LogNormal);
        let o = opts();
        let rec = Record::new(88.5, 0.0, 55.0);
        let resp = responsibilities(&t, &rec, &o).unwrap();
        assert_relative_eq!(resp.true_zero + resp.false_zero, 1.0, epsilon = 1e-14);
        let law = t.law_at(rec.x, &[]).unwrap();
        let num0 = law.zero_prob() * loglik_true_zero(&t, &rec).exp();
        let num1 = (1.0 - law.zero_prob()) * loglik_false_zero(&t, &rec, &o).unwrap().exp();
        assert_relative_eq!(resp.true_zero, num0 / (num0 + num1), max_relative = 1e-10);
    }

    #[test]
    fn saturated_zero_link_gives_unit_responsibility_without_nan() {
        let mut t = theta(MediatorFamily::LogNormal);
        t.link.gamma0 = 60.0; // zero probability indistinguishable from 1
        t.link.gamma1 = 0.0;
        let resp = responsibilities(&t, &Record::new(88.5, 0.0, 55.0), &opts()).unwrap();
        assert!(resp.true_zero > 1.0 - 1e-12);
        assert!(resp.false_zero.is_finite());
    }

    #[test]
    fn low_ceiling_turns_count_false_zeros_off() {
        let mut o = opts();
        o.ceiling = 0.5; // no positive integer can be masked
        let t = theta(MediatorFamily::Poisson);
        let rec = Record::new(88.0, 0.0, 0.3);
        assert_eq!(loglik_false_zero(&t, &rec, &o).unwrap(), f64::NEG_INFINITY);
        let resp = responsibilities(&t, &rec, &o).unwrap();
        assert_eq!(resp.true_zero, 1.0);
        // and the Q function stays finite thanks to the zero-weight guard
        let data = Dataset::new(vec![Record::new(90.0, 1.0, 0.1), rec]).unwrap();
        let q = q_function(&t, &t, &data, &o).unwrap();
        assert!(q.is_finite());
    }

    #[test]
    fn extreme_outcomes_stay_finite_through_the_guarded_sums() {
        let t = theta(MediatorFamily::LogNormal);
        let o = opts();
        // outcome a thousand residual-sds away: every branch is ~exp(-1e5)
        let data = Dataset::new(vec![
            Record::new(90.0 + 2000.0, 0.0, 50.0),
            Record::new(90.0 - 2000.0, 3.0, 50.0),
        ])
        .unwrap();
        let ll = observed_loglik(&t, &data, &o).unwrap();
        assert!(ll.is_finite());
        assert!(ll < -1e5);
    }

    #[test]
    fn frozen_evaluation_agrees_with_adaptive_nearby() {
        let t = theta(MediatorFamily::LogNormal);
        let o = opts();
        let data = Dataset::new(vec![
            Record::new(93.0, 4.0, 50.0),
            Record::new(88.0, 0.0, 60.0),
            Record::new(90.0, 0.0, 45.0),
        ])
        .unwrap();
        let estep = e_step(&t, &data, &o).unwrap();
        // at the freeze point the frozen path reproduces the adaptive value
        assert_relative_eq!(
            observed_loglik_at(&t, &data, &o, &estep).unwrap(),
            estep.loglik,
            max_relative = 1e-10
        );
        // and stays accurate after a moderate parameter move
        let mut t2 = t.clone();
        t2.link.alpha0 += 0.15;
        t2.outcome.beta[1] -= 0.05;
        t2.eta += 0.1;
        assert_relative_eq!(
            observed_loglik_at(&t2, &data, &o, &estep).unwrap(),
            observed_loglik(&t2, &data, &o).unwrap(),
            max_relative = 1e-7
        );
        // q_at through the frozen grids matches the one-shot q_function
        assert_relative_eq!(
            q_at(&t2, &data, &o, &estep).unwrap(),
            q_function(&t2, &t, &data, &o).unwrap(),
            max_relative = 1e-7
        );
    }
}
