//! Maximum-likelihood fitting. The latent mediator state (genuinely zero
//! versus masked positive) makes the observed likelihood awkward to climb
//! directly, so estimation runs as EM: the E step computes per-record
//! responsibilities, the M step climbs the expected complete-data objective
//! with BFGS, and the driver verifies after every iteration that the honest
//! observed log-likelihood actually rose.
//!
//! The M step climbs the surrogate on quadrature nodes frozen at the E-step
//! point, which makes each evaluation a weighted sum instead of an adaptive
//! integration. The frozen surface can disagree with the true one far from
//! the freeze point, so an iteration that fails the ascent check is retried
//! with adaptive integrals before the fit is declared stalled.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::families::MediatorFamily;
use crate::likelihood::{self, EStep, LoglikOptions};
use crate::linalg::{self, Matrix};
use crate::math::{log, logistic, sqrt};
use crate::optim::{self, MaximizeOptions};
use crate::quad::QuadConfig;
use crate::theta::{ConfounderCoefs, Theta};

/// Tolerances and budgets for one fit.
#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub max_em_iters: usize,
    /// Stop when the observed log-likelihood moves less than this between
    /// EM iterations.
    pub em_tol: f64,
    /// Gradient tolerance of the inner maximizer, per observation: the
    /// actual sup-norm cutoff is `mstep_tol * (1 + n)`.
    pub mstep_tol: f64,
    pub mstep_max_iters: usize,
    /// Detection ceiling `B`.
    pub ceiling: f64,
    pub quad: QuadConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_em_iters: 500,
            em_tol: 1e-6,
            mstep_tol: 1e-8,
            mstep_max_iters: 25,
            ceiling: 20.0,
            quad: QuadConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn loglik_options(&self) -> LoglikOptions {
        LoglikOptions { ceiling: self.ceiling, quad: self.quad }
    }
}

/// Conditions worth surfacing that do not invalidate the point estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitWarnings {
    /// The information matrix was not positive definite and the covariance
    /// came from an eigenvalue-clamped pseudo-inverse, or could not be
    /// computed at all. Standard errors are unreliable.
    pub covariance_unreliable: bool,
    /// The fitted zero probabilities collapsed onto 0 or 1, so the zero-link
    /// coefficients sit on the boundary and their standard errors (and any
    /// effect inference that leans on them) are unreliable.
    pub zero_prob_boundary: bool,
    /// An EM iteration could not improve the observed log-likelihood on
    /// either the frozen or the adaptive path; the fit stopped there.
    pub mstep_stalled: bool,
}

impl FitWarnings {
    pub fn any(&self) -> bool {
        self.covariance_unreliable || self.zero_prob_boundary || self.mstep_stalled
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Theta,
    /// Observed log-likelihood at `theta`.
    pub loglik: f64,
    /// Observed log-likelihood after each EM iteration, starting at the
    /// initial value. Every entry is an adaptive evaluation, not a frozen
    /// surrogate value.
    pub trace: Vec<f64>,
    /// Covariance of the natural-scale parameter vector from the observed
    /// information matrix.
    pub covariance: Matrix,
    /// Standard errors aligned with [`Theta::to_vec`].
    pub se: Vec<f64>,
    pub converged: bool,
    pub n_em_iters: usize,
    pub n_params: usize,
    pub aic: f64,
    pub warnings: FitWarnings,
}

impl FitResult {
    /// Smallest consecutive change in the trace; +∞ when fewer than two
    /// entries exist. Non-negative up to ascent tolerance.
    pub fn min_trace_step(&self) -> f64 {
        self.trace.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Fit one mediator family by EM.
///
/// # Errors
///
/// [`Error::FamilyNotApplicable`] when a count family is requested for
/// non-integer positives, [`Error::NonIdentifiable`] for degenerate data,
/// and evaluation failures at the initial value.
pub fn fit(data: &Dataset, family: MediatorFamily, config: &FitConfig) -> Result<FitResult> {
    data.check_identifiable()?;
    if family.is_count() && !data.positives_are_integers() {
        return Err(Error::FamilyNotApplicable { family: family.name() });
    }
    let opts = config.loglik_options();
    let mopts = MaximizeOptions {
        grad_tol: config.mstep_tol * (1.0 + data.n() as f64),
        max_iters: config.mstep_max_iters,
        fd_step: 1e-5,
    };

    let mut theta = init_theta(data, family)?;
    let mut estep = likelihood::e_step(&theta, data, &opts)?;
    let mut trace = vec![estep.loglik];
    let mut warnings = FitWarnings::default();
    let mut converged = false;
    let mut n_em_iters = 0usize;
    let mut metric: Option<Matrix> = None;

    for _ in 0..config.max_em_iters {
        let ll_prev = estep.loglik;
        let mut step =
            m_step(&theta, data, &opts, &estep, metric.take(), &mopts, false);
        let mut accepted = match likelihood::e_step(&step.theta, data, &opts) {
            Ok(es) if es.loglik >= ll_prev - ASCENT_TOL => Some(es),
            _ => None,
        };
        if accepted.is_none() {
            // the frozen nodes misrepresented the surface; pay for honest
            // integrals and try once more from the same point
            step = m_step(&theta, data, &opts, &estep, Some(step.metric), &mopts, true);
            accepted = match likelihood::e_step(&step.theta, data, &opts) {
                Ok(es) if es.loglik >= ll_prev - ASCENT_TOL => Some(es),
                _ => None,
            };
        }
        let Some(es) = accepted else {
            warnings.mstep_stalled = true;
            break;
        };
        n_em_iters += 1;
        metric = Some(step.metric);
        theta = step.theta;
        let ll_new = es.loglik;
        estep = es;
        trace.push(ll_new);
        if (ll_new - ll_prev).abs() < config.em_tol {
            converged = true;
            break;
        }
    }

    // the decay rate enters the model squared, so its sign is a gauge freedom
    theta.eta = theta.eta.abs();
    let loglik = estep.loglik;
    let n_params = theta.dim();

    let (covariance, se) = match information_at(&theta, data, &opts, &estep, INFO_STEP) {
        Ok(info) => {
            let (cov, adjusted) = covariance_from_information(&info);
            warnings.covariance_unreliable |= adjusted;
            let se = (0..n_params).map(|j| sqrt(cov[(j, j)].max(0.0))).collect();
            (cov, se)
        }
        Err(_) => {
            warnings.covariance_unreliable = true;
            (Matrix::zeros(n_params, n_params), vec![f64::NAN; n_params])
        }
    };

    let mut mean_total = 0.0;
    let mut mean_structural = 0.0;
    for rec in data.records() {
        let law = theta.law_at(rec.x, &rec.z)?;
        mean_total += law.zero_prob();
        mean_structural += law.structural_zero_prob();
    }
    mean_total /= data.n() as f64;
    mean_structural /= data.n() as f64;
    for p in [mean_total, mean_structural] {
        if p < BOUNDARY_TOL || p > 1.0 - BOUNDARY_TOL {
            warnings.zero_prob_boundary = true;
        }
    }

    Ok(FitResult {
        aic: 2.0 * n_params as f64 - 2.0 * loglik,
        theta,
        loglik,
        trace,
        covariance,
        se,
        converged,
        n_em_iters,
        n_params,
        warnings,
    })
}

/// Slack allowed in the ascent check: an accepted EM iteration may lower the
/// observed log-likelihood by at most this much.
pub const ASCENT_TOL: f64 = 1e-8;

/// Relative step of the finite-difference information matrix.
const INFO_STEP: f64 = 1e-4;

const BOUNDARY_TOL: f64 = 1e-6;

struct MStepOutcome {
    theta: Theta,
    metric: Matrix,
}

fn m_step(
    theta0: &Theta,
    data: &Dataset,
    opts: &LoglikOptions,
    estep: &EStep,
    metric: Option<Matrix>,
    mopts: &MaximizeOptions,
    adaptive: bool,
) -> MStepOutcome {
    let x0 = theta0.to_opt_vec();
    let objective = |v: &[f64]| {
        let cand = theta0.from_opt_vec(v);
        let q = if adaptive {
            likelihood::q_adaptive(&cand, data, opts, estep)
        } else {
            likelihood::q_at(&cand, data, opts, estep)
        };
        q.unwrap_or(f64::NEG_INFINITY)
    };
    let out = optim::maximize(objective, &x0, metric, mopts);
    MStepOutcome { theta: theta0.from_opt_vec(&out.x), metric: out.h_inv }
}

/// Observed information (negated Hessian of the observed log-likelihood) at
/// `theta` on the natural scale, by central finite differences.
///
/// # Errors
///
/// Evaluation failures at `theta`, and [`Error::NonFinite`] when a
/// perturbed evaluation produces a non-finite entry.
pub fn observed_information(theta: &Theta, data: &Dataset, config: &FitConfig) -> Result<Matrix> {
    observed_information_with_step(theta, data, config, INFO_STEP)
}

/// [`observed_information`] with an explicit relative step, for step-size
/// sensitivity checks.
///
/// # Errors
///
/// As [`observed_information`].
pub fn observed_information_with_step(
    theta: &Theta,
    data: &Dataset,
    config: &FitConfig,
    rel_step: f64,
) -> Result<Matrix> {
    let opts = config.loglik_options();
    let estep = likelihood::e_step(theta, data, &opts)?;
    information_at(theta, data, &opts, &estep, rel_step)
}

fn information_at(
    theta: &Theta,
    data: &Dataset,
    opts: &LoglikOptions,
    estep: &EStep,
    rel_step: f64,
) -> Result<Matrix> {
    let v0 = theta.to_vec();
    let p = v0.len();
    // all evaluations share the frozen quadrature nodes so the objective is
    // smooth under the tiny steps taken here
    let eval = |v: &[f64]| likelihood::observed_loglik_at(&theta.from_vec(v), data, opts, estep);

    let mut h = vec![0.0; p];
    for j in 0..p {
        h[j] = rel_step * (1.0 + v0[j].abs());
        if positive_constrained(theta, j) {
            h[j] = h[j].min(v0[j] / 2.0);
        }
    }

    let f0 = eval(&v0)?;
    let mut work = v0.clone();
    let mut info = Matrix::zeros(p, p);
    for i in 0..p {
        work[i] = v0[i] + h[i];
        let up = eval(&work)?;
        work[i] = v0[i] - h[i];
        let down = eval(&work)?;
        work[i] = v0[i];
        info[(i, i)] = -(up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in (i + 1)..p {
            let mut corner = 0.0;
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                work[i] = v0[i] + si * h[i];
                work[j] = v0[j] + sj * h[j];
                corner += si * sj * eval(&work)?;
            }
            work[i] = v0[i];
            work[j] = v0[j];
            let d = -corner / (4.0 * h[i] * h[j]);
            info[(i, j)] = d;
            info[(j, i)] = d;
        }
    }
    for i in 0..p {
        for j in 0..p {
            if !info[(i, j)].is_finite() {
                return Err(Error::NonFinite { context: "observed information" });
            }
        }
    }
    Ok(info)
}

fn positive_constrained(theta: &Theta, j: usize) -> bool {
    j == 6 || (j == 11 && theta.family != MediatorFamily::Poisson)
}

/// Invert the observed information into a covariance. Positive definite
/// information inverts through its Cholesky factor; otherwise the
/// eigenvalue-clamped pseudo-inverse is used and the second value is true.
pub fn covariance_from_information(info: &Matrix) -> (Matrix, bool) {
    match linalg::cholesky(info) {
        Some(l) => (linalg::cholesky_inverse(&l), false),
        None => {
            let (cov, _) = linalg::pseudo_inverse_psd(info, 1e-10);
            (cov, true)
        }
    }
}

/// Starting point built from closed-form regressions: ordinary least squares
/// for the outcome equation (treating recorded zeros as genuine), ridged
/// logistic regression of the recorded-zero indicator for the zero link, a
/// log-scale regression of the positives for the location link, moments for
/// the shape, and a detection decay that masks the median positive with
/// probability one half.
///
/// # Errors
///
/// [`Error::NonIdentifiable`] when the data admit no finite starting point.
pub fn init_theta(data: &Dataset, family: MediatorFamily) -> Result<Theta> {
    data.check_identifiable()?;
    let dz = data.n_confounders();
    let n = data.n();

    // outcome equation
    let mut rows = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for rec in data.records() {
        let ind = if rec.m_obs > 0.0 { 1.0 } else { 0.0 };
        let mut row = vec![1.0, rec.m_obs, ind, rec.x, rec.x * ind, rec.x * rec.m_obs];
        row.extend_from_slice(&rec.z);
        rows.push(row);
        ys.push(rec.y);
    }
    let design = Matrix::from_rows(&rows);
    let coef = linalg::least_squares(&design, &ys);
    let mut ssr = 0.0;
    for (row, &y) in rows.iter().zip(&ys) {
        let fitted: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
        ssr += (y - fitted) * (y - fitted);
    }
    let delta = sqrt(ssr / n as f64).max(1e-3);

    // zero link on the recorded-zero indicator
    let mut zrows = Vec::with_capacity(n);
    let mut zt = Vec::with_capacity(n);
    for rec in data.records() {
        let mut row = vec![1.0, rec.x];
        row.extend_from_slice(&rec.z);
        zrows.push(row);
        zt.push(if rec.m_obs == 0.0 { 1.0 } else { 0.0 });
    }
    let gamma = logistic_ridge(&zrows, &zt);

    // location link among recorded positives
    let mut prows = Vec::new();
    let mut logm = Vec::new();
    let mut pos = Vec::new();
    for rec in data.records() {
        if rec.m_obs > 0.0 {
            let mut row = vec![1.0, rec.x];
            row.extend_from_slice(&rec.z);
            prows.push(row);
            logm.push(log(rec.m_obs));
            pos.push(rec.m_obs);
        }
    }
    let pdesign = Matrix::from_rows(&prows);
    let alpha = linalg::least_squares(&pdesign, &logm);
    let mut sigma = 0.0;
    for (row, &lm) in prows.iter().zip(&logm) {
        let fitted: f64 = row.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        sigma += (lm - fitted) * (lm - fitted);
    }
    sigma = sqrt(sigma / pos.len() as f64).clamp(0.05, 10.0);

    let r = match family {
        MediatorFamily::NegBinomial => {
            let mean: f64 = pos.iter().sum::<f64>() / pos.len() as f64;
            let var: f64 =
                pos.iter().map(|&m| (m - mean) * (m - mean)).sum::<f64>() / pos.len() as f64;
            if var > mean * (1.0 + 1e-9) {
                (mean * mean / (var - mean)).clamp(0.05, 500.0)
            } else {
                500.0
            }
        }
        _ => 1.0,
    };

    let median = data.median_positive().expect("identifiable data has positives");
    let eta = sqrt(core::f64::consts::LN_2 / median);

    let mut theta = Theta {
        family,
        outcome: crate::outcome::OutcomeParams {
            beta: [coef[0], coef[1], coef[2], coef[3], coef[4], coef[5]],
            delta,
        },
        link: crate::families::LinkParams {
            alpha0: alpha[0],
            alpha1: alpha[1],
            gamma0: gamma[0],
            gamma1: gamma[1],
            sigma,
            r,
        },
        eta,
        confounders: ConfounderCoefs {
            outcome: coef[6..6 + dz].to_vec(),
            location: alpha[2..2 + dz].to_vec(),
            zero: gamma[2..2 + dz].to_vec(),
        },
    };
    for v in theta.to_vec() {
        if !v.is_finite() {
            return Err(Error::NonIdentifiable {
                reason: alloc::format!("initialization produced a non-finite {} value", v),
            });
        }
    }
    // a degenerate outcome regression (e.g. collinear design) can zero the
    // residual scale; the likelihood needs it strictly positive
    if theta.outcome.delta < 1e-3 {
        theta.outcome.delta = 1e-3;
    }
    Ok(theta)
}

/// Newton iterations for a logistic regression with a small ridge penalty
/// that keeps separated data finite. Coefficients are clamped to ±20, which
/// is already numerically saturated on the probability scale.
fn logistic_ridge(rows: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    const RIDGE: f64 = 1e-4;
    let p = rows[0].len();
    let mut w = vec![0.0; p];
    for _ in 0..50 {
        let mut g = vec![0.0; p];
        let mut hess = Matrix::zeros(p, p);
        for (row, &t) in rows.iter().zip(target) {
            let lin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let mu = logistic(lin);
            let v = (mu * (1.0 - mu)).max(1e-6);
            for a in 0..p {
                g[a] += (t - mu) * row[a];
                for b in a..p {
                    hess[(a, b)] += v * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            g[a] -= RIDGE * w[a];
            hess[(a, a)] += RIDGE;
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let Some(l) = linalg::cholesky(&hess) else { break };
        let step = linalg::cholesky_solve(&l, &g);
        let mut sup = 0.0f64;
        for (wj, sj) in w.iter_mut().zip(&step) {
            *wj += sj;
            sup = sup.max(sj.abs());
        }
        if sup < 1e-10 {
            break;
        }
    }
    for wj in &mut w {
        *wj = wj.clamp(-20.0, 20.0);
    }
    w
}
