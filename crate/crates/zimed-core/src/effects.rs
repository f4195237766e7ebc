//! Effect decomposition for an exposure change `x1 → x2`. The natural
//! indirect effect splits into a part carried by the mediator's positive
//! amount and a part carried by its presence:
//!
//! ```text
//! NIE1 = (b1 + b5 x2) (E[M | x2] - E[M | x1])
//! NIE2 = (b2 + b4 x2) (P[M = 0 | x1] - P[M = 0 | x2])
//! NDE  = (x2 - x1) (b3 + b4 (1 - P[M = 0 | x1]) + b5 E[M | x1])
//! CDE  = (x2 - x1) (b3 + b4 1(m > 0) + b5 m)   at a fixed mediator value m
//! ```
//!
//! with `E[M | x]` and `P[M = 0 | x]` taken under the fitted mediator law.
//! Standard errors come from the delta method on the natural-scale
//! parameter covariance.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::math::{normal_quantile, sqrt, two_sided_p};
use crate::theta::Theta;

/// The exposure contrast and the mediator value the controlled effect holds
/// fixed.
#[derive(Debug, Clone, Copy)]
pub struct EffectRequest {
    pub x1: f64,
    pub x2: f64,
    /// Mediator value for the controlled direct effect.
    pub cde_m: f64,
}

/// Point values of the five effects. `nie` is exactly `nie1 + nie2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectPoint {
    pub nie1: f64,
    pub nie2: f64,
    pub nie: f64,
    pub nde: f64,
    pub cde: f64,
}

impl EffectPoint {
    pub fn by_name(&self, name: &str) -> Option<f64> {
        match name {
            "nie1" => Some(self.nie1),
            "nie2" => Some(self.nie2),
            "nie" => Some(self.nie),
            "nde" => Some(self.nde),
            "cde" => Some(self.cde),
            _ => None,
        }
    }
}

/// One effect with its delta-method inference.
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub name: &'static str,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub z: f64,
    pub p_value: f64,
}

/// All five effects in report order.
#[derive(Debug, Clone)]
pub struct EffectsResult {
    pub effects: Vec<EffectEstimate>,
    pub ci_level: f64,
}

impl EffectsResult {
    pub fn by_name(&self, name: &str) -> Option<&EffectEstimate> {
        self.effects.iter().find(|e| e.name == name)
    }
}

pub const EFFECT_NAMES: [&str; 5] = ["nie1", "nie2", "nie", "nde", "cde"];

/// Closed-form effects at `theta`. Confounders are held at zero, so with a
/// centered confounder design these are effects at the reference covariate
/// pattern.
///
/// # Errors
///
/// Propagates mediator-law failures (overflowing location link).
pub fn effects_point(theta: &Theta, req: &EffectRequest) -> Result<EffectPoint> {
    let law1 = theta.law_at(req.x1, &[])?;
    let law2 = theta.law_at(req.x2, &[])?;
    let e1 = law1.mean()?;
    let e2 = law2.mean()?;
    let d1 = law1.zero_prob();
    let d2 = law2.zero_prob();
    let b = &theta.outcome.beta;
    let nie1 = (b[1] + b[5] * req.x2) * (e2 - e1);
    let nie2 = (b[2] + b[4] * req.x2) * (d1 - d2);
    let ind = if req.cde_m > 0.0 { 1.0 } else { 0.0 };
    Ok(EffectPoint {
        nie1,
        nie2,
        nie: nie1 + nie2,
        nde: (req.x2 - req.x1) * (b[3] + b[4] * (1.0 - d1) + b[5] * e1),
        cde: (req.x2 - req.x1) * (b[3] + b[4] * ind + b[5] * req.cde_m),
    })
}

/// Effects with delta-method standard errors, Wald intervals at `ci_level`,
/// and two-sided p-values. `covariance` is on the natural scale, aligned
/// with [`Theta::to_vec`].
///
/// # Errors
///
/// Propagates [`effects_point`] failures at the fitted or perturbed values.
pub fn effects_with_inference(
    theta: &Theta,
    covariance: &Matrix,
    req: &EffectRequest,
    ci_level: f64,
) -> Result<EffectsResult> {
    assert!(ci_level > 0.0 && ci_level < 1.0, "confidence level must be in (0, 1)");
    let point = effects_point(theta, req)?;
    let grads = effect_gradients(theta, req)?;
    let q = normal_quantile(0.5 + ci_level / 2.0);

    let mut effects = Vec::with_capacity(EFFECT_NAMES.len());
    for (idx, name) in EFFECT_NAMES.iter().enumerate() {
        let estimate = point.by_name(name).expect("known effect name");
        let g = &grads[idx];
        let mut var = 0.0;
        for i in 0..g.len() {
            for j in 0..g.len() {
                var += g[i] * covariance[(i, j)] * g[j];
            }
        }
        let se = sqrt(var.max(0.0));
        let z = if se > 0.0 { estimate / se } else if estimate == 0.0 { 0.0 } else { f64::INFINITY * estimate.signum() };
        effects.push(EffectEstimate {
            name,
            estimate,
            se,
            ci_lower: estimate - q * se,
            ci_upper: estimate + q * se,
            z,
            p_value: two_sided_p(z),
        });
    }
    Ok(EffectsResult { effects, ci_level })
}

/// Central-difference step for effect gradients.
const GRAD_STEP: f64 = 1e-6;

fn effect_gradients(theta: &Theta, req: &EffectRequest) -> Result<Vec<Vec<f64>>> {
    let v0 = theta.to_vec();
    let p = v0.len();
    let mut grads: Vec<Vec<f64>> =
        (0..EFFECT_NAMES.len()).map(|_| Vec::with_capacity(p)).collect();
    let mut work = v0.clone();
    for j in 0..p {
        let mut h = GRAD_STEP * (1.0 + v0[j].abs());
        // scale parameters live on (0, inf); shrink the step rather than
        // cross the boundary
        let scale_param = j == 6 || (j == 11 && theta.family != crate::families::MediatorFamily::Poisson);
        if scale_param {
            h = h.min(v0[j] / 2.0);
        }
        work[j] = v0[j] + h;
        let up = effects_point(&theta.from_vec(&work), req)?;
        work[j] = v0[j] - h;
        let down = effects_point(&theta.from_vec(&work), req)?;
        work[j] = v0[j];
        for (idx, name) in EFFECT_NAMES.iter().enumerate() {
            let u = up.by_name(name).expect("known effect name");
            let d = down.by_name(name).expect("known effect name");
            grads[idx].push((u - d) / (2.0 * h));
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{LinkParams, MediatorFamily};
    use crate::outcome::OutcomeParams;
    use crate::theta::ConfounderCoefs;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn example(family: MediatorFamily) -> Theta {
        Theta {
            family,
            outcome: OutcomeParams { beta: [90.0, -0.4, -1.5, 0.2, -0.05, 0.01], delta: 2.0 },
            link: LinkParams {
                alpha0: 0.8,
                alpha1: 0.02,
                gamma0: 1.1,
                gamma1: -0.03,
                sigma: 1.0,
                r: 1.5,
            },
            eta: 0.5,
            confounders: ConfounderCoefs::default(),
        }
    }

    #[test]
    fn lognormal_effects_match_a_hand_expansion() {
        let theta = example(MediatorFamily::LogNormal);
        let req = EffectRequest { x1: 50.0, x2: 70.0, cde_m: 3.0 };
        let point = effects_point(&theta, &req).unwrap();

        let delta_at = |x: f64| crate::math::logistic(1.1 - 0.03 * x);
        let mean_at = |x: f64| (1.0 - delta_at(x)) * crate::math::exp(0.8 + 0.02 * x + 0.5);
        let b = theta.outcome.beta;
        assert_relative_eq!(
            point.nie1,
            (b[1] + b[5] * 70.0) * (mean_at(70.0) - mean_at(50.0)),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            point.nie2,
            (b[2] + b[4] * 70.0) * (delta_at(50.0) - delta_at(70.0)),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            point.nde,
            20.0 * (b[3] + b[4] * (1.0 - delta_at(50.0)) + b[5] * mean_at(50.0)),
            epsilon = 1e-12
        );
        assert_relative_eq!(point.cde, 20.0 * (b[3] + b[4] + b[5] * 3.0), epsilon = 1e-12);
    }

    #[test]
    fn cde_at_zero_mediator_drops_the_presence_terms() {
        let theta = example(MediatorFamily::Poisson);
        let req = EffectRequest { x1: 0.0, x2: 1.0, cde_m: 0.0 };
        let point = effects_point(&theta, &req).unwrap();
        assert_relative_eq!(point.cde, theta.outcome.beta[3], epsilon = 1e-14);
    }

    #[test]
    fn cde_ignores_the_mediator_distribution() {
        let mut theta = example(MediatorFamily::NegBinomial);
        let req = EffectRequest { x1: 0.0, x2: 1.0, cde_m: 2.0 };
        let before = effects_point(&theta, &req).unwrap().cde;
        theta.link.alpha0 = -0.3;
        theta.link.gamma1 = 0.9;
        theta.link.r = 7.0;
        theta.eta = 2.0;
        let after = effects_point(&theta, &req).unwrap().cde;
        assert_eq!(before, after);
    }

    #[test]
    fn zero_covariance_collapses_intervals_to_the_point() {
        let theta = example(MediatorFamily::LogNormal);
        let req = EffectRequest { x1: 50.0, x2: 70.0, cde_m: 3.0 };
        let cov = Matrix::zeros(theta.dim(), theta.dim());
        let res = effects_with_inference(&theta, &cov, &req, 0.95).unwrap();
        for e in &res.effects {
            assert_eq!(e.se, 0.0);
            assert_eq!(e.ci_lower, e.estimate);
            assert_eq!(e.ci_upper, e.estimate);
        }
    }

    #[test]
    fn delta_method_matches_the_exact_variance_of_a_linear_effect() {
        // with x2 - x1 = 1 and a fixed mediator value, CDE = b3 + b4 + b5 m
        // is linear in the parameters, so the delta method is exact
        let theta = example(MediatorFamily::Poisson);
        let req = EffectRequest { x1: 0.0, x2: 1.0, cde_m: 2.0 };
        let p = theta.dim();
        let mut cov = Matrix::zeros(p, p);
        // nonzero variances for b3, b4, b5 and one covariance
        cov[(3, 3)] = 0.04;
        cov[(4, 4)] = 0.09;
        cov[(5, 5)] = 0.01;
        cov[(3, 4)] = -0.02;
        cov[(4, 3)] = -0.02;
        let res = effects_with_inference(&theta, &cov, &req, 0.95).unwrap();
        let cde = res.by_name("cde").unwrap();
        // var = var(b3) + var(b4) + m² var(b5) + 2 cov(b3, b4)
        let want = (0.04 + 0.09 + 4.0 * 0.01 - 0.04f64).sqrt();
        assert_relative_eq!(cde.se, want, epsilon = 1e-6);
        let q = normal_quantile(0.975);
        assert_relative_eq!(cde.ci_upper - cde.estimate, q * want, epsilon = 1e-6);
    }

    #[test]
    fn interval_width_tracks_the_confidence_level() {
        let theta = example(MediatorFamily::LogNormal);
        let req = EffectRequest { x1: 50.0, x2: 70.0, cde_m: 3.0 };
        let mut cov = Matrix::zeros(theta.dim(), theta.dim());
        for j in 0..theta.dim() {
            cov[(j, j)] = 0.01;
        }
        let narrow = effects_with_inference(&theta, &cov, &req, 0.5).unwrap();
        let wide = effects_with_inference(&theta, &cov, &req, 0.99).unwrap();
        for (a, b) in narrow.effects.iter().zip(&wide.effects) {
            assert!(b.ci_upper - b.ci_lower > a.ci_upper - a.ci_lower);
        }
    }

    proptest! {
        #[test]
        fn additivity_and_null_transport_hold_everywhere(
            b1 in -2.0f64..2.0, b2 in -2.0f64..2.0,
            b4 in -1.0f64..1.0, b5 in -0.5f64..0.5,
            a1 in -0.4f64..0.4, g1 in -0.8f64..0.8,
            x1 in -2.0f64..2.0, x2 in -2.0f64..2.0,
        ) {
            let mut theta = example(MediatorFamily::NegBinomial);
            theta.outcome.beta[1] = b1;
            theta.outcome.beta[2] = b2;
            theta.outcome.beta[4] = b4;
            theta.outcome.beta[5] = b5;
            theta.link.alpha1 = a1;
            theta.link.gamma1 = g1;
            let req = EffectRequest { x1, x2, cde_m: 1.0 };
            let point = effects_point(&theta, &req).unwrap();
            prop_assert_eq!(point.nie, point.nie1 + point.nie2);

            // when the outcome ignores the mediator entirely, nothing is
            // transported through it
            theta.outcome.beta[1] = 0.0;
            theta.outcome.beta[2] = 0.0;
            theta.outcome.beta[4] = 0.0;
            theta.outcome.beta[5] = 0.0;
            let null = effects_point(&theta, &req).unwrap();
            prop_assert_eq!(null.nie, 0.0);
            prop_assert_eq!(null.nie1, 0.0);
            prop_assert_eq!(null.nie2, 0.0);
        }

        #[test]
        fn identical_arms_produce_no_effects(x in -3.0f64..3.0) {
            let theta = example(MediatorFamily::Poisson);
            let req = EffectRequest { x1: x, x2: x, cde_m: 2.0 };
            let point = effects_point(&theta, &req).unwrap();
            prop_assert_eq!(point.nie, 0.0);
            prop_assert_eq!(point.nde, 0.0);
            prop_assert_eq!(point.cde, 0.0);
        }
    }
}
