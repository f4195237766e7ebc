//! The full parameter vector of one mediation model and its two flat layouts:
//! the natural scale used for reporting and standard errors, and the
//! optimizer scale where positive parameters live on the log axis.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::families::{LinkParams, MediatorFamily, MediatorLaw};
use crate::math::{exp, log};
use crate::outcome::OutcomeParams;

/// Confounder coefficients for the three equations they enter: the outcome
/// mean, the location link, and the zero link. All three have one entry per
/// confounder column; all empty when the model has none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfounderCoefs {
    pub outcome: Vec<f64>,
    pub location: Vec<f64>,
    pub zero: Vec<f64>,
}

/// Largest admissible negative binomial size. Past this the family equals
/// its Poisson limit to within 1e-10 per record, so nothing is lost by
/// declaring the tail out of bounds.
pub const R_MAX: f64 = 1e12;

/// Every parameter of one mediation model.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub family: MediatorFamily,
    pub outcome: OutcomeParams,
    pub link: LinkParams,
    /// Detection decay of the false-zero mechanism; enters squared.
    pub eta: f64,
    pub confounders: ConfounderCoefs,
}

impl Theta {
    /// Number of free parameters: 6 outcome slopes, the residual scale, four
    /// link coefficients, the family shape (absent for the Poisson family),
    /// the detection decay, and three coefficients per confounder.
    pub fn dim(&self) -> usize {
        let base = match self.family {
            MediatorFamily::LogNormal | MediatorFamily::NegBinomial => 13,
            MediatorFamily::Poisson => 12,
        };
        base + 3 * self.n_confounders()
    }

    pub fn n_confounders(&self) -> usize {
        self.confounders.outcome.len()
    }

    /// # Errors
    ///
    /// [`Error::InvalidParameter`] when a scale parameter is out of its
    /// domain, or any coefficient is non-finite, or the three confounder
    /// blocks disagree on length.
    pub fn validate(&self) -> Result<()> {
        if !self.outcome.is_valid() {
            return Err(Error::InvalidParameter { name: "delta", value: self.outcome.delta });
        }
        for (name, v) in [
            ("alpha0", self.link.alpha0),
            ("alpha1", self.link.alpha1),
            ("gamma0", self.link.gamma0),
            ("gamma1", self.link.gamma1),
            ("eta", self.eta),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        match self.family {
            MediatorFamily::LogNormal => {
                if !(self.link.sigma > 0.0) || !self.link.sigma.is_finite() {
                    return Err(Error::InvalidParameter { name: "sigma", value: self.link.sigma });
                }
            }
            MediatorFamily::NegBinomial => {
                // beyond R_MAX the law is the Poisson limit to far below any
                // fitting tolerance; bounding it keeps flat-ridge line
                // searches from walking the size into overflow
                if !(self.link.r > 0.0) || !(self.link.r <= R_MAX) {
                    return Err(Error::InvalidParameter { name: "r", value: self.link.r });
                }
            }
            MediatorFamily::Poisson => {}
        }
        let dz = self.confounders.outcome.len();
        if self.confounders.location.len() != dz || self.confounders.zero.len() != dz {
            return Err(Error::InvalidParameter { name: "confounders", value: dz as f64 });
        }
        let all = self
            .confounders
            .outcome
            .iter()
            .chain(&self.confounders.location)
            .chain(&self.confounders.zero);
        for &v in all {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name: "confounders", value: v });
            }
        }
        Ok(())
    }

    /// Mediator law at exposure `x` and confounders `z`, which shift the two
    /// link intercepts.
    ///
    /// # Errors
    ///
    /// Propagates [`MediatorLaw::new`] failures.
    pub fn law_at(&self, x: f64, z: &[f64]) -> Result<MediatorLaw> {
        let mut link = self.link;
        if !z.is_empty() {
            link.alpha0 += dot(&self.confounders.location, z);
            link.gamma0 += dot(&self.confounders.zero, z);
        }
        MediatorLaw::new(self.family, &link, x)
    }

    /// Outcome coefficients at confounders `z`, which shift the intercept.
    pub fn outcome_at(&self, z: &[f64]) -> OutcomeParams {
        let mut out = self.outcome;
        if !z.is_empty() {
            out.beta[0] += dot(&self.confounders.outcome, z);
        }
        out
    }

    /// Flatten to the natural scale. Layout: `beta0..beta5, delta, alpha0,
    /// alpha1, gamma0, gamma1, [sigma | r], eta, confounders (outcome block,
    /// location block, zero block)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.outcome.beta);
        v.push(self.outcome.delta);
        v.push(self.link.alpha0);
        v.push(self.link.alpha1);
        v.push(self.link.gamma0);
        v.push(self.link.gamma1);
        match self.family {
            MediatorFamily::LogNormal => v.push(self.link.sigma),
            MediatorFamily::NegBinomial => v.push(self.link.r),
            MediatorFamily::Poisson => {}
        }
        v.push(self.eta);
        v.extend_from_slice(&self.confounders.outcome);
        v.extend_from_slice(&self.confounders.location);
        v.extend_from_slice(&self.confounders.zero);
        v
    }

    /// Rebuild from [`Self::to_vec`] output, reusing `self` for the family
    /// and confounder count.
    pub fn from_vec(&self, v: &[f64]) -> Theta {
        assert_eq!(v.len(), self.dim(), "parameter vector length mismatch");
        let dz = self.n_confounders();
        let mut out = self.clone();
        out.outcome.beta.copy_from_slice(&v[0..6]);
        out.outcome.delta = v[6];
        out.link.alpha0 = v[7];
        out.link.alpha1 = v[8];
        out.link.gamma0 = v[9];
        out.link.gamma1 = v[10];
        let mut at = 11;
        match self.family {
            MediatorFamily::LogNormal => {
                out.link.sigma = v[at];
                at += 1;
            }
            MediatorFamily::NegBinomial => {
                out.link.r = v[at];
                at += 1;
            }
            MediatorFamily::Poisson => {}
        }
        out.eta = v[at];
        at += 1;
        out.confounders.outcome = v[at..at + dz].to_vec();
        out.confounders.location = v[at + dz..at + 2 * dz].to_vec();
        out.confounders.zero = v[at + 2 * dz..at + 3 * dz].to_vec();
        out
    }

    /// Flatten to the optimizer scale: same layout as [`Self::to_vec`] but
    /// with `delta`, `sigma`, and `r` replaced by their logarithms so the
    /// positivity constraints disappear.
    pub fn to_opt_vec(&self) -> Vec<f64> {
        let mut v = self.to_vec();
        v[6] = log(v[6]);
        if self.family != MediatorFamily::Poisson {
            v[11] = log(v[11]);
        }
        v
    }

    /// Inverse of [`Self::to_opt_vec`], except that a negative binomial size
    /// saturates at [`R_MAX`]. On equidispersed data the likelihood is flat
    /// in `r` past that point, and saturation turns the flat ridge into a
    /// zero gradient instead of a hard wall that eats whole line searches.
    pub fn from_opt_vec(&self, v: &[f64]) -> Theta {
        let mut nat = v.to_vec();
        nat[6] = exp(nat[6]);
        if self.family != MediatorFamily::Poisson {
            nat[11] = exp(nat[11]);
            if self.family == MediatorFamily::NegBinomial && nat[11] > R_MAX {
                nat[11] = R_MAX;
            }
        }
        self.from_vec(&nat)
    }

    /// Names aligned with [`Self::to_vec`], for reports.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = vec![
            "beta0".into(),
            "beta1".into(),
            "beta2".into(),
            "beta3".into(),
            "beta4".into(),
            "beta5".into(),
            "delta".into(),
            "alpha0".into(),
            "alpha1".into(),
            "gamma0".into(),
            "gamma1".into(),
        ];
        match self.family {
            MediatorFamily::LogNormal => names.push("sigma".into()),
            MediatorFamily::NegBinomial => names.push("r".into()),
            MediatorFamily::Poisson => {}
        }
        names.push("eta".into());
        let dz = self.n_confounders();
        for block in ["kappa_y", "kappa_loc", "kappa_zero"] {
            for j in 1..=dz {
                names.push(format!("{block}{j}"));
            }
        }
        names
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}
