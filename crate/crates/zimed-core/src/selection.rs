//! Mediator-family choice by AIC. Count families are only entertained when
//! every recorded positive is an integer; the lognormal family is always a
//! candidate because any positive value has a density under it.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig, FitResult};
use crate::families::MediatorFamily;

/// Families worth fitting to this data, in tie-break order.
pub fn candidate_families(data: &Dataset) -> Vec<MediatorFamily> {
    if data.positives_are_integers() {
        Vec::from([
            MediatorFamily::Poisson,
            MediatorFamily::NegBinomial,
            MediatorFamily::LogNormal,
        ])
    } else {
        Vec::from([MediatorFamily::LogNormal])
    }
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Successful fits in candidate order.
    pub fits: Vec<FitResult>,
    /// Families whose fit failed outright, with the error.
    pub failures: Vec<(MediatorFamily, Error)>,
    /// Index into `fits` of the AIC choice.
    pub chosen: usize,
}

impl SelectionResult {
    pub fn chosen_fit(&self) -> &FitResult {
        &self.fits[self.chosen]
    }

    pub fn chosen_family(&self) -> MediatorFamily {
        self.chosen_fit().theta.family
    }
}

/// Fit every candidate family and keep the smallest AIC. Ties break toward
/// fewer parameters, then toward the earlier candidate (Poisson before
/// negative binomial before lognormal).
///
/// # Errors
///
/// The first fit error when no candidate family fits at all.
pub fn select_family(data: &Dataset, config: &FitConfig) -> Result<SelectionResult> {
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for family in candidate_families(data) {
        match fit(data, family, config) {
            Ok(res) => fits.push(res),
            Err(e) => failures.push((family, e)),
        }
    }
    if fits.is_empty() {
        let (_, first) = failures.swap_remove(0);
        return Err(first);
    }
    let mut chosen = 0;
    for (idx, cand) in fits.iter().enumerate().skip(1) {
        let best = &fits[chosen];
        let better = cand.aic < best.aic
            || (cand.aic == best.aic && cand.n_params < best.n_params);
        if better {
            chosen = idx;
        }
    }
    Ok(SelectionResult { fits, failures, chosen })
}
