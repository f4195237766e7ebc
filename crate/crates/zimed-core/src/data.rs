//! Observed data: outcome, recorded mediator, exposure, and optional
//! confounders per record.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One observation. `m_obs` is the mediator as recorded, which may be a
/// masked zero rather than the true value.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub y: f64,
    pub m_obs: f64,
    pub x: f64,
    /// Confounder values; empty when the model has none.
    pub z: Vec<f64>,
}

impl Record {
    pub fn new(y: f64, m_obs: f64, x: f64) -> Self {
        Record { y, m_obs, x, z: Vec::new() }
    }
}

/// A validated collection of records with a consistent confounder layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    n_confounders: usize,
}

impl Dataset {
    /// Validate and wrap records.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidMediator`] for negative or non-finite mediators,
    /// [`Error::NonIdentifiable`] for an empty set, non-finite outcomes or
    /// exposures, or ragged confounder rows.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NonIdentifiable { reason: format!("empty data set") });
        }
        let n_confounders = records[0].z.len();
        for (i, r) in records.iter().enumerate() {
            if !(r.m_obs >= 0.0) || !r.m_obs.is_finite() {
                return Err(Error::InvalidMediator { value: r.m_obs });
            }
            if !r.y.is_finite() || !r.x.is_finite() {
                return Err(Error::NonIdentifiable {
                    reason: format!("non-finite outcome or exposure at record {i}"),
                });
            }
            if r.z.len() != n_confounders {
                return Err(Error::NonIdentifiable {
                    reason: format!(
                        "record {i} has {} confounders, expected {n_confounders}",
                        r.z.len()
                    ),
                });
            }
            if r.z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonIdentifiable {
                    reason: format!("non-finite confounder at record {i}"),
                });
            }
        }
        Ok(Dataset { records, n_confounders })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn n_confounders(&self) -> usize {
        self.n_confounders
    }

    pub fn n_zero(&self) -> usize {
        self.records.iter().filter(|r| r.m_obs == 0.0).count()
    }

    pub fn n_positive(&self) -> usize {
        self.n() - self.n_zero()
    }

    /// True when every positive recorded mediator is an integer (within a
    /// hair of rounding), which is what the count families require.
    pub fn positives_are_integers(&self) -> bool {
        self.records
            .iter()
            .filter(|r| r.m_obs > 0.0)
            .all(|r| (r.m_obs - libm::round(r.m_obs)).abs() <= 1e-8)
    }

    /// Sample median of the positive recorded mediators (lower median for
    /// even counts). `None` when there are no positives.
    pub fn median_positive(&self) -> Option<f64> {
        let mut pos: Vec<f64> =
            self.records.iter().filter(|r| r.m_obs > 0.0).map(|r| r.m_obs).collect();
        if pos.is_empty() {
            return None;
        }
        pos.sort_by(f64::total_cmp);
        Some(pos[(pos.len() - 1) / 2])
    }

    /// Fails unless the set can identify a two-part mediator model: at least
    /// one positive mediator and a non-constant exposure.
    pub fn check_identifiable(&self) -> Result<()> {
        if self.n_positive() == 0 {
            return Err(Error::NonIdentifiable {
                reason: format!("all {} recorded mediators are zero", self.n()),
            });
        }
        let x0 = self.records[0].x;
        if self.records.iter().all(|r| r.x == x0) {
            return Err(Error::NonIdentifiable {
                reason: format!("exposure is constant ({x0}) across all records"),
            });
        }
        Ok(())
    }
}
