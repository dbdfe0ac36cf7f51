//! Differential-privacy primitives.
//!
//! Every synthesizer spends its budget through the mechanisms in this module
//! and records each spend in a [`BudgetLedger`]. Neighbouring datasets differ
//! by the addition or removal of one record, so a count query has L1 and L2
//! sensitivity 1.
//!
//! An epsilon of `f64::INFINITY` is the non-private bypass: every mechanism is
//! then the identity (or an exact argmax) and spends nothing meaningful.

mod accountant;
mod ledger;
mod mechanisms;

pub use accountant::{
    calibrate_noise_multiplier, pate_accountant_epsilon, sgd_accountant_epsilon,
    subsampled_gaussian_rdp, RDP_ORDERS, SIGMA_MAX, SIGMA_MIN,
};
pub use ledger::{BudgetLedger, LedgerEntry};
pub use mechanisms::{
    exponential_mechanism, gaussian_mechanism, gaussian_sigma, laplace_mechanism, sample_laplace,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target `(epsilon, delta)` guarantee for one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    epsilon: f64,
    delta: f64,
}

impl PrivacySpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Budget(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Budget(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    /// Pure epsilon-DP.
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    /// No privacy: mechanisms add no noise.
    pub fn non_private() -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta: 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_non_private(&self) -> bool {
        self.epsilon.is_infinite()
    }
}

/// Sensitivity of a query under the add/remove-one-record neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBound {
    l1: f64,
    l2: f64,
}

impl SensitivityBound {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::Input(format!(
                "sensitivities must be finite and non-negative, got l1={l1}, l2={l2}"
            )));
        }
        if l2 > l1 {
            return Err(Error::Input(format!(
                "l2 sensitivity {l2} exceeds l1 sensitivity {l1}"
            )));
        }
        Ok(Self { l1, l2 })
    }

    /// A histogram / contingency-table count query.
    pub fn counts() -> Self {
        Self { l1: 1.0, l2: 1.0 }
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(PrivacySpec::new(0.0, 0.0).is_err());
        assert!(PrivacySpec::new(-1.0, 0.0).is_err());
        assert!(PrivacySpec::new(1.0, 1.0).is_err());
        assert!(PrivacySpec::new(1.0, -1e-9).is_err());
        assert!(PrivacySpec::new(f64::NAN, 0.0).is_err());
        let spec = PrivacySpec::new(f64::INFINITY, 1e-5).unwrap();
        assert!(spec.is_non_private());
        assert!(!PrivacySpec::pure(1.0).unwrap().is_non_private());
    }

    #[test]
    fn sensitivity_ordering() {
        assert!(SensitivityBound::new(1.0, 2.0).is_err());
        assert!(SensitivityBound::new(2.0, 1.0).is_ok());
        assert!(SensitivityBound::new(-1.0, -2.0).is_err());
        let c = SensitivityBound::counts();
        assert_eq!((c.l1(), c.l2()), (1.0, 1.0));
    }
}
