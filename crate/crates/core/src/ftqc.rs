//! Fault-tolerance threshold model for probabilistic two-qubit gates.
//!
//! The threshold of the error-correction scheme is summarized by the fitted
//! curve `a p_l^d + b p_c^d = 1` in the plane of loss and conditional error.
//! The combination `P = a p_l^d + b p_c^d` is the error parameter; an error
//! pair is below threshold when `P <= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{CpfError, Result};

/// Coefficients of the fitted threshold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Default for ThresholdFit {
    fn default() -> Self {
        Self {
            a: 60.0 / 17.0,
            b: 260.0 / 17.0,
            d: 0.59,
        }
    }
}

impl ThresholdFit {
    pub fn new(a: f64, b: f64, d: f64) -> Result<Self> {
        let fit = Self { a, b, d };
        fit.validate()?;
        Ok(fit)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(CpfError::InvalidConfig(format!(
                "threshold coefficients must be positive: a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.d > 0.0 && self.d <= 1.0) {
            return Err(CpfError::InvalidConfig(format!(
                "threshold exponent must lie in (0, 1], got {}",
                self.d
            )));
        }
        Ok(())
    }

    /// Largest loss probability tolerable with zero conditional error.
    pub fn loss_only_threshold(&self) -> f64 {
        (1.0 / self.a).powf(1.0 / self.d)
    }

    /// Largest conditional error tolerable with zero loss.
    pub fn conditional_only_threshold(&self) -> f64 {
        (1.0 / self.b).powf(1.0 / self.d)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CpfError::InvalidProbability(p))
    }
}

/// `P = a p_l^d + b p_c^d`.
pub fn ftqc_parameter(p_loss: f64, p_cond: f64, fit: &ThresholdFit) -> f64 {
    fit.a * p_loss.powf(fit.d) + fit.b * p_cond.powf(fit.d)
}

/// Conditional error on the threshold curve for a given loss probability.
pub fn threshold_boundary(p_loss: f64, fit: &ThresholdFit) -> Result<f64> {
    check_probability(p_loss)?;
    let remaining = 1.0 - fit.a * p_loss.powf(fit.d);
    if remaining < -1e-12 {
        return Err(CpfError::NoBoundary {
            p_loss,
            limit: fit.loss_only_threshold(),
        });
    }
    Ok((remaining.max(0.0) / fit.b).powf(1.0 / fit.d))
}

/// Average error pair together with its error parameter and verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub p_loss_avg: f64,
    pub p_cond_avg: f64,
    pub p_ftqc: f64,
    pub fault_tolerant: bool,
}

impl ErrorBudget {
    pub fn new(p_loss_avg: f64, p_cond_avg: f64, fit: &ThresholdFit) -> Result<Self> {
        check_probability(p_loss_avg)?;
        check_probability(p_cond_avg)?;
        let p_ftqc = ftqc_parameter(p_loss_avg, p_cond_avg, fit);
        Ok(Self {
            p_loss_avg,
            p_cond_avg,
            p_ftqc,
            fault_tolerant: p_ftqc <= 1.0,
        })
    }

    /// Budget with a given error parameter; used for threshold checks.
    pub fn from_parameter(p_ftqc: f64) -> Self {
        Self {
            p_loss_avg: f64::NAN,
            p_cond_avg: f64::NAN,
            p_ftqc,
            fault_tolerant: p_ftqc <= 1.0,
        }
    }
}

/// `P <= 1`; the boundary itself counts as fault tolerant.
pub fn is_fault_tolerant(budget: &ErrorBudget) -> bool {
    budget.p_ftqc <= 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_fit() {
        let fit = ThresholdFit::default();
        assert_eq!(fit.a, 60.0 / 17.0);
        assert_eq!(fit.b, 260.0 / 17.0);
        assert_eq!(fit.d, 0.59);
        assert!(ThresholdFit::new(1.0, 1.0, 1.5).is_err());
        assert!(ThresholdFit::new(-1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn zero_errors_give_zero_parameter() {
        assert_eq!(ftqc_parameter(0.0, 0.0, &ThresholdFit::default()), 0.0);
    }

    #[test]
    fn single_error_thresholds() {
        let fit = ThresholdFit::default();
        let pl = (17.0f64 / 60.0).powf(1.0 / 0.59);
        let pc = (17.0f64 / 260.0).powf(1.0 / 0.59);
        assert!((ftqc_parameter(pl, 0.0, &fit) - 1.0).abs() < 1e-12);
        assert!((ftqc_parameter(0.0, pc, &fit) - 1.0).abs() < 1e-12);
        // High-precision values of the two intercepts.
        assert!((pl - 0.117_948_105_014_509_9).abs() < 1e-15);
        assert!((pc - 0.009_824_975_596_803_673).abs() < 1e-16);
        assert!((fit.loss_only_threshold() - pl).abs() < 1e-15);
    }

    #[test]
    fn boundary_end_points() {
        let fit = ThresholdFit::default();
        let pc0 = threshold_boundary(0.0, &fit).unwrap();
        assert!((pc0 - fit.conditional_only_threshold()).abs() < 1e-15);
        let at_limit = threshold_boundary(fit.loss_only_threshold(), &fit).unwrap();
        assert!(at_limit.abs() < 1e-12);
        let half = 0.5 * fit.loss_only_threshold();
        let pc = threshold_boundary(half, &fit).unwrap();
        assert!((ftqc_parameter(half, pc, &fit) - 1.0).abs() < 1e-12);
        assert!(matches!(
            threshold_boundary(0.2, &fit),
            Err(CpfError::NoBoundary { .. })
        ));
    }

    #[test]
    fn verdicts() {
        assert!(is_fault_tolerant(&ErrorBudget::from_parameter(0.7)));
        assert!(!is_fault_tolerant(&ErrorBudget::from_parameter(1.5)));
        assert!(is_fault_tolerant(&ErrorBudget::from_parameter(1.0)));
        let b = ErrorBudget::new(0.01, 0.001, &ThresholdFit::default()).unwrap();
        assert_eq!(b.fault_tolerant, is_fault_tolerant(&b));
        assert!(ErrorBudget::new(1.2, 0.0, &ThresholdFit::default()).is_err());
    }

    #[test]
    fn verdict_is_stable_under_fit_perturbation() {
        // A 1% change in any fit constant only flips verdicts near P = 1.
        let fit = ThresholdFit::default();
        let mut worst_flip: f64 = 0.0;
        for i in 0..=60 {
            for j in 0..=60 {
                let pl = 10f64.powf(-6.0 + 5.0 * i as f64 / 60.0);
                let pc = 10f64.powf(-7.0 + 5.0 * j as f64 / 60.0);
                let p = ftqc_parameter(pl, pc, &fit);
                for (da, db, dd) in [
                    (0.01, 0.0, 0.0),
                    (-0.01, 0.0, 0.0),
                    (0.0, 0.01, 0.0),
                    (0.0, -0.01, 0.0),
                    (0.0, 0.0, 0.01),
                    (0.0, 0.0, -0.01),
                    (0.01, 0.01, -0.01),
                    (-0.01, -0.01, 0.01),
                ] {
                    let perturbed = ThresholdFit {
                        a: fit.a * (1.0 + da),
                        b: fit.b * (1.0 + db),
                        d: fit.d * (1.0 + dd),
                    };
                    let q = ftqc_parameter(pl, pc, &perturbed);
                    if (p <= 1.0) != (q <= 1.0) {
                        worst_flip = worst_flip.max((p - 1.0).abs());
                    }
                }
            }
        }
        assert!(worst_flip <= 0.05, "verdict flipped at |P - 1| = {worst_flip}");
    }

    proptest! {
        #[test]
        fn parameter_is_monotone(pl in 1e-9f64..1.0, pc in 1e-9f64..1.0, bump in 1e-6f64..1e-2) {
            let fit = ThresholdFit::default();
            let p = ftqc_parameter(pl, pc, &fit);
            prop_assert!(ftqc_parameter((pl + bump).min(1.0), pc, &fit) > p || pl + bump > 1.0);
            prop_assert!(ftqc_parameter(pl, (pc + bump).min(1.0), &fit) > p || pc + bump > 1.0);
        }

        #[test]
        fn boundary_round_trips(frac in 0.0f64..=1.0) {
            let fit = ThresholdFit::default();
            let pl = frac * fit.loss_only_threshold();
            let pc = threshold_boundary(pl, &fit).unwrap();
            prop_assert!((ftqc_parameter(pl, pc, &fit) - 1.0).abs() < 1e-12);
        }
    }
}
