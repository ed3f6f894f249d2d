//! Authentication decision: variance budget, threshold, per-measurement
//! booleans and the position-level verdict.

use thiserror::Error;

use crate::acquire::EcsMeasurement;
use crate::scalar::Scalar;
use crate::{F1_HZ, F6_HZ, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuthError {
    #[error("no measurements to verify")]
    NoMeasurements,
    #[error("error budget invariant violated: {0}")]
    InvalidBudget(String),
}

/// A-priori 1-sigma error contributions, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget<T = f64> {
    pub sigma_hwb: T,
    pub sigma_bgd: T,
    pub sigma_i_e1: T,
    pub sigma_mp_e6: T,
    pub sigma_mp_e1: T,
    pub sigma_n_e6: T,
    pub sigma_n_e1: T,
}

impl<T: Scalar> ErrorBudget<T> {
    pub fn validate(&self) -> Result<(), AuthError> {
        for (name, v) in self.components() {
            if v < T::zero() || !v.is_finite() {
                return Err(AuthError::InvalidBudget(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    fn components(&self) -> [(&'static str, T); 7] {
        [
            ("sigma_hwb", self.sigma_hwb),
            ("sigma_bgd", self.sigma_bgd),
            ("sigma_i_e1", self.sigma_i_e1),
            ("sigma_mp_e6", self.sigma_mp_e6),
            ("sigma_mp_e1", self.sigma_mp_e1),
            ("sigma_n_e6", self.sigma_n_e6),
            ("sigma_n_e1", self.sigma_n_e1),
        ]
    }
}

/// How the ionospheric term enters the variance sum.
///
/// The residual error term scales with `|f1^2/f6^2 - 1|`, so its
/// variance carries the squared coefficient; that is the default. The
/// published variance formula prints the coefficient unsquared, and
/// that literal form is kept available for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IonoCoefMode {
    #[default]
    Squared,
    Literal,
}

/// 1-sigma bound of the pseudorange-difference test statistic, meters.
pub fn sigma_auth<T: Scalar>(budget: &ErrorBudget<T>, f1: T, f6: T, mode: IonoCoefMode) -> T {
    let coef = ((f1 / f6) * (f1 / f6) - T::one()).abs();
    let iono_coef = match mode {
        IonoCoefMode::Squared => coef * coef,
        IonoCoefMode::Literal => coef,
    };
    (budget.sigma_hwb * budget.sigma_hwb
        + budget.sigma_bgd * budget.sigma_bgd
        + budget.sigma_i_e1 * budget.sigma_i_e1 * iono_coef
        + budget.sigma_mp_e6 * budget.sigma_mp_e6
        + budget.sigma_mp_e1 * budget.sigma_mp_e1
        + budget.sigma_n_e6 * budget.sigma_n_e6
        + budget.sigma_n_e1 * budget.sigma_n_e1)
        .sqrt()
}

/// Convenience form with the fixed carrier constants.
pub fn sigma_auth_default<T: Scalar>(budget: &ErrorBudget<T>, mode: IonoCoefMode) -> T {
    sigma_auth(budget, T::from_f64_c(F1_HZ), T::from_f64_c(F6_HZ), mode)
}

/// Per-measurement test: residual in meters against the threshold
/// `gamma = K * sigma`. The boundary counts as authenticated.
/// Returns `(xi, gamma_m)`.
pub fn verify_measurement<T: Scalar>(tau_e6: T, tau_hat_e6: T, sigma_auth_m: T, k: T) -> (bool, T) {
    assert!(
        sigma_auth_m > T::zero() && k > T::zero(),
        "sigma_auth and K must be positive"
    );
    let gamma = k * sigma_auth_m;
    let residual_m = (tau_e6 - tau_hat_e6) * T::from_f64_c(SPEED_OF_LIGHT);
    (residual_m.abs() <= gamma, gamma)
}

/// Position verdict: the conjunction of all per-satellite booleans.
pub fn verify_position(xis: &[bool]) -> Result<bool, AuthError> {
    if xis.is_empty() {
        return Err(AuthError::NoMeasurements);
    }
    Ok(xis.iter().all(|&x| x))
}

/// One satellite's line in the report.
#[derive(Debug, Clone, PartialEq)]
pub struct SatCheck<T = f64> {
    pub svid: u8,
    pub tau_e6: T,
    pub tau_hat_e6: T,
    /// Measured-minus-predicted in meters.
    pub residual_m: T,
    pub gamma_auth_m: T,
    pub xi: bool,
    pub peak_metric: T,
    pub detected: bool,
    /// Set when the verdict cannot distinguish spoofing from degraded
    /// conditions (no automated classification is attempted).
    pub note: Option<&'static str>,
}

impl SatCheck<f64> {
    /// Applies the consistency test to one correlation outcome. A
    /// failed detection maps to `xi = false` with a note; the residual
    /// test never overrides it.
    pub fn evaluate(
        svid: u8,
        meas: &EcsMeasurement,
        tau_hat_e6: f64,
        sigma_auth_m: f64,
        k: f64,
    ) -> Self {
        let (xi_residual, gamma) = verify_measurement(meas.tau_e6, tau_hat_e6, sigma_auth_m, k);
        let xi = meas.detected && xi_residual;
        let note = if !meas.detected {
            Some("sequence not detected: spoofing or degraded conditions")
        } else if !xi_residual {
            Some("residual exceeds threshold: spoofing or degraded conditions")
        } else {
            None
        };
        Self {
            svid,
            tau_e6: meas.tau_e6,
            tau_hat_e6,
            residual_m: (meas.tau_e6 - tau_hat_e6) * SPEED_OF_LIGHT,
            gamma_auth_m: gamma,
            xi,
            peak_metric: meas.peak_metric,
            detected: meas.detected,
            note,
        }
    }
}

/// Position-level report: per-satellite entries and their conjunction.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthReport<T = f64> {
    pub entries: Vec<SatCheck<T>>,
    pub position_authenticated: bool,
    pub k: T,
}

impl AuthReport<f64> {
    pub fn new(entries: Vec<SatCheck<f64>>, k: f64) -> Result<Self, AuthError> {
        let xis: Vec<bool> = entries.iter().map(|e| e.xi).collect();
        let position_authenticated = verify_position(&xis)?;
        Ok(Self {
            entries,
            position_authenticated,
            k,
        })
    }
}
