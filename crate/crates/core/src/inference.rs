use serde::{Deserialize, Serialize};

use crate::error::{PimError, Result};
use crate::fit::PimFit;
use crate::link::LinkFunction;
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub estimate: f64,
    pub std_error: f64,
    pub z_statistic: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub null_value: f64,
}

impl WaldResult {
    pub fn new(estimate: f64, std_error: f64, null_value: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(std_error > 0.0 && std_error.is_finite()) {
            return Err(PimError::DegenerateVariance { index: 0, std_error });
        }
        let z = (estimate - null_value) / std_error;
        let half = normal::two_sided_critical(alpha) * std_error;
        Ok(Self {
            estimate,
            std_error,
            z_statistic: z,
            p_value: normal::two_sided_p(z),
            ci_lower: estimate - half,
            ci_upper: estimate + half,
            null_value,
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(PimError::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Coefficient-wise Wald tests of `β = null_values` with `1 − alpha` intervals.
pub fn wald_test(fit: &PimFit, null_values: &[f64], alpha: f64) -> Result<Vec<WaldResult>> {
    if null_values.len() != fit.p() {
        return Err(PimError::Config(format!(
            "{} null values for {} coefficients",
            null_values.len(),
            fit.p()
        )));
    }
    fit.beta
        .iter()
        .zip(fit.std_errors())
        .zip(null_values)
        .enumerate()
        .map(|(k, ((&b, se), &b0))| {
            WaldResult::new(b, se, b0, alpha).map_err(|e| match e {
                PimError::DegenerateVariance { std_error, .. } => PimError::DegenerateVariance { index: k, std_error },
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiPrediction {
    pub pi_estimate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// `g⁻¹(zᵀβ̂)` with the Wald interval of `zᵀβ̂` mapped through `g⁻¹`.
pub fn predict_pi(fit: &PimFit, z_delta: &[f64], alpha: f64) -> Result<PiPrediction> {
    if z_delta.len() != fit.p() {
        return Err(PimError::Config(format!(
            "contrast has {} entries, fit has {} coefficients",
            z_delta.len(),
            fit.p()
        )));
    }
    let eta: f64 = z_delta.iter().zip(&fit.beta).map(|(z, b)| z * b).sum();
    let mut var = 0.0;
    for a in 0..fit.p() {
        for b in 0..fit.p() {
            var += z_delta[a] * fit.covariance[a][b] * z_delta[b];
        }
    }
    predict_pi_from(fit.link, eta, var.max(0.0).sqrt(), alpha)
}

/// Same transformation from a linear predictor and its standard error.
pub fn predict_pi_from(link: LinkFunction, eta: f64, std_error: f64, alpha: f64) -> Result<PiPrediction> {
    check_alpha(alpha)?;
    let half = normal::two_sided_critical(alpha) * std_error;
    Ok(PiPrediction {
        pi_estimate: link.inverse(eta),
        ci_lower: link.inverse(eta - half),
        ci_upper: link.inverse(eta + half),
    })
}
