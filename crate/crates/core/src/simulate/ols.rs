use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::f64::consts::SQRT_2;

use crate::data::Dataset;
use crate::error::{PimError, Result};

/// Least-squares fit of the response on an intercept plus `predictors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// `"(intercept)"` followed by the predictor names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Residual standard deviation with `n − p − 1` degrees of freedom.
    pub sigma: f64,
    pub df: usize,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|k| self.coefficients[k])
    }

    /// `α̂ / (√2 σ̂)` for the given predictor.
    pub fn implied_probit_beta(&self, name: &str) -> Option<f64> {
        self.coefficient(name).map(|a| a / (SQRT_2 * self.sigma))
    }
}

pub fn ols_fit(data: &Dataset, predictors: &[&str]) -> Result<OlsFit> {
    let n = data.n();
    let q = predictors.len() + 1;
    if n <= q {
        return Err(PimError::Data(format!(
            "{n} rows cannot support {q} regression coefficients"
        )));
    }
    let cols = predictors
        .iter()
        .map(|name| data.column(name))
        .collect::<Result<Vec<_>>>()?;
    let x = DMatrix::from_fn(n, q, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let y = DVector::from_column_slice(data.y());

    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..q).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..q).any(|k| r[(k, k)].abs() <= 1e-10 * diag_max) {
        return Err(PimError::Design("regression design is rank deficient".into()));
    }
    let qty = qr.q().transpose() * &y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| PimError::Numerical("triangular solve failed".into()))?;
    let resid = &y - &x * &coef;
    let df = n - q;
    let sigma = (resid.norm_squared() / df as f64).sqrt();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| PimError::Numerical("triangular solve failed".into()))?;
    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ, so its diagonal is the squared row norms of R⁻¹
    let std_errors: Vec<f64> = (0..q).map(|k| sigma * r_inv.row(k).norm()).collect();
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let t_statistics: Vec<f64> = coefficients.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let t = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| PimError::Numerical(e.to_string()))?;
    let p_values = t_statistics
        .iter()
        .map(|&ts| if ts.is_nan() { f64::NAN } else { 2.0 * t.sf(ts.abs()) })
        .collect();

    Ok(OlsFit {
        names: std::iter::once("(intercept)".to_string())
            .chain(predictors.iter().map(|s| s.to_string()))
            .collect(),
        coefficients,
        std_errors,
        t_statistics,
        p_values,
        sigma,
        df,
    })
}
