use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::data::Dataset;
use crate::design::{DesignSpec, Term};
use crate::error::{PimError, Result};
use crate::link::LinkFunction;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Model1,
    Model2,
    Model3,
    Custom,
}

/// Gaussian linear model `Y = μ + αX + Σ γ_k Z_k + ε`, `ε ~ N(0, σ²)`, with
/// `X` uniform on `x_range` (integers only when `x_integer`) and each `Z_k`
/// Bernoulli(`covariate_probs[k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingModel {
    pub kind: ModelKind,
    pub intercept: f64,
    pub slope: f64,
    #[serde(default)]
    pub gammas: Vec<f64>,
    pub sigma: f64,
    pub x_range: [f64; 2],
    #[serde(default)]
    pub x_integer: bool,
    #[serde(default)]
    pub covariate_probs: Vec<f64>,
    #[serde(default)]
    pub covariate_names: Vec<String>,
}

/// Slope of the probit PIM implied by a Gaussian linear model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueBeta {
    pub value: f64,
}

pub const X_COLUMN: &str = "x";

impl GeneratingModel {
    pub fn model1() -> Self {
        Self {
            kind: ModelKind::Model1,
            intercept: 0.0,
            slope: 5.0,
            gammas: vec![],
            sigma: 1.0,
            x_range: [0.1, 1.0],
            x_integer: false,
            covariate_probs: vec![],
            covariate_names: vec![],
        }
    }

    pub fn model2() -> Self {
        Self {
            kind: ModelKind::Model2,
            slope: 1.0,
            sigma: 5.0,
            x_range: [0.1, 10.0],
            ..Self::model1()
        }
    }

    pub fn model3() -> Self {
        Self {
            kind: ModelKind::Model3,
            intercept: 46.717,
            slope: -0.432,
            gammas: vec![4.550, 0.305, -0.451],
            sigma: 9.51,
            x_range: [0.0, 7.0],
            x_integer: true,
            covariate_probs: vec![0.48, 0.24, 0.43],
            covariate_names: vec!["gender".into(), "minority".into(), "deprived".into()],
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        intercept: f64,
        slope: f64,
        sigma: f64,
        x_range: [f64; 2],
        x_integer: bool,
        gammas: Vec<f64>,
        covariate_probs: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            kind: ModelKind::Custom,
            intercept,
            slope,
            covariate_names: (1..=gammas.len()).map(|k| format!("z{k}")).collect(),
            gammas,
            sigma,
            x_range,
            x_integer,
            covariate_probs,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(PimError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        let [lo, hi] = self.x_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(PimError::Config(format!("invalid x range [{lo}, {hi}]")));
        }
        if self.x_integer && lo.ceil() > hi.floor() {
            return Err(PimError::Config(format!("no integers in [{lo}, {hi}]")));
        }
        let k = self.gammas.len();
        if self.covariate_probs.len() != k || self.covariate_names.len() != k {
            return Err(PimError::Config(format!(
                "{k} covariate coefficients but {} probabilities and {} names",
                self.covariate_probs.len(),
                self.covariate_names.len()
            )));
        }
        if let Some(p) = self.covariate_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(PimError::Config(format!("covariate probability {p} outside [0, 1]")));
        }
        Ok(())
    }

    /// Column names of generated data: `x` then the covariates.
    pub fn column_names(&self) -> Vec<String> {
        std::iter::once(X_COLUMN.to_string())
            .chain(self.covariate_names.iter().cloned())
            .collect()
    }

    /// Probit PIM with every generated column as a linear term; the first
    /// coefficient is the one [`true_beta`] describes.
    pub fn design(&self) -> DesignSpec {
        let terms = self.column_names().into_iter().map(Term::linear).collect();
        DesignSpec::new(terms, LinkFunction::Probit).expect("generated columns are distinct")
    }
}

/// `α / (√2 σ)`.
pub fn true_beta(model: &GeneratingModel) -> TrueBeta {
    TrueBeta {
        value: model.slope / (SQRT_2 * model.sigma),
    }
}

pub fn generate(model: &GeneratingModel, n: usize, seed: u64) -> Result<Dataset> {
    model.validate()?;
    let mut rng = rng::stream(seed, &[]);
    let noise = Normal::new(0.0, model.sigma).map_err(|e| PimError::Config(e.to_string()))?;
    let [lo, hi] = model.x_range;
    let (ilo, ihi) = (lo.ceil(), hi.floor());
    let k = model.gammas.len();
    let mut y = Vec::with_capacity(n);
    let mut columns = vec![Vec::with_capacity(n); k + 1];
    for _ in 0..n {
        let x = if model.x_integer {
            ilo + rng::below(&mut rng, (ihi - ilo) as usize + 1) as f64
        } else {
            lo + (hi - lo) * rng.random::<f64>()
        };
        let mut mean = model.intercept + model.slope * x;
        columns[0].push(x);
        for c in 0..k {
            let z = if rng.random::<f64>() < model.covariate_probs[c] {
                1.0
            } else {
                0.0
            };
            mean += model.gammas[c] * z;
            columns[c + 1].push(z);
        }
        y.push(mean + noise.sample(&mut rng));
    }
    Dataset::new(y, columns, model.column_names())
}
