//! Mapping from covariates to the PIM regressor `Z = X* − X`.
//!
//! Every supported term is the difference of a per-row feature, so a design
//! reduces to an `n × p` feature table `F` with `Z_ij = F_j − F_i`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::data::{hex, Dataset};
use crate::error::{PimError, Result};
use crate::link::LinkFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Linear { column: String },
    Quadratic { column: String },
    FactorDummy { column: String, level: f64, baseline: f64 },
}

impl Term {
    pub fn linear(column: impl Into<String>) -> Self {
        Term::Linear { column: column.into() }
    }

    pub fn quadratic(column: impl Into<String>) -> Self {
        Term::Quadratic { column: column.into() }
    }

    pub fn column(&self) -> &str {
        match self {
            Term::Linear { column } | Term::Quadratic { column } => column,
            Term::FactorDummy { column, .. } => column,
        }
    }

    /// Coefficient label, e.g. `SMART`, `SMART^2`, `SMART[4]`.
    pub fn name(&self) -> String {
        match self {
            Term::Linear { column } => column.clone(),
            Term::Quadratic { column } => format!("{column}^2"),
            Term::FactorDummy { column, level, .. } => format!("{column}[{level}]"),
        }
    }

    #[inline]
    fn feature(&self, x: f64) -> f64 {
        match self {
            Term::Linear { .. } => x,
            Term::Quadratic { .. } => x * x,
            Term::FactorDummy { level, .. } => {
                if x == *level {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn canonical(&self) -> String {
        match self {
            Term::Linear { column } => format!("linear({column})"),
            Term::Quadratic { column } => format!("quad({column})"),
            Term::FactorDummy {
                column,
                level,
                baseline,
            } => format!("factor({column};{:x};{:x})", level.to_bits(), baseline.to_bits()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Ordered PIM terms together with the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    terms: Vec<Term>,
    link: LinkFunction,
}

impl DesignSpec {
    pub fn new(terms: Vec<Term>, link: LinkFunction) -> Result<Self> {
        if terms.is_empty() {
            return Err(PimError::Config("design needs at least one term".into()));
        }
        for (k, t) in terms.iter().enumerate() {
            if terms[..k].contains(t) {
                return Err(PimError::Config(format!("duplicate term '{t}'")));
            }
            if let Term::FactorDummy { level, baseline, .. } = t {
                if level == baseline {
                    return Err(PimError::Config(format!(
                        "factor term '{t}' uses its baseline level as a dummy"
                    )));
                }
            }
        }
        Ok(Self { terms, link })
    }

    /// One dummy per non-baseline level of `column` observed in `data`, in
    /// ascending level order.
    pub fn factor_terms(data: &Dataset, column: &str, baseline: f64) -> Result<Vec<Term>> {
        let levels = distinct_levels(data.column(column)?);
        if !levels.contains(&baseline) {
            return Err(PimError::Config(format!(
                "baseline {baseline} is not a level of column '{column}'"
            )));
        }
        Ok(levels
            .into_iter()
            .filter(|&l| l != baseline)
            .map(|level| Term::FactorDummy {
                column: column.to_string(),
                level,
                baseline,
            })
            .collect())
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    pub fn p(&self) -> usize {
        self.terms.len()
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(Term::name).collect()
    }

    /// Short stable identifier of the terms and link.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.link.name().as_bytes());
        for t in &self.terms {
            h.update(b"|");
            h.update(t.canonical().as_bytes());
        }
        hex(&h.finalize()[..8])
    }

    /// Checks columns exist and that each factor column's dummies cover every
    /// non-baseline level present in `data` exactly once.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        for t in &self.terms {
            data.column(t.column())?;
        }
        let mut seen: Vec<&str> = Vec::new();
        for t in &self.terms {
            let Term::FactorDummy { column, baseline, .. } = t else {
                continue;
            };
            if seen.contains(&column.as_str()) {
                continue;
            }
            seen.push(column);
            let mut dummies: Vec<f64> = self
                .terms
                .iter()
                .filter_map(|u| match u {
                    Term::FactorDummy {
                        column: c,
                        level,
                        baseline: b,
                    } if c == column => {
                        if b != baseline {
                            Some(f64::NAN)
                        } else {
                            Some(*level)
                        }
                    }
                    _ => None,
                })
                .collect();
            if dummies.iter().any(|v| v.is_nan()) {
                return Err(PimError::Config(format!(
                    "factor '{column}' has dummies with different baselines"
                )));
            }
            dummies.sort_by(f64::total_cmp);
            let expected: Vec<f64> = distinct_levels(data.column(column)?)
                .into_iter()
                .filter(|l| l != baseline)
                .collect();
            if dummies != expected {
                return Err(PimError::Design(format!(
                    "factor '{column}' dummies {dummies:?} do not match non-baseline levels {expected:?}"
                )));
            }
        }
        Ok(())
    }

    /// Per-row features `F` (row-major `n × p`).
    pub fn row_features(&self, data: &Dataset) -> Result<RowFeatures> {
        let cols: Vec<&[f64]> = self
            .terms
            .iter()
            .map(|t| data.column(t.column()))
            .collect::<Result<_>>()?;
        let n = data.n();
        let p = self.p();
        let mut values = Vec::with_capacity(n * p);
        for r in 0..n {
            for (t, col) in self.terms.iter().zip(&cols) {
                values.push(t.feature(col[r]));
            }
        }
        Ok(RowFeatures { p, values })
    }

    /// Regressor `Z = F(x_star) − F(x)` for two covariate rows given as
    /// `(column name, value)` lookups.
    pub fn contrast(&self, x: &dyn Fn(&str) -> f64, x_star: &dyn Fn(&str) -> f64) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| t.feature(x_star(t.column())) - t.feature(x(t.column())))
            .collect()
    }
}

fn distinct_levels(col: &[f64]) -> Vec<f64> {
    let mut levels = col.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

/// Row-major `n × p` table of per-row term features.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFeatures {
    p: usize,
    values: Vec<f64>,
}

impl RowFeatures {
    pub fn from_rows(p: usize, values: Vec<f64>) -> Self {
        assert!(p > 0 && values.len() % p == 0);
        Self { p, values }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.p
    }

    /// All rows back to back.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.p..(r + 1) * self.p]
    }

    /// `F β` for every row.
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        self.values
            .chunks_exact(self.p)
            .map(|row| row.iter().zip(beta).map(|(f, b)| f * b).sum())
            .collect()
    }

    /// `Σ_{i<j} Z_ij Z_ijᵀ = n Σ_r F_r F_rᵀ − (Σ_r F_r)(Σ_r F_r)ᵀ`, row-major.
    pub fn pairwise_gram(&self) -> Vec<f64> {
        let (n, p) = (self.n(), self.p);
        let mut sum = vec![0.0; p];
        let mut cross = vec![0.0; p * p];
        for row in self.values.chunks_exact(p) {
            for a in 0..p {
                sum[a] += row[a];
                for b in 0..p {
                    cross[a * p + b] += row[a] * row[b];
                }
            }
        }
        let mut gram = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                gram[a * p + b] = n as f64 * cross[a * p + b] - sum[a] * sum[b];
            }
        }
        gram
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        Dataset::new(
            vec![3.0, 1.0, 2.0, 5.0],
            vec![vec![0.0, 1.0, 2.0, 4.0], vec![1.0, 0.0, 2.0, 1.0]],
            vec!["x".into(), "g".into()],
        )
        .unwrap()
    }

    #[test]
    fn rejects_empty_and_duplicate_terms() {
        assert!(DesignSpec::new(vec![], LinkFunction::Probit).is_err());
        assert!(DesignSpec::new(vec![Term::linear("x"), Term::linear("x")], LinkFunction::Probit).is_err());
        // same column as linear and quadratic is fine
        assert!(DesignSpec::new(vec![Term::linear("x"), Term::quadratic("x")], LinkFunction::Probit).is_ok());
    }

    #[test]
    fn factor_expansion_covers_levels() {
        let d = data();
        let terms = DesignSpec::factor_terms(&d, "g", 0.0).unwrap();
        assert_eq!(terms.len(), 2);
        let spec = DesignSpec::new(terms.clone(), LinkFunction::Probit).unwrap();
        spec.validate(&d).unwrap();
        let partial = DesignSpec::new(terms[..1].to_vec(), LinkFunction::Probit).unwrap();
        assert!(matches!(partial.validate(&d), Err(PimError::Design(_))));
        assert!(DesignSpec::factor_terms(&d, "g", 7.0).is_err());
    }

    #[test]
    fn unknown_column_is_config_error() {
        let spec = DesignSpec::new(vec![Term::linear("zz")], LinkFunction::Logit).unwrap();
        assert!(matches!(spec.validate(&data()), Err(PimError::Config(_))));
        assert!(matches!(spec.row_features(&data()), Err(PimError::Config(_))));
    }

    #[test]
    fn features_and_gram() {
        let d = data();
        let spec = DesignSpec::new(vec![Term::linear("x"), Term::quadratic("x")], LinkFunction::Probit).unwrap();
        let f = spec.row_features(&d).unwrap();
        assert_eq!(f.row(3), &[4.0, 16.0]);
        let gram = f.pairwise_gram();
        let mut brute = vec![0.0; 4];
        for i in 0..4 {
            for j in i + 1..4 {
                let z: Vec<f64> = (0..2).map(|k| f.row(j)[k] - f.row(i)[k]).collect();
                for a in 0..2 {
                    for b in 0..2 {
                        brute[a * 2 + b] += z[a] * z[b];
                    }
                }
            }
        }
        for (g, b) in gram.iter().zip(&brute) {
            assert!((g - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fingerprint_depends_on_terms_and_link() {
        let a = DesignSpec::new(vec![Term::linear("x")], LinkFunction::Probit).unwrap();
        let b = DesignSpec::new(vec![Term::linear("x")], LinkFunction::Logit).unwrap();
        let c = DesignSpec::new(vec![Term::quadratic("x")], LinkFunction::Probit).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }
}
