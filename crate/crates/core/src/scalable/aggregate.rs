use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{PimError, Result};
use crate::fit::PimFit;
use crate::inference::check_alpha;
use crate::normal;

/// How the pieces of an aggregated fit were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Partition { partitions: usize },
    Subsample { k: usize, b: usize },
}

impl Method {
    pub fn pieces(&self) -> usize {
        match *self {
            Method::Partition { partitions } => partitions,
            Method::Subsample { b, .. } => b,
        }
    }

    /// Factor applied to the sample variance of piece estimates: `1/S` for
    /// partitions, `K/n` for subsamples.
    pub fn variance_scale(&self, n: usize) -> f64 {
        match *self {
            Method::Partition { partitions } => 1.0 / partitions as f64,
            Method::Subsample { k, .. } => k as f64 / n as f64,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Partition { partitions } => write!(f, "partition(S={partitions})"),
            Method::Subsample { k, b } => write!(f, "subsample(K={k},B={b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Pooled estimate over pieces with the scaled and the adjusted-sandwich
/// variance, both coefficient-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedFit {
    pub method: Method,
    pub n: usize,
    pub alpha: f64,
    pub term_names: Vec<String>,
    pub design_fingerprint: String,
    pub beta_pooled: Vec<f64>,
    /// Sample variance of piece estimates times [`Method::variance_scale`].
    pub var_scaled: Vec<f64>,
    /// `(1/S²) Σ_s diag Σ̂_s`.
    pub var_adjusted: Vec<f64>,
    pub ci_scaled: Vec<Interval>,
    pub ci_adjusted: Vec<Interval>,
    /// `(1/S²) Σ_s Σ̂_s`, for joint inference.
    pub pooled_covariance: Vec<Vec<f64>>,
    pub piece_seconds: Vec<f64>,
    pub per_piece: Vec<PimFit>,
    pub warnings: Vec<String>,
}

impl AggregatedFit {
    pub fn p(&self) -> usize {
        self.beta_pooled.len()
    }

    pub fn se_scaled(&self) -> Vec<f64> {
        self.var_scaled.iter().map(|v| v.sqrt()).collect()
    }

    pub fn se_adjusted(&self) -> Vec<f64> {
        self.var_adjusted.iter().map(|v| v.sqrt()).collect()
    }

    pub fn any_separated(&self) -> bool {
        self.per_piece.iter().any(|f| f.separated)
    }
}

/// Pools piece fits exactly as [`partition_fit`](super::partition_fit) and
/// [`subsample_fit`](super::subsample_fit) do.
pub fn aggregate_only(per_piece: Vec<PimFit>, method: Method, n: usize, alpha: f64) -> Result<AggregatedFit> {
    check_alpha(alpha)?;
    let s = per_piece.len();
    if s < 2 {
        return Err(PimError::Config(format!(
            "need at least 2 piece fits to aggregate, got {s}"
        )));
    }
    if s != method.pieces() {
        return Err(PimError::Config(format!(
            "{method} expects {} pieces, got {s}",
            method.pieces()
        )));
    }
    let first = &per_piece[0];
    let p = first.p();
    for (k, f) in per_piece.iter().enumerate() {
        if f.design_fingerprint != first.design_fingerprint || f.p() != p {
            return Err(PimError::Design(format!(
                "piece {k} has design {} ({} terms), piece 0 has {} ({p} terms)",
                f.design_fingerprint,
                f.p(),
                first.design_fingerprint
            )));
        }
    }

    let sf = s as f64;
    let beta_pooled: Vec<f64> = (0..p)
        .map(|a| per_piece.iter().map(|f| f.beta[a]).sum::<f64>() / sf)
        .collect();
    let scale = method.variance_scale(n);
    let var_scaled: Vec<f64> = (0..p)
        .map(|a| {
            let ss: f64 = per_piece.iter().map(|f| (f.beta[a] - beta_pooled[a]).powi(2)).sum();
            ss / (sf - 1.0) * scale
        })
        .collect();
    let mut pooled_covariance = vec![vec![0.0; p]; p];
    for f in &per_piece {
        for a in 0..p {
            for b in 0..p {
                pooled_covariance[a][b] += f.covariance[a][b];
            }
        }
    }
    for row in &mut pooled_covariance {
        for v in row.iter_mut() {
            *v /= sf * sf;
        }
    }
    let var_adjusted: Vec<f64> = (0..p).map(|a| pooled_covariance[a][a]).collect();

    let crit = normal::two_sided_critical(alpha);
    let interval = |b: f64, v: f64| {
        let half = crit * v.max(0.0).sqrt();
        Interval {
            lower: b - half,
            upper: b + half,
        }
    };
    let ci_scaled = (0..p).map(|a| interval(beta_pooled[a], var_scaled[a])).collect();
    let ci_adjusted = (0..p).map(|a| interval(beta_pooled[a], var_adjusted[a])).collect();

    let mut warnings = Vec::new();
    if let Method::Subsample { k, b } = method {
        if k.saturating_mul(b) > n {
            warnings.push(format!(
                "B·K = {} exceeds n = {n}: subsamples overlap and the adjusted \
                 variance ignores their covariance",
                k * b
            ));
        }
    }
    let separated = per_piece.iter().filter(|f| f.separated).count();
    if separated > 0 {
        warnings.push(format!(
            "{separated} of {s} pieces hit the linear-predictor clamp (separation)"
        ));
    }

    Ok(AggregatedFit {
        method,
        n,
        alpha,
        term_names: first.term_names.clone(),
        design_fingerprint: first.design_fingerprint.clone(),
        beta_pooled,
        var_scaled,
        var_adjusted,
        ci_scaled,
        ci_adjusted,
        pooled_covariance,
        piece_seconds: per_piece.iter().map(|f| f.fit_seconds).collect(),
        per_piece,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::LinkFunction;

    pub(crate) fn piece(beta: f64, var: f64) -> PimFit {
        PimFit {
            beta: vec![beta],
            covariance: vec![vec![var]],
            n_obs: 100,
            n_pseudo: 4950,
            iterations: 4,
            score_norm: 0.0,
            separated: false,
            term_names: vec!["x".into()],
            link: LinkFunction::Probit,
            design_fingerprint: "abc".into(),
            fit_seconds: 0.01,
        }
    }

    #[test]
    fn two_pieces_pool_to_mean() {
        let agg = aggregate_only(
            vec![piece(1.0, 0.1), piece(3.0, 0.1)],
            Method::Partition { partitions: 2 },
            200,
            0.05,
        )
        .unwrap();
        assert_eq!(agg.beta_pooled, vec![2.0]);
        assert_eq!(agg.var_scaled, vec![2.0 * 0.5]);
        assert!((agg.var_adjusted[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn equal_pieces_have_zero_scaled_variance() {
        let pieces = vec![piece(0.7, 0.2); 5];
        let agg = aggregate_only(pieces, Method::Partition { partitions: 5 }, 500, 0.05).unwrap();
        assert!((agg.beta_pooled[0] - 0.7).abs() < 1e-15);
        assert_eq!(agg.var_scaled, vec![0.0]);
        assert!((agg.var_adjusted[0] - 0.2 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_design_is_rejected() {
        let mut other = piece(1.0, 0.1);
        other.design_fingerprint = "xyz".into();
        let r = aggregate_only(
            vec![piece(1.0, 0.1), other],
            Method::Partition { partitions: 2 },
            200,
            0.05,
        );
        assert!(matches!(r, Err(PimError::Design(_))));
    }

    #[test]
    fn overlap_warning() {
        let pieces = vec![piece(1.0, 0.1), piece(1.1, 0.1), piece(0.9, 0.1)];
        let agg = aggregate_only(pieces.clone(), Method::Subsample { k: 40, b: 3 }, 100, 0.05).unwrap();
        assert_eq!(agg.warnings.len(), 1);
        let agg = aggregate_only(pieces, Method::Subsample { k: 30, b: 3 }, 100, 0.05).unwrap();
        assert!(agg.warnings.is_empty());
        assert!((agg.var_scaled[0] - 0.01 * 0.3).abs() < 1e-15);
    }
}
