//! Fisher scoring for the PIM estimating equations and the sandwich
//! covariance of the resulting estimator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::data::Dataset;
use crate::design::DesignSpec;
use crate::error::{PimError, Result};
use crate::kernel::PairProblem;
use crate::link::LinkFunction;
use crate::pseudo::{indicator, pair_count, PseudoObservation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Converged once a full Newton step moves no coefficient more than this.
    pub step_tolerance: f64,
    /// Converged once `‖U(β)‖∞ / n_pseudo` falls below this.
    pub score_tolerance: f64,
    pub max_halvings: usize,
    /// Linear predictors beyond ±`eta_clamp` are clamped when evaluating μ.
    pub eta_clamp: f64,
    /// Rows per accumulation block; fixes the summation order.
    pub block_rows: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance: 1e-8,
            score_tolerance: 1e-8,
            max_halvings: 10,
            eta_clamp: 30.0,
            block_rows: 32,
        }
    }
}

/// One PIM fit: estimate, sandwich covariance and solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimFit {
    pub beta: Vec<f64>,
    /// Sandwich covariance, one inner vector per row.
    pub covariance: Vec<Vec<f64>>,
    pub n_obs: usize,
    pub n_pseudo: u64,
    pub iterations: usize,
    /// `‖U(β̂)‖∞ / n_pseudo`.
    pub score_norm: f64,
    /// Some linear predictor hit the clamp (separation on this data).
    pub separated: bool,
    pub term_names: Vec<String>,
    pub link: LinkFunction,
    pub design_fingerprint: String,
    pub fit_seconds: f64,
}

impl PimFit {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.p()).map(|k| self.covariance[k][k]).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.variances().into_iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |a, b| self.covariance[a][b])
    }
}

/// Anything carrying PIM coefficients for a known design.
pub trait FittedPim {
    fn coefficients(&self) -> &[f64];
    fn fingerprint(&self) -> &str;
}

impl FittedPim for PimFit {
    fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    fn fingerprint(&self) -> &str {
        &self.design_fingerprint
    }
}

/// Coefficients restored from a stored report.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredFit {
    pub beta: Vec<f64>,
    pub design_fingerprint: String,
}

impl FittedPim for StoredFit {
    fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    fn fingerprint(&self) -> &str {
        &self.design_fingerprint
    }
}

pub fn fit_pim(data: &Dataset, spec: &DesignSpec, solver: &SolverConfig) -> Result<PimFit> {
    let started = Instant::now();
    spec.validate(data)?;
    let (n, p) = (data.n(), spec.p());
    if n < p + 2 {
        return Err(PimError::Data(format!(
            "need at least p + 2 = {} observations, got {n}",
            p + 2
        )));
    }
    let features = spec.row_features(data)?;
    check_full_rank(&features.pairwise_gram(), p)?;

    let problem = PairProblem {
        y: data.y(),
        features: &features,
        link: spec.link(),
        eta_clamp: solver.eta_clamp,
        block_rows: solver.block_rows,
    };
    let n_pseudo = pair_count(n);
    let mean_norm = |score: &[f64]| score.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n_pseudo as f64;

    let mut beta = vec![0.0; p];
    let mut state = problem.score_info(&beta);
    let mut norm = mean_norm(&state.score);
    let mut separated = state.clamped;
    let mut iterations = 0;
    while norm > solver.score_tolerance {
        if iterations == solver.max_iterations {
            return Err(PimError::NonConvergence {
                iterations,
                score_norm: norm,
                last_beta: beta,
            });
        }
        iterations += 1;
        let delta = solve_spd(&state.info, &state.score, p).ok_or_else(|| {
            PimError::Numerical(format!(
                "information matrix not positive definite at iteration {iterations}"
            ))
        })?;
        let mut step = 1.0;
        let mut halvings = 0;
        let (candidate, cand_state, cand_norm) = loop {
            let cand: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            let cs = problem.score_info(&cand);
            let cn = mean_norm(&cs.score);
            if cn < norm || halvings == solver.max_halvings {
                break (cand, cs, cn);
            }
            halvings += 1;
            step *= 0.5;
        };
        beta = candidate;
        separated |= cand_state.clamped;
        state = cand_state;
        norm = cand_norm;
        let max_step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if halvings == 0 && max_step <= solver.step_tolerance {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(PimError::Numerical("non-finite coefficient estimate".into()));
    }

    log::debug!("fit converged: n = {n}, {iterations} iterations, mean score {norm:.2e}");
    if separated {
        log::warn!("linear predictor hit the clamp; data may be (quasi-)separated");
    }
    let parts = problem.sandwich_parts(&beta);
    let covariance = sandwich_from_parts(&parts.bread, &parts.meat, p)?;
    Ok(PimFit {
        beta,
        covariance: rows_of(&covariance),
        n_obs: n,
        n_pseudo,
        iterations,
        score_norm: norm,
        separated: separated || parts.clamped,
        term_names: spec.term_names(),
        link: spec.link(),
        design_fingerprint: spec.fingerprint(),
        fit_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Rejects designs whose pairwise differences do not span `p` dimensions.
fn check_full_rank(gram: &[f64], p: usize) -> Result<()> {
    let m = DMatrix::from_row_slice(p, p, gram);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &v| a.max(v));
    let min = eig.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(PimError::Design(format!(
            "pairwise design differences are rank deficient (eigenvalues in [{min:.3e}, {max:.3e}])"
        )));
    }
    Ok(())
}

fn solve_spd(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(p, p, a);
    let chol = m.cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(b));
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Bread, meat and the resulting sandwich covariance `B⁻¹ M B⁻ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub bread: DMatrix<f64>,
    pub meat: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
}

fn sandwich_from_parts(bread: &[f64], meat: &[f64], p: usize) -> Result<DMatrix<f64>> {
    let b = DMatrix::from_row_slice(p, p, bread);
    let m = DMatrix::from_row_slice(p, p, meat);
    let inv = b
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| b.clone().try_inverse())
        .ok_or_else(|| PimError::Numerical("sandwich bread matrix is singular".into()))?;
    let cov = &inv * m * inv.transpose();
    // symmetrise away rounding
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Sandwich covariance from an explicit stream of pseudo-observations.
///
/// Keeps one running score sum `S_h` per original index, so memory is
/// `O(n·p)` however long the stream is.
pub fn sandwich_covariance<I>(pseudo: I, beta: &[f64], link: LinkFunction) -> Result<Sandwich>
where
    I: IntoIterator<Item = PseudoObservation>,
{
    let p = beta.len();
    let mut bread = vec![0.0; p * p];
    let mut self_outer = vec![0.0; p * p];
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for obs in pseudo {
        if obs.z.len() != p {
            return Err(PimError::Config(format!(
                "pseudo-observation ({}, {}) has {} regressors, beta has {p}",
                obs.i,
                obs.j,
                obs.z.len()
            )));
        }
        let eta: f64 = obs.z.iter().zip(beta).map(|(z, b)| z * b).sum();
        let ev = link.eval(eta);
        let s = ev.score_weight * (obs.indicator - ev.mean);
        let top = obs.i.max(obs.j);
        if sums.len() <= top {
            sums.resize(top + 1, vec![0.0; p]);
        }
        for a in 0..p {
            let u = s * obs.z[a];
            sums[obs.i][a] += u;
            sums[obs.j][a] += u;
            for b in 0..p {
                self_outer[a * p + b] += u * s * obs.z[b];
                bread[a * p + b] += ev.info_weight * obs.z[a] * obs.z[b];
            }
        }
    }
    let mut meat = vec![0.0; p * p];
    for s_h in &sums {
        for a in 0..p {
            for b in 0..p {
                meat[a * p + b] += s_h[a] * s_h[b];
            }
        }
    }
    for (m, o) in meat.iter_mut().zip(&self_outer) {
        *m -= o;
    }
    let covariance = sandwich_from_parts(&bread, &meat, p)?;
    Ok(Sandwich {
        bread: DMatrix::from_row_slice(p, p, &bread),
        meat: DMatrix::from_row_slice(p, p, &meat),
        covariance,
    })
}

/// Sandwich pieces at `beta` through the same blocked kernel `fit_pim` uses.
pub fn sandwich_at(data: &Dataset, spec: &DesignSpec, beta: &[f64], solver: &SolverConfig) -> Result<Sandwich> {
    spec.validate(data)?;
    let features = spec.row_features(data)?;
    let problem = PairProblem {
        y: data.y(),
        features: &features,
        link: spec.link(),
        eta_clamp: solver.eta_clamp,
        block_rows: solver.block_rows,
    };
    let p = spec.p();
    let parts = problem.sandwich_parts(beta);
    let covariance = sandwich_from_parts(&parts.bread, &parts.meat, p)?;
    Ok(Sandwich {
        bread: DMatrix::from_row_slice(p, p, &parts.bread),
        meat: DMatrix::from_row_slice(p, p, &parts.meat),
        covariance,
    })
}

/// `U(β) = Σ A(Z_ij; β)[I_ij − g⁻¹(Z_ijᵀβ)]`, evaluated pair by pair.
pub fn score(data: &Dataset, spec: &DesignSpec, beta: &[f64]) -> Result<Vec<f64>> {
    spec.validate(data)?;
    let features = spec.row_features(data)?;
    let lin = features.linear_predictor(beta);
    let y = data.y();
    let p = spec.p();
    let mut u = vec![0.0; p];
    for i in 0..data.n() {
        for j in i + 1..data.n() {
            let ev = spec.link().eval(lin[j] - lin[i]);
            let s = ev.score_weight * (indicator(y[i], y[j]) - ev.mean);
            for (a, ua) in u.iter_mut().enumerate() {
                *ua += s * (features.row(j)[a] - features.row(i)[a]);
            }
        }
    }
    Ok(u)
}
