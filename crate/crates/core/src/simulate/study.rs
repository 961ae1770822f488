use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::design::DesignSpec;
use crate::error::{PimError, Result};
use crate::fit::SolverConfig;
use crate::inference::check_alpha;
use crate::normal;
use crate::rng::derive_seed;
use crate::scalable::{partition_fit, subsample_fit, AggregatedFit, Method, PartitionPlan, SubsamplePlan};

use super::model::{generate, true_beta, GeneratingModel};

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McGridSpec {
    pub model: GeneratingModel,
    pub n: usize,
    pub runs: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    /// Defaults to [`GeneratingModel::design`]. Coverage is judged on the
    /// first coefficient.
    #[serde(default)]
    pub design: Option<DesignSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl McGridSpec {
    pub fn new(model: GeneratingModel, n: usize, runs: usize, methods: Vec<Method>, seed: u64) -> Self {
        Self {
            model,
            n,
            runs,
            methods,
            alpha: default_alpha(),
            seed,
            design: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(PimError::Config("runs must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(PimError::Config("method grid is empty".into()));
        }
        check_alpha(self.alpha)?;
        self.model.validate()?;
        for m in &self.methods {
            match *m {
                Method::Partition { partitions } => {
                    PartitionPlan::new(self.n, partitions, 0)?;
                }
                Method::Subsample { k, b } => SubsamplePlan::new(k, b, 0)?.check(self.n)?,
            }
        }
        Ok(())
    }

    fn resolved_design(&self) -> DesignSpec {
        self.design.clone().unwrap_or_else(|| self.model.design())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub label: String,
    pub mse: f64,
    pub bias: f64,
    /// Variance of the estimates with denominator `runs`.
    pub variance: f64,
    pub covered_scaled: usize,
    pub covered_adjusted: usize,
    pub ec_scaled: f64,
    pub ec_adjusted: f64,
    pub mean_var_scaled: f64,
    pub mean_var_adjusted: f64,
    pub estimate_samples: Vec<f64>,
    pub mean_fit_seconds: f64,
    pub sd_fit_seconds: f64,
    /// Content hash of the dataset each replicate fitted.
    pub dataset_hashes: Vec<String>,
    pub separated_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model: GeneratingModel,
    pub n: usize,
    pub runs: usize,
    pub alpha: f64,
    pub seed: u64,
    pub true_beta: f64,
    pub term: String,
    pub cells: Vec<CellReport>,
}

impl SimulationReport {
    /// `(cell label, metric, value)` rows for long-format output.
    pub fn long_rows(&self) -> Vec<(String, &'static str, f64)> {
        let mut rows = Vec::new();
        for c in &self.cells {
            let mut push = |metric, value| rows.push((c.label.clone(), metric, value));
            push("mse", c.mse);
            push("bias", c.bias);
            push("variance", c.variance);
            push("ec_scaled", c.ec_scaled);
            push("ec_adjusted", c.ec_adjusted);
            push("mean_var_scaled", c.mean_var_scaled);
            push("mean_var_adjusted", c.mean_var_adjusted);
            push("mean_fit_seconds", c.mean_fit_seconds);
            push("sd_fit_seconds", c.sd_fit_seconds);
            push("separated_runs", c.separated_runs as f64);
        }
        rows
    }

    pub fn cell(&self, method: &Method) -> Option<&CellReport> {
        self.cells.iter().find(|c| &c.method == method)
    }
}

struct RunRecord {
    estimate: f64,
    var_scaled: f64,
    var_adjusted: f64,
    covered_scaled: bool,
    covered_adjusted: bool,
    seconds: f64,
    separated: bool,
}

fn run_method(
    grid: &McGridSpec,
    spec: &DesignSpec,
    data: &crate::data::Dataset,
    method: &Method,
    seed: u64,
) -> Result<AggregatedFit> {
    match *method {
        Method::Partition { partitions } => {
            let plan = PartitionPlan::new(data.n(), partitions, seed)?;
            partition_fit(data, spec, &plan, grid.alpha, &grid.solver)
        }
        Method::Subsample { k, b } => {
            let plan = SubsamplePlan::new(k, b, seed)?;
            subsample_fit(data, spec, &plan, grid.alpha, &grid.solver)
        }
    }
}

fn replicate(grid: &McGridSpec, spec: &DesignSpec, truth: f64, r: usize) -> Result<(String, Vec<RunRecord>)> {
    let data = generate(&grid.model, grid.n, derive_seed(grid.seed, &[r as u64]))?;
    let hash = data.content_hash();
    let mut records = Vec::with_capacity(grid.methods.len());
    for (m, method) in grid.methods.iter().enumerate() {
        let seed = derive_seed(grid.seed, &[r as u64, m as u64 + 1]);
        let start = Instant::now();
        let fit = run_method(grid, spec, &data, method, seed).map_err(|e| PimError::Replicate {
            replicate: r,
            cell: method.to_string(),
            source: Box::new(e),
        })?;
        let seconds = start.elapsed().as_secs_f64();
        records.push(RunRecord {
            estimate: fit.beta_pooled[0],
            var_scaled: fit.var_scaled[0],
            var_adjusted: fit.var_adjusted[0],
            covered_scaled: fit.ci_scaled[0].contains(truth),
            covered_adjusted: fit.ci_adjusted[0].contains(truth),
            seconds,
            separated: fit.any_separated(),
        });
    }
    Ok((hash, records))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and population variance, two-pass.
fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64)
}

/// Runs every method on every replicate. Replicates run in parallel; the
/// methods of one replicate share its dataset and run in grid order.
pub fn run_mc_study(grid: &McGridSpec) -> Result<SimulationReport> {
    grid.validate()?;
    let spec = grid.resolved_design();
    spec.validate(&generate(&grid.model, spec.p() + 2, 0)?)?;
    let truth = true_beta(&grid.model).value;

    let results: Vec<Result<(String, Vec<RunRecord>)>> = (0..grid.runs)
        .into_par_iter()
        .map(|r| replicate(grid, &spec, truth, r))
        .collect();
    let mut hashes = Vec::with_capacity(grid.runs);
    let mut per_run = Vec::with_capacity(grid.runs);
    for res in results {
        let (h, recs) = res?;
        hashes.push(h);
        per_run.push(recs);
    }

    let runs = grid.runs as f64;
    let cells = grid
        .methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let recs: Vec<&RunRecord> = per_run.iter().map(|v| &v[m]).collect();
            let estimates: Vec<f64> = recs.iter().map(|r| r.estimate).collect();
            let (est_mean, variance) = mean_var(&estimates);
            let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / runs;
            let covered_scaled = recs.iter().filter(|r| r.covered_scaled).count();
            let covered_adjusted = recs.iter().filter(|r| r.covered_adjusted).count();
            let seconds: Vec<f64> = recs.iter().map(|r| r.seconds).collect();
            let (mean_fit_seconds, var_seconds) = mean_var(&seconds);
            let sd_fit_seconds = if grid.runs > 1 {
                (var_seconds * runs / (runs - 1.0)).sqrt()
            } else {
                0.0
            };
            CellReport {
                method: *method,
                label: method.to_string(),
                mse,
                bias: est_mean - truth,
                variance,
                covered_scaled,
                covered_adjusted,
                ec_scaled: covered_scaled as f64 / runs,
                ec_adjusted: covered_adjusted as f64 / runs,
                mean_var_scaled: mean(&recs.iter().map(|r| r.var_scaled).collect::<Vec<_>>()),
                mean_var_adjusted: mean(&recs.iter().map(|r| r.var_adjusted).collect::<Vec<_>>()),
                estimate_samples: estimates,
                mean_fit_seconds,
                sd_fit_seconds,
                dataset_hashes: hashes.clone(),
                separated_runs: recs.iter().filter(|r| r.separated).count(),
            }
        })
        .collect();

    Ok(SimulationReport {
        model: grid.model.clone(),
        n: grid.n,
        runs: grid.runs,
        alpha: grid.alpha,
        seed: grid.seed,
        true_beta: truth,
        term: spec.term_names()[0].clone(),
        cells,
    })
}

/// Standardized order statistics against N(0, 1) quantiles at plotting
/// positions `(k − 0.5)/m`, as `(theoretical, sample)` pairs.
pub fn qq_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = samples.len();
    if m < 3 {
        return Err(PimError::Config(format!("need at least 3 samples, got {m}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(PimError::Data("non-finite sample".into()));
    }
    let (mu, var) = mean_var(samples);
    let sd = (var * m as f64 / (m as f64 - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(PimError::Numerical("samples have zero variance".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let q = normal::quantile((k as f64 + 0.5) / m as f64);
            (q, (v - mu) / sd)
        })
        .collect())
}
