use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pimfit::inference::predict_pi_from;
use pimfit::parallel::Executor;
use pimfit::{
    fit_pim, loess_smooth, partition_fit, pim_residuals, predict_pi, run_mc_study, subsample_fit, wald_test,
    AggregatedFit, Dataset, DesignSpec, FittedPim, PartitionPlan, SimulationReport, StoredFit, SubsamplePlan,
    WaldResult,
};

use crate::config::{resolve_design, FitConfig, MethodConfig, OutputFormat, SimulateConfig};
use crate::error::{CliError, CliResult};
use crate::input::load_csv;
use crate::report::{
    format_sig10, simulation_json, write_long_csv, CoefficientRow, FitReport, Inference, PartitionSummary, PieceRow,
    PredictionRow, Timing, VarianceKind, SCHEMA_VERSION,
};

fn inference(kind: VarianceKind, w: &WaldResult) -> Inference {
    Inference {
        variance: kind,
        std_error: w.std_error,
        z: w.z_statistic,
        p_value: w.p_value,
        ci_lower: w.ci_lower,
        ci_upper: w.ci_upper,
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    (m, if v.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 })
}

/// Loads the data and expands the design of `cfg`.
pub fn prepare(cfg: &FitConfig) -> CliResult<(Dataset, usize, DesignSpec)> {
    let loaded = load_csv(&cfg.input, &cfg.response, &cfg.columns()?)?;
    if loaded.dropped > 0 {
        log::info!(
            "dropped {} of {} rows with missing values",
            loaded.dropped,
            loaded.rows_read
        );
    }
    let spec = resolve_design(&cfg.term_specs()?, cfg.link, &loaded.data)?;
    Ok((loaded.data, loaded.dropped, spec))
}

struct Parts {
    method: String,
    partitions: Option<PartitionSummary>,
    coefficients: Vec<CoefficientRow>,
    predictions: Vec<PredictionRow>,
    iterations: Option<usize>,
    separated: bool,
    warnings: Vec<String>,
    pieces: Option<Vec<PieceRow>>,
    piece_seconds: Vec<f64>,
}

fn full_parts(cfg: &FitConfig, data: &Dataset, spec: &DesignSpec) -> CliResult<Parts> {
    if data.n() > cfg.full_fit_cap && !cfg.allow_large_full {
        return Err(CliError::Config(format!(
            "n = {} exceeds the full-fit cap of {}: the pairwise fit grows quadratically in n. \
             Use --method partition or --method subsample, or pass --allow-large-full",
            data.n(),
            cfg.full_fit_cap
        )));
    }
    let fit = fit_pim(data, spec, &cfg.solver)?;
    let wald = wald_test(&fit, &vec![0.0; fit.p()], cfg.alpha)?;
    let coefficients = fit
        .term_names
        .iter()
        .zip(&wald)
        .map(|(term, w)| CoefficientRow {
            term: term.clone(),
            estimate: w.estimate,
            inference: vec![inference(VarianceKind::Sandwich, w)],
        })
        .collect();
    let predictions = cfg
        .contrasts
        .iter()
        .map(|c| {
            let p = predict_pi(&fit, &c.z, cfg.alpha)?;
            Ok(PredictionRow {
                name: c.name.clone(),
                z: c.z.clone(),
                pi: p.pi_estimate,
                ci_lower: p.ci_lower,
                ci_upper: p.ci_upper,
            })
        })
        .collect::<CliResult<_>>()?;
    let mut warnings = Vec::new();
    if fit.separated {
        warnings.push("the linear predictor hit its clamp (separation)".to_string());
    }
    Ok(Parts {
        method: "full".into(),
        partitions: None,
        coefficients,
        predictions,
        iterations: Some(fit.iterations),
        separated: fit.separated,
        warnings,
        pieces: None,
        piece_seconds: vec![],
    })
}

fn aggregated_parts(cfg: &FitConfig, agg: AggregatedFit, partitions: Option<PartitionSummary>) -> CliResult<Parts> {
    let mut coefficients = Vec::with_capacity(agg.p());
    for (a, term) in agg.term_names.iter().enumerate() {
        let b = agg.beta_pooled[a];
        let scaled = WaldResult::new(b, agg.var_scaled[a].sqrt(), 0.0, cfg.alpha)?;
        let adjusted = WaldResult::new(b, agg.var_adjusted[a].sqrt(), 0.0, cfg.alpha)?;
        coefficients.push(CoefficientRow {
            term: term.clone(),
            estimate: b,
            inference: vec![
                inference(VarianceKind::Scaled, &scaled),
                inference(VarianceKind::Adjusted, &adjusted),
            ],
        });
    }
    let link = cfg.link;
    let predictions = cfg
        .contrasts
        .iter()
        .map(|c| {
            let eta: f64 = c.z.iter().zip(&agg.beta_pooled).map(|(z, b)| z * b).sum();
            let var: f64 = (0..agg.p())
                .flat_map(|a| (0..agg.p()).map(move |b| (a, b)))
                .map(|(a, b)| c.z[a] * agg.pooled_covariance[a][b] * c.z[b])
                .sum();
            let p = predict_pi_from(link, eta, var.max(0.0).sqrt(), cfg.alpha)?;
            Ok(PredictionRow {
                name: c.name.clone(),
                z: c.z.clone(),
                pi: p.pi_estimate,
                ci_lower: p.ci_lower,
                ci_upper: p.ci_upper,
            })
        })
        .collect::<CliResult<_>>()?;
    let pieces = cfg.per_piece.then(|| {
        agg.per_piece
            .iter()
            .enumerate()
            .map(|(index, f)| PieceRow {
                index,
                n_obs: f.n_obs,
                beta: f.beta.clone(),
                std_errors: f.std_errors(),
                iterations: f.iterations,
                separated: f.separated,
            })
            .collect()
    });
    Ok(Parts {
        method: agg.method.to_string(),
        partitions,
        coefficients,
        predictions,
        iterations: None,
        separated: agg.any_separated(),
        warnings: agg.warnings.clone(),
        pieces,
        piece_seconds: agg.piece_seconds.clone(),
    })
}

/// Fits the model described by `cfg` and assembles the report.
pub fn run_fit(cfg: &FitConfig) -> CliResult<FitReport> {
    let start = Instant::now();
    cfg.validate()?;
    let (data, dropped, spec) = prepare(cfg)?;
    for c in &cfg.contrasts {
        if c.z.len() != spec.p() {
            return Err(CliError::Config(format!(
                "contrast '{}' has {} entries, the design has {} terms ({})",
                c.name,
                c.z.len(),
                spec.p(),
                spec.term_names().join(", ")
            )));
        }
    }
    let exec = Executor::new(cfg.workers)?;
    log::info!("fitting {} rows with {} workers", data.n(), exec.workers());
    let n = data.n();
    let parts = exec.install(|| -> CliResult<Parts> {
        match cfg.method {
            MethodConfig::Full => full_parts(cfg, &data, &spec),
            MethodConfig::Partition {
                partitions,
                partition_size,
            } => {
                let plan = match (partitions, partition_size) {
                    (Some(s), _) => PartitionPlan::new(n, s, cfg.seed)?,
                    (None, Some(size)) => PartitionPlan::with_partition_size(n, size, cfg.seed)?,
                    (None, None) => unreachable!("validated"),
                };
                let sizes = plan.sizes();
                let summary = PartitionSummary {
                    count: plan.partitions,
                    size: plan.partition_size,
                    last_size: sizes[sizes.len() - 1],
                };
                let agg = partition_fit(&data, &spec, &plan, cfg.alpha, &cfg.solver)?;
                aggregated_parts(cfg, agg, Some(summary))
            }
            MethodConfig::Subsample { k, b } => {
                let plan = SubsamplePlan::new(k, b, cfg.seed)?;
                let agg = subsample_fit(&data, &spec, &plan, cfg.alpha, &cfg.solver)?;
                aggregated_parts(cfg, agg, None)
            }
        }
    })?;
    for w in &parts.warnings {
        log::warn!("{w}");
    }
    let (piece_mean_seconds, piece_sd_seconds) = if parts.piece_seconds.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&parts.piece_seconds);
        (Some(m), Some(s))
    };
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        n_obs: n,
        rows_dropped: dropped,
        method: parts.method,
        partitions: parts.partitions,
        link: cfg.link,
        design_fingerprint: spec.fingerprint(),
        coefficients: parts.coefficients,
        predictions: parts.predictions,
        iterations: parts.iterations,
        separated: parts.separated,
        warnings: parts.warnings,
        pieces: parts.pieces,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            piece_mean_seconds,
            piece_sd_seconds,
        },
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io("cannot write to stdout", e)),
    }
}

pub fn write_fit_report(report: &FitReport, path: Option<&Path>, format: OutputFormat) -> CliResult<()> {
    let bytes = match format {
        OutputFormat::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_long_csv(&mut buf, &report.long_rows())?;
            buf
        }
    };
    emit(path, &bytes)
}

pub fn run_simulate(cfg: &SimulateConfig) -> CliResult<SimulationReport> {
    let grid = cfg.grid()?;
    let exec = Executor::new(cfg.workers)?;
    log::info!(
        "{} runs of {} methods at n = {} on {} workers",
        grid.runs,
        grid.methods.len(),
        grid.n,
        exec.workers()
    );
    Ok(exec.install(|| run_mc_study(&grid))?)
}

/// `<prefix>.json` and `<prefix>.csv`; without a prefix the JSON goes to
/// standard output.
pub fn write_simulation(report: &SimulationReport, prefix: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let mut json = simulation_json(report)?;
    json.push('\n');
    let Some(prefix) = prefix else {
        emit(None, json.as_bytes())?;
        return Ok(vec![]);
    };
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let (jp, cp) = (with_ext(".json"), with_ext(".csv"));
    write_file(&jp, json.as_bytes())?;
    let mut buf = Vec::new();
    write_long_csv(&mut buf, &report.long_rows())?;
    write_file(&cp, &buf)?;
    Ok(vec![jp, cp])
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseOptions {
    pub m: usize,
    pub seed: u64,
    pub span: f64,
    pub output: Option<PathBuf>,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            m: 50,
            seed: 0,
            span: pimfit::diagnostics::DEFAULT_SPAN,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub pseudo_index: usize,
    pub i: usize,
    pub j: usize,
    pub residual: f64,
    pub z: Vec<f64>,
    pub loess_index: Option<f64>,
    pub loess_z: Option<f64>,
}

/// Residuals of `fit` on a random subset of `opts.m` rows, with LOESS
/// curves against the pair index and the first regressor.
pub fn run_diagnose(cfg: &FitConfig, fit: Option<StoredFit>, opts: &DiagnoseOptions) -> CliResult<Vec<DiagnosticRow>> {
    let (data, _, spec) = prepare(cfg)?;
    let fit: Box<dyn FittedPim> = match fit {
        Some(f) => Box::new(f),
        None => Box::new(run_fit(cfg)?.stored_fit()),
    };
    let set = pim_residuals(&data, &spec, fit.as_ref(), opts.m, opts.seed)?;
    let smooth = |x: &dyn Fn(&pimfit::Residual) -> f64| -> Option<Vec<f64>> {
        if set.entries.len() < 10 {
            return None;
        }
        let pts: Vec<(f64, f64)> = set.entries.iter().map(|e| (x(e), e.residual)).collect();
        match loess_smooth(&pts, opts.span) {
            Ok(v) => Some(v.into_iter().map(|(_, f)| f).collect()),
            Err(e) => {
                log::warn!("LOESS skipped: {e}");
                None
            }
        }
    };
    let by_index = smooth(&|e| e.pseudo_index as f64);
    let by_z = smooth(&|e| e.z[0]);
    Ok(set
        .entries
        .into_iter()
        .enumerate()
        .map(|(k, e)| DiagnosticRow {
            pseudo_index: e.pseudo_index,
            i: e.i,
            j: e.j,
            residual: e.residual,
            z: e.z,
            loess_index: by_index.as_ref().map(|v| v[k]),
            loess_z: by_z.as_ref().map(|v| v[k]),
        })
        .collect())
}

pub fn write_diagnostics(rows: &[DiagnosticRow], path: Option<&Path>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    let p = rows.first().map_or(0, |r| r.z.len());
    let mut header = vec!["pseudo_index".to_string(), "i".into(), "j".into(), "residual".into()];
    header.extend((1..=p).map(|k| format!("z{k}")));
    header.extend(["loess_index".to_string(), "loess_z".into()]);
    w.write_record(&header).map_err(err)?;
    let opt = |v: Option<f64>| v.map(format_sig10).unwrap_or_default();
    for r in rows {
        let mut rec = vec![
            r.pseudo_index.to_string(),
            r.i.to_string(),
            r.j.to_string(),
            format_sig10(r.residual),
        ];
        rec.extend(r.z.iter().map(|&v| format_sig10(v)));
        rec.push(opt(r.loess_index));
        rec.push(opt(r.loess_z));
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    emit(path, &bytes)
}
