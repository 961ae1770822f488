use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use crate::commands::{
    run_diagnose, run_fit, run_simulate, write_diagnostics, write_fit_report, write_simulation, DiagnoseOptions,
};
use crate::config::{FitConfig, FitOverrides, SimulateConfig};
use crate::error::CliResult;
use crate::report::FitReport;

#[derive(Debug, Parser)]
#[command(name = "pimfit", version, about = "Fit probabilistic index models on large data")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a PIM on a CSV file, in full or by partitioning/subsampling.
    Fit(FitArgs),
    /// Run a Monte Carlo study from a grid file.
    Simulate(SimulateArgs),
    /// Pseudo-observation residuals of a fit on a random row subset.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct FitArgs {
    /// TOML config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// Design term: linear:COL, quad:COL or factor:COL@BASELINE (repeatable).
    #[arg(long = "term")]
    pub terms: Vec<String>,
    #[arg(long, value_parser = ["logit", "probit"])]
    pub link: Option<String>,
    #[arg(long, value_parser = ["full", "partition", "subsample"])]
    pub method: Option<String>,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long)]
    pub partition_size: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "csv"])]
    pub format: Option<String>,
    /// Largest n accepted by the full method.
    #[arg(long)]
    pub full_fit_cap: Option<usize>,
    /// Allow the full method above the cap.
    #[arg(long)]
    pub allow_large_full: bool,
    /// Include per-piece estimates in the report.
    #[arg(long)]
    pub per_piece: bool,
}

impl FitArgs {
    pub fn overrides(&self) -> FitOverrides {
        FitOverrides {
            input: self.input.clone(),
            response: self.response.clone(),
            terms: self.terms.clone(),
            link: self.link.clone(),
            method: self.method.clone(),
            partitions: self.partitions,
            partition_size: self.partition_size,
            k: self.k,
            b: self.b,
            alpha: self.alpha,
            seed: self.seed,
            workers: self.workers,
            output: self.out.clone(),
            format: self.format.clone(),
            full_fit_cap: self.full_fit_cap,
            allow_large_full: self.allow_large_full,
            per_piece: self.per_piece,
        }
    }

    pub fn load(&self) -> CliResult<FitConfig> {
        FitConfig::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML grid file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// Stored fit report; its config locates the data unless overridden.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Rows drawn for the residual subset.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Seed of the subset draw.
    #[arg(long, default_value_t = 0)]
    pub subset_seed: u64,
    #[arg(long, default_value_t = pimfit::diagnostics::DEFAULT_SPAN)]
    pub span: f64,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(args) => {
            let cfg = args.load()?;
            let report = run_fit(&cfg)?;
            write_fit_report(&report, cfg.output.as_deref(), cfg.format)
        }
        Command::Simulate(args) => {
            let mut cfg = SimulateConfig::load(&args.config)?;
            if args.workers.is_some() {
                cfg.workers = args.workers;
            }
            if args.out.is_some() {
                cfg.output = args.out.clone();
            }
            let report = run_simulate(&cfg)?;
            for path in write_simulation(&report, cfg.output.as_deref())? {
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Diagnose(args) => {
            let (cfg, stored) = match &args.report {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| crate::error::CliError::io(format!("cannot read {}", path.display()), e))?;
                    let report = FitReport::from_json(&text)?;
                    let mut cfg = report.config.clone();
                    if let Some(input) = &args.fit.input {
                        cfg.input = input.clone();
                    }
                    (cfg, Some(report.stored_fit()))
                }
                None => (args.fit.load()?, None),
            };
            let opts = DiagnoseOptions {
                m: args.m,
                seed: args.subset_seed,
                span: args.span,
                output: args.fit.out.clone(),
            };
            let rows = run_diagnose(&cfg, stored, &opts)?;
            write_diagnostics(&rows, opts.output.as_deref())
        }
    }
}
