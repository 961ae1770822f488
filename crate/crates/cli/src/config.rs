use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pimfit::{DesignSpec, GeneratingModel, LinkFunction, McGridSpec, Method, SolverConfig, Term};

use crate::error::{CliError, CliResult};

pub const DEFAULT_FULL_FIT_CAP: usize = 50_000;

fn default_alpha() -> f64 {
    0.05
}

fn default_link() -> LinkFunction {
    LinkFunction::Probit
}

fn default_cap() -> usize {
    DEFAULT_FULL_FIT_CAP
}

fn is_false(b: &bool) -> bool {
    !b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MethodConfig {
    Full,
    /// Exactly one of `partitions` and `partition_size`.
    Partition {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partitions: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partition_size: Option<usize>,
    },
    Subsample {
        k: usize,
        b: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(CliError::Config(format!("unknown output format '{s}'"))),
        }
    }
}

/// A PI prediction request: the regressor difference `Z* − Z` in term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub name: String,
    pub z: Vec<f64>,
}

/// One entry of the design mini-language: `linear:COL`, `quad:COL` or
/// `factor:COL@BASELINE`.
#[derive(Debug, Clone, PartialEq)]
pub enum TermSpec {
    Linear(String),
    Quad(String),
    Factor { column: String, baseline: f64 },
}

impl TermSpec {
    pub fn column(&self) -> &str {
        match self {
            TermSpec::Linear(c) | TermSpec::Quad(c) => c,
            TermSpec::Factor { column, .. } => column,
        }
    }
}

impl FromStr for TermSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || {
            CliError::Config(format!(
                "cannot parse term '{s}' (expected linear:COL, quad:COL or factor:COL@BASELINE)"
            ))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let rest = rest.trim();
        match kind.trim() {
            "linear" if !rest.is_empty() => Ok(TermSpec::Linear(rest.to_string())),
            "quad" if !rest.is_empty() => Ok(TermSpec::Quad(rest.to_string())),
            "factor" => {
                let (column, baseline) = rest.rsplit_once('@').ok_or_else(bad)?;
                let baseline = baseline.trim().parse::<f64>().map_err(|_| bad())?;
                if column.trim().is_empty() || !baseline.is_finite() {
                    return Err(bad());
                }
                Ok(TermSpec::Factor {
                    column: column.trim().to_string(),
                    baseline,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermSpec::Linear(c) => write!(f, "linear:{c}"),
            TermSpec::Quad(c) => write!(f, "quad:{c}"),
            TermSpec::Factor { column, baseline } => write!(f, "factor:{column}@{baseline}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub input: PathBuf,
    pub response: String,
    pub terms: Vec<String>,
    #[serde(default = "default_link")]
    pub link: LinkFunction,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_cap")]
    pub full_fit_cap: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_large_full: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub per_piece: bool,
    pub method: MethodConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contrasts: Vec<Contrast>,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Command-line values that replace or fill in config-file keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOverrides {
    pub input: Option<PathBuf>,
    pub response: Option<String>,
    pub terms: Vec<String>,
    pub link: Option<String>,
    pub method: Option<String>,
    pub partitions: Option<usize>,
    pub partition_size: Option<usize>,
    pub k: Option<usize>,
    pub b: Option<usize>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub full_fit_cap: Option<usize>,
    pub allow_large_full: bool,
    pub per_piece: bool,
}

fn read_table(path: &Path) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn path_value(p: &Path) -> toml::Value {
    toml::Value::String(p.to_string_lossy().into_owned())
}

fn int_value(v: u64) -> CliResult<toml::Value> {
    i64::try_from(v)
        .map(toml::Value::Integer)
        .map_err(|_| CliError::Config(format!("value {v} is too large")))
}

impl FitConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: FitConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Config file (if any) with `overrides` applied on top. A relative
    /// `input` in a file is resolved against the file's directory.
    pub fn load(path: Option<&Path>, overrides: &FitOverrides) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let mut t = read_table(p)?;
                if let (Some(toml::Value::String(input)), Some(dir)) = (t.get("input"), p.parent()) {
                    let input = Path::new(input);
                    if input.is_relative() {
                        let joined = dir.join(input);
                        t.insert("input".into(), path_value(&joined));
                    }
                }
                t
            }
            None => toml::Table::new(),
        };
        let o = overrides;
        let mut set = |k: &str, v: toml::Value| {
            table.insert(k.to_string(), v);
        };
        if let Some(v) = &o.input {
            set("input", path_value(v));
        }
        if let Some(v) = &o.response {
            set("response", v.clone().into());
        }
        if !o.terms.is_empty() {
            set(
                "terms",
                toml::Value::Array(o.terms.iter().map(|t| t.clone().into()).collect()),
            );
        }
        if let Some(v) = &o.link {
            set("link", v.clone().into());
        }
        if let Some(v) = o.alpha {
            set("alpha", v.into());
        }
        if let Some(v) = o.seed {
            set("seed", int_value(v)?);
        }
        if let Some(v) = o.workers {
            set("workers", int_value(v as u64)?);
        }
        if let Some(v) = &o.output {
            set("output", path_value(v));
        }
        if let Some(v) = &o.format {
            set("format", v.clone().into());
        }
        if let Some(v) = o.full_fit_cap {
            set("full_fit_cap", int_value(v as u64)?);
        }
        if o.allow_large_full {
            set("allow_large_full", true.into());
        }
        if o.per_piece {
            set("per_piece", true.into());
        }

        let mut method = match (&o.method, table.get("method")) {
            (Some(kind), _) => {
                let mut m = toml::Table::new();
                m.insert("kind".into(), kind.clone().into());
                m
            }
            (None, Some(toml::Value::Table(m))) => m.clone(),
            (None, _) => toml::Table::new(),
        };
        if let Some(v) = o.partitions {
            method.insert("partitions".into(), int_value(v as u64)?);
        }
        if let Some(v) = o.partition_size {
            method.insert("partition_size".into(), int_value(v as u64)?);
        }
        if let Some(v) = o.k {
            method.insert("k".into(), int_value(v as u64)?);
        }
        if let Some(v) = o.b {
            method.insert("b".into(), int_value(v as u64)?);
        }
        if !method.is_empty() {
            table.insert("method".into(), toml::Value::Table(method));
        }

        let cfg: FitConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.terms.is_empty() {
            return Err(CliError::Config("at least one design term is required".into()));
        }
        self.term_specs()?;
        match self.method {
            MethodConfig::Full => {}
            MethodConfig::Partition {
                partitions,
                partition_size,
            } => match (partitions, partition_size) {
                (Some(s), None) if s >= 2 => {}
                (None, Some(size)) if size >= 1 => {}
                (Some(s), None) => return Err(CliError::Config(format!("need at least 2 partitions, got {s}"))),
                _ => {
                    return Err(CliError::Config(
                        "partition method needs exactly one of partitions and partition_size".into(),
                    ))
                }
            },
            MethodConfig::Subsample { k, b } => {
                if k < 2 || b < 2 {
                    return Err(CliError::Config(format!(
                        "subsample method needs K ≥ 2 and B ≥ 2, got K = {k}, B = {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn term_specs(&self) -> CliResult<Vec<TermSpec>> {
        self.terms.iter().map(|t| t.parse()).collect()
    }

    /// Distinct data columns the design refers to, in first-use order.
    pub fn columns(&self) -> CliResult<Vec<String>> {
        let mut out: Vec<String> = Vec::new();
        for t in self.term_specs()? {
            if !out.iter().any(|c| c == t.column()) {
                out.push(t.column().to_string());
            }
        }
        Ok(out)
    }
}

/// Expands term specs into a design; factor levels come from `data`.
pub fn resolve_design(terms: &[TermSpec], link: LinkFunction, data: &pimfit::Dataset) -> CliResult<DesignSpec> {
    let mut out = Vec::new();
    for t in terms {
        match t {
            TermSpec::Linear(c) => out.push(Term::linear(c.clone())),
            TermSpec::Quad(c) => out.push(Term::quadratic(c.clone())),
            TermSpec::Factor { column, baseline } => out.extend(DesignSpec::factor_terms(data, column, *baseline)?),
        }
    }
    Ok(DesignSpec::new(out, link)?)
}

/// Generating model given by name (`model1`, `model2`, `model3`) or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Named(String),
    Custom(GeneratingModel),
}

impl ModelChoice {
    pub fn resolve(&self) -> CliResult<GeneratingModel> {
        match self {
            ModelChoice::Named(name) => match name.as_str() {
                "model1" => Ok(GeneratingModel::model1()),
                "model2" => Ok(GeneratingModel::model2()),
                "model3" => Ok(GeneratingModel::model3()),
                _ => Err(CliError::Config(format!("unknown model '{name}'"))),
            },
            ModelChoice::Custom(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub model: ModelChoice,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Output files are `<output>.json` and `<output>.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl SimulateConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: SimulateConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn grid(&self) -> CliResult<McGridSpec> {
        let mut grid = McGridSpec::new(
            self.model.resolve()?,
            self.n,
            self.runs,
            self.methods.clone(),
            self.seed,
        );
        grid.alpha = self.alpha;
        grid.solver = self.solver;
        grid.validate()?;
        Ok(grid)
    }
}
