use serde::{Deserialize, Serialize};
use std::io::Write;

use pimfit::{LinkFunction, SimulationReport, StoredFit};

use crate::config::FitConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceKind {
    /// Sandwich covariance of a single full-data fit.
    Sandwich,
    /// Spread of piece estimates, scaled by `1/S` or `K/n`.
    Scaled,
    /// `(1/S²) Σ` of the piece sandwich variances.
    Adjusted,
}

impl VarianceKind {
    pub fn name(self) -> &'static str {
        match self {
            VarianceKind::Sandwich => "sandwich",
            VarianceKind::Scaled => "scaled",
            VarianceKind::Adjusted => "adjusted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub variance: VarianceKind,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub inference: Vec<Inference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub name: String,
    pub z: Vec<f64>,
    pub pi: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub count: usize,
    pub size: usize,
    pub last_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceRow {
    pub index: usize,
    pub n_obs: usize,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piece_mean_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piece_sd_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub config: FitConfig,
    pub n_obs: usize,
    pub rows_dropped: usize,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<PartitionSummary>,
    pub link: LinkFunction,
    pub design_fingerprint: String,
    pub coefficients: Vec<CoefficientRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictions: Vec<PredictionRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub separated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceRow>>,
    pub timing: Timing,
}

impl FitReport {
    pub fn stored_fit(&self) -> StoredFit {
        StoredFit {
            beta: self.coefficients.iter().map(|c| c.estimate).collect(),
            design_fingerprint: self.design_fingerprint.clone(),
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let report: FitReport =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid fit report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "fit report has schema version {}, expected {SCHEMA_VERSION}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// `cell,metric,value` rows: one cell per term, per prediction, and a
    /// `fit` cell for sizes and timing.
    pub fn long_rows(&self) -> Vec<(String, String, f64)> {
        let mut rows = vec![
            ("fit".to_string(), "n_obs".to_string(), self.n_obs as f64),
            ("fit".to_string(), "rows_dropped".to_string(), self.rows_dropped as f64),
            (
                "fit".to_string(),
                "total_seconds".to_string(),
                self.timing.total_seconds,
            ),
        ];
        for c in &self.coefficients {
            rows.push((c.term.clone(), "estimate".into(), c.estimate));
            for inf in &c.inference {
                let kind = inf.variance.name();
                for (metric, v) in [
                    ("se", inf.std_error),
                    ("z", inf.z),
                    ("p", inf.p_value),
                    ("ci_lower", inf.ci_lower),
                    ("ci_upper", inf.ci_upper),
                ] {
                    rows.push((c.term.clone(), format!("{metric}_{kind}"), v));
                }
            }
        }
        for p in &self.predictions {
            let cell = format!("pi:{}", p.name);
            rows.push((cell.clone(), "pi".into(), p.pi));
            rows.push((cell.clone(), "ci_lower".into(), p.ci_lower));
            rows.push((cell, "ci_upper".into(), p.ci_upper));
        }
        rows
    }
}

/// Ten significant digits; plain notation for moderate magnitudes.
pub fn format_sig10(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    let a = rounded.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

pub fn write_long_csv<W: Write, C: AsRef<str>, M: AsRef<str>>(out: W, rows: &[(C, M, f64)]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    w.write_record(["cell", "metric", "value"]).map_err(err)?;
    for (c, m, v) in rows {
        w.write_record([c.as_ref(), m.as_ref(), &format_sig10(*v)])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io("cannot write CSV", e))
}

pub fn simulation_json(report: &SimulationReport) -> CliResult<String> {
    serde_json::to_string_pretty(report).map_err(|e| CliError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_digit_formatting() {
        assert_eq!(format_sig10(3.5355339059327378), "3.535533906");
        assert_eq!(format_sig10(0.0), "0");
        assert_eq!(format_sig10(2.0), "2");
        assert_eq!(format_sig10(-1.234567890123e-7), "-1.23456789e-7");
        assert_eq!(format_sig10(0.95), "0.95");
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_long_csv(&mut buf, &[("a", "mse", 1.0 / 3.0), ("a,b", "ec", 0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "cell,metric,value\na,mse,0.3333333333\n\"a,b\",ec,0.5\n");
    }
}
