//! Evaluation reports and loss streams as CSV or JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::train::EpochLoss;

pub const REPORT_HEADER: &str = "variant,metric,N,value";
pub const LOSS_HEADER: &str = "stage,epoch,loss,wall_secs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricsFormat {
    Json,
    Csv,
}

impl FromStr for MetricsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown metrics format `{other}` (json or csv)"))),
        }
    }
}

/// Formats `x` with six significant digits, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let scale = 10f64.powi(magnitude - 5);
    let rounded = if magnitude >= 5 { (x / scale).round() * scale } else { x };
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_owned();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn round6(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(x)
}

impl EvalReport {
    /// The report with every metric rounded to six significant digits.
    pub fn rounded(&self) -> Self {
        let r = |m: &std::collections::BTreeMap<usize, f64>| m.iter().map(|(&n, &v)| (n, round6(v))).collect();
        Self {
            variant: self.variant.clone(),
            instances: self.instances,
            hr: r(&self.hr),
            ndcg: r(&self.ndcg),
        }
    }
}

pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        for (metric, values) in [("HR", &r.hr), ("NDCG", &r.ndcg)] {
            for (n, v) in values {
                let _ = writeln!(out, "{},{metric},{n},{}", r.variant, sig6(*v));
            }
        }
    }
    out
}

/// JSON array of reports, metrics rounded to six significant digits.
pub fn reports_json(reports: &[EvalReport]) -> Result<String> {
    let rounded: Vec<EvalReport> = reports.iter().map(EvalReport::rounded).collect();
    Ok(serde_json::to_string_pretty(&rounded)? + "\n")
}

pub fn parse_reports_json(text: &str) -> Result<Vec<EvalReport>> {
    Ok(serde_json::from_str(text)?)
}

/// Loss stream; `wall_secs` may be shorter than `history` (missing entries
/// are written as 0).
pub fn loss_csv(history: &[EpochLoss], wall_secs: &[f64]) -> String {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for (k, e) in history.iter().enumerate() {
        let w = wall_secs.get(k).copied().unwrap_or(0.0);
        let _ = writeln!(out, "{},{},{},{}", e.stage, e.epoch, sig6(e.loss), sig6(w));
    }
    out
}

#[derive(Serialize)]
struct LossRow {
    stage: u8,
    epoch: usize,
    loss: f64,
    wall_secs: f64,
}

pub fn loss_json(history: &[EpochLoss], wall_secs: &[f64]) -> Result<String> {
    let rows: Vec<LossRow> = history
        .iter()
        .enumerate()
        .map(|(k, e)| LossRow {
            stage: e.stage,
            epoch: e.epoch,
            loss: round6(e.loss),
            wall_secs: round6(wall_secs.get(k).copied().unwrap_or(0.0)),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&rows)? + "\n")
}

pub fn write_reports(path: &Path, reports: &[EvalReport], format: MetricsFormat) -> Result<()> {
    let text = match format {
        MetricsFormat::Csv => reports_csv(reports),
        MetricsFormat::Json => reports_json(reports)?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn write_loss(path: &Path, history: &[EpochLoss], wall_secs: &[f64], format: MetricsFormat) -> Result<()> {
    let text = match format {
        MetricsFormat::Csv => loss_csv(history, wall_secs),
        MetricsFormat::Json => loss_json(history, wall_secs)?,
    };
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(123.4564), "123.456");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(-0.000012345678), "-0.0000123457");
        assert_eq!(sig6(0.0), "0");
    }
}
