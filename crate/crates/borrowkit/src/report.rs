//! Output rendering: CSV (machine), Markdown (human), JSON (full trace).

use std::io::Write;

use crate::error::{Error, Result};
use crate::study::{MetricsRow, StudyConfig, StudyResult};

/// Column order of the metrics CSV; kept byte-stable because downstream
/// tooling pins it.
pub const METRICS_CSV_HEADER: [&str; 10] = [
    "strategy", "scenario", "n", "n_e", "bias", "abias", "rmse", "se", "width", "cp",
];

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// `se` is undefined for single-replication cells; CSV spells that "NA".
fn fmt_se(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        fmt_num(v)
    }
}

/// Renders metric rows as CSV with the pinned header. Strategy labels that
/// contain commas (`fixed:0.5,0.5`) are quoted per standard CSV rules.
pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(METRICS_CSV_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.strategy.as_str(),
            r.scenario.as_str(),
            &r.n.to_string(),
            &r.n_e.to_string(),
            &fmt_num(r.bias),
            &fmt_num(r.abias),
            &fmt_num(r.rmse),
            &fmt_se(r.se),
            &fmt_num(r.width),
            &fmt_num(r.cp),
        ])?;
    }
    wtr.flush()?;
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Config(format!("could not finish CSV buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("CSV is not UTF-8: {e}")))
}

/// Renders metric rows as a Markdown table rounded to three decimals, with a
/// footnote when any replications had to be redrawn.
pub fn metrics_md(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str("| Strategy | Scenario | n | n_e | Bias | ABias | RMSE | SE | Width | CP |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let se = if r.se.is_nan() {
            "NA".to_string()
        } else {
            format!("{:.3}", r.se)
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} | {} | {:.3} | {:.3} |\n",
            r.strategy, r.scenario, r.n, r.n_e, r.bias, r.abias, r.rmse, se, r.width, r.cp,
        ));
    }
    let redraws: u64 = rows.iter().map(|r| r.retries).sum();
    if redraws > 0 {
        out.push_str(&format!(
            "\nReplications redrawn across all cells: {redraws}\n"
        ));
    }
    out
}

#[derive(serde::Serialize)]
struct StudyJson<'a> {
    config: &'a StudyConfig,
    rows: &'a [MetricsRow],
    calibrations: &'a [crate::study::CalibrationRecord],
}

/// Full study trace as pretty JSON: configuration echo, metric rows
/// (including redraw counts), and the per-replication calibration records.
pub fn study_json(cfg: &StudyConfig, result: &StudyResult) -> Result<String> {
    let doc = StudyJson {
        config: cfg,
        rows: &result.rows,
        calibrations: &result.calibrations,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Output format selector for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Md,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            "json" => Ok(ReportFormat::Json),
            other => Err(crate::error::invalid_arg(format!(
                "unknown format '{other}' (expected csv, md, or json)"
            ))),
        }
    }
}

/// Renders a study in the requested format and writes it out.
pub fn write_study(
    w: &mut dyn Write,
    cfg: &StudyConfig,
    result: &StudyResult,
    format: ReportFormat,
) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => metrics_csv(&result.rows)?,
        ReportFormat::Md => metrics_md(&result.rows),
        ReportFormat::Json => study_json(cfg, result)?,
    };
    w.write_all(text.as_bytes())?;
    Ok(())
}
