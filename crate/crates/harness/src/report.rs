//! Run artifacts. Every run writes into a new directory and never touches
//! earlier ones. `report.jsonl` and `summary.csv` are deterministic for a
//! fixed seed; wall-clock timings go to `timings.json` only.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::pipeline::{PipelineConfig, PipelineOutput, RunResult, Summary, TaskFailure};
use crate::HarnessError;

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ReportLine<'a> {
    Config(&'a PipelineConfig),
    Task(&'a RunResult),
    Failure(&'a TaskFailure),
    Summary(&'a Summary),
}

fn io(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

/// Creates `<out_dir>/<prefix>-NNNN` with the first free number.
pub fn fresh_run_dir(out_dir: &Path, prefix: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    for n in 1..100_000 {
        let dir = out_dir.join(format!("{prefix}-{n:04}"));
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io(&dir, e)),
        }
    }
    Err(HarnessError::Runtime(format!(
        "no free run directory under {}",
        out_dir.display()
    )))
}

pub fn report_lines(output: &PipelineOutput) -> Result<String, HarnessError> {
    let mut lines = vec![ReportLine::Config(&output.config)];
    lines.extend(output.results.iter().map(ReportLine::Task));
    lines.extend(output.failures.iter().map(ReportLine::Failure));
    lines.push(ReportLine::Summary(&output.summary));
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(&line).map_err(|e| HarnessError::Runtime(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_rows(summary: &Summary) -> Vec<(String, String)> {
    let mut rows = vec![
        ("tasks".to_string(), summary.tasks.to_string()),
        ("failed_tasks".into(), summary.failed_tasks.to_string()),
        ("samples_per_task".into(), summary.samples_per_task.to_string()),
        ("gate".into(), summary.gate.name().to_string()),
        ("gamma".into(), summary.gamma.to_string()),
        ("delta".into(), summary.delta.to_string()),
    ];
    for p in &summary.pass_at_k {
        rows.push((format!("pass@{}", p.k), p.value.to_string()));
    }
    rows.extend([
        ("auroc".to_string(), opt(summary.auroc)),
        ("wm_pool".into(), summary.wm_pool.to_string()),
        ("human_pool".into(), summary.human_pool.to_string()),
        ("wm_excluded".into(), summary.wm_excluded.to_string()),
        ("human_excluded".into(), summary.human_excluded.to_string()),
        ("mean_wm_z".into(), opt(summary.mean_wm_z)),
        ("ppl_watermarked".into(), opt(summary.ppl_watermarked)),
        ("ppl_plain".into(), opt(summary.ppl_plain)),
        ("imperceptibility".into(), opt(summary.imperceptibility)),
        ("detection_provider_calls".into(), summary.detection_provider_calls.to_string()),
    ]);
    for s in &summary.stem {
        rows.push((format!("stem{}", s.weights.label()), s.composite.to_string()));
    }
    rows
}

pub fn write_summary_csv(path: &Path, summary: &Summary) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(["metric", "value"]).map_err(|e| io(path, e))?;
    for (k, v) in summary_rows(summary) {
        w.write_record([k, v]).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = std::fs::File::create_new(path).map_err(|e| io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io(path, e))
}

/// Writes `report.jsonl`, `summary.csv` and `timings.json` into a fresh
/// run directory and returns it.
pub fn write_run(out_dir: &Path, output: &PipelineOutput) -> Result<PathBuf, HarnessError> {
    let dir = fresh_run_dir(out_dir, "run")?;
    write_text(&dir.join("report.jsonl"), &report_lines(output)?)?;
    write_summary_csv(&dir.join("summary.csv"), &output.summary)?;
    let timings = serde_json::to_string_pretty(&output.timings)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    write_text(&dir.join("timings.json"), &timings)?;
    Ok(dir)
}
