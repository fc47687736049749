use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::dataset::{Action, Tool};
use crate::error::{Error, Result};
use crate::train::RunResult;

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub variant: String,
    pub depth: u32,
    pub head_mode: String,
    pub n_seeds: usize,
    pub mean_acc: f64,
    pub ci_half: Option<f64>,
    pub tool_acc: Option<f64>,
    pub action_acc: Option<f64>,
    pub joint_acc: f64,
}

impl ReportRow {
    pub fn from_result(r: &RunResult) -> ReportRow {
        let m = r.config.model;
        ReportRow {
            task: r.task.map_or_else(|| "-".to_string(), |t| t.name().to_string()),
            variant: m.variant.name().to_string(),
            depth: m.depth.layers(),
            head_mode: m.head.name().to_string(),
            n_seeds: r.n_seeds,
            mean_acc: r.mean,
            ci_half: r.ci_half_width,
            tool_acc: r.mean_of(|e| e.tool_accuracy()),
            action_acc: r.mean_of(|e| e.action_accuracy()),
            joint_acc: r.mean_of(|e| Some(e.joint_accuracy)).unwrap_or(r.mean),
        }
    }

    /// Percentages as `"mean ± half"`, or just the mean without an interval.
    pub fn display_accuracy(&self) -> String {
        match self.ci_half {
            Some(h) => format!("{:.2} ± {:.2}", self.mean_acc * 100.0, h * 100.0),
            None => format!("{:.2}", self.mean_acc * 100.0),
        }
    }

    /// One-line description for terminal output.
    pub fn summary(&self) -> String {
        format!(
            "{} {} r{} seeds {}: {}",
            self.task,
            self.variant,
            self.depth,
            self.n_seeds,
            self.display_accuracy()
        )
    }

    fn stem(&self) -> String {
        format!("{}_{}_r{}", self.task, self.variant, self.depth)
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    row: &'a ReportRow,
    accuracy: String,
}

fn labels<T: std::fmt::Display>(items: &[T]) -> Vec<String> {
    items.iter().map(ToString::to_string).collect()
}

fn joint_labels() -> Vec<String> {
    Tool::ALL
        .iter()
        .flat_map(|t| Action::ALL.iter().map(move |a| format!("{t}/{a}")))
        .collect()
}

fn pooled(r: &RunResult, pick: impl Fn(&super::EvalReport) -> Option<&ConfusionMatrix>) -> Result<Option<ConfusionMatrix>> {
    let mut acc: Option<ConfusionMatrix> = None;
    for rep in &r.reports {
        if let Some(m) = pick(rep) {
            match acc.as_mut() {
                Some(a) => a.merge(m)?,
                None => acc = Some(m.clone()),
            }
        }
    }
    Ok(acc)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `report.csv`, `report.json` and, per result and head, the pooled
/// confusion matrix over all seeds as count CSV, normalised CSV and heatmap.
/// Returns the files written.
pub fn render_report(results: &[RunResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::Eval("no results to report".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows: Vec<ReportRow> = results.iter().map(ReportRow::from_result).collect();
    let mut written = Vec::new();

    let csv_path = out_dir.join("report.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Eval(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
    write(&csv_path, &String::from_utf8(bytes).expect("utf-8"))?;
    written.push(csv_path);

    let json_path = out_dir.join("report.json");
    let json: Vec<JsonRow> = rows
        .iter()
        .map(|row| JsonRow {
            row,
            accuracy: row.display_accuracy(),
        })
        .collect();
    write(&json_path, &(serde_json::to_string_pretty(&json).expect("rows serialize") + "\n"))?;
    written.push(json_path);

    let dir = out_dir.join("confusion");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (r, row) in results.iter().zip(&rows) {
        let heads: [(&str, Option<ConfusionMatrix>, Vec<String>); 3] = [
            ("tool", pooled(r, |e| e.tool.as_ref().map(|h| &h.confusion))?, labels(&Tool::ALL)),
            ("action", pooled(r, |e| e.action.as_ref().map(|h| &h.confusion))?, labels(&Action::ALL)),
            ("joint", pooled(r, |e| e.joint_confusion.as_ref())?, joint_labels()),
        ];
        for (head, matrix, names) in heads {
            let Some(m) = matrix else { continue };
            let stem = format!("{}_{head}", row.stem());
            let counts = dir.join(format!("{stem}_counts.csv"));
            write(&counts, &m.to_csv(&names, false)?)?;
            let norm = dir.join(format!("{stem}_normalized.csv"));
            write(&norm, &m.to_csv(&names, true)?)?;
            let png = dir.join(format!("{stem}.png"));
            m.save_heatmap(&png)?;
            written.extend([counts, norm, png]);
        }
    }
    Ok(written)
}
