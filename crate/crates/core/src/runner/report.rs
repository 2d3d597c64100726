//! Aggregation of per-item results into report rows and deterministic
//! rendering as CSV or Markdown.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{RunResult, RunnerError};

/// One aggregate row: mean scores for a (model, technique) group.
/// The four headline columns come first; the CodeBLEU submetrics
/// (n-gram, weighted n-gram, syntax, dataflow) follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub technique: String,
    pub items: usize,
    pub codebleu: f64,
    pub codebert: f64,
    pub rouge_l: f64,
    pub chrf: f64,
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub syntax: f64,
    pub dataflow: f64,
}

/// Mean of each metric per (model, technique) group, rows ordered by the
/// groups' first appearance in the input (i.e. run-matrix axis order).
pub fn aggregate(results: &[RunResult]) -> Result<Vec<AggregateRow>, RunnerError> {
    if results.is_empty() {
        return Err(RunnerError::EmptyInput("no results to aggregate".into()));
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: std::collections::HashMap<(String, String), Vec<&RunResult>> =
        std::collections::HashMap::new();
    for result in results {
        let key = (result.model.clone(), result.technique.clone());
        groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        groups
            .get_mut(&(result.model.clone(), result.technique.clone()))
            .expect("just inserted")
            .push(result);
    }
    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let members = &groups[&key];
        let n = members.len() as f64;
        let mean = |extract: fn(&RunResult) -> f64| -> f64 {
            members.iter().map(|r| extract(r)).sum::<f64>() / n
        };
        rows.push(AggregateRow {
            model: key.0,
            technique: key.1,
            items: members.len(),
            codebleu: mean(|r| r.report.codebleu.composite),
            codebert: mean(|r| r.report.codebert.f1),
            rouge_l: mean(|r| r.report.rouge_l.f),
            chrf: mean(|r| r.report.chrf.score),
            ngram: mean(|r| r.report.codebleu.ngram),
            weighted_ngram: mean(|r| r.report.codebleu.weighted_ngram),
            syntax: mean(|r| r.report.codebleu.syntax),
            dataflow: mean(|r| r.report.codebleu.dataflow),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown format {other:?} (expected csv or md)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Markdown => "markdown",
        })
    }
}

/// Render aggregate rows. CSV is one flat table (full float precision, so
/// it round-trips); Markdown renders one table per metric group: the
/// headline metrics, then the CodeBLEU submetrics.
pub fn render_report(rows: &[AggregateRow], format: ReportFormat) -> Result<String, RunnerError> {
    match format {
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Markdown => Ok(render_markdown(rows)),
    }
}

fn render_csv(rows: &[AggregateRow]) -> Result<String, RunnerError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| RunnerError::Render(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| RunnerError::Render(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RunnerError::Render(e.to_string()))
}

fn render_markdown(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str("## Metric Evaluation\n\n");
    out.push_str("| Model | Technique | Items | CodeBLEU | CodeBERTScore | ROUGE-L | ChrF |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- | --- |\n");
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |",
            row.model, row.technique, row.items, row.codebleu, row.codebert, row.rouge_l, row.chrf,
        );
    }
    out.push_str("\n## Syntax and Dataflow\n\n");
    out.push_str(
        "| Model | Technique | Items | N-gram | Weighted n-gram | Syntax match | Dataflow match |\n",
    );
    out.push_str("| --- | --- | --- | --- | --- | --- | --- |\n");
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |",
            row.model,
            row.technique,
            row.items,
            row.ngram,
            row.weighted_ngram,
            row.syntax,
            row.dataflow,
        );
    }
    out
}
