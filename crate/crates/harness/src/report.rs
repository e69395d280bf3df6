//! Report rendering: JSON, CSV and markdown tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::eval::{EvalReport, TagRow, ALL_STAR, FALSE_BELIEF, OVERALL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            "markdown" | "md" => Some(Self::Markdown),
            _ => None,
        }
    }
}

pub const CSV_HEADER: &str = "tag,n,accuracy,all,all_star,weighted_f1";

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn dash(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

fn csv_line(row: &TagRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        row.tag,
        row.n,
        cell(row.accuracy),
        cell(row.all),
        cell(row.all_star),
        cell(row.weighted_f1)
    )
}

pub fn to_csv(report: &EvalReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&csv_line(row));
        out.push('\n');
    }
    out
}

pub fn to_json(report: &EvalReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
}

/// A summary line per method in the story-benchmark layout, a second one in
/// the dialogue layout when the report has set scores, then every row.
pub fn to_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let acc = |tag: &str| dash(report.accuracy(tag));
    let summary = if report.records == 0 {
        vec![]
    } else {
        vec![vec![report.method.clone(), acc(OVERALL), acc(FALSE_BELIEF), acc("first"), acc("second")]]
    };
    table(&mut out, &["Method", "Overall", "False-Belief", "First-Order", "Second-Order"], &summary);
    if report.records == 0 {
        return out;
    }

    if report.row(ALL_STAR).is_some() {
        out.push('\n');
        let f1 = |tag: &str| dash(report.row(tag).and_then(|r| r.weighted_f1));
        let row = vec![
            report.method.clone(),
            dash(report.all_star()),
            dash(report.all_answerability()),
            acc("answerability_list"),
            f1("answerability_binary"),
            dash(report.all_infoaccess()),
            acc("infoaccess_list"),
            f1("infoaccess_binary"),
            acc("first"),
            acc("third-acyc"),
            acc("third-cyc"),
        ];
        table(
            &mut out,
            &[
                "Method",
                "All*",
                "All (Answerability)",
                "Answerability List",
                "Answerability Binary F1",
                "All (Info Access)",
                "Info Access List",
                "Info Access Binary F1",
                "First-Order Belief",
                "Third-Order Acyclic",
                "Third-Order Cyclic",
            ],
            &[row],
        );
    }

    out.push('\n');
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![r.tag.clone(), r.n.to_string(), dash(r.accuracy), dash(r.all), dash(r.all_star), dash(r.weighted_f1)]
        })
        .collect();
    table(&mut out, &["Tag", "n", "Accuracy", "All", "All*", "Weighted F1"], &rows);
    let _ = writeln!(out, "\n{} records, {} errors, {} model calls.", report.records, report.errors, report.calls);
    out
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Markdown => to_markdown(report),
    }
}

pub fn write_report(report: &EvalReport, format: ReportFormat, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, emit_report(report, format))
}
