use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Suite, Verdict};
use crate::attacks::AttackKind;
use crate::frameworks::{CheckId, FrameworkId};
use crate::model::UserAgent;

pub const REPORT_SCHEMA: &str = "conformance-report v1";
pub const MATRIX_SCHEMA: &str = "conformance-matrix v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub check: CheckId,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    pub framework: FrameworkId,
    pub manager: Option<String>,
}

impl Subject {
    pub fn label(&self) -> String {
        match &self.manager {
            Some(m) => format!("{} / {m}", self.framework),
            None => self.framework.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackRecord {
    pub attack: AttackKind,
    pub user: UserAgent,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformanceReport {
    pub suite: Suite,
    pub subject: Subject,
    /// One cell per suite column, in column order.
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_outcomes: Option<Vec<AttackRecord>>,
}

impl ConformanceReport {
    pub fn verdict(&self, check: CheckId) -> Option<Verdict> {
        self.cells
            .iter()
            .find(|c| c.check == check)
            .map(|c| c.verdict)
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.cells.iter().map(|c| c.verdict).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameworkAttacks {
    pub framework: FrameworkId,
    pub outcomes: Vec<AttackRecord>,
}

/// Every suite against every framework, plus attack outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub reports: Vec<ConformanceReport>,
    pub attacks: Vec<FrameworkAttacks>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoldenParseError {
    #[error("cannot read {0}")]
    Unreadable(PathBuf),
    #[error("malformed report: {0}")]
    Json(String),
    #[error("unexpected schema {0:?}")]
    Schema(String),
    #[error("cells do not follow the {suite} column order: expected {expected}, found {found}")]
    CellOrder {
        suite: Suite,
        expected: String,
        found: String,
    },
    #[error("golden is for the {golden} suite, report for {report}")]
    SuiteMismatch { golden: Suite, report: Suite },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope<T> {
    schema: String,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellDiff {
    pub check: CheckId,
    pub expected: Verdict,
    pub actual: Verdict,
}

/// Cells where a report disagrees with its golden.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Diff {
    pub cells: Vec<CellDiff>,
}

impl Diff {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

fn check_order(report: &ConformanceReport) -> Result<(), GoldenParseError> {
    let found: Vec<CheckId> = report.cells.iter().map(|c| c.check).collect();
    if found != report.suite.columns() {
        let ids = |cs: &[CheckId]| cs.iter().map(|c| c.id()).collect::<Vec<_>>().join(",");
        return Err(GoldenParseError::CellOrder {
            suite: report.suite,
            expected: ids(report.suite.columns()),
            found: ids(&found),
        });
    }
    Ok(())
}

pub fn parse_report(text: &str) -> Result<ConformanceReport, GoldenParseError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GoldenParseError::Json(e.to_string()))?;
    let schema = value
        .get("schema")
        .and_then(|s| s.as_str())
        .unwrap_or_default();
    if schema != REPORT_SCHEMA {
        return Err(GoldenParseError::Schema(schema.to_owned()));
    }
    let env: Envelope<ConformanceReport> =
        serde_json::from_value(value).map_err(|e| GoldenParseError::Json(e.to_string()))?;
    check_order(&env.body)?;
    Ok(env.body)
}

pub fn parse_matrix(text: &str) -> Result<Matrix, GoldenParseError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GoldenParseError::Json(e.to_string()))?;
    let schema = value
        .get("schema")
        .and_then(|s| s.as_str())
        .unwrap_or_default();
    if schema != MATRIX_SCHEMA {
        return Err(GoldenParseError::Schema(schema.to_owned()));
    }
    let env: Envelope<Matrix> =
        serde_json::from_value(value).map_err(|e| GoldenParseError::Json(e.to_string()))?;
    for r in &env.body.reports {
        check_order(r)?;
    }
    Ok(env.body)
}

/// `<dir>/goldens/<suite>-<framework>.json`.
pub fn golden_path(dir: &Path, suite: Suite, framework: FrameworkId) -> PathBuf {
    dir.join("goldens")
        .join(format!("{suite}-{framework}.json"))
}

pub fn compare_golden_str(
    report: &ConformanceReport,
    golden: &str,
) -> Result<Diff, GoldenParseError> {
    let golden = parse_report(golden)?;
    if golden.suite != report.suite {
        return Err(GoldenParseError::SuiteMismatch {
            golden: golden.suite,
            report: report.suite,
        });
    }
    let cells = golden
        .cells
        .iter()
        .filter_map(|g| {
            let actual = report.verdict(g.check).unwrap_or(Verdict::NotApplicable);
            (actual != g.verdict).then_some(CellDiff {
                check: g.check,
                expected: g.verdict,
                actual,
            })
        })
        .collect();
    Ok(Diff { cells })
}

pub fn compare_golden(report: &ConformanceReport, golden: &Path) -> Result<Diff, GoldenParseError> {
    let text = std::fs::read_to_string(golden)
        .map_err(|_| GoldenParseError::Unreadable(golden.to_owned()))?;
    compare_golden_str(report, &text)
}

fn to_json<T: Serialize>(schema: &str, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema: schema.to_owned(),
        body,
    })
    .expect("reports serialize");
    s.push('\n');
    s
}

const LEGEND: &str = "Legend: ● secure, ◐ partial, ○ insecure, ✎ delegated, – not applicable\n";

fn table_header(out: &mut String, first: &str, columns: &[&str]) {
    let _ = writeln!(out, "| {first} | {} |", columns.join(" | "));
    let _ = writeln!(out, "|---|{}", ":-:|".repeat(columns.len()));
}

fn glyph_row(out: &mut String, label: &str, cells: &[Cell]) {
    let glyphs: Vec<&str> = cells.iter().map(|c| c.verdict.glyph()).collect();
    let _ = writeln!(out, "| {label} | {} |", glyphs.join(" | "));
}

fn user_id(user: UserAgent) -> &'static str {
    match user {
        UserAgent::AlwaysApprove => "approve",
        UserAgent::AlwaysDeny => "deny",
    }
}

fn attack_table(out: &mut String, outcomes: &[AttackRecord]) {
    let _ = writeln!(out, "| attack | user | outcome |");
    let _ = writeln!(out, "|---|---|---|");
    for r in outcomes {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            r.attack,
            user_id(r.user),
            r.outcome
        );
    }
}

pub fn render_report(report: &ConformanceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(REPORT_SCHEMA, report),
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "## {} suite: {}\n",
                report.suite,
                report.subject.label()
            );
            let columns: Vec<&str> = report.cells.iter().map(|c| c.check.id()).collect();
            table_header(&mut out, "subject", &columns);
            glyph_row(&mut out, &report.subject.label(), &report.cells);
            out.push('\n');
            out.push_str(LEGEND);
            if let Some(outcomes) = &report.attack_outcomes {
                out.push_str("\n### Attack outcomes\n\n");
                attack_table(&mut out, outcomes);
            }
            out
        }
    }
}

pub fn render_matrix(matrix: &Matrix, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(MATRIX_SCHEMA, matrix),
        ReportFormat::Markdown => {
            let mut out = String::from("# Autofill conformance matrix\n");
            for suite in Suite::ALL {
                let rows: Vec<&ConformanceReport> =
                    matrix.reports.iter().filter(|r| r.suite == suite).collect();
                if rows.is_empty() {
                    continue;
                }
                let _ = writeln!(out, "\n## {suite} suite\n");
                let columns: Vec<&str> = suite.columns().iter().map(|c| c.id()).collect();
                table_header(&mut out, "framework", &columns);
                for r in rows {
                    glyph_row(&mut out, &r.subject.label(), &r.cells);
                }
            }
            if !matrix.attacks.is_empty() {
                out.push_str("\n## Attack outcomes (user approves)\n\n");
                let columns: Vec<&str> = matrix.attacks.iter().map(|a| a.framework.id()).collect();
                let _ = writeln!(out, "| attack | {} |", columns.join(" | "));
                let _ = writeln!(out, "|---|{}", "---|".repeat(columns.len()));
                for kind in AttackKind::ALL {
                    let outcomes: Vec<&str> = matrix
                        .attacks
                        .iter()
                        .map(|a| {
                            a.outcomes
                                .iter()
                                .find(|r| r.attack == kind)
                                .map_or("–", |r| r.outcome.as_str())
                        })
                        .collect();
                    let _ = writeln!(out, "| {kind} | {} |", outcomes.join(" | "));
                }
            }
            out.push('\n');
            out.push_str(LEGEND);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pa_browser() -> ConformanceReport {
        let mut verdicts = vec![Verdict::Secure, Verdict::Secure];
        verdicts.extend([Verdict::Insecure; 7]);
        ConformanceReport {
            suite: Suite::Browser,
            subject: Subject {
                framework: FrameworkId::IosPasswordAutofill,
                manager: None,
            },
            cells: Suite::Browser
                .columns()
                .iter()
                .zip(verdicts)
                .map(|(c, v)| Cell {
                    check: *c,
                    verdict: v,
                })
                .collect(),
            attack_outcomes: None,
        }
    }

    #[test]
    fn json_round_trips() {
        let r = pa_browser();
        let text = render_report(&r, ReportFormat::Json);
        assert_eq!(parse_report(&text).unwrap(), r);
        assert!(compare_golden_str(&r, &text).unwrap().is_empty());
    }

    #[test]
    fn one_flipped_cell_is_one_diff() {
        let r = pa_browser();
        let golden = render_report(&r, ReportFormat::Json);
        let mut flipped = r.clone();
        flipped.cells[4].verdict = Verdict::Secure;
        let diff = compare_golden_str(&flipped, &golden).unwrap();
        assert_eq!(diff.len(), 1);
        assert_eq!(diff.cells[0].check, CheckId::FillOnTransmission);
        assert_eq!(diff.cells[0].expected, Verdict::Insecure);
    }

    #[test]
    fn bad_goldens_are_rejected() {
        let text = render_report(&pa_browser(), ReportFormat::Json);
        let unknown = text.replace("\"method-get\"", "\"method-put\"");
        assert!(matches!(
            parse_report(&unknown),
            Err(GoldenParseError::Json(_))
        ));
        let reordered = text
            .replace("\"method-get\"", "\"tmp\"")
            .replace("\"action-dynamic\"", "\"method-get\"")
            .replace("\"tmp\"", "\"action-dynamic\"");
        assert!(matches!(
            parse_report(&reordered),
            Err(GoldenParseError::CellOrder { .. })
        ));
        assert!(matches!(
            parse_report(&text.replace("report v1", "report v2")),
            Err(GoldenParseError::Schema(_))
        ));
    }

    #[test]
    fn markdown_row_uses_glyphs_in_column_order() {
        let md = render_report(&pa_browser(), ReportFormat::Markdown);
        let row = md
            .lines()
            .find(|l| l.starts_with("| ios-password-autofill"))
            .unwrap();
        assert_eq!(
            row,
            "| ios-password-autofill | ● | ● | ○ | ○ | ○ | ○ | ○ | ○ | ○ |"
        );
    }
}
