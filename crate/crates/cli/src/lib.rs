//! Library half of the `socproto` command: scenario running, document
//! detection and plain-text rendering.

pub mod detect;
pub mod scenario;

use std::collections::BTreeMap;

use serde::Serialize;
use socproto_core::{Id, SocialProcess, Substitute, TraceEntry, ValidationReport};

pub use scenario::{run_scenario, Expectation, LoadError, Scenario, ScenarioReport, Step, StepReport};

/// Left-aligned columns separated by two spaces.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(headers.to_vec())];
    out.extend(rows.iter().map(|r| line(r.iter().map(String::as_str).collect())));
    out.join("\n") + "\n"
}

fn ids<'a>(set: impl IntoIterator<Item = &'a Id>) -> String {
    let joined: Vec<&str> = set.into_iter().map(Id::as_str).collect();
    if joined.is_empty() {
        "-".into()
    } else {
        joined.join(",")
    }
}

pub fn render_report(report: &ValidationReport) -> String {
    if report.violations.is_empty() {
        return "valid\n".into();
    }
    let rows: Vec<Vec<String>> =
        report.violations.iter().map(|v| vec![v.rule.clone(), v.elements.join(","), v.message.clone()]).collect();
    table(&["RULE", "ELEMENTS", "MESSAGE"], &rows)
}

pub fn render_scenario(report: &ScenarioReport) -> String {
    let rows: Vec<Vec<String>> = report
        .steps
        .iter()
        .map(|s| {
            vec![
                s.index.to_string(),
                s.actor.clone(),
                s.activity.clone(),
                s.expect.to_string(),
                s.outcome.clone(),
                ids(&s.marking),
                if s.passed { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    let mut out = table(&["STEP", "ACTOR", "ACTIVITY", "EXPECT", "OUTCOME", "MARKING", "RESULT"], &rows);
    match report.failed_step {
        None => out.push_str(&format!("all {} steps passed; status {}\n", report.steps.len(), report.status().as_str())),
        Some(i) => out.push_str(&format!("failed at step {i}\n")),
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Inspection<'a> {
    pub id: &'a Id,
    pub status: &'static str,
    pub marking: &'a socproto_core::Marking,
    pub enabled: BTreeMap<Id, Vec<Id>>,
    pub trace: &'a [TraceEntry],
    pub report: ValidationReport,
}

pub fn inspect(process: &SocialProcess) -> Inspection<'_> {
    Inspection {
        id: &process.id,
        status: process.status.as_str(),
        marking: &process.marking,
        enabled: process.enabled_table(),
        trace: &process.trace,
        report: process.validate(),
    }
}

pub fn render_inspection(inspection: &Inspection<'_>) -> String {
    let mut out = format!(
        "process {}  status {}\nmarking {}\n\n",
        inspection.id,
        inspection.status,
        ids(inspection.marking)
    );
    let enabled: Vec<Vec<String>> = inspection.enabled.iter().map(|(c, a)| vec![c.to_string(), ids(a)]).collect();
    out.push_str(&table(&["COLLABORATOR", "ENABLED"], &enabled));
    out.push('\n');
    let trace: Vec<Vec<String>> = inspection
        .trace
        .iter()
        .map(|entry| match entry {
            TraceEntry::Firing(e) => vec![
                e.seq.to_string(),
                "firing".into(),
                e.collaborator.to_string(),
                e.activity.to_string(),
                format!("{} -> {}", ids(&e.consumed), ids(&e.produced)),
            ],
            TraceEntry::Adaptation(r) => vec![
                r.seq.to_string(),
                "adaptation".into(),
                "-".into(),
                format!("{} edits", r.transaction.edits.len()),
                format!("{} -> {}", ids(&r.marking_before), ids(&r.marking_after)),
            ],
        })
        .collect();
    out.push_str(&table(&["SEQ", "KIND", "ACTOR", "ACTIVITY", "MARKING"], &trace));
    if !inspection.report.is_valid() {
        out.push('\n');
        out.push_str(&render_report(&inspection.report));
    }
    out
}

pub fn render_substitutes(found: &[Substitute]) -> String {
    let rows: Vec<Vec<String>> = found
        .iter()
        .map(|s| {
            let path: Vec<String> = s.path.iter().map(|r| format!("{}-{}->{}", r.source, r.label, r.target)).collect();
            vec![s.id.to_string(), s.distance.to_string(), path.join(" ")]
        })
        .collect();
    table(&["CANDIDATE", "DISTANCE", "PATH"], &rows)
}
