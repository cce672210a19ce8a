use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::Serialize;

use super::{AuditReport, REPORT_SCHEMA};
use crate::rules::Impact;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn render_report(report: &AuditReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Json => render_json(report),
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: &'static str,
    contract: JsonContract<'a>,
    ruleset: &'a str,
    model: &'a str,
    summary: JsonSummary,
    findings: Vec<JsonFinding<'a>>,
    uncertain: Vec<JsonUncertain<'a>>,
    usage: JsonUsage,
}

#[derive(Serialize)]
struct JsonContract<'a> {
    path: &'a str,
    sha256: &'a str,
}

#[derive(Serialize)]
struct JsonSummary {
    high: usize,
    medium: usize,
    low: usize,
}

#[derive(Serialize)]
struct JsonFinding<'a> {
    rule_id: &'a str,
    impact: &'a str,
    category: &'a str,
    contract: &'a str,
    function: Option<&'a str>,
    line: Option<u32>,
    explanation: &'a str,
    source: &'a str,
}

#[derive(Serialize)]
struct JsonUncertain<'a> {
    rule_id: &'a str,
    function: &'a str,
    reason: &'a str,
}

#[derive(Serialize)]
struct JsonUsage {
    prompts: usize,
    in_tokens: usize,
    out_tokens: usize,
}

/// Report as pretty-printed JSON with a trailing newline.
pub fn render_json(report: &AuditReport) -> String {
    let doc = JsonReport {
        schema: REPORT_SCHEMA,
        contract: JsonContract {
            path: &report.contract_path,
            sha256: &report.contract_sha256,
        },
        ruleset: &report.ruleset,
        model: &report.model,
        summary: JsonSummary {
            high: report.summary.high,
            medium: report.summary.medium,
            low: report.summary.low,
        },
        findings: report
            .findings
            .iter()
            .map(|f| JsonFinding {
                rule_id: &f.rule_id,
                impact: f.impact.as_str(),
                category: f.category.as_str(),
                contract: &f.contract,
                function: f.function.as_deref(),
                line: f.line,
                explanation: &f.explanation,
                source: f.source.as_str(),
            })
            .collect(),
        uncertain: report
            .uncertain
            .iter()
            .map(|u| JsonUncertain {
                rule_id: &u.rule_id,
                function: &u.function,
                reason: &u.reason,
            })
            .collect(),
        usage: JsonUsage {
            prompts: report.usage.prompts,
            in_tokens: report.usage.in_tokens,
            out_tokens: report.usage.out_tokens,
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report DTOs always serialize");
    out.push('\n');
    out
}

fn indent(text: &str, prefix: &str) -> String {
    text.lines().map(|l| format!("{prefix}{l}")).collect::<Vec<_>>().join("\n")
}

/// Human-readable report, findings grouped by impact from high to low.
pub fn render_text(report: &AuditReport) -> String {
    let mut out = String::new();
    let s = &report.summary;
    let _ = writeln!(out, "contract: {} (sha256 {})", report.contract_path, report.contract_sha256);
    let _ = writeln!(out, "ruleset:  {}", report.ruleset);
    let _ = writeln!(out, "model:    {} (temperature {})", report.model, report.temperature);
    let _ = writeln!(out, "summary:  {} high, {} medium, {} low", s.high, s.medium, s.low);

    for impact in Impact::ALL {
        let group: Vec<_> = report.findings.iter().filter(|f| f.impact == impact).collect();
        if group.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n== {} impact ==", impact.as_str().to_ascii_uppercase());
        for f in group {
            let mut location = f.contract.clone();
            if let Some(func) = &f.function {
                location.push('.');
                location.push_str(func);
            }
            if let Some(line) = f.line {
                let _ = write!(location, " (line {line})");
            }
            let _ = writeln!(out, "\n[{}] {} [{}, {}]", f.rule_id, location, f.category, f.source.as_str());
            let _ = writeln!(out, "  rule: {}", f.rule_text.trim());
            if !f.explanation.trim().is_empty() {
                let _ = writeln!(out, "{}", indent(f.explanation.trim(), "  | "));
            }
        }
    }

    if !report.uncertain.is_empty() {
        let _ = writeln!(out, "\n== uncertain ==");
        for u in &report.uncertain {
            let _ = writeln!(out, "  {} on {}: {}", u.rule_id, u.function, u.reason);
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(out, "\n== analysis warnings ==");
        for w in &report.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    let u = &report.usage;
    let _ = writeln!(
        out,
        "\nusage: {} prompts, {} input tokens, {} output tokens",
        u.prompts, u.in_tokens, u.out_tokens
    );
    out
}
