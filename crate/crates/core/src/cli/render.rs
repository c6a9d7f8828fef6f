//! Human-readable renderings of reports.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::agreement::AgreementReport;
use crate::corpus::{LengthStats, StatsReport};
use crate::evaluate::{ConfusionMatrix, EvalReport, Normalization};
use crate::supervise::QualityAudit;
use crate::taxonomy::CoarseLabel;

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn mean(s: &LengthStats) -> String {
    s.mean.map_or_else(|| "n/a".into(), |m| format!("{m:.2}"))
}

fn median(s: &LengthStats) -> String {
    s.median.map_or_else(|| "n/a".into(), |m| m.to_string())
}

fn interval(s: &LengthStats) -> String {
    s.p90.map_or_else(|| "n/a".into(), |p| format!("[1, {p}]"))
}

/// Dataset statistics, one row per statistic.
pub fn stats_table(report: &StatsReport, column: &str) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("# Posts", thousands(report.posts)),
        ("# Sentences", thousands(report.sentences)),
        ("# Tokens", thousands(report.tokens)),
        ("# Skill Spans", thousands(report.skill_spans)),
        ("# Knowledge Spans", thousands(report.knowledge_spans)),
        ("mean Skill Span", mean(&report.skill)),
        ("mean Knowledge Span", mean(&report.knowledge)),
        ("median Skill Span", median(&report.skill)),
        ("median Knowledge Span", median(&report.knowledge)),
        ("Skill [90%]", interval(&report.skill)),
        ("Knowledge [90%]", interval(&report.knowledge)),
    ];
    let mut out = String::new();
    let _ = writeln!(out, "{:<24}{:>10}", "Statistics", column);
    for (name, value) in rows {
        let _ = writeln!(out, "{name:<24}{value:>10}");
    }
    out
}

pub fn distribution_table(hist: &BTreeMap<CoarseLabel, usize>) -> String {
    let total: usize = hist.values().sum();
    let mut out = String::new();
    let _ = writeln!(out, "{:<6}{:>8}{:>9}", "label", "count", "share");
    for (label, count) in hist {
        let share = *count as f64 / total as f64;
        let _ = writeln!(out, "{:<6}{:>8}{:>9.4}", label.tag(), count, share);
    }
    let _ = writeln!(out, "{:<6}{:>8}", "total", total);
    out
}

pub fn eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6}{:>11}{:>9}{:>9}{:>9}",
        "label", "precision", "recall", "f1", "support"
    );
    for (label, s) in &report.per_class {
        let _ = writeln!(
            out,
            "{:<6}{:>11.4}{:>9.4}{:>9.4}{:>9}",
            label.tag(),
            s.precision,
            s.recall,
            s.f1,
            s.support
        );
    }
    let _ = writeln!(out, "weighted macro-F1  {:.5}", report.weighted_macro_f1);
    let _ = writeln!(out, "accuracy           {:.5}", report.accuracy);
    let _ = writeln!(out, "n                  {}", report.n);
    out
}

pub fn confusion_table(m: &ConfusionMatrix) -> String {
    let mut out = String::from("gold\\pred");
    for l in &m.labels {
        let _ = write!(out, "\t{}", l.tag());
    }
    out.push('\n');
    for (label, row) in m.labels.iter().zip(&m.counts) {
        out.push_str(label.tag());
        for v in row {
            match m.normalization {
                Normalization::None => {
                    let _ = write!(out, "\t{}", *v as u64);
                }
                Normalization::Row => {
                    let _ = write!(out, "\t{v:.4}");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn audit_table(a: &QualityAudit) -> String {
    format!(
        "total      {}\ncorrect    {}\naccuracy   {:.4}\nmissing    {}\nmissing %  {:.4}\n",
        a.total, a.correct, a.accuracy, a.missing, a.missing_rate
    )
}

pub fn agreement_table(reports: &[AgreementReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let level = match r.level {
            crate::agreement::Level::Token => "token",
            crate::agreement::Level::Span => "span",
        };
        let _ = writeln!(out, "[{level}]");
        for p in &r.pairwise {
            let _ = writeln!(
                out,
                "cohen  {} vs {}  kappa {:.4}  (observed {:.4}, chance {:.4}, items {})",
                p.a, p.b, p.cohen.kappa, p.cohen.observed, p.cohen.expected, p.cohen.items
            );
        }
        let _ = writeln!(
            out,
            "fleiss {}  kappa {:.4}  (observed {:.4}, chance {:.4}, items {})",
            r.annotators.join(","),
            r.fleiss.kappa,
            r.fleiss.observed,
            r.fleiss.expected,
            r.fleiss.items
        );
    }
    out
}
