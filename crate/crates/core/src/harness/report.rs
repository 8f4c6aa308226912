//! Writing evaluation reports as Markdown, CSV or JSON tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::guidelines::rule_title;
use crate::harness::evaluate::{ReportSet, METRICS};
use crate::stats::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (expected md, csv or json)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A table as header plus string rows; CSV cells carry full precision.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn cell(v: f64) -> String {
    format!("{v}")
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

fn ci_md(i: &Interval) -> String {
    format!("{:.2} [{:.2}, {:.2}]", i.point, i.low, i.high)
}

fn metric_header(prefix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for m in METRICS {
        h.extend([m.to_string(), format!("{m} low"), format!("{m} high")]);
    }
    h
}

fn metric_cells(intervals: &[Interval; 4]) -> Vec<String> {
    intervals.iter().flat_map(|i| [cell(i.point), cell(i.low), cell(i.high)]).collect()
}

fn macro_csv(rs: &ReportSet) -> Table {
    Table {
        header: metric_header(&["Model", "N", "Parsed"]),
        rows: rs
            .models
            .iter()
            .map(|m| {
                let mut row = vec![m.model.clone(), m.records.to_string(), m.parse_ok.to_string()];
                row.extend(metric_cells(&m.macro_summary.intervals()));
                row
            })
            .collect(),
    }
}

fn domain_csv(rs: &ReportSet) -> Table {
    Table {
        header: metric_header(&["Model", "Domain", "N"]),
        rows: rs
            .models
            .iter()
            .flat_map(|m| {
                m.per_domain.iter().map(move |d| {
                    let mut row = vec![m.model.clone(), d.domain.clone(), d.records.to_string()];
                    row.extend(metric_cells(&d.metrics.intervals()));
                    row
                })
            })
            .collect(),
    }
}

fn guideline_csv(rs: &ReportSet) -> Table {
    let header = ["Model", "Rule", "Title", "OK", "KO", "Missing", "Pass (%)", "Wilson low", "Wilson high"];
    Table {
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: rs
            .models
            .iter()
            .flat_map(|m| {
                m.guidelines.iter().map(move |a| {
                    vec![
                        m.model.clone(),
                        a.rule.to_string(),
                        rule_title(a.rule).to_string(),
                        a.ok.to_string(),
                        a.ko.to_string(),
                        a.missing.to_string(),
                        opt_cell(a.pass_percent),
                        opt_cell(a.wilson_low),
                        opt_cell(a.wilson_high),
                    ]
                })
            })
            .collect(),
    }
}

fn ranking_csv(rs: &ReportSet) -> Option<Table> {
    let ranking = rs.ranking.as_ref()?;
    let models: Vec<String> = rs.models.iter().map(|m| m.model.clone()).collect();
    let mut header: Vec<String> = ["Metric", "n", "k", "chi2", "df", "p", "W"].iter().map(|s| s.to_string()).collect();
    header.extend(models.iter().map(|m| format!("{m} mean rank")));
    Some(Table {
        header,
        rows: ranking
            .metrics
            .iter()
            .map(|r| {
                let f = &r.friedman;
                let mut row = vec![
                    r.metric.clone(),
                    f.n_blocks.to_string(),
                    f.k_treatments.to_string(),
                    cell(f.chi2),
                    f.df.to_string(),
                    cell(f.p_value),
                    cell(f.w),
                ];
                row.extend(r.mean_ranks.iter().map(|(_, v)| cell(*v)));
                row
            })
            .collect(),
    })
}

fn records_csv(rs: &ReportSet) -> Table {
    let header = ["Model", "Record", "Domain", "BLEU", "ROUGE-L", "METEOR", "R-GED", "Parsed", "GED exact"];
    Table {
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: rs
            .models
            .iter()
            .flat_map(|m| {
                m.bundles.iter().map(move |b| {
                    vec![
                        m.model.clone(),
                        b.record_id.clone(),
                        b.domain.clone(),
                        cell(b.bleu),
                        cell(b.rouge_l),
                        cell(b.meteor),
                        cell(b.r_ged_percent),
                        b.parse_ok.to_string(),
                        b.ged_exact.to_string(),
                    ]
                })
            })
            .collect(),
    }
}

fn md_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let escaped: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
        let _ = writeln!(out, "| {} |", escaped.join(" | "));
    }
}

fn metric_md_header(prefix: &[&str]) -> Vec<String> {
    prefix.iter().chain(METRICS.iter()).map(|s| s.to_string()).collect()
}

fn macro_md(rs: &ReportSet) -> String {
    let mut out = String::from("# Macro results (mean [95% CI])\n\n");
    let rows: Vec<Vec<String>> = rs
        .models
        .iter()
        .map(|m| {
            let mut row = vec![m.model.clone()];
            row.extend(m.macro_summary.intervals().iter().map(ci_md));
            row
        })
        .collect();
    md_table(&mut out, &metric_md_header(&["Model"]), &rows);
    out
}

fn domain_md(rs: &ReportSet) -> String {
    let mut out = String::from("# Per-domain results (mean [95% CI])\n");
    for m in &rs.models {
        let _ = write!(out, "\n## {}\n\n", m.model);
        let rows: Vec<Vec<String>> = m
            .per_domain
            .iter()
            .map(|d| {
                let mut row = vec![d.domain.clone(), d.records.to_string()];
                row.extend(d.metrics.intervals().iter().map(ci_md));
                row
            })
            .collect();
        md_table(&mut out, &metric_md_header(&["Domain", "N"]), &rows);
    }
    out
}

fn guideline_md(rs: &ReportSet) -> String {
    let mut out = String::from("# Guideline verification\n");
    let header: Vec<String> = ["Rule", "Guideline", "OK", "KO", "Pass (%)", "95% Wilson CI"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in &rs.models {
        let _ = write!(out, "\n## {}\n\n", m.model);
        let rows: Vec<Vec<String>> = m
            .guidelines
            .iter()
            .map(|a| {
                let (pass, ci) = match (a.pass_percent, a.wilson_low, a.wilson_high) {
                    (Some(p), Some(l), Some(h)) => (format!("{p:.2}"), format!("[{:.1}, {:.1}]", 100.0 * l, 100.0 * h)),
                    _ => (format!("Missing ({})", a.missing), String::new()),
                };
                vec![a.rule.to_string(), rule_title(a.rule).into(), a.ok.to_string(), a.ko.to_string(), pass, ci]
            })
            .collect();
        md_table(&mut out, &header, &rows);
    }
    out
}

fn ranking_md(rs: &ReportSet) -> Option<String> {
    let ranking = rs.ranking.as_ref()?;
    let mut out = format!(
        "# Friedman ranking\n\nBlocks with valid output from every model: {} (excluded {}).\n\n",
        ranking.blocks,
        ranking.excluded.len()
    );
    let header: Vec<String> = ["Metric", "n", "k", "χ²", "df", "p", "Kendall's W"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = ranking
        .metrics
        .iter()
        .map(|r| {
            let f = &r.friedman;
            vec![
                r.metric.clone(),
                f.n_blocks.to_string(),
                f.k_treatments.to_string(),
                format!("{:.2}", f.chi2),
                f.df.to_string(),
                format!("{:.3e}", f.p_value),
                format!("{:.2}", f.w),
            ]
        })
        .collect();
    md_table(&mut out, &header, &rows);
    out.push_str("\n## Mean ranks (1 = best)\n\n");
    let mut header = vec!["Model".to_string()];
    header.extend(ranking.metrics.iter().map(|r| r.metric.clone()));
    let rows: Vec<Vec<String>> = rs
        .models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut row = vec![m.model.clone()];
            row.extend(ranking.metrics.iter().map(|r| format!("{:.2}", r.mean_ranks[i].1)));
            row
        })
        .collect();
    md_table(&mut out, &header, &rows);
    Some(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

fn write_csv(path: &Path, table: &Table) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    write_file(path, &bytes)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Serialize)]
struct NamedMacro<'a> {
    model: &'a str,
    records: usize,
    parse_ok: usize,
    #[serde(rename = "macro")]
    summary: &'a crate::harness::evaluate::MetricSummary,
}

#[derive(Serialize)]
struct NamedDomains<'a> {
    model: &'a str,
    per_domain: &'a [crate::harness::evaluate::DomainSummary],
}

#[derive(Serialize)]
struct NamedGuidelines<'a> {
    model: &'a str,
    guidelines: &'a [crate::guidelines::RuleAggregate],
}

/// Writes the macro, per-domain, guideline and (for several models) ranking
/// tables into `out_dir`, plus per-record scores for CSV and JSON. Output is
/// deterministic for a given report set.
pub fn emit_reports(rs: &ReportSet, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io { path: out_dir.display().to_string(), source })?;
    let ext = format.extension();
    let path = |stem: &str| out_dir.join(format!("{stem}.{ext}"));
    let mut written = Vec::new();
    match format {
        ReportFormat::Markdown => {
            let mut files = vec![("macro", macro_md(rs)), ("per_domain", domain_md(rs)), ("guidelines", guideline_md(rs))];
            if let Some(r) = ranking_md(rs) {
                files.push(("ranking", r));
            }
            for (stem, text) in files {
                write_file(&path(stem), text.as_bytes())?;
                written.push(path(stem));
            }
        }
        ReportFormat::Csv => {
            let mut tables = vec![
                ("macro", macro_csv(rs)),
                ("per_domain", domain_csv(rs)),
                ("guidelines", guideline_csv(rs)),
                ("records", records_csv(rs)),
            ];
            if let Some(t) = ranking_csv(rs) {
                tables.push(("ranking", t));
            }
            for (stem, table) in tables {
                write_csv(&path(stem), &table)?;
                written.push(path(stem));
            }
        }
        ReportFormat::Json => {
            let macros: Vec<_> = rs
                .models
                .iter()
                .map(|m| NamedMacro { model: &m.model, records: m.records, parse_ok: m.parse_ok, summary: &m.macro_summary })
                .collect();
            write_json(&path("macro"), &macros)?;
            written.push(path("macro"));
            let domains: Vec<_> =
                rs.models.iter().map(|m| NamedDomains { model: &m.model, per_domain: &m.per_domain }).collect();
            write_json(&path("per_domain"), &domains)?;
            written.push(path("per_domain"));
            let guidelines: Vec<_> =
                rs.models.iter().map(|m| NamedGuidelines { model: &m.model, guidelines: &m.guidelines }).collect();
            write_json(&path("guidelines"), &guidelines)?;
            written.push(path("guidelines"));
            let bundles: Vec<_> = rs.models.iter().map(|m| (&m.model, &m.bundles)).collect();
            write_json(&path("records"), &bundles)?;
            written.push(path("records"));
            if let Some(r) = &rs.ranking {
                write_json(&path("ranking"), r)?;
                written.push(path("ranking"));
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::evaluate::tests::{quick, rec};
    use crate::harness::evaluate::{run_evaluation, ModelRun};

    fn report_set() -> ReportSet {
        let corpus = vec![
            rec("1", "Banking", "digraph { a -> b }", Some("digraph { a -> b }")),
            rec("2", "Banking", "digraph { a -> b -> c }", Some("digraph { a -> c }")),
            rec("3", "Retail", "digraph { x -> y }", Some("no")),
        ];
        let a = ModelRun::from_records("alpha", &corpus);
        let mut b = a.clone();
        b.name = "beta".into();
        b.candidates.insert("2".into(), "digraph { a -> b -> c }".into());
        run_evaluation(&corpus, &[a, b], &quick()).unwrap()
    }

    #[test]
    fn markdown_headers() {
        let dir = tempfile::tempdir().unwrap();
        let rs = report_set();
        let files = emit_reports(&rs, ReportFormat::Markdown, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let text = fs::read_to_string(dir.path().join("macro.md")).unwrap();
        assert!(text.contains("| Model | BLEU | ROUGE-L | METEOR | R-GED |"));
        let g = fs::read_to_string(dir.path().join("guidelines.md")).unwrap();
        assert!(g.contains("| Rule | Guideline | OK | KO | Pass (%) | 95% Wilson CI |"));
    }

    #[test]
    fn byte_identical_reemission() {
        let rs = report_set();
        for format in [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json] {
            let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            let f1 = emit_reports(&rs, format, d1.path()).unwrap();
            let f2 = emit_reports(&rs, format, d2.path()).unwrap();
            for (a, b) in f1.iter().zip(&f2) {
                assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
            }
        }
    }

    #[test]
    fn csv_round_trips_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let rs = report_set();
        emit_reports(&rs, ReportFormat::Csv, dir.path()).unwrap();
        let mut reader = csv::Reader::from_path(dir.path().join("macro.csv")).unwrap();
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        for (row, m) in rows.iter().zip(&rs.models) {
            assert_eq!(&row[0], m.model);
            let parsed: Vec<f64> = (3..15).map(|i| row[i].parse().unwrap()).collect();
            let expected: Vec<f64> =
                m.macro_summary.intervals().iter().flat_map(|i| [i.point, i.low, i.high]).collect();
            assert_eq!(parsed, expected);
        }
        let mut records = csv::Reader::from_path(dir.path().join("records.csv")).unwrap();
        let first = records.records().next().unwrap().unwrap();
        assert_eq!(first[6].parse::<f64>().unwrap(), rs.models[0].bundles[0].r_ged_percent);
    }

    #[test]
    fn json_ranking_present() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_reports(&report_set(), ReportFormat::Json, dir.path()).unwrap();
        assert!(files.iter().any(|f| f.ends_with("ranking.json")));
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("macro.json")).unwrap()).unwrap();
        assert_eq!(v[0]["model"], "alpha");
    }

    #[test]
    fn format_names() {
        assert_eq!("md".parse::<ReportFormat>(), Ok(ReportFormat::Markdown));
        assert!("xlsx".parse::<ReportFormat>().is_err());
    }
}
