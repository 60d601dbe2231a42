//! CSV tables. Floats are written in shortest round-trip form, so every
//! cell parses back to the value held in the report.

use crate::error::{AuditError, Result};
use crate::featspace::ShiftTable;
use crate::hyptest::PairwiseResults;
use crate::pipeline::{AuditReport, CalibrationSummary, PerformancePass};

/// A named CSV document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub file_name: String,
    pub csv: String,
}

pub(crate) fn float(v: f64) -> String {
    format!("{v:?}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn to_csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| AuditError::Invalid(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| AuditError::Invalid(format!("CSV encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

/// Rows = modes; per comparison the adjusted p, raw p and significance flag.
/// Skipped cells are empty.
pub fn shift_table_csv(table: &ShiftTable) -> Result<String> {
    let mut header = vec!["mode".to_string()];
    for c in &table.comparisons {
        header.push(format!("{c} adjusted_p"));
        header.push(format!("{c} p"));
        header.push(format!("{c} significant"));
    }
    let rows: Vec<Vec<String>> = table
        .modes
        .iter()
        .map(|&mode| {
            let mut row = vec![mode.to_string()];
            for c in &table.comparisons {
                match table.cell(mode, c) {
                    Some(cell) if cell.result.is_some() => {
                        row.push(opt_float(cell.adjusted_p.map(|p| p.get())));
                        row.push(opt_float(cell.result.as_ref().map(|r| r.p_value.get())));
                        row.push(cell.significant.to_string());
                    }
                    _ => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            row
        })
        .collect();
    to_csv(&header, &rows)
}

fn posthoc_rows(pass: &str, factor: &str, res: &PairwiseResults, rows: &mut Vec<Vec<String>>) {
    for e in res.pairs() {
        rows.push(vec![
            pass.into(),
            factor.into(),
            e.a,
            e.b,
            float(e.t),
            float(e.p_value.get()),
            opt_float(e.adjusted_p.map(|p| p.get())),
        ]);
    }
}

fn passes(report: &AuditReport) -> Vec<(&'static str, &PerformancePass)> {
    let mut out = Vec::new();
    if let Some(arm) = report.performance.present() {
        if let Some(full) = &arm.full {
            out.push(("full", full));
        }
        if let Some(b) = &arm.balanced {
            out.push(("balanced", &b.battery));
        }
    }
    out
}

/// Every table the report supports.
pub fn report_tables(report: &AuditReport) -> Result<Vec<Table>> {
    let mut tables = Vec::new();
    let passes = passes(report);
    if !passes.is_empty() {
        let header: Vec<String> = ["pass", "subgroup", "n", "mae", "sd", "shapiro_w", "shapiro_p"]
            .map(String::from)
            .to_vec();
        let mut rows = Vec::new();
        for (name, pass) in &passes {
            for (s, sw) in pass.subgroups.iter().zip(&pass.shapiro) {
                rows.push(vec![
                    name.to_string(),
                    s.key.label(),
                    s.n.to_string(),
                    float(s.mae),
                    float(s.sd),
                    float(sw.result.statistic),
                    float(sw.result.p_value.get()),
                ]);
            }
        }
        tables.push(Table {
            file_name: "subgroups.csv".into(),
            csv: to_csv(&header, &rows)?,
        });

        let header: Vec<String> = ["pass", "test", "statistic", "p_value", "n", "gate"]
            .map(String::from)
            .to_vec();
        let mut rows = Vec::new();
        for (name, pass) in &passes {
            let gate = serde_json::to_value(pass.gate.decision)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            for (test, r) in [("levene", &pass.levene), ("kruskal_wallis", &pass.kruskal)] {
                rows.push(vec![
                    name.to_string(),
                    test.into(),
                    float(r.statistic),
                    float(r.p_value.get()),
                    r.n.to_string(),
                    gate.clone(),
                ]);
            }
        }
        tables.push(Table {
            file_name: "omnibus.csv".into(),
            csv: to_csv(&header, &rows)?,
        });

        let header: Vec<String> = ["pass", "factor", "a", "b", "t", "p_value", "adjusted_p"]
            .map(String::from)
            .to_vec();
        let mut rows = Vec::new();
        for (name, pass) in &passes {
            posthoc_rows(name, "race", &pass.posthoc_race, &mut rows);
            posthoc_rows(name, "sex", &pass.posthoc_sex, &mut rows);
        }
        tables.push(Table {
            file_name: "posthoc.csv".into(),
            csv: to_csv(&header, &rows)?,
        });
    }

    if let Some(b) = report.performance.present().and_then(|a| a.balanced.as_ref()) {
        let r = &b.repeated;
        let header: Vec<String> = [
            "subgroup",
            "mean_mae",
            "sd_mae",
            "relative_diff",
            "relative_diff_sd",
            "relative_diff_percent",
        ]
        .map(String::from)
        .to_vec();
        let mut rows: Vec<Vec<String>> = r
            .subgroups
            .iter()
            .map(|s| {
                vec![
                    s.key.label(),
                    float(s.mean_mae),
                    float(s.sd_mae),
                    float(s.relative_diff),
                    float(s.relative_diff_sd),
                    opt_float(s.relative_diff_percent),
                ]
            })
            .collect();
        rows.push(vec![
            "Pooled".into(),
            float(r.pooled_mae),
            float(r.pooled_mae_sd),
            String::new(),
            String::new(),
            String::new(),
        ]);
        tables.push(Table {
            file_name: "mae_repeats.csv".into(),
            csv: to_csv(&header, &rows)?,
        });
    }

    if let Some(f) = report.features.present() {
        tables.push(Table {
            file_name: "ks_all_subjects.csv".into(),
            csv: shift_table_csv(&f.all_subjects)?,
        });
        if let Some(b) = &f.balanced {
            tables.push(Table {
                file_name: "ks_balanced.csv".into(),
                csv: shift_table_csv(&b.table)?,
            });
        }
    }
    Ok(tables)
}

pub fn calibration_csv(summary: &CalibrationSummary) -> Result<String> {
    let header: Vec<String> = [
        "test",
        "rejections",
        "trials",
        "rate",
        "ci_low",
        "ci_high",
        "covers_alpha",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = summary
        .rates
        .iter()
        .map(|r| {
            vec![
                r.test.clone(),
                r.rejections.to_string(),
                r.trials.to_string(),
                float(r.rate),
                float(r.ci_low),
                float(r.ci_high),
                r.covers_alpha.to_string(),
            ]
        })
        .collect();
    to_csv(&header, &rows)
}
