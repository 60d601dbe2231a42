//! SVG figures and CSV tables drawn from an assembled report. Renderers
//! read report fields only; every statistic is computed upstream.

mod figures;
mod svg;
mod tables;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use figures::{
    default_figures, render, render_age_distribution, render_error_histograms, render_kde_grid, render_mae_bars,
    render_shift_table, FigureKind, FigureSpec, Style,
};
pub use tables::{calibration_csv, report_tables, shift_table_csv, Table};

use crate::error::{AuditError, Result};
use crate::pipeline::AuditReport;

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| AuditError::io(&path, e))?;
    Ok(path)
}

/// Writes one CSV per table into `out_dir`.
pub fn emit_tables(report: &AuditReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    report_tables(report)?
        .iter()
        .map(|t| write(out_dir, &t.file_name, &t.csv))
        .collect()
}

/// Renders every figure in `specs` that the report has data for, then writes
/// them in spec order.
pub fn emit_figures(report: &AuditReport, specs: &[FigureSpec], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rendered: Vec<Option<Result<String>>> = specs.par_iter().map(|s| render(s, report)).collect();
    let mut paths = Vec::new();
    for (spec, svg) in specs.iter().zip(rendered) {
        if let Some(svg) = svg {
            let svg = svg.map_err(|e| e.context(spec.file_name.clone()))?;
            paths.push(write(out_dir, &spec.file_name, &svg)?);
        }
    }
    Ok(paths)
}

/// `report.json`, `report.md`, tables and default figures.
pub fn write_outputs(report: &AuditReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| AuditError::io(out_dir, e))?;
    let mut paths = vec![
        write(out_dir, "report.json", &report.to_canonical_json())?,
        write(out_dir, "report.md", &report.to_markdown())?,
    ];
    paths.extend(emit_tables(report, out_dir)?);
    paths.extend(emit_figures(report, &default_figures(), out_dir)?);
    Ok(paths)
}
