use serde::{Deserialize, Serialize};

use super::svg::{color, draw_axes, legend, Axes, Frame, Scale, Svg};
use crate::cohort::{Race, Sex, SubgroupKey};
use crate::error::{AuditError, Result};
use crate::featspace::ShiftTable;
use crate::pipeline::{fmt_p, AgeDistribution, AuditReport, ErrorHistograms, KdePanel};
use crate::resample::RepeatedMaeSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    AgeHistDensity,
    /// MAE and relative difference side by side.
    MaeBars,
    KdeGrid,
    ErrorHistograms,
    ShiftTable,
}

/// Panel geometry shared by every figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Style {
    pub panel_width: f64,
    pub panel_height: f64,
    pub margin_left: f64,
    pub margin_top: f64,
    pub gap: f64,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            panel_width: 260.0,
            panel_height: 180.0,
            margin_left: 60.0,
            margin_top: 40.0,
            gap: 70.0,
        }
    }
}

impl Style {
    fn frame(&self, row: usize, col: usize) -> Frame {
        Frame {
            x: self.margin_left + col as f64 * (self.panel_width + self.gap),
            y: self.margin_top + row as f64 * (self.panel_height + self.gap),
            w: self.panel_width,
            h: self.panel_height,
        }
    }

    /// Figure size for a grid of panels plus `extra` pixels on the right.
    fn size(&self, rows: usize, cols: usize, extra: f64) -> (f64, f64) {
        (
            self.margin_left + cols as f64 * (self.panel_width + self.gap) + extra,
            self.margin_top + rows as f64 * (self.panel_height + self.gap),
        )
    }
}

/// What to draw and where it goes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub file_name: String,
    #[serde(default)]
    pub style: Style,
}

impl FigureSpec {
    pub fn new(kind: FigureKind, file_name: &str) -> Self {
        FigureSpec {
            kind,
            file_name: file_name.into(),
            style: Style::default(),
        }
    }
}

/// One figure per report field that can be drawn.
pub fn default_figures() -> Vec<FigureSpec> {
    vec![
        FigureSpec::new(FigureKind::AgeHistDensity, "age_distribution.svg"),
        FigureSpec::new(FigureKind::AgeHistDensity, "age_distribution_balanced.svg"),
        FigureSpec::new(FigureKind::MaeBars, "mae_bars.svg"),
        FigureSpec::new(FigureKind::KdeGrid, "kde_grid.svg"),
        FigureSpec::new(FigureKind::ErrorHistograms, "error_histograms.svg"),
        FigureSpec::new(FigureKind::ShiftTable, "ks_all_subjects.svg"),
        FigureSpec::new(FigureKind::ShiftTable, "ks_balanced.svg"),
    ]
}

/// Renders `spec` from the report, or `None` when the field it binds to is
/// absent. Bindings are chosen by kind and, where a kind has two sources,
/// by a `balanced` marker in the file name.
pub fn render(spec: &FigureSpec, report: &AuditReport) -> Option<Result<String>> {
    let balanced = spec.file_name.contains("balanced");
    let perf = report.performance.present();
    let feat = report.features.present();
    let s = &spec.style;
    match spec.kind {
        FigureKind::AgeHistDensity => {
            let data = if balanced {
                report.figures.age_balanced.as_ref()
            } else {
                report.figures.age_full.as_ref()
            };
            data.map(|d| render_age_distribution(d, s))
        }
        FigureKind::MaeBars => perf
            .and_then(|p| p.balanced.as_ref())
            .map(|b| render_mae_bars(&b.repeated, s)),
        FigureKind::KdeGrid => feat.filter(|f| !f.kde.is_empty()).map(|f| render_kde_grid(&f.kde, s)),
        FigureKind::ErrorHistograms => report
            .figures
            .error_histograms
            .as_ref()
            .map(|h| render_error_histograms(h, s)),
        FigureKind::ShiftTable => feat.and_then(|f| {
            if balanced {
                f.balanced
                    .as_ref()
                    .map(|b| render_shift_table(&b.table, "Equal-size samples"))
            } else {
                Some(render_shift_table(&f.all_subjects, "All subjects"))
            }
        }),
    }
}

fn invalid(msg: &str) -> AuditError {
    AuditError::Invalid(msg.into())
}

/// Histograms with density overlays: an all-subjects panel and one panel
/// per race, split by sex. Dashed lines mark the test-bracket edges.
pub fn render_age_distribution(d: &AgeDistribution, style: &Style) -> Result<String> {
    if d.panels.is_empty() || d.edges.len() < 2 {
        return Err(invalid("age distribution has no panels"));
    }
    let (w, h) = style.size(1, d.panels.len(), 0.0);
    let mut svg = Svg::new(w, h);
    let (lo, hi) = (d.edges[0], d.edges[d.edges.len() - 1]);
    let bins = d.edges.len() - 1;
    let bin_width = (hi - lo) / bins as f64;
    for (p, panel) in d.panels.iter().enumerate() {
        let f = style.frame(0, p);
        let top = panel
            .series
            .iter()
            .flat_map(|s| s.counts.iter().copied())
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        let xs = Scale::new(lo, hi, f.x, f.x + f.w);
        let ys = Scale::new(0.0, top * 1.1, f.y + f.h, f.y);
        svg.open_group("panel");
        draw_axes(
            &mut svg,
            f,
            &xs,
            &ys,
            &Axes {
                title: &panel.title,
                xlabel: "Age (years)",
                ylabel: "Subjects",
            },
        );
        for &e in &d.bracket_edges {
            if e >= lo && e <= hi {
                let x = xs.map(e);
                svg.line("bracket", x, f.y, x, f.y + f.h, "#777777", 0.8, true, None);
            }
        }
        for (i, series) in panel.series.iter().enumerate() {
            let fill = color(i);
            for (b, &c) in series.counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let (x0, x1) = (xs.map(d.edges[b]), xs.map(d.edges[b + 1]));
                let y = ys.map(c as f64);
                let title = format!("{} [{}, {}): {}", series.label, d.edges[b], d.edges[b + 1], c);
                svg.rect("bar", x0, y, x1 - x0, f.y + f.h - y, fill, 0.45, Some(&title));
            }
            if let Some(curve) = &series.density {
                // density scaled to expected counts per bin
                let scale = series.n as f64 * bin_width;
                let pts: Vec<(f64, f64)> = curve
                    .grid
                    .iter()
                    .zip(&curve.density)
                    .filter(|(&x, _)| x >= lo && x <= hi)
                    .map(|(&x, &y)| (xs.map(x), ys.map((y * scale).min(top * 1.1))))
                    .collect();
                svg.polyline("density", &pts, fill, Some(&series.label));
            }
        }
        let entries: Vec<(String, &str)> = panel
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("{} (n={})", s.label, s.n), color(i)))
            .collect();
        legend(&mut svg, f.x + f.w - 90.0, f.y + 14.0, &entries);
        svg.close_group();
    }
    Ok(svg.finish())
}

fn subgroup_color(key: SubgroupKey) -> &'static str {
    color(key.index())
}

/// Left: mean MAE with ± SD bars. Right: difference from the pooled MAE with
/// ± SD bars and a zero line. Heights are the summary fields as stored.
pub fn render_mae_bars(summary: &RepeatedMaeSummary, style: &Style) -> Result<String> {
    if summary.subgroups.is_empty() {
        return Err(invalid("MAE summary has no subgroups"));
    }
    let (w, h) = style.size(1, 2, 0.0);
    let mut svg = Svg::new(w, h + 30.0);
    let n = summary.subgroups.len();

    let top = summary
        .subgroups
        .iter()
        .map(|s| s.mean_mae + s.sd_mae)
        .fold(0.0f64, f64::max);
    let reach = summary
        .subgroups
        .iter()
        .map(|s| s.relative_diff.abs() + s.relative_diff_sd)
        .fold(0.0f64, f64::max);
    let panels = [
        (
            "MAE by subgroup",
            "MAE (years)",
            0.0,
            if top > 0.0 { top * 1.15 } else { 1.0 },
        ),
        (
            "Difference from pooled MAE",
            "Relative difference (years)",
            if reach > 0.0 { -reach * 1.15 } else { -1.0 },
            if reach > 0.0 { reach * 1.15 } else { 1.0 },
        ),
    ];
    for (p, &(title, ylabel, y0, y1)) in panels.iter().enumerate() {
        let f = style.frame(0, p);
        let ys = Scale::new(y0, y1, f.y + f.h, f.y);
        let xs = Scale::new(0.0, n as f64, f.x, f.x + f.w);
        svg.open_group(if p == 0 { "panel mae" } else { "panel reldiff" });
        svg.outline(f.x, f.y, f.w, f.h);
        for t in ys.ticks(4) {
            let y = ys.map(t);
            svg.line("tick", f.x - 4.0, y, f.x, y, "#444444", 0.8, false, None);
            svg.text(f.x - 6.0, y + 3.0, 9.0, "end", &super::svg::tick_label(t));
        }
        svg.text(f.x + f.w / 2.0, f.y - 8.0, 11.0, "middle", title);
        svg.vertical_text(f.x - 36.0, f.y + f.h / 2.0, 10.0, ylabel);
        let zero = ys.map(0.0);
        if p == 1 {
            svg.line("zero", f.x, zero, f.x + f.w, zero, "#000000", 1.0, false, None);
        }
        for (i, s) in summary.subgroups.iter().enumerate() {
            let (value, sd) = if p == 0 {
                (s.mean_mae, s.sd_mae)
            } else {
                (s.relative_diff, s.relative_diff_sd)
            };
            let slot = xs.map(i as f64);
            let bw = (xs.map(1.0) - xs.map(0.0)) * 0.6;
            let x = slot + bw / 3.0;
            let y = ys.map(value);
            let (top_y, height) = if y <= zero { (y, zero - y) } else { (zero, y - zero) };
            let label = s.key.label();
            svg.rect(
                "bar",
                x,
                top_y,
                bw,
                height,
                subgroup_color(s.key),
                0.85,
                Some(&format!("{label}: {value:?}")),
            );
            let cx = x + bw / 2.0;
            svg.line(
                "errorbar",
                cx,
                ys.map(value - sd),
                cx,
                ys.map(value + sd),
                "#222222",
                1.0,
                false,
                Some(&format!("{label} sd: {sd:?}")),
            );
            for yy in [value - sd, value + sd] {
                svg.line(
                    "cap",
                    cx - 4.0,
                    ys.map(yy),
                    cx + 4.0,
                    ys.map(yy),
                    "#222222",
                    1.0,
                    false,
                    None,
                );
            }
            svg.vertical_text(cx, f.y + f.h + 28.0, 8.0, &short_label(s.key));
        }
        svg.close_group();
    }
    let f = style.frame(0, 0);
    svg.text(
        f.x,
        h + 20.0,
        9.0,
        "start",
        &format!(
            "n = {} per subgroup, {} repeats; pooled MAE {:.3} ± {:.3}",
            summary.sample_size, summary.repeats, summary.pooled_mae, summary.pooled_mae_sd
        ),
    );
    Ok(svg.finish())
}

fn short_label(key: SubgroupKey) -> String {
    let r = match key.race {
        Race::White => "W",
        Race::Black => "B",
        Race::Asian => "A",
    };
    let s = match key.sex {
        Sex::Female => "F",
        Sex::Male => "M",
    };
    format!("{r}{s}")
}

/// Density curves on a grid: one row per attribute, one column per mode.
/// Columns share their x range.
pub fn render_kde_grid(panels: &[KdePanel], style: &Style) -> Result<String> {
    let mut attributes = Vec::new();
    let mut modes = Vec::new();
    for p in panels {
        if !attributes.contains(&p.attribute) {
            attributes.push(p.attribute);
        }
        if !modes.contains(&p.mode) {
            modes.push(p.mode);
        }
    }
    if attributes.is_empty() {
        return Err(invalid("density grid needs at least one mode and one attribute"));
    }
    modes.sort_unstable();
    let (w, h) = style.size(attributes.len(), modes.len(), 110.0);
    let mut svg = Svg::new(w, h);

    let x_range: Vec<(f64, f64)> = modes
        .iter()
        .map(|&m| {
            panels
                .iter()
                .filter(|p| p.mode == m)
                .flat_map(|p| p.curves.iter())
                .flat_map(|c| [c.curve.grid[0], c.curve.grid[c.curve.grid.len() - 1]])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        })
        .map(|(a, b)| if a.is_finite() { (a, b) } else { (-1.0, 1.0) })
        .collect();

    for (r, attribute) in attributes.iter().enumerate() {
        let row: Vec<&KdePanel> = panels.iter().filter(|p| p.attribute == *attribute).collect();
        let mut labels: Vec<&str> = Vec::new();
        for p in &row {
            for c in &p.curves {
                if !labels.contains(&c.label.as_str()) {
                    labels.push(&c.label);
                }
            }
        }
        for p in &row {
            let c = modes.iter().position(|&m| m == p.mode).expect("mode listed");
            let f = style.frame(r, c);
            let top = p
                .curves
                .iter()
                .flat_map(|c| c.curve.density.iter().copied())
                .fold(0.0f64, f64::max);
            let xs = Scale::new(x_range[c].0, x_range[c].1, f.x, f.x + f.w);
            let ys = Scale::new(0.0, if top > 0.0 { top * 1.1 } else { 1.0 }, f.y + f.h, f.y);
            svg.open_group("panel");
            let title = format!("{} / mode {}", attribute.as_str(), p.mode);
            draw_axes(
                &mut svg,
                f,
                &xs,
                &ys,
                &Axes {
                    title: &title,
                    xlabel: if r + 1 == attributes.len() { "PCA score" } else { "" },
                    ylabel: if c == 0 { "Density" } else { "" },
                },
            );
            for curve in &p.curves {
                let i = labels.iter().position(|l| *l == curve.label).expect("label listed");
                let pts: Vec<(f64, f64)> = curve
                    .curve
                    .grid
                    .iter()
                    .zip(&curve.curve.density)
                    .map(|(&x, &y)| (xs.map(x), ys.map(y)))
                    .collect();
                svg.polyline("density", &pts, color(i), Some(&curve.label));
            }
            svg.close_group();
        }
        let f = style.frame(r, modes.len() - 1);
        let entries: Vec<(String, &str)> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), color(i)))
            .collect();
        legend(&mut svg, f.x + f.w + 16.0, f.y + 10.0, &entries);
    }
    Ok(svg.finish())
}

/// Absolute-error histograms per subgroup on shared bins: races across,
/// sexes down.
pub fn render_error_histograms(hist: &ErrorHistograms, style: &Style) -> Result<String> {
    if hist.panels.is_empty() || hist.edges.len() < 2 {
        return Err(invalid("error histograms have no panels"));
    }
    let (w, h) = style.size(2, 3, 0.0);
    let mut svg = Svg::new(w, h);
    let (lo, hi) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
    for panel in &hist.panels {
        let col = Race::ALL.iter().position(|&r| r == panel.key.race).expect("race");
        let row = Sex::ALL.iter().position(|&s| s == panel.key.sex).expect("sex");
        let f = style.frame(row, col);
        let top = panel.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let xs = Scale::new(lo, hi, f.x, f.x + f.w);
        let ys = Scale::new(0.0, top * 1.1, f.y + f.h, f.y);
        let title = match panel.shapiro_p {
            Some(p) => format!("{} (n={}, SW p={})", panel.key, panel.n, fmt_p(p.get())),
            None => format!("{} (n={})", panel.key, panel.n),
        };
        svg.open_group("panel");
        draw_axes(
            &mut svg,
            f,
            &xs,
            &ys,
            &Axes {
                title: &title,
                xlabel: "Absolute error (years)",
                ylabel: if col == 0 { "Subjects" } else { "" },
            },
        );
        for (b, &c) in panel.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (x0, x1) = (xs.map(hist.edges[b]), xs.map(hist.edges[b + 1]));
            let y = ys.map(c as f64);
            svg.rect(
                "bar",
                x0,
                y,
                x1 - x0,
                f.y + f.h - y,
                subgroup_color(panel.key),
                0.8,
                Some(&c.to_string()),
            );
        }
        svg.close_group();
    }
    Ok(svg.finish())
}

const SIGNIFICANT_FILL: &str = "#f3a79b";
const NOT_SIGNIFICANT_FILL: &str = "#b9dfb0";
const SKIPPED_FILL: &str = "#dddddd";

/// Adjusted KS p-values as a table; cell fill marks significance.
pub fn render_shift_table(table: &ShiftTable, title: &str) -> Result<String> {
    if table.modes.is_empty() || table.comparisons.is_empty() {
        return Err(invalid("shift table is empty"));
    }
    let (cw, ch, left, top) = (120.0, 24.0, 70.0, 56.0);
    let w = left + cw * table.comparisons.len() as f64 + 20.0;
    let h = top + ch * table.modes.len() as f64 + 36.0;
    let mut svg = Svg::new(w, h);
    svg.text(w / 2.0, 20.0, 12.0, "middle", title);
    for (j, c) in table.comparisons.iter().enumerate() {
        svg.text(left + cw * (j as f64 + 0.5), top - 8.0, 10.0, "middle", c);
    }
    for (i, &mode) in table.modes.iter().enumerate() {
        let y = top + ch * i as f64;
        svg.text(left - 8.0, y + ch * 0.65, 10.0, "end", &format!("Mode {mode}"));
        for (j, c) in table.comparisons.iter().enumerate() {
            let x = left + cw * j as f64;
            let cell = table.cell(mode, c);
            let (fill, text) = match cell {
                Some(row) => match row.adjusted_p {
                    Some(p) => (
                        if row.significant {
                            SIGNIFICANT_FILL
                        } else {
                            NOT_SIGNIFICANT_FILL
                        },
                        fmt_p(p.get()),
                    ),
                    None => (SKIPPED_FILL, "n/a".to_string()),
                },
                None => (SKIPPED_FILL, "n/a".to_string()),
            };
            let class = match cell {
                Some(r) if r.significant => "cell significant",
                Some(r) if r.adjusted_p.is_some() => "cell",
                _ => "cell skipped",
            };
            svg.rect(class, x, y, cw, ch, fill, 1.0, None);
            svg.text(x + cw / 2.0, y + ch * 0.65, 10.0, "middle", &text);
        }
    }
    svg.text(
        left,
        h - 12.0,
        9.0,
        "start",
        &format!(
            "Benjamini-Yekutieli adjusted, {} tests, alpha = {}",
            table.family_size, table.alpha
        ),
    );
    Ok(svg.finish())
}
