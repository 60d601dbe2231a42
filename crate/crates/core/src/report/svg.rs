//! Minimal SVG 1.1 writer. Coordinates are printed with two decimals so
//! output bytes depend only on the input values.

use std::fmt::Write as _;

pub(crate) const FONT: &str = "Helvetica, Arial, sans-serif";

pub(crate) const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d5a97", "#30343f", "#e07a5f",
];

pub(crate) fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub(crate) fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub(crate) struct Svg {
    out: String,
    depth: usize,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"{FONT}\">",
            w = num(width),
            h = num(height)
        );
        let _ = writeln!(
            out,
            "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>",
            num(width),
            num(height)
        );
        Svg { out, depth: 1 }
    }

    fn indent(&mut self) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
    }

    pub fn open_group(&mut self, class: &str) {
        self.indent();
        let _ = writeln!(self.out, "<g class=\"{}\">", escape(class));
        self.depth += 1;
    }

    pub fn close_group(&mut self) {
        self.depth -= 1;
        self.indent();
        self.out.push_str("</g>\n");
    }

    #[allow(clippy::too_many_arguments)]
    pub fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64, title: Option<&str>) {
        self.indent();
        let _ = write!(
            self.out,
            "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"",
            num(x),
            num(y),
            num(w.max(0.0)),
            num(h.max(0.0))
        );
        if opacity < 1.0 {
            let _ = write!(self.out, " fill-opacity=\"{}\"", num(opacity));
        }
        self.finish_element("rect", title);
    }

    pub fn outline(&mut self, x: f64, y: f64, w: f64, h: f64) {
        self.indent();
        let _ = writeln!(
            self.out,
            "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\" stroke-width=\"0.8\"/>",
            num(x),
            num(y),
            num(w),
            num(h)
        );
    }

    #[allow(clippy::too_many_arguments)]
    pub fn line(
        &mut self,
        class: &str,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        stroke: &str,
        width: f64,
        dashed: bool,
        title: Option<&str>,
    ) {
        self.indent();
        let _ = write!(
            self.out,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"",
            num(x1),
            num(y1),
            num(x2),
            num(y2),
            num(width)
        );
        if dashed {
            self.out.push_str(" stroke-dasharray=\"4 3\"");
        }
        self.finish_element("line", title);
    }

    pub fn polyline(&mut self, class: &str, points: &[(f64, f64)], stroke: &str, title: Option<&str>) {
        if points.len() < 2 {
            return;
        }
        self.indent();
        let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", num(x), num(y))).collect();
        let _ = write!(
            self.out,
            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"",
            pts.join(" ")
        );
        self.finish_element("polyline", title);
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        self.indent();
        let _ = writeln!(
            self.out,
            "<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{anchor}\">{}</text>",
            num(x),
            num(y),
            num(size),
            escape(content)
        );
    }

    pub fn vertical_text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        self.indent();
        let _ = writeln!(
            self.out,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 {x} {y})\">{}</text>",
            num(size),
            escape(content),
            x = num(x),
            y = num(y)
        );
    }

    fn finish_element(&mut self, name: &str, title: Option<&str>) {
        match title {
            Some(t) => {
                let _ = writeln!(self.out, "><title>{}</title></{name}>", escape(t));
            }
            None => self.out.push_str("/>\n"),
        }
    }

    pub fn finish(mut self) -> String {
        debug_assert_eq!(self.depth, 1, "unbalanced groups");
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scale {
    pub d0: f64,
    pub d1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl Scale {
    /// A zero-width domain is widened to one unit so the map stays defined.
    pub fn new(d0: f64, d1: f64, r0: f64, r1: f64) -> Self {
        let (d0, d1) = if d1 > d0 { (d0, d1) } else { (d0 - 0.5, d0 + 0.5) };
        Scale { d0, d1, r0, r1 }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }

    /// Tick positions on the 1-2-5 step giving closest to `target` intervals.
    pub fn ticks(&self, target: usize) -> Vec<f64> {
        let span = self.d1 - self.d0;
        let target = target.max(1) as f64;
        let mag = 10f64.powf((span / target).log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .into_iter()
            .map(|m| m * mag)
            .min_by(|a, b| ((span / a - target).abs()).total_cmp(&(span / b - target).abs()))
            .expect("candidate steps");
        let first = (self.d0 / step).ceil() as i64;
        let last = (self.d1 / step).floor() as i64;
        (first..=last).map(|i| i as f64 * step).collect()
    }
}

pub(crate) fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Plot area of one panel in figure pixels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

pub(crate) struct Axes<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
}

/// Frame, ticks, labels and title of one panel.
pub(crate) fn draw_axes(svg: &mut Svg, f: Frame, xs: &Scale, ys: &Scale, axes: &Axes) {
    svg.outline(f.x, f.y, f.w, f.h);
    let bottom = f.y + f.h;
    for t in xs.ticks(5) {
        let x = xs.map(t);
        svg.line("tick", x, bottom, x, bottom + 4.0, "#444444", 0.8, false, None);
        svg.text(x, bottom + 14.0, 9.0, "middle", &tick_label(t));
    }
    for t in ys.ticks(4) {
        let y = ys.map(t);
        svg.line("tick", f.x - 4.0, y, f.x, y, "#444444", 0.8, false, None);
        svg.text(f.x - 6.0, y + 3.0, 9.0, "end", &tick_label(t));
    }
    if !axes.title.is_empty() {
        svg.text(f.x + f.w / 2.0, f.y - 8.0, 11.0, "middle", axes.title);
    }
    if !axes.xlabel.is_empty() {
        svg.text(f.x + f.w / 2.0, bottom + 30.0, 10.0, "middle", axes.xlabel);
    }
    if !axes.ylabel.is_empty() {
        svg.vertical_text(f.x - 36.0, f.y + f.h / 2.0, 10.0, axes.ylabel);
    }
}

/// Colour swatches with labels, stacked from (x, y).
pub(crate) fn legend(svg: &mut Svg, x: f64, y: f64, entries: &[(String, &str)]) {
    svg.open_group("legend");
    for (i, (label, fill)) in entries.iter().enumerate() {
        let ly = y + i as f64 * 14.0;
        svg.rect("swatch", x, ly - 8.0, 10.0, 10.0, fill, 1.0, None);
        svg.text(x + 14.0, ly + 1.0, 9.0, "start", label);
    }
    svg.close_group();
}
