//! Self-contained SVG line charts drawn from the batch CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::output::{AGENTS_EVOLUTION_HEADER, RECOMMENDER_Q_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    AgentsEvolution,
    RecommenderQ,
}

impl ChartKind {
    pub fn name(self) -> &'static str {
        match self {
            ChartKind::AgentsEvolution => "agents_evolution",
            ChartKind::RecommenderQ => "recommender_q",
        }
    }

    fn header(self) -> &'static str {
        match self {
            ChartKind::AgentsEvolution => AGENTS_EVOLUTION_HEADER,
            ChartKind::RecommenderQ => RECOMMENDER_Q_HEADER,
        }
    }
}

impl FromStr for ChartKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agents_evolution" => Ok(ChartKind::AgentsEvolution),
            "recommender_q" => Ok(ChartKind::RecommenderQ),
            other => Err(SimError::Chart(format!(
                "unknown chart kind `{other}` (expected agents_evolution or recommender_q)"
            ))),
        }
    }
}

/// A named sequence of `(x, y)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn parse_field(v: &str, line: usize, col: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| SimError::Chart(format!("line {line}: `{v}` in column {col} is not a number")))
}

/// Parses CSV text of the given kind into plottable series.
pub fn parse_series(text: &str, kind: ChartKind) -> Result<Vec<Series>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| SimError::Chart("empty CSV".into()))?;
    if header.trim() != kind.header() {
        return Err(SimError::Chart(format!(
            "header `{}` does not match the {} schema `{}`",
            header.trim(),
            kind.name(),
            kind.header()
        )));
    }
    let width = kind.header().split(',').count();
    let mut series: Vec<Series> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(SimError::Chart(format!(
                "line {lineno}: expected {width} fields, found {}",
                fields.len()
            )));
        }
        let x = parse_field(fields[0], lineno, "iteration")?;
        match kind {
            ChartKind::AgentsEvolution => {
                let y = parse_field(fields[1], lineno, "non_addicted")?;
                if series.is_empty() {
                    series.push(Series { name: "non_addicted".into(), points: Vec::new() });
                }
                series[0].points.push((x, y));
            }
            ChartKind::RecommenderQ => {
                let arm: usize = fields[1].trim().parse().map_err(|_| {
                    SimError::Chart(format!("line {lineno}: arm `{}` is not an index", fields[1]))
                })?;
                let y = parse_field(fields[2], lineno, "mean_q")?;
                while series.len() <= arm {
                    series.push(Series { name: format!("arm {}", series.len()), points: Vec::new() });
                }
                series[arm].points.push((x, y));
            }
        }
    }
    series.retain(|s| !s.points.is_empty());
    if series.is_empty() {
        return Err(SimError::Chart("CSV has a header but no data rows".into()));
    }
    Ok(series)
}

/// Data extent widened by 5% on each side; a degenerate extent is opened up
/// around its single value.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64) -> String {
    let rounded = (v * 1e3).round() / 1e3;
    if rounded == rounded.trunc() && rounded.abs() < 1e15 {
        format!("{}", rounded as i64)
    } else {
        format!("{rounded}")
    }
}

/// Renders series as an SVG document.
pub fn render_svg(series: &[Series], title: &str, y_label: &str) -> String {
    let (x0, x1) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        TOP / 2.0 + 6.0,
        escape(title)
    );

    // Axes and ticks.
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + plot_h,
        r = LEFT + plot_w
    );
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b5}" stroke="black"/><text x="{px:.2}" y="{bt}" text-anchor="middle">{}</text>"##,
            tick_label(xv),
            b = TOP + plot_h,
            b5 = TOP + plot_h + 5.0,
            bt = TOP + plot_h + 20.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{l5}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{lt}" y="{pyt:.2}" text-anchor="end">{}</text>"##,
            tick_label(yv),
            l5 = LEFT - 5.0,
            lt = LEFT - 8.0,
            pyt = py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{cy}" text-anchor="middle" transform="rotate(-90 20 {cy})">{}</text>"#,
        escape(y_label),
        cy = TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::with_capacity(s.points.len() * 16);
        for &(x, y) in &s.points {
            if !points.is_empty() {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>"#
        );
    }

    if series.len() > 1 {
        let lx = LEFT + plot_w + 15.0;
        for (i, s) in series.iter().enumerate() {
            let ly = TOP + 10.0 + 20.0 * i as f64;
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                svg,
                r#"<g class="legend"><rect x="{lx}" y="{}" width="14" height="4" fill="{color}"/><text x="{}" y="{}">{}</text></g>"#,
                ly - 4.0,
                lx + 20.0,
                ly + 2.0,
                escape(&s.name)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads `csv_path`, checks it against `kind`'s schema and writes an SVG to
/// `out_path`.
pub fn render_chart(csv_path: impl AsRef<Path>, kind: ChartKind, out_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let text = fs::read_to_string(csv_path).map_err(|e| SimError::io(csv_path, e))?;
    let series = parse_series(&text, kind)?;
    let (title, y_label) = match kind {
        ChartKind::AgentsEvolution => ("Evolution of agents", "non-addicted agents"),
        ChartKind::RecommenderQ => ("Q-values of the recommender", "mean Q"),
    };
    let svg = render_svg(&series, title, y_label);
    let out_path = out_path.as_ref();
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| SimError::io(parent, e))?;
    }
    fs::write(out_path, svg).map_err(|e| SimError::io(out_path, e))
}
