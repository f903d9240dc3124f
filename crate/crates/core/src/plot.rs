//! Minimal SVG rendering: line and scatter charts and a heatmap.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 56.0;
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
    /// Line with a marker at each point.
    LinePoints,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    /// Overrides the palette.
    pub color: Option<&'static str>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self {
            label: label.into(),
            points,
            style,
            color: None,
        }
    }

    pub fn colored(mut self, color: &'static str) -> Self {
        self.color = Some(color);
        self
    }
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, fixed: Option<(f64, f64)>) -> Self {
        let (lo, hi) = fixed.unwrap_or_else(|| {
            let (lo, hi) = values
                .filter(|v| v.is_finite() && (!log || *v > 0.0))
                .map(|v| if log { v.log10() } else { v })
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                return (0.0, 1.0);
            }
            let pad = if hi > lo { 0.04 * (hi - lo) } else { 0.5 };
            let (lo, hi) = (lo - pad, hi + pad);
            if log {
                (10f64.powf(lo), 10f64.powf(hi))
            } else {
                (lo, hi)
            }
        });
        let (lo, hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
        Self { lo, hi, log }
    }

    /// Position in `[0, 1]`, or `None` for values a log axis cannot show.
    fn unit(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let step = ((b - a) / 8).max(1);
            return (a..=b)
                .step_by(step as usize)
                .map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}")))
                .collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut v = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while v <= self.hi + 1e-9 * span {
            out.push(((v - self.lo) / span, label(v, step)));
            v += step;
        }
        out
    }
}

fn label(v: f64, step: f64) -> String {
    if v.abs() < 1e-12 * step {
        return "0".into();
    }
    if step >= 1.0 && v.abs() < 1e6 {
        format!("{v:.0}")
    } else if step >= 1e-3 && v.abs() < 1e6 {
        let digits = (-step.log10().floor()) as usize;
        format!("{v:.digits$}")
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(svg: &mut String, title: &str) {
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
}

fn frame(svg: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (pw, ph) = (WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B);
    writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for (u, text) in x.ticks() {
        let px = MARGIN_L + u * pw;
        let py = MARGIN_T + ph;
        writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{py}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{text}</text>"#,
            py + 5.0,
            py + 19.0
        )
        .unwrap();
    }
    for (u, text) in y.ticks() {
        let py = MARGIN_T + (1.0 - u) * ph;
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_L}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"#,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            py + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    )
    .unwrap();
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let x = Axis::fit(all().map(|p| p.0), false, self.x_range);
        let y = Axis::fit(all().map(|p| p.1), self.log_y, self.y_range);
        let (pw, ph) = (WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B);
        let map = |p: &(f64, f64)| -> Option<(f64, f64)> {
            let (u, v) = (x.unit(p.0)?, y.unit(p.1)?);
            Some((MARGIN_L + u * pw, MARGIN_T + (1.0 - v) * ph))
        };

        let mut svg = String::new();
        header(&mut svg, &self.title);
        frame(&mut svg, &x, &y, &self.x_label, &self.y_label);
        writeln!(
            svg,
            r#"<clipPath id="plot"><rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}"/></clipPath><g clip-path="url(#plot)">"#
        )
        .unwrap();
        for (i, s) in self.series.iter().enumerate() {
            let color = s.color.unwrap_or(PALETTE[i % PALETTE.len()]);
            let pts: Vec<(f64, f64)> = s.points.iter().filter_map(map).collect();
            if matches!(s.style, Style::Line | Style::LinePoints) && pts.len() > 1 {
                let mut d = String::new();
                for (j, (px, py)) in pts.iter().enumerate() {
                    write!(d, "{}{px:.2},{py:.2}", if j == 0 { "M" } else { " L" }).unwrap();
                }
                writeln!(svg, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.4"/>"#).unwrap();
            }
            if matches!(s.style, Style::Points | Style::LinePoints) {
                for (px, py) in &pts {
                    writeln!(svg, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.2" fill="{color}"/>"#).unwrap();
                }
            }
        }
        svg.push_str("</g>\n");
        let labelled = self.series.iter().enumerate().filter(|(_, s)| !s.label.is_empty());
        for (slot, (i, s)) in labelled.enumerate() {
            let ly = MARGIN_T + 16.0 + 16.0 * slot as f64;
            let lx = WIDTH - MARGIN_R - 170.0;
            writeln!(
                svg,
                r#"<line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
                ly - 4.0,
                lx + 18.0,
                ly - 4.0,
                s.color.unwrap_or(PALETTE[i % PALETTE.len()]),
                lx + 24.0,
                escape(&s.label)
            )
            .unwrap();
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Values on a regular `rows × cols` grid, row 0 at the bottom.
#[derive(Clone, Debug)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Diverging blue-white-red scale on `[-1, 1]`.
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * (1.0 - v.abs()) + c * v.abs()).round() as u8;
    let (r, g, b) = if v >= 0.0 {
        (fade(178.0), fade(24.0), fade(43.0))
    } else {
        (fade(33.0), fade(102.0), fade(172.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

impl Heatmap {
    pub fn to_svg(&self) -> String {
        let x = Axis::fit(std::iter::empty(), false, Some(self.x_range));
        let y = Axis::fit(std::iter::empty(), false, Some(self.y_range));
        let (pw, ph) = (WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let (cw, ch) = (pw / self.cols as f64, ph / self.rows as f64);

        let mut svg = String::new();
        header(&mut svg, &self.title);
        svg.push_str(r#"<g shape-rendering="crispEdges">"#);
        svg.push('\n');
        for r in 0..self.rows {
            let py = MARGIN_T + ph - (r + 1) as f64 * ch;
            for c in 0..self.cols {
                let fill = diverging(self.values[r * self.cols + c] / scale);
                if fill != "#ffffff" {
                    writeln!(
                        svg,
                        r#"<rect x="{:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                        MARGIN_L + c as f64 * cw,
                        cw + 0.05,
                        ch + 0.05
                    )
                    .unwrap();
                }
            }
        }
        svg.push_str("</g>\n");
        frame(&mut svg, &x, &y, &self.x_label, &self.y_label);
        svg.push_str("</svg>\n");
        svg
    }
}
