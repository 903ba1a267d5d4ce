//! Deterministic SVG charts: line plots for trend logs and capacity
//! curves, paired bar charts for score histograms, and 2-D scatter plots.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::eval::{HISTOGRAM_COLUMNS, TREND_COLUMNS};
use crate::table::Table;
use crate::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Trend,
    Histogram,
    CapacityCurve,
    Scatter,
}

impl PlotKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "trend" => PlotKind::Trend,
            "histogram" => PlotKind::Histogram,
            "capacity-curve" => PlotKind::CapacityCurve,
            "scatter" => PlotKind::Scatter,
            _ => return None,
        })
    }
}

/// Scatter point roles; drawn in this order.
pub const GROUP_POOL: f64 = 0.0;
pub const GROUP_GENERATED: f64 = 1.0;
pub const GROUP_LABELED: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub svg: String,
    pub warnings: Vec<String>,
}

fn f(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return Frame {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            };
        }
        let widen = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        f(W / 2.0),
        escape(title)
    );
}

fn axes(out: &mut String, fr: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{p}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{p}" y1="{t}" x2="{p}" y2="{b}"/></g>"#,
        p = f(PAD),
        b = f(H - PAD),
        r = f(W - PAD),
        t = f(PAD)
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = fr.x0 + t * (fr.x1 - fr.x0);
        let yv = fr.y0 + t * (fr.y1 - fr.y0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            f(fr.px(xv)),
            f(H - PAD + 16.0),
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            f(PAD - 6.0),
            f(fr.py(yv) + 4.0),
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        f(W / 2.0),
        f(H - 14.0),
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(ylabel),
        y = f(H / 2.0)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn legend(out: &mut String, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            f(W - PAD - 150.0),
            f(y - 9.0),
            PALETTE[i % PALETTE.len()],
            f(W - PAD - 135.0),
            f(y),
            escape(name)
        );
    }
}

/// Polylines sharing one frame.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let fr = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &fr, xlabel, ylabel);
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", f(fr.px(x)), f(fr.py(y))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    legend(
        &mut out,
        &series.iter().map(|s| s.name.clone()).collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}

/// One bar per `(lo, hi, count)`; heights are proportional to counts.
pub fn bar_chart(title: &str, xlabel: &str, bars: &[(f64, f64, f64)], color: &str) -> String {
    let fr = Frame::fit(
        bars.iter()
            .flat_map(|&(lo, hi, c)| [(lo, 0.0), (hi, c)])
            .chain(std::iter::once((0.0, 0.0)).filter(|_| bars.is_empty())),
    );
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &fr, xlabel, "count");
    for &(lo, hi, c) in bars {
        let x = fr.px(lo);
        let w = (fr.px(hi) - x).max(1.0);
        let y = fr.py(c);
        let _ = writeln!(
            out,
            r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{color}" data-count="{c}"/>"#,
            f(x),
            f(y),
            f(w),
            f(fr.py(fr.y0) - y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Points `(x, y, color index, radius)`.
pub fn scatter(title: &str, points: &[(f64, f64, &str, f64)]) -> String {
    let fr = Frame::fit(points.iter().map(|p| (p.0, p.1)));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &fr, "x1", "x2");
    for &(x, y, color, r) in points {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="{}" fill="{color}" fill-opacity="0.7"/>"#,
                f(fr.px(x)),
                f(fr.py(y)),
                f(r)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Blue (low) to red (high) on `t ∈ [0, 1]`.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let r = (40.0 + 215.0 * t).round() as u8;
    let b = (255.0 - 215.0 * t).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    let i = t.column(name).expect("required column");
    t.rows.iter().map(|r| r[i]).collect()
}

/// Render the named inputs as one chart of `kind`.
pub fn render(kind: PlotKind, inputs: &[(String, Table)]) -> Result<Rendered> {
    if inputs.is_empty() {
        return Err(Error::Config("plot needs at least one input".into()));
    }
    let mut warnings = Vec::new();
    let require = |t: &Table, name: &str, cols: &[&str]| -> Result<()> {
        let missing: Vec<&str> = cols
            .iter()
            .copied()
            .filter(|c| t.column(c).is_none())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema {
                line: 1,
                message: format!(
                    "{name}: missing column(s) {}; found {}",
                    missing.join(", "),
                    t.header.join(", ")
                ),
            })
        }
    };
    for (name, t) in inputs {
        if t.rows.is_empty() {
            warnings.push(format!("{name}: no rows; drawing axes only"));
        }
    }
    let svg = match kind {
        PlotKind::Trend => {
            let mut series = Vec::new();
            for (name, t) in inputs {
                require(t, name, &TREND_COLUMNS[..2])?;
                let x = column(t, "step");
                let y = column(t, "mean_gold");
                series.push(Series {
                    name: name.clone(),
                    points: x.into_iter().zip(y).collect(),
                });
            }
            line_chart(
                "mean GOLD of generated samples",
                "step",
                "mean GOLD",
                &series,
            )
        }
        PlotKind::CapacityCurve => {
            let mut series = Vec::new();
            for (name, t) in inputs {
                if t.header.len() < 2 {
                    return Err(Error::Schema {
                        line: 1,
                        message: format!("{name}: need an x column and at least one series column"),
                    });
                }
                let xs: Vec<f64> = t.rows.iter().map(|r| r[0]).collect();
                for (j, col) in t.header.iter().enumerate().skip(1) {
                    let label = if inputs.len() == 1 {
                        col.clone()
                    } else {
                        format!("{name}:{col}")
                    };
                    series.push(Series {
                        name: label,
                        points: xs
                            .iter()
                            .copied()
                            .zip(t.rows.iter().map(|r| r[j]))
                            .collect(),
                    });
                }
            }
            line_chart(
                "fitting capacity",
                &inputs[0].1.header[0],
                "accuracy",
                &series,
            )
        }
        PlotKind::Histogram => {
            let (name, t) = &inputs[0];
            require(t, name, &HISTOGRAM_COLUMNS)?;
            if inputs.len() > 1 {
                warnings.push("histogram uses only the first input".into());
            }
            let bars = |term: &str| -> Vec<(f64, f64, f64)> {
                let lo = column(t, &format!("{term}_lo"));
                let hi = column(t, &format!("{term}_hi"));
                let c = column(t, &format!("{term}_count"));
                lo.into_iter()
                    .zip(hi)
                    .zip(c)
                    .map(|((a, b), c)| (a, b, c))
                    .collect()
            };
            let m = bar_chart("marginal term", "value", &bars("marginal"), PALETTE[0]);
            let c = bar_chart(
                "conditional term",
                "value",
                &bars("conditional"),
                PALETTE[1],
            );
            side_by_side(&m, &c)
        }
        PlotKind::Scatter => {
            let mut pts = Vec::new();
            let mut colors: Vec<String> = Vec::new();
            for (name, t) in inputs {
                require(t, name, &["x1", "x2"])?;
                let x1 = column(t, "x1");
                let x2 = column(t, "x2");
                let class = t.column("class").map(|_| column(t, "class"));
                let group = t.column("group").map(|_| column(t, "group"));
                let score = t.column("score").map(|_| column(t, "score"));
                let (lo, hi) = score.as_ref().map_or((0.0, 1.0), |s| {
                    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (lo, if hi > lo { hi } else { lo + 1.0 })
                });
                let mut rows: Vec<usize> = (0..x1.len()).collect();
                // pool first, labeled on top
                rows.sort_by(|&a, &b| {
                    let ga = group.as_ref().map_or(0.0, |g| g[a]);
                    let gb = group.as_ref().map_or(0.0, |g| g[b]);
                    ga.total_cmp(&gb).then(a.cmp(&b))
                });
                for i in rows {
                    let g = group.as_ref().map_or(GROUP_GENERATED, |g| g[i]);
                    let color = match (&score, g) {
                        (Some(s), g) if g == GROUP_POOL => ramp((s[i] - lo) / (hi - lo)),
                        _ => PALETTE
                            [class.as_ref().map_or(0, |c| c[i].max(0.0) as usize) % PALETTE.len()]
                        .to_string(),
                    };
                    let r = if g == GROUP_LABELED { 6.0 } else { 2.5 };
                    colors.push(color);
                    pts.push((x1[i], x2[i], r));
                }
            }
            let refs: Vec<(f64, f64, &str, f64)> = pts
                .iter()
                .zip(&colors)
                .map(|(&(x, y, r), c)| (x, y, c.as_str(), r))
                .collect();
            scatter("samples", &refs)
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Rendered { svg, warnings })
}

/// Two charts next to each other in one document.
fn side_by_side(a: &str, b: &str) -> String {
    let inner = |s: &str| {
        s.lines()
            .skip(1)
            .filter(|l| *l != "</svg>")
            .collect::<Vec<_>>()
            .join("\n")
    };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{H}\" viewBox=\"0 0 {} {H}\">\n<g>\n{}\n</g>\n<g transform=\"translate({W} 0)\">\n{}\n</g>\n</svg>\n",
        2.0 * W,
        2.0 * W,
        inner(a),
        inner(b)
    )
}
