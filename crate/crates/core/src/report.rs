//! SVG and CSV rendering of discrete and fitted efficiency curves.
//!
//! Output is a pure function of the inputs: fixed canvas, fixed axes
//! ([0, 100] on both), fixed number formatting.

use std::fmt::Write as _;

use thiserror::Error;

use crate::curve::{CurveModel, EfficiencyPoint};

pub const CURVE_SAMPLES: usize = 200;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Svg,
    Csv,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svg" => Ok(ReportFormat::Svg),
            "csv" => Ok(ReportFormat::Csv),
            "both" => Ok(ReportFormat::Both),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no points to plot")]
    NoPoints,
    #[error("query {0} must lie strictly between 0 and 100")]
    QueryOutOfRange(f64),
    #[error("point ({x}, {y}) lies outside [0, 100] x [0, 100]")]
    PointOutOfRange { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSpec {
    pub points: Vec<EfficiencyPoint>,
    pub model: Option<CurveModel>,
    /// Exact-match targets; each reachable one gets a pair of guide lines.
    pub queries: Vec<f64>,
}

/// A guide from the y axis to the curve and down to the x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guide {
    pub exact_match: f64,
    pub subset_percent: f64,
}

impl ReportSpec {
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.points.is_empty() {
            return Err(ReportError::NoPoints);
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_valid()) {
            return Err(ReportError::PointOutOfRange {
                x: p.subset_percent,
                y: p.exact_match,
            });
        }
        if let Some(&q) = self.queries.iter().find(|&&q| !(q > 0.0 && q < 100.0)) {
            return Err(ReportError::QueryOutOfRange(q));
        }
        Ok(())
    }

    /// Smallest positive subset size, the left end of the fitted curve.
    fn x_min(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.subset_percent)
            .filter(|&x| x > 0.0)
            .reduce(f64::min)
            .unwrap_or(1.0)
    }

    /// `CURVE_SAMPLES` evenly spaced `(x, h(x))` on `[x_min, 100]`, with `h`
    /// clamped to [0, 100].
    pub fn curve_samples(&self) -> Vec<(f64, f64)> {
        let Some(model) = &self.model else {
            return Vec::new();
        };
        let x0 = self.x_min();
        let step = (100.0 - x0) / (CURVE_SAMPLES - 1) as f64;
        (0..CURVE_SAMPLES)
            .map(|i| {
                let x = if i == CURVE_SAMPLES - 1 { 100.0 } else { x0 + step * i as f64 };
                (x, model.value(x).clamp(0.0, 100.0))
            })
            .collect()
    }

    /// Queries the model reaches within the plotted range.
    pub fn guides(&self) -> Vec<Guide> {
        let Some(model) = &self.model else {
            return Vec::new();
        };
        self.queries
            .iter()
            .filter_map(|&y| {
                let inv = model.invert(y).ok()?;
                (!inv.exceeds_full_data).then_some(Guide {
                    exact_match: y,
                    subset_percent: inv.subset_percent,
                })
            })
            .collect()
    }
}

fn px(x: f64) -> f64 {
    LEFT + x / 100.0 * (WIDTH - LEFT - RIGHT)
}

fn py(y: f64) -> f64 {
    HEIGHT - BOTTOM - y / 100.0 * (HEIGHT - TOP - BOTTOM)
}

pub fn render_svg(spec: &ReportSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        px(0.0),
        py(0.0),
        px(100.0),
        py(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        px(0.0),
        py(0.0),
        px(0.0),
        py(100.0)
    );
    s.push_str("</g>\n");

    s.push_str("<g class=\"ticks\" fill=\"black\">\n");
    for t in (0..=100).step_by(20) {
        let t = f64::from(t);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            px(t),
            py(0.0) + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"#,
            px(0.0) - 8.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">target subset (%)</text>"#,
        px(50.0),
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">exact match (%)</text>"#,
        py(50.0),
        py(50.0)
    );
    s.push_str("</g>\n");

    let guides = spec.guides();
    if !guides.is_empty() {
        s.push_str(
            "<g class=\"guides\" stroke=\"red\" stroke-width=\"1\" stroke-dasharray=\"4 4\">\n",
        );
        for g in &guides {
            let (gx, gy) = (px(g.subset_percent), py(g.exact_match));
            let _ = writeln!(
                s,
                r#"<line class="guide" x1="{:.2}" y1="{gy:.2}" x2="{gx:.2}" y2="{gy:.2}"/>"#,
                px(0.0)
            );
            let _ = writeln!(
                s,
                r#"<line class="guide" x1="{gx:.2}" y1="{gy:.2}" x2="{gx:.2}" y2="{:.2}"/>"#,
                py(0.0)
            );
        }
        s.push_str("</g>\n");
    }

    let samples = spec.curve_samples();
    if !samples.is_empty() {
        let coords: Vec<String> = samples
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
    }

    s.push_str("<g class=\"points\" fill=\"black\">\n");
    for p in &spec.points {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3"/>"#,
            px(p.subset_percent),
            py(p.exact_match)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// Long-format CSV: `series,x,y` with `discrete` points, `continuous`
/// curve samples and one `query` row per guide.
pub fn render_csv(spec: &ReportSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let mut s = String::from("series,x,y\n");
    for p in &spec.points {
        let _ = writeln!(s, "discrete,{},{}", p.subset_percent, p.exact_match);
    }
    for (x, y) in spec.curve_samples() {
        let _ = writeln!(s, "continuous,{x},{y}");
    }
    for g in spec.guides() {
        let _ = writeln!(s, "query,{},{}", g.subset_percent, g.exact_match);
    }
    Ok(s)
}
