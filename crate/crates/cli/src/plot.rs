//! Minimal SVG line/point charts: estimated points with error bars and
//! dashed analytic curves.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Markers,
    Dashed,
    Solid,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub style: Style,
    /// Index into the colour palette, so a curve and its estimate can match.
    pub color: usize,
    pub points: Vec<(f64, f64)>,
    /// Half-height of the error bar at each point.
    pub errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Tick positions at a 1-2-5 spacing covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                if !(x.is_finite() && y.is_finite()) {
                    continue;
                }
                let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                b = (b.0.min(x), b.1.max(x), b.2.min(y - e), b.3.max(y + e));
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let d = if hi > lo { (hi - lo) * 0.05 } else { 0.5 };
            (lo - d, hi + d)
        };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        (x0, x1, y0, y1)
    }

    /// Renders the figure; `timestamp` (Unix seconds) is embedded as a comment when given.
    pub fn to_svg(&self, timestamp: Option<u64>) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        if let Some(t) = timestamp {
            let _ = writeln!(out, "<!-- generated at unix time {t} -->");
        }
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 16.0,
                label(t)
            );
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[s.color % PALETTE.len()];
            match s.style {
                Style::Markers => {
                    for (i, &(x, y)) in s.points.iter().enumerate() {
                        if !(x.is_finite() && y.is_finite()) {
                            continue;
                        }
                        if let Some(e) = s.errors.as_ref().map(|e| e[i]).filter(|e| *e > 0.0) {
                            let _ = writeln!(
                                out,
                                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                                sx(x),
                                sy(y - e),
                                sx(x),
                                sy(y + e)
                            );
                        }
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
                Style::Dashed | Style::Solid => {
                    // break the polyline wherever the curve is undefined
                    let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let mut run: Vec<String> = Vec::new();
                    let flush = |run: &mut Vec<String>, out: &mut String| {
                        if run.len() > 1 {
                            let _ = writeln!(
                                out,
                                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                                run.join(" ")
                            );
                        }
                        run.clear();
                    };
                    for &(x, y) in &s.points {
                        if x.is_finite() && y.is_finite() {
                            run.push(format!("{:.2},{:.2}", sx(x), sy(y)));
                        } else {
                            flush(&mut run, &mut out);
                        }
                    }
                    flush(&mut run, &mut out);
                }
            }
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let swatch = match s.style {
                Style::Markers => format!(r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, lx + 10.0, ly - 4.0),
                Style::Dashed => format!(
                    r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                    ly - 4.0,
                    lx + 20.0,
                    ly - 4.0
                ),
                Style::Solid => format!(
                    r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    ly - 4.0,
                    lx + 20.0,
                    ly - 4.0
                ),
            };
            let _ = writeln!(out, "{swatch}<text x=\"{:.2}\" y=\"{ly:.2}\">{}</text>", lx + 26.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure() -> Figure {
        Figure {
            title: "t".into(),
            x_label: "p".into(),
            y_label: "tau".into(),
            series: vec![
                Series {
                    label: "estimate".into(),
                    style: Style::Markers,
                    color: 0,
                    points: vec![(0.0, -1.0), (1.0, 0.0), (2.0, f64::NAN)],
                    errors: Some(vec![0.1, 0.1, 0.1]),
                },
                Series {
                    label: "theory".into(),
                    style: Style::Dashed,
                    color: 0,
                    points: vec![(0.0, -1.0), (1.0, 0.0), (1.5, f64::NAN), (2.0, 0.5), (3.0, 0.7)],
                    errors: None,
                },
            ],
        }
    }

    #[test]
    fn timestamp_only_when_requested() {
        let f = figure();
        assert!(!f.to_svg(None).contains("generated"));
        assert!(f.to_svg(Some(42)).contains("<!-- generated at unix time 42 -->"));
        assert_eq!(f.to_svg(None), f.to_svg(None));
    }

    #[test]
    fn undefined_points_split_curves() {
        let svg = figure().to_svg(None);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 3);
        // two finite markers plus one legend swatch
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn ticks_cover_range() {
        assert_eq!(ticks(0.0, 6.0), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(label(-0.0), "0");
        assert_eq!(label(0.25), "0.25");
    }
}
