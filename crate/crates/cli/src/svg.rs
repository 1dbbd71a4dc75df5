//! Deterministic, self-contained SVG charts (fixed 800x500 viewBox, inline
//! styles, no timestamps) so outputs are diffable golden files.

use auctionlab_core::{JointBidDistribution, Marginal};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 56.0;

pub const PALETTE: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
    /// Optional half-width of a vertical error bar per point.
    pub error_bars: Option<Vec<f64>>,
}

impl Series {
    pub fn line(label: impl Into<String>, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            color,
            dashed: false,
            points,
            error_bars: None,
        }
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn nice_step(range: f64) -> f64 {
    if range <= 0.0 {
        return 1.0;
    }
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= hi + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_hi - self.x_lo).max(1e-12);
        MARGIN_LEFT + (v - self.x_lo) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_hi - self.y_lo).max(1e-12);
        HEIGHT - MARGIN_BOTTOM - (v - self.y_lo) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn open_svg(out: &mut String, title: &str) {
    out.push_str(&format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif">
<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>
<text x="{:.2}" y="24" text-anchor="middle" font-size="16" fill="#222222">{}</text>
"##,
        WIDTH / 2.0,
        escape(title)
    ));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    out.push_str(&format!(
        r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="#333333" stroke-width="1"/>
<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="#333333" stroke-width="1"/>
"##
    ));
    for t in ticks(frame.x_lo, frame.x_hi) {
        let x = frame.x(t);
        out.push_str(&format!(
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>
<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11" fill="#333333">{}</text>
"##,
            y0 + 5.0,
            y0 + 18.0,
            fmt(t)
        ));
    }
    for t in ticks(frame.y_lo, frame.y_hi) {
        let y = frame.y(t);
        out.push_str(&format!(
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#333333" stroke-width="1"/>
<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11" fill="#333333">{}</text>
"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            fmt(t)
        ));
    }
    out.push_str(&format!(
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13" fill="#222222">{}</text>
<text x="16" y="{:.2}" text-anchor="middle" font-size="13" fill="#222222" transform="rotate(-90 16 {:.2})">{}</text>
"##,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        escape(y_label)
    ));
}

fn draw_legend(out: &mut String, series: &[Series]) {
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 8.0 + 18.0 * k as f64;
        let x = WIDTH - MARGIN_RIGHT - 170.0;
        let dash = if s.dashed { r##" stroke-dasharray="6 4""## } else { "" };
        out.push_str(&format!(
            r##"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/>
<text x="{:.2}" y="{:.2}" font-size="12" fill="#222222">{}</text>
"##,
            x + 26.0,
            s.color,
            x + 32.0,
            y + 4.0,
            escape(&s.label)
        ));
    }
}

fn downsample(points: &[(f64, f64)], cap: usize) -> Vec<(f64, f64)> {
    if points.len() <= cap {
        return points.to_vec();
    }
    let stride = points.len() as f64 / cap as f64;
    let mut out: Vec<(f64, f64)> = (0..cap)
        .map(|k| points[(k as f64 * stride) as usize])
        .collect();
    out.push(*points.last().unwrap());
    out
}

/// Multi-series line chart with optional error bars and dashed overlays.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut x_lo = f64::MAX;
    let mut x_hi = f64::MIN;
    let mut y_lo = f64::MAX;
    let mut y_hi = f64::MIN;
    for s in series {
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let e = s.error_bars.as_ref().map_or(0.0, |eb| eb[i]);
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y - e);
            y_hi = y_hi.max(y + e);
        }
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if (y_hi - y_lo).abs() < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = (y_hi - y_lo) * 0.05;
    let frame = Frame {
        x_lo,
        x_hi,
        y_lo: y_lo - pad,
        y_hi: y_hi + pad,
    };

    let mut out = String::new();
    open_svg(&mut out, title);
    draw_axes(&mut out, &frame, x_label, y_label);
    for s in series {
        let pts = downsample(&s.points, 1600);
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        let dash = if s.dashed { r##" stroke-dasharray="6 4""## } else { "" };
        out.push_str(&format!(
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>
"##,
            path.join(" "),
            s.color
        ));
        if let Some(bars) = &s.error_bars {
            for (&(x, y), &e) in s.points.iter().zip(bars) {
                if e > 0.0 {
                    let (px, py0, py1) = (frame.x(x), frame.y(y - e), frame.y(y + e));
                    out.push_str(&format!(
                        r##"<line x1="{px:.2}" y1="{py0:.2}" x2="{px:.2}" y2="{py1:.2}" stroke="{}" stroke-width="1"/>
"##,
                        s.color
                    ));
                }
            }
            for &(x, y) in &s.points {
                out.push_str(&format!(
                    r##"<circle cx="{:.2}" cy="{:.2}" r="2.4" fill="{}"/>
"##,
                    frame.x(x),
                    frame.y(y),
                    s.color
                ));
            }
        }
    }
    draw_legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Overlaid bid-marginal histograms.
pub fn histogram(title: &str, x_label: &str, bars: &[(String, &'static str, Marginal)]) -> String {
    let x_hi = bars
        .iter()
        .map(|(_, _, m)| m.grid().max_bid())
        .fold(0.0f64, f64::max);
    let y_hi = bars
        .iter()
        .flat_map(|(_, _, m)| m.probs().iter().copied())
        .fold(0.0f64, f64::max);
    let frame = Frame {
        x_lo: 0.0,
        x_hi,
        y_lo: 0.0,
        y_hi: (y_hi * 1.08).max(1e-9),
    };
    let mut out = String::new();
    open_svg(&mut out, title);
    draw_axes(&mut out, &frame, x_label, "probability");
    for (_, color, m) in bars {
        let eps = m.grid().epsilon();
        let w = (frame.x(eps) - frame.x(0.0)).max(0.8);
        for (k, &p) in m.probs().iter().enumerate() {
            if p > 0.0 {
                let x = frame.x(m.grid().money(k)) - w / 2.0;
                let y = frame.y(p);
                let h = frame.y(0.0) - y;
                out.push_str(&format!(
                    r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{color}" fill-opacity="0.55"/>
"##
                ));
            }
        }
    }
    let legend: Vec<Series> = bars
        .iter()
        .map(|(label, color, _)| Series::line(label.clone(), color, vec![]))
        .collect();
    draw_legend(&mut out, &legend);
    out.push_str("</svg>\n");
    out
}

fn heat_color(t: f64) -> String {
    // white -> deep blue
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| a + (b - a) * t;
    format!(
        "rgb({},{},{})",
        lerp(247.0, 8.0).round(),
        lerp(251.0, 48.0).round(),
        lerp(255.0, 107.0).round()
    )
}

/// Joint bid density map (two-player tables).
pub fn heatmap(title: &str, joint: &JointBidDistribution) -> String {
    assert_eq!(joint.num_players(), 2);
    let ga = joint.grids()[0];
    let gb = joint.grids()[1];
    let frame = Frame {
        x_lo: 0.0,
        x_hi: ga.max_bid(),
        y_lo: 0.0,
        y_hi: gb.max_bid(),
    };
    let p_max = joint.probs().iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let mut out = String::new();
    open_svg(&mut out, title);
    draw_axes(&mut out, &frame, "bid of agent 1", "bid of agent 2");
    let w = (frame.x(ga.epsilon()) - frame.x(0.0)).max(0.8);
    let h = (frame.y(0.0) - frame.y(gb.epsilon())).max(0.8);
    for i in 0..ga.levels() {
        for j in 0..gb.levels() {
            let p = joint.prob2(i, j);
            if p > 0.0 {
                let x = frame.x(ga.money(i)) - w / 2.0;
                let y = frame.y(gb.money(j)) - h / 2.0;
                out.push_str(&format!(
                    r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{}"/>
"##,
                    heat_color((p / p_max).sqrt())
                ));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
