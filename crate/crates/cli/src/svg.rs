//! Minimal static SVG line plots: one polyline per series, point markers
//! and dashed horizontal reference lines.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;
/// Polylines are thinned to at most this many vertices.
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub enum Marker {
    Circle(f64, f64),
    Cross(f64, f64),
}

/// Dashed line at `y`, drawn in the colour of series `series`.
pub struct RefLine {
    pub y: f64,
    pub series: usize,
}

#[derive(Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
    pub ref_lines: Vec<RefLine>,
    /// Same scale on both axes.
    pub equal_aspect: bool,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        let w = 0.5 * (1.0 + lo.abs());
        return (lo - w, hi + w);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    if finite.len() <= MAX_POINTS {
        return finite;
    }
    let stride = finite.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = finite.iter().step_by(stride).copied().collect();
    if let Some(&last) = finite.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Figure {
    fn frame(&self) -> Frame {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y);
            }
        }
        for m in &self.markers {
            let (Marker::Circle(x, y) | Marker::Cross(x, y)) = *m;
            xs.push(x);
            ys.push(y);
        }
        ys.extend(self.ref_lines.iter().map(|r| r.y));
        let range = |v: &[f64]| {
            v.iter()
                .filter(|a| a.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)))
        };
        let (x0, x1) = padded(range(&xs).0, range(&xs).1);
        let (y0, y1) = padded(range(&ys).0, range(&ys).1);
        let mut f = Frame { x0, x1, y0, y1 };
        if self.equal_aspect {
            let sx = (f.x1 - f.x0) / (WIDTH - 2.0 * MARGIN);
            let sy = (f.y1 - f.y0) / (HEIGHT - 2.0 * MARGIN);
            let s = sx.max(sy);
            let (cx, cy) = (0.5 * (f.x0 + f.x1), 0.5 * (f.y0 + f.y1));
            let (hw, hh) = (0.5 * s * (WIDTH - 2.0 * MARGIN), 0.5 * s * (HEIGHT - 2.0 * MARGIN));
            f = Frame {
                x0: cx - hw,
                x1: cx + hw,
                y0: cy - hh,
                y1: cy + hh,
            };
        }
        f
    }

    pub fn to_svg(&self) -> String {
        let f = self.frame();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        self.axes(&f, &mut s);

        for r in &self.ref_lines {
            let y = f.py(r.y);
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="1" stroke-dasharray="6 4"/>"#,
                WIDTH - MARGIN,
                PALETTE[r.series % PALETTE.len()]
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut pts = String::new();
            for (x, y) in thin(&series.points) {
                let _ = write!(pts, "{:.2},{:.2} ", f.px(x), f.py(y));
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
                pts.trim_end(),
                escape(&series.name)
            );
        }
        for m in &self.markers {
            match *m {
                Marker::Circle(x, y) => {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="black" stroke-width="1.5"/>"#,
                        f.px(x),
                        f.py(y)
                    );
                }
                Marker::Cross(x, y) => {
                    let (cx, cy, d) = (f.px(x), f.py(y), 6.0);
                    let _ = writeln!(
                        s,
                        r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="black" stroke-width="2"/>"#,
                        cx - d,
                        cy - d,
                        cx + d,
                        cy + d,
                        cx - d,
                        cy + d,
                        cx + d,
                        cy - d
                    );
                }
            }
        }
        self.legend(&mut s);
        s.push_str("</svg>\n");
        s
    }

    fn axes(&self, f: &Frame, s: &mut String) {
        let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        );
        for k in 0..=5 {
            let a = k as f64 / 5.0;
            let (xv, yv) = (f.x0 + a * (f.x1 - f.x0), f.y0 + a * (f.y1 - f.y0));
            let (px, py) = (f.px(xv), f.py(yv));
            let _ = writeln!(
                s,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                HEIGHT - MARGIN + 18.0,
                tick_label(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN - 6.0,
                py + 4.0,
                tick_label(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 20.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
    }

    fn legend(&self, s: &mut String) {
        for (k, series) in self.series.iter().enumerate() {
            let y = MARGIN + 14.0 + 16.0 * k as f64;
            let x = WIDTH - MARGIN - 110.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{:.1}" width="14" height="4" fill="{}"/><text x="{}" y="{:.1}">{}</text>"#,
                y - 4.0,
                PALETTE[k % PALETTE.len()],
                x + 20.0,
                y,
                escape(&series.name)
            );
        }
    }
}
