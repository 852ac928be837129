//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    out: String,
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>
"#,
            W / 2.0,
            escape(title),
            W / 2.0,
            H - 15.0,
            escape(xlabel),
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        let mut f = Frame { x: pad(x), y: pad(y), out };
        f.axes();
        f
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(self.out, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
        for k in 0..=4 {
            let v = self.y.0 + (self.y.1 - self.y.0) * k as f64 / 4.0;
            let _ = writeln!(
                self.out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
                LEFT - 5.0,
                self.py(v) + 4.0
            );
        }
    }

    fn x_ticks(&mut self) {
        for k in 0..=4 {
            let v = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
            let _ = writeln!(
                self.out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#,
                self.px(v),
                H - BOTTOM + 16.0
            );
        }
    }

    fn vline(&mut self, x: f64, color: &str, dash: &str, label: &str) {
        let px = self.px(x);
        let _ = writeln!(
            self.out,
            r#"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{}" stroke="{color}" stroke-dasharray="{dash}" stroke-width="2"/>
<text x="{:.1}" y="{}" fill="{color}">{}</text>"#,
            H - BOTTOM,
            px + 4.0,
            TOP + 12.0,
            escape(label)
        );
    }

    fn hline(&mut self, y: f64) {
        let py = self.py(y);
        let _ = writeln!(
            self.out,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#888" stroke-dasharray="3,3"/>"##,
            W - RIGHT
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Bars with dashed mean and dotted median markers.
pub fn histogram(title: &str, xlabel: &str, bins: &[HistBin], mean: f64, median: f64) -> String {
    let lo = bins.first().map_or(0.0, |b| b.lo);
    let hi = bins.last().map_or(1.0, |b| b.hi);
    let ymax = bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let mut f = Frame::new(title, xlabel, "count", (lo, hi), (0.0, ymax));
    for b in bins {
        let (x0, x1) = (f.px(b.lo), f.px(b.hi));
        let y = f.py(b.count as f64);
        let _ = writeln!(
            f.out,
            r##"<rect x="{x0:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#7f9fbf" stroke="white"/>"##,
            (x1 - x0).max(0.5),
            H - BOTTOM - y
        );
    }
    f.x_ticks();
    if mean.is_finite() {
        f.vline(mean, "#ff7f0e", "8,4", &format!("mean {mean:.3}"));
    }
    if median.is_finite() {
        f.vline(median, "black", "2,3", &format!("median {median:.3}"));
    }
    f.finish()
}

pub struct Dot {
    pub label: String,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

/// Point estimates with interval whiskers, one column per label.
pub fn dot_ci(title: &str, xlabel: &str, ylabel: &str, dots: &[Dot]) -> String {
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let ys: Vec<f64> = dots.iter().flat_map(|d| [d.low, d.high, d.estimate, 0.0]).filter_map(finite).collect();
    let ylo = ys.iter().copied().fold(0.0, f64::min);
    let yhi = ys.iter().copied().fold(0.0, f64::max);
    let n = dots.len().max(1) as f64;
    let mut f = Frame::new(title, xlabel, ylabel, (-0.5, n - 0.5), (ylo, yhi));
    f.hline(0.0);
    for (i, d) in dots.iter().enumerate() {
        let x = f.px(i as f64);
        if d.low.is_finite() && d.high.is_finite() {
            let _ = writeln!(
                f.out,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                f.py(d.low),
                f.py(d.high)
            );
        }
        let _ = writeln!(
            f.out,
            r#"<circle cx="{x:.1}" cy="{:.1}" r="4" fill="{}"/>
<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.py(d.estimate),
            PALETTE[0],
            H - BOTTOM + 16.0,
            escape(&d.label)
        );
    }
    f.finish()
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub fn lines(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let xlo = pts().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xhi = pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ylo = pts().map(|p| p.1).fold(f64::INFINITY, f64::min).min(0.0);
    let yhi = pts().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).max(1.0);
    let (xlo, xhi) = if xlo.is_finite() { (xlo, xhi) } else { (0.0, 1.0) };
    let mut f = Frame::new(title, xlabel, ylabel, (xlo, xhi), (ylo, yhi));
    f.x_ticks();
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .enumerate()
            .map(|(i, p)| format!("{}{:.1},{:.1}", if i == 0 { "M" } else { "L" }, f.px(p.0), f.py(p.1)))
            .collect();
        let _ = writeln!(
            f.out,
            r#"<path d="{}" stroke="{color}" fill="none" stroke-width="2"/>
<text x="{}" y="{}" fill="{color}">{}</text>"#,
            d.join(" "),
            W - RIGHT - 120.0,
            TOP + 14.0 * (k as f64 + 1.0),
            escape(&s.name)
        );
    }
    f.finish()
}
