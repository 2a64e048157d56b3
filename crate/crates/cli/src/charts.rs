//! Minimal self-contained SVG charts. Output depends only on the inputs.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 90.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, xr: (f64, f64), yr: (f64, f64)) -> Self {
        let widen = |r: (f64, f64)| if r.1 - r.0 > 1e-12 { r } else { (r.0 - 0.5, r.1 + 0.5) };
        Self { x0, y0, w, h, xr: widen(xr), yr: widen(yr) }
    }

    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, s: &mut String, xlabel: &str, ylabel: &str, xticks: bool) {
        let (bx, by) = (self.y0 + self.h, self.x0);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        for i in 0..=4 {
            let v = self.yr.0 + (self.yr.1 - self.yr.0) * i as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, by, by + self.w);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, by - 6.0, y + 4.0, tick(v));
        }
        if xticks {
            for i in 0..=4 {
                let v = self.xr.0 + (self.xr.1 - self.xr.0) * i as f64 / 4.0;
                let x = self.x(v);
                let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, bx + 16.0, tick(v));
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            self.x0 + self.w / 2.0,
            bx + 40.0,
            esc(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            self.x0 - 48.0,
            self.y0 + self.h / 2.0,
            self.x0 - 48.0,
            self.y0 + self.h / 2.0,
            esc(ylabel)
        );
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn open(s: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="28" font-size="15" text-anchor="middle">{}</text>"#, width / 2.0, esc(title));
}

fn legend(s: &mut String, x: f64, y: f64, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        let yy = y + i as f64 * 18.0;
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#, yy - 10.0, color(i));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{yy:.2}" font-size="11">{}</text>"#, x + 18.0, esc(n));
    }
}

/// Mean with optional standard error; `None` draws nothing.
pub type Bar = Option<(f64, Option<f64>)>;

/// Grouped bars with ±1 SE whiskers.
pub fn bar_chart(title: &str, ylabel: &str, categories: &[String], series: &[(String, Vec<Bar>)]) -> String {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    for (_, bars) in series {
        for (m, se) in bars.iter().flatten() {
            let e = se.unwrap_or(0.0);
            lo = lo.min(m - e);
            hi = hi.max(m + e);
        }
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = (hi - lo) * 0.05;
    let f = Frame::new(LEFT, TOP, W - LEFT - RIGHT, H - TOP - BOTTOM, (0.0, 1.0), (lo.min(0.0) - if lo < 0.0 { pad } else { 0.0 }, hi + pad));
    let mut s = String::new();
    open(&mut s, W, H, title);
    f.axes(&mut s, "", ylabel, false);
    let n = categories.len().max(1);
    let group_w = f.w / n as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let zero = f.y(0.0);
    for (ci, cat) in categories.iter().enumerate() {
        let gx = f.x0 + ci as f64 * group_w + group_w * 0.1;
        for (si, (_, bars)) in series.iter().enumerate() {
            if let Some(Some((m, se))) = bars.get(ci) {
                let x = gx + si as f64 * bar_w;
                let y = f.y(*m);
                let (top, height) = if y < zero { (y, zero - y) } else { (zero, y - zero) };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{height:.2}" fill="{}"/>"#,
                    bar_w * 0.9,
                    color(si)
                );
                if let Some(e) = se {
                    let cx = x + bar_w * 0.45;
                    let _ = writeln!(
                        s,
                        r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#222"/>"##,
                        f.y(m - e),
                        f.y(m + e)
                    );
                }
            }
        }
        let lx = gx + group_w * 0.4;
        let ly = f.y0 + f.h + 14.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-size="10" text-anchor="end" transform="rotate(-30 {lx:.2} {ly:.2})">{}</text>"#,
            esc(cat)
        );
    }
    let _ = writeln!(s, r##"<line x1="{:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#444"/>"##, f.x0, f.x0 + f.w);
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut s, W - RIGHT + 14.0, TOP + 12.0, &names);
    s.push_str("</svg>\n");
    s
}

pub struct ScatterPanel {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    /// (group name, points)
    pub groups: Vec<(String, Vec<(f64, f64)>)>,
    /// Large markers, e.g. group means, drawn in the group colour.
    pub markers: Vec<(usize, (f64, f64))>,
    pub fixed_range: Option<((f64, f64), (f64, f64))>,
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo.is_finite() {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (0.0, 1.0)
    }
}

/// One or more scatter panels side by side, sharing a legend.
pub fn scatter(title: &str, panels: &[ScatterPanel]) -> String {
    let pw = 300.0;
    let width = LEFT + panels.len() as f64 * (pw + LEFT) + RIGHT;
    let mut s = String::new();
    open(&mut s, width, H, title);
    let mut names = Vec::new();
    for (pi, p) in panels.iter().enumerate() {
        let (xr, yr) = p.fixed_range.unwrap_or_else(|| {
            let all = p.groups.iter().flat_map(|(_, v)| v.iter());
            (range(all.clone().map(|q| q.0)), range(all.map(|q| q.1)))
        });
        let f = Frame::new(LEFT + pi as f64 * (pw + LEFT), TOP + 14.0, pw, H - TOP - BOTTOM - 14.0, xr, yr);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#, f.x0 + pw / 2.0, TOP + 6.0, esc(&p.title));
        f.axes(&mut s, &p.xlabel, &p.ylabel, true);
        for (gi, (name, pts)) in p.groups.iter().enumerate() {
            if pi == 0 {
                names.push(name.clone());
            }
            for (x, y) in pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.55"/>"#,
                    f.x(*x),
                    f.y(*y),
                    color(gi)
                );
            }
        }
        for (gi, (x, y)) in &p.markers {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="7" fill="{}" stroke="#000" stroke-width="1.5"/>"##,
                f.x(*x),
                f.y(*y),
                color(*gi)
            );
        }
    }
    legend(&mut s, width - RIGHT + 14.0, TOP + 12.0, &names);
    s.push_str("</svg>\n");
    s
}

/// Lines over a shared x axis; `None` values break the line.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, x: &[f64], series: &[(String, Vec<Option<f64>>)], yr: (f64, f64)) -> String {
    let f = Frame::new(LEFT, TOP, W - LEFT - RIGHT, H - TOP - BOTTOM, range(x.iter().copied()), yr);
    let mut s = String::new();
    open(&mut s, W, H, title);
    f.axes(&mut s, xlabel, ylabel, true);
    for (si, (_, ys)) in series.iter().enumerate() {
        let mut seg: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, seg.join(" "), color(si));
            }
            seg.clear();
        };
        for (xv, yv) in x.iter().zip(ys) {
            match yv {
                Some(v) => {
                    seg.push(format!("{:.2},{:.2}", f.x(*xv), f.y(*v)));
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, f.x(*xv), f.y(*v), color(si));
                }
                None => flush(&mut seg, &mut s),
            }
        }
        flush(&mut seg, &mut s);
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut s, W - RIGHT + 14.0, TOP + 12.0, &names);
    s.push_str("</svg>\n");
    s
}

/// Frontier polyline in (Ũ_b, Ũ_s) space with the NBS marked, plus
/// optional reference points.
pub fn frontier_chart(title: &str, frontier: &[(f64, f64)], nbs: (f64, f64), reference: &[(f64, f64)]) -> String {
    let size = 480.0;
    let f = Frame::new(LEFT, TOP, size - LEFT - 30.0, size - TOP - BOTTOM + 20.0, (0.0, 1.0), (0.0, 1.0));
    let mut s = String::new();
    open(&mut s, size, size, title);
    f.axes(&mut s, "buyer normalized utility", "seller normalized utility", true);
    for (x, y) in reference {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#999"/>"##, f.x(*x), f.y(*y));
    }
    let pts: Vec<String> = frontier.iter().map(|(x, y)| format!("{:.2},{:.2}", f.x(*x), f.y(*y))).collect();
    let _ = writeln!(s, r##"<polyline class="frontier" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, pts.join(" "));
    let _ = writeln!(
        s,
        r##"<circle class="nbs" cx="{:.2}" cy="{:.2}" r="6" fill="#d62728" stroke="#000"/>"##,
        f.x(nbs.0),
        f.y(nbs.1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">NBS ({:.3}, {:.3})</text>"#,
        f.x(nbs.0) + 9.0,
        f.y(nbs.1) - 8.0,
        nbs.0,
        nbs.1
    );
    s.push_str("</svg>\n");
    s
}
