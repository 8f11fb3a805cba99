//! Deterministic SVG figures. Coordinates are written with two decimals so
//! identical inputs yield identical bytes.

use std::fmt::Write;

use crate::analysis::Dendrogram;

const CELL: f64 = 36.0;
const MARGIN: f64 = 110.0;
const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.2}\" height=\"{h:.2}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n\
         <title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"18\" {FONT} font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        escape(title),
        w / 2.0,
        escape(title)
    )
}

/// White-to-blue ramp; below-zero values (correlations) go white-to-red.
fn colour(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if lo < 0.0 {
        let c = 2.0 * t - 1.0;
        if c >= 0.0 {
            (255.0 * (1.0 - c), 255.0 * (1.0 - 0.6 * c), 255.0)
        } else {
            (255.0, 255.0 * (1.0 + 0.6 * c), 255.0 * (1.0 + c))
        }
    } else {
        (255.0 * (1.0 - 0.85 * t), 255.0 * (1.0 - 0.6 * t), 255.0 * (1.0 - 0.2 * t))
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Matrix heatmap. `None` cells are drawn with a hatch pattern.
pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<Option<f64>>], range: (f64, f64)) -> String {
    let w = MARGIN + CELL * cols.len() as f64 + 20.0;
    let h = MARGIN + CELL * rows.len() as f64 + 20.0;
    let mut s = open(w, h, title);
    s.push_str(
        "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" \
         patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#eeeeee\"/>\
         <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#888888\" stroke-width=\"2\"/></pattern></defs>\n",
    );
    for (j, c) in cols.iter().enumerate() {
        let x = MARGIN + CELL * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text class=\"col-label\" x=\"{x:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"start\" transform=\"rotate(-60 {x:.2} {:.2})\">{}</text>",
            MARGIN - 6.0,
            MARGIN - 6.0,
            escape(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = MARGIN + CELL * i as f64;
        let _ = writeln!(
            s,
            "<text class=\"row-label\" x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"end\">{}</text>",
            MARGIN - 6.0,
            y + CELL / 2.0 + 4.0,
            escape(r)
        );
        for (j, v) in values[i].iter().enumerate() {
            let x = MARGIN + CELL * j as f64;
            match v {
                Some(v) => {
                    let _ = writeln!(
                        s,
                        "<rect class=\"cell\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{CELL:.2}\" height=\"{CELL:.2}\" fill=\"{}\"/>\
                         <text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"9\" text-anchor=\"middle\">{v:.2}</text>",
                        colour(*v, range.0, range.1),
                        x + CELL / 2.0,
                        y + CELL / 2.0 + 3.0
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "<rect class=\"cell missing\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{CELL:.2}\" height=\"{CELL:.2}\" fill=\"url(#hatch)\"/>"
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of a dense matrix scaled to its own range.
pub fn heatmap_dense(title: &str, rows: &[String], cols: &[String], values: &[Vec<f64>]) -> String {
    let lo = values.iter().flatten().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-12);
    let wrapped: Vec<Vec<Option<f64>>> = values.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
    heatmap(title, rows, cols, &wrapped, (lo, hi))
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
    fn x(&self, v: f64) -> f64 {
        let span = (self.xr.1 - self.xr.0).max(1e-12);
        self.x0 + self.w * (v - self.xr.0) / span
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.yr.1 - self.yr.0).max(1e-12);
        self.y0 + self.h - self.h * (v - self.yr.0) / span
    }

    fn axes(&self, s: &mut String, x_label: &str, y_label: &str) {
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
            self.x0, self.y0, self.w, self.h
        );
        for (v, anchor) in [(self.xr.0, "start"), (self.xr.1, "end")] {
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"{anchor}\">{v:.2}</text>",
                self.x(v),
                self.y0 + self.h + 14.0
            );
        }
        for v in [self.yr.0, self.yr.1] {
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"end\">{v:.2}</text>",
                self.x0 - 4.0,
                self.y(v) + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{}</text>",
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 30.0,
            escape(x_label)
        );
        let (lx, ly) = (self.x0 - 34.0, self.y0 + self.h / 2.0);
        let _ = writeln!(
            s,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" {FONT} text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\">{}</text>",
            escape(y_label)
        );
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn bounds<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        (lo, if hi > lo { hi } else { lo + 1.0 })
    } else {
        (0.0, 1.0)
    }
}

/// Piecewise-constant curves; each point holds until the next one.
pub fn step_curves(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (520.0, 340.0);
    let mut s = open(w, h, title);
    let f = Frame {
        x0: 60.0,
        y0: 36.0,
        w: 320.0,
        h: 250.0,
        xr: bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| &q.0))),
        yr: bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| &q.1)).chain(std::iter::once(&0.0))),
    };
    f.axes(&mut s, x_label, y_label);
    for (i, (name, pts)) in series.iter().enumerate() {
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut d = String::new();
        for (j, &(x, y)) in pts.iter().enumerate() {
            if j == 0 {
                let _ = write!(d, "M{:.2},{:.2}", f.x(x), f.y(y));
            } else {
                let _ = write!(d, " H{:.2} V{:.2}", f.x(x), f.y(y));
            }
        }
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, "<path class=\"curve\" d=\"{d}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} fill=\"{c}\">{}</text>",
            f.x0 + f.w + 10.0,
            f.y0 + 14.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Merge tree: leaves are factors, each merge is a node at its threshold
/// height (1 at the top, 0 at the leaves).
pub fn dendrogram_svg(title: &str, d: &Dendrogram) -> String {
    let k = d.num_factors();
    let (w, h) = (80.0 + 60.0 * k as f64, 340.0);
    let mut s = open(w, h, title);
    let f = Frame { x0: 50.0, y0: 36.0, w: w - 80.0, h: 250.0, xr: (-0.5, k as f64 - 0.5), yr: (0.0, 1.0) };
    let _ = writeln!(
        s,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        f.x0,
        f.y0,
        f.x0,
        f.y0 + f.h
    );
    for v in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"end\">{v:.1}</text>", f.x0 - 4.0, f.y(v) + 4.0);
    }
    // Leaves ordered so that every cluster is contiguous: replay merges.
    let mut clusters: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    for e in &d.merges {
        let a = clusters.iter().position(|c| c.contains(&e.pair.0));
        let b = clusters.iter().position(|c| c.contains(&e.pair.1));
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                let right = clusters.remove(b);
                let a = if b < a { a - 1 } else { a };
                clusters[a].extend(right);
            }
        }
    }
    let order: Vec<usize> = clusters.into_iter().flatten().collect();
    let mut pos = vec![0.0; k];
    for (slot, &leaf) in order.iter().enumerate() {
        pos[leaf] = slot as f64;
    }
    // (x, height) of each cluster's current top, keyed by member.
    let mut top: Vec<(f64, f64)> = (0..k).map(|i| (pos[i], 0.0)).collect();
    for (slot, &leaf) in order.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text class=\"leaf\" x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{}</text>",
            f.x(slot as f64),
            f.y0 + f.h + 16.0,
            escape(&d.factor_names[leaf])
        );
    }
    for e in &d.merges {
        let (l, r) = (top[e.pair.0], top[e.pair.1]);
        let t = e.threshold;
        let _ = writeln!(
            s,
            "<path class=\"merge\" data-threshold=\"{t}\" d=\"M{:.2},{:.2} V{:.2} H{:.2} V{:.2}\" fill=\"none\" stroke=\"black\"/>",
            f.x(l.0),
            f.y(l.1),
            f.y(t),
            f.x(r.0),
            f.y(r.1)
        );
        let _ = writeln!(
            s,
            "<circle class=\"merge-node\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\"/><text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{t:.2}</text>",
            f.x((l.0 + r.0) / 2.0),
            f.y(t),
            f.x((l.0 + r.0) / 2.0),
            f.y(t) - 6.0
        );
        let joined = ((l.0 + r.0) / 2.0, t);
        for &m in e.left.iter().chain(&e.right) {
            top[m] = joined;
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Pairwise scatter plots of the columns; the diagonal shows the name.
pub fn scatter_grid(title: &str, names: &[String], columns: &[Vec<f64>]) -> String {
    let n = names.len();
    let p = 120.0;
    let size = 40.0 + p * n as f64;
    let mut s = open(size, size + 10.0, title);
    for i in 0..n {
        for j in 0..n {
            let (x0, y0) = (30.0 + p * j as f64, 36.0 + p * i as f64);
            let _ = writeln!(
                s,
                "<rect class=\"panel\" x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#999999\"/>",
                p - 10.0,
                p - 10.0
            );
            if i == j {
                let _ = writeln!(
                    s,
                    "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{}</text>",
                    x0 + (p - 10.0) / 2.0,
                    y0 + (p - 10.0) / 2.0,
                    escape(&names[i])
                );
                continue;
            }
            let f = Frame {
                x0: x0 + 4.0,
                y0: y0 + 4.0,
                w: p - 18.0,
                h: p - 18.0,
                xr: bounds(columns[j].iter()),
                yr: bounds(columns[i].iter()),
            };
            for (&x, &y) in columns[j].iter().zip(&columns[i]) {
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"#1f77b4\"/>", f.x(x), f.y(y));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
