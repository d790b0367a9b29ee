//! Deterministic table and plot emission: CSV with 17 significant digits
//! and LF endings, hand-rolled standalone SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use symlab_core::Error;

/// Canonical decimal form: 17 significant digits; `v + 0.0` folds -0.0
/// into 0.0 so identical runs are byte-identical.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let mut text = self.header.join(",");
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(path, text)
            .map_err(|e| Error::parameter("out", format!("cannot write {path:?}: {e}")))
    }
}

/// One named curve of (x, y) samples.
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Minimal log-log/linear line plot; axes annotated with min/max only.
pub fn line_plot(
    path: &Path,
    title: &str,
    curves: &[Curve],
    log_x: bool,
    log_y: bool,
) -> Result<(), Error> {
    let (w, h) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let tx = |v: f64| if log_x { v.max(1e-300).log10() } else { v };
    let ty = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in curves {
        for &(x, y) in &c.points {
            xs.push(tx(x));
            ys.push(ty(y));
        }
    }
    if xs.is_empty() {
        return Ok(());
    }
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |v: f64| ml + (v - x0) / (x1 - x0) * (w - ml - mr);
    let py = |v: f64| h - mb - (v - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        w / 2.0
    );
    let _ = write!(
        svg,
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    );
    for (lab, v, anchor_x, anchor_y) in [
        (fmt_axis(x0, log_x), (ml, h - mb + 20.0), "start", false),
        (fmt_axis(x1, log_x), (w - mr, h - mb + 20.0), "end", false),
        (fmt_axis(y0, log_y), (ml - 6.0, h - mb), "end", true),
        (fmt_axis(y1, log_y), (ml - 6.0, mt + 4.0), "end", true),
    ] {
        let _ = anchor_y;
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor_x}\">{lab}</text>\n",
            v.0, v.1
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(tx(x)), py(ty(y))))
            .collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            pts.join(" "),
            w - mr - 150.0,
            mt + 16.0 * (i as f64 + 1.0),
            c.name
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
        .map_err(|e| Error::parameter("out", format!("cannot write {path:?}: {e}")))
}

/// Scatter of labelled 2-D points; used for the block atlas (rank colours).
pub fn atlas_plot(path: &Path, title: &str, points: &[(f64, f64, usize)]) -> Result<(), Error> {
    let (w, h) = (560.0, 560.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 40.0, 40.0);
    if points.is_empty() {
        return Ok(());
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |v: f64| ml + (v - x0) / (x1 - x0) * (w - ml - mr);
    let py = |v: f64| h - mb - (v - y0) / (y1 - y0) * (h - mt - mb);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        w / 2.0
    );
    for &(x, y, rank) in points {
        let color = PALETTE[rank % PALETTE.len()];
        let _ = write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"2.4\" height=\"2.4\" fill=\"{color}\"/>\n",
            px(x) - 1.2,
            py(y) - 1.2
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
        .map_err(|e| Error::parameter("out", format!("cannot write {path:?}: {e}")))
}

fn span(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-300 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn fmt_axis(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else {
        format!("{v:.3}")
    }
}
