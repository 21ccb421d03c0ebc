//! Deterministic SVG line plots. Pure string assembly from numeric
//! tables: identical input produces byte-identical output, so plots are
//! diffable artifacts like the CSVs next to them.

use std::fmt::Write as FmtWrite;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    /// (x, y) pairs; rendered in the order given.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Renders the series to a complete SVG document. Every series must be
/// nonempty; with log_y all y values must be positive.
pub fn emit_plot(spec: &PlotSpec, series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("plot needs at least one series".into()));
    }
    for s in series {
        if s.points.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "series {:?} has no points",
                s.name
            )));
        }
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "series {:?} contains a non-finite point ({x}, {y})",
                    s.name
                )));
            }
            if spec.log_y && y <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "series {:?} has y = {y}, which a log axis cannot show",
                    s.name
                )));
            }
        }
    }

    let ty = |y: f64| if spec.log_y { y.log10() } else { y };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(ty(y));
            y_max = y_max.max(ty(y));
        }
    }
    if x_max == x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max == y_min {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - (ty(y) - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // frame and axis labels
    write!(
        svg,
        "<rect x=\"{}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(plot_w),
        fmt(plot_h)
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{}</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        escape(&spec.title)
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{}</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(HEIGHT - 12.0),
        escape(&spec.x_label)
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0),
        escape(&spec.y_label)
    )
    .unwrap();

    // tick marks: 5 per axis, value labels in the data scale
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let x_pix = MARGIN_L + f * plot_w;
        let y_pix = MARGIN_T + plot_h - f * plot_h;
        write!(
            svg,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            fmt(x_pix),
            fmt(MARGIN_T + plot_h),
            fmt(MARGIN_T + plot_h + 5.0)
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            fmt(x_pix),
            fmt(MARGIN_T + plot_h + 18.0),
            tick_label(xv)
        )
        .unwrap();
        write!(
            svg,
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n",
            fmt(y_pix),
            fmt(MARGIN_L - 5.0),
            fmt(MARGIN_L)
        )
        .unwrap();
        let shown = if spec.log_y { 10f64.powf(yv) } else { yv };
        write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(y_pix + 4.0),
            tick_label(shown)
        )
        .unwrap();
    }

    // series: polyline plus circle markers, legend at the right
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", fmt(px(x)), fmt(py(y))))
                .collect();
            write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            )
            .unwrap();
        }
        for &(x, y) in &s.points {
            write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                fmt(px(x)),
                fmt(py(y))
            )
            .unwrap();
        }
        let ly = MARGIN_T + 14.0 + 18.0 * k as f64;
        write!(
            svg,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\" \
             stroke-width=\"1.5\"/>\n",
            fmt(WIDTH - MARGIN_R + 10.0),
            fmt(ly),
            fmt(WIDTH - MARGIN_R + 34.0)
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            fmt(WIDTH - MARGIN_R + 40.0),
            fmt(ly + 4.0),
            escape(&s.name)
        )
        .unwrap();
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
