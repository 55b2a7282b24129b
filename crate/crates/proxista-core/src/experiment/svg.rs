//! Minimal hand-emitted SVG line charts: axes, ticks, legend, optional log-y,
//! optional vertical marker lines. No plotting dependency; output is
//! deterministic for fixed input.

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Dashed vertical marker lines (data coordinates), e.g. threshold
    /// breakpoints.
    pub vlines: Vec<f64>,
}

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
/// Cap on polyline vertices per series; longer series are strided down.
const MAX_POINTS: usize = 2000;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() || s == "-" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.1e}")
    }
}

/// Renders a line chart; returns the SVG document as a string.
pub fn line_chart(spec: &ChartSpec) -> String {
    let transform_y = |y: f64| if spec.log_y { y.log10() } else { y };
    let usable = |y: f64| !spec.log_y || y > 0.0;

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in &spec.series {
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() || !usable(y) {
                continue;
            }
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            let ty = transform_y(y);
            y_min = y_min.min(ty);
            y_max = y_max.max(ty);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }
    let pad = 0.04 * (y_max - y_min);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |ty: f64| MARGIN_T + (y_hi - ty) / (y_hi - y_lo) * plot_h;

    let mut out = String::with_capacity(16 * 1024);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        escape(&spec.title)
    ));

    // frame
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    ));

    // ticks
    let n_ticks = 5;
    for i in 0..=n_ticks {
        let fx = x_min + (x_max - x_min) * i as f64 / n_ticks as f64;
        let x = px(fx);
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
            MARGIN_T,
            MARGIN_T + plot_h
        ));
        out.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_T + plot_h + 18.0,
            fmt_tick(fx)
        ));
    }
    for i in 0..=n_ticks {
        let ty = y_lo + (y_hi - y_lo) * i as f64 / n_ticks as f64;
        let y = py(ty);
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
            MARGIN_L + plot_w
        ));
        let label = if spec.log_y {
            format!("1e{}", fmt_tick(ty))
        } else {
            fmt_tick(ty)
        };
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_L - 6.0,
            y + 4.0
        ));
    }

    // axis labels
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(&spec.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&spec.y_label)
    ));

    // vertical markers
    for &v in &spec.vlines {
        if v < x_min || v > x_max {
            continue;
        }
        let x = px(v);
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{MARGIN_T}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#999\" \
             stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n",
            MARGIN_T + plot_h
        ));
    }

    // series
    for (idx, s) in spec.series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|&(x, y)| x.is_finite() && y.is_finite() && usable(y))
            .collect();
        let stride = pts.len().div_ceil(MAX_POINTS).max(1);
        let mut path = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            if i % stride != 0 && i != pts.len() - 1 {
                continue;
            }
            let cmd = if path.is_empty() { 'M' } else { 'L' };
            path.push_str(&format!("{cmd}{:.2} {:.2} ", px(x), py(transform_y(y))));
        }
        if !path.is_empty() {
            out.push_str(&format!(
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                path.trim_end()
            ));
        }
        // legend entry
        let ly = MARGIN_T + 16.0 + 20.0 * idx as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        out.push_str(&format!(
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }

    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
