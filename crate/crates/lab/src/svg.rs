//! Minimal deterministic line plots. No styling knobs: the point is a
//! byte-stable artifact that diffs clean across reruns and worker counts.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
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

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Fixed-precision coordinate text; plenty below a pixel.
fn coord(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 0.01 && v.abs() < 10000.0 {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
}

/// Ticks at 1/2/5 times a power of ten covering [lo, hi].
fn linear_axis(mut lo: f64, mut hi: f64) -> Axis {
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut v = first;
    while v <= hi + 1e-9 * step {
        ticks.push(v);
        v += step;
    }
    Axis { lo, hi, ticks }
}

pub fn render_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_y: bool,
) -> Result<String> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            if log_y && y <= 0.0 {
                return Err(Error::invalid(format!(
                    "log plot got nonpositive value {y} in series {:?}",
                    s.label
                )));
            }
            xs.push(x);
            ys.push(if log_y { y.log10() } else { y });
        }
    }
    if xs.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let fold = |v: &[f64], init: f64, f: fn(f64, f64) -> f64| v.iter().fold(init, |a, &b| f(a, b));
    let x_axis = linear_axis(
        fold(&xs, f64::INFINITY, f64::min),
        fold(&xs, f64::NEG_INFINITY, f64::max),
    );
    let y_axis = linear_axis(
        fold(&ys, f64::INFINITY, f64::min),
        fold(&ys, f64::NEG_INFINITY, f64::max),
    );

    let px = |x: f64| MARGIN_L + (x - x_axis.lo) / (x_axis.hi - x_axis.lo) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_axis.lo) / (y_axis.hi - y_axis.lo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        coord(WIDTH / 2.0),
        escape(title)
    ));

    for &t in &x_axis.ticks {
        let x = px(t);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#dddddd\"/>\n",
            coord(x),
            coord(MARGIN_T),
            coord(HEIGHT - MARGIN_B)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            coord(x),
            coord(HEIGHT - MARGIN_B + 16.0),
            tick_label(t)
        ));
    }
    for &t in &y_axis.ticks {
        let y = py(t);
        out.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#dddddd\"/>\n",
            coord(y),
            coord(MARGIN_L),
            coord(WIDTH - MARGIN_R)
        ));
        let label = if log_y {
            format!("1e{}", tick_label(t))
        } else {
            tick_label(t)
        };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            coord(MARGIN_L - 6.0),
            coord(y + 4.0),
            label
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        coord(MARGIN_L),
        coord(MARGIN_T),
        coord(WIDTH - MARGIN_L - MARGIN_R),
        coord(HEIGHT - MARGIN_T - MARGIN_B)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n",
        coord((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        coord(HEIGHT - 12.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        coord((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
        coord((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
        escape(y_label)
    ));

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
            .map(|&(x, y)| {
                let yy = if log_y { y.log10() } else { y };
                format!("{},{}", coord(px(x)), coord(py(yy)))
            })
            .collect();
        if pts.len() > 1 {
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        }
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            out.push_str(&format!(
                "<circle cx=\"{x}\" cy=\"{y}\" r=\"2.5\" fill=\"{color}\"/>\n"
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             fill=\"{color}\">{}</text>\n",
            coord(WIDTH - MARGIN_R - 150.0),
            coord(MARGIN_T + 16.0 + 14.0 * si as f64),
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_y: bool,
) -> Result<()> {
    let text = render_plot(title, x_label, y_label, series, log_y)?;
    crate::output::write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Vec<Series> {
        vec![
            Series::new("a", vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.25)]),
            Series::new("b", vec![(1.0, 2.0), (2.0, 2.5)]),
        ]
    }

    #[test]
    fn rendering_is_byte_stable() {
        let one = render_plot("t", "x", "y", &demo(), false).unwrap();
        let two = render_plot("t", "x", "y", &demo(), false).unwrap();
        assert_eq!(one, two);
        assert!(one.starts_with("<svg"));
        assert!(one.ends_with("</svg>\n"));
    }

    #[test]
    fn log_scale_rejects_nonpositive_values() {
        let s = vec![Series::new("bad", vec![(1.0, 0.0)])];
        assert!(render_plot("t", "x", "y", &s, true).is_err());
        assert!(render_plot("t", "x", "y", &demo(), true).is_ok());
    }

    #[test]
    fn markup_in_labels_is_escaped() {
        let s = vec![Series::new("<raw&>", vec![(0.0, 1.0), (1.0, 2.0)])];
        let svg = render_plot("a<b", "x", "y", &s, false).unwrap();
        assert!(svg.contains("&lt;raw&amp;&gt;"));
        assert!(!svg.contains("<raw"));
    }
}
