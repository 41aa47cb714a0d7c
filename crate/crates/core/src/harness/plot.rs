//! Deterministic SVG learning curves.
//!
//! Each plot group carries its axis mapping as attributes,
//! `px = data-ax * x + data-bx` and `py = data-ay * y + data-by`, so a reader
//! can map any coordinate back to data space.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{read_glob, temp_path, MetricsRecord};
use crate::algorithms::Algorithm;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Return,
    Cost,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Return => "return",
            Metric::Cost => "cost",
        }
    }

    fn value(self, r: &MetricsRecord) -> f64 {
        match self {
            Metric::Return => r.exact_return,
            Metric::Cost => r.exact_cost,
        }
    }
}

fn color(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::C3po => "#1b6ac9",
        Algorithm::P3o => "#d9822b",
        Algorithm::PpoLag => "#2e9e5b",
        Algorithm::Ppo => "#b03a48",
    }
}

/// One algorithm's curve: `(x, mean, min, max)` per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub algorithm: Algorithm,
    pub points: Vec<(f64, f64, f64, f64)>,
}

/// Per-iteration mean and min–max band over the runs of one algorithm.
pub fn series(runs: &[&[MetricsRecord]], metric: Metric) -> Vec<Series> {
    let mut by_alg: BTreeMap<Algorithm, BTreeMap<usize, Vec<(f64, f64)>>> = BTreeMap::new();
    for rows in runs {
        for r in rows.iter() {
            by_alg
                .entry(r.algorithm)
                .or_default()
                .entry(r.iteration)
                .or_default()
                .push((r.env_steps as f64, metric.value(r)));
        }
    }
    by_alg
        .into_iter()
        .map(|(algorithm, iters)| Series {
            algorithm,
            points: iters
                .into_values()
                .map(|vals| {
                    let n = vals.len() as f64;
                    let x = vals.iter().map(|v| v.0).sum::<f64>() / n;
                    let ys = vals.iter().map(|v| v.1);
                    let mean = ys.clone().sum::<f64>() / n;
                    let lo = ys.clone().fold(f64::INFINITY, f64::min);
                    let hi = ys.fold(f64::NEG_INFINITY, f64::max);
                    (x, mean, lo, hi)
                })
                .collect(),
        })
        .collect()
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = 0.5 * lo.abs().max(1e-3);
        (lo - pad, hi + pad)
    }
}

fn fmt_num(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e5 || x.abs() < 1e-3) {
        format!("{x:.2e}")
    } else {
        format!("{x:.3}")
    }
}

/// Renders one SVG document.
pub fn render_svg(title: &str, metric: Metric, series: &[Series], threshold: Option<f64>) -> String {
    let finite = |v: f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let ys = series
        .iter()
        .flat_map(|s| s.points.iter().flat_map(|p| [p.2, p.3]))
        .chain(threshold)
        .filter(|v| finite(*v));
    let (y_lo, y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (x0, x1) = if x_hi > x_lo { (x_lo, x_hi) } else { padded(x_lo, x_hi) };
    let (y0, y1) = padded(y_lo, y_hi);

    let ax = (WIDTH - LEFT - RIGHT) / (x1 - x0);
    let bx = LEFT - ax * x0;
    let ay = -(HEIGHT - TOP - BOTTOM) / (y1 - y0);
    let by = TOP - ay * y1;
    let px = |x: f64| ax * x + bx;
    let py = |y: f64| ay * y + by;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g class="plot" data-metric="{}" data-ax="{ax:e}" data-bx="{bx:e}" data-ay="{ay:e}" data-by="{by:e}">"#,
        metric.name()
    );
    let (left, right, top, bottom) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r##"<path class="axes" d="M{left:.3},{top:.3} L{left:.3},{bottom:.3} L{right:.3},{bottom:.3}" fill="none" stroke="#333"/>"##
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text class="xtick" x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            px(xv),
            bottom + 16.0,
            fmt_num(xv)
        );
        let _ = writeln!(
            s,
            r#"<text class="ytick" x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 4.0,
            fmt_num(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">environment steps</text>"#,
        (left + right) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.3}" text-anchor="middle" transform="rotate(-90 16 {:.3})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        metric.name()
    );
    for ser in series {
        let c = color(ser.algorithm);
        let pts: Vec<_> = ser
            .points
            .iter()
            .filter(|p| finite(p.1) && finite(p.2) && finite(p.3))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for (i, p) in pts.iter().enumerate() {
            let _ = write!(band, "{}{:.3},{:.3} ", if i == 0 { "M" } else { "L" }, px(p.0), py(p.3));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "L{:.3},{:.3} ", px(p.0), py(p.2));
        }
        band.push('Z');
        let _ = writeln!(
            s,
            r#"<path class="band" data-algorithm="{}" d="{band}" fill="{c}" fill-opacity="0.18" stroke="none"/>"#,
            ser.algorithm
        );
        let mut line = String::new();
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{}{:.3},{:.3}", if i == 0 { "M" } else { "L" }, px(p.0), py(p.1));
        }
        let _ = writeln!(
            s,
            r#"<path class="mean" data-algorithm="{}" d="{line}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            ser.algorithm
        );
    }
    if let Some(d) = threshold.filter(|d| finite(*d)) {
        let _ = writeln!(
            s,
            r##"<line class="threshold" data-value="{d:e}" x1="{left:.3}" y1="{:.6}" x2="{right:.3}" y2="{:.6}" stroke="#000" stroke-dasharray="5,4"/>"##,
            py(d),
            py(d)
        );
    }
    s.push_str("</g>\n");
    for (i, ser) in series.iter().enumerate() {
        let y = TOP + 14.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="{}" stroke-width="2"/>"#,
            x + 18.0,
            color(ser.algorithm)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}">{}</text>"#,
            x + 24.0,
            y + 4.0,
            ser.algorithm
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `{env}_return.svg` and `{env}_cost.svg` for every environment found
/// in the files matching `pattern`. Nothing is written if no file matches.
pub fn plot(pattern: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let runs = read_glob(pattern)?;
    let mut by_env: BTreeMap<String, Vec<&[MetricsRecord]>> = BTreeMap::new();
    for (path, rows) in &runs {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty(format!("{} has no rows", path.display())))?;
        by_env.entry(first.env.clone()).or_default().push(rows);
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (env, rows) in &by_env {
        let threshold = rows[0][0].threshold;
        for metric in [Metric::Return, Metric::Cost] {
            let svg = render_svg(
                &format!("{env}: {}", metric.name()),
                metric,
                &series(rows, metric),
                (metric == Metric::Cost).then_some(threshold),
            );
            let path = out_dir.join(format!("{env}_{}.svg", metric.name()));
            let tmp = temp_path(&path);
            fs::write(&tmp, svg)?;
            fs::rename(&tmp, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_line_inverts_to_d() {
        let ser = vec![Series {
            algorithm: Algorithm::C3po,
            points: vec![(100.0, 0.1, 0.05, 0.2), (200.0, 0.12, 0.1, 0.14)],
        }];
        let svg = render_svg("t", Metric::Cost, &ser, Some(0.15));
        let attr = |name: &str| -> f64 {
            let key = format!("{name}=\"");
            let start = svg.find(&key).unwrap() + key.len();
            svg[start..start + svg[start..].find('"').unwrap()].parse().unwrap()
        };
        let (ay, by, y1) = (attr("data-ay"), attr("data-by"), attr("y1"));
        assert!(((y1 - by) / ay - 0.15).abs() < 1e-6);
    }
}
