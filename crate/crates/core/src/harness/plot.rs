//! Self-contained SVG line charts of normalized score against env steps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{Algorithm, RunConfig};
use super::metrics::read_metrics;
use super::train::CONFIG_FILE;
use crate::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One legend entry; several runs (seeds) share it and form a band.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub runs: Vec<Vec<(f64, f64)>>,
}

impl Series {
    /// Per-index `(x, mean, min, max)` over the runs, truncated to the
    /// shortest run.
    pub fn envelope(&self) -> Vec<(f64, f64, f64, f64)> {
        let n = self.runs.iter().map(Vec::len).min().unwrap_or(0);
        (0..n)
            .map(|i| {
                let xs = self.runs.iter().map(|r| r[i].0);
                let ys: Vec<f64> = self.runs.iter().map(|r| r[i].1).collect();
                let k = ys.len() as f64;
                (
                    xs.sum::<f64>() / k,
                    ys.iter().sum::<f64>() / k,
                    ys.iter().copied().fold(f64::INFINITY, f64::min),
                    ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            })
            .collect()
    }
}

/// Legend label of a metrics file, taken from the run config next to it.
pub fn label_for(metrics: &Path) -> String {
    let dir = metrics.parent().unwrap_or(Path::new("."));
    if let Ok(c) = RunConfig::from_file(&dir.join(CONFIG_FILE)) {
        let n = if c.n_trajectories == 0 {
            String::new()
        } else {
            format!(" n={}", c.n_trajectories)
        };
        return match c.algo {
            Algorithm::Wdail => format!("wdail {}{n}", c.adversary.reward_shape),
            algo => format!("{algo}{n}"),
        };
    }
    match metrics.file_stem().and_then(|s| s.to_str()) {
        Some("metrics") | None => dir.file_name().and_then(|s| s.to_str()).unwrap_or("run").to_string(),
        Some(stem) => stem.to_string(),
    }
}

/// Read every metrics file, group runs by label and write the chart.
pub fn emit_plot(metrics: &[PathBuf], out: &Path) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::Invalid("plot needs at least one metrics file".into()));
    }
    let mut groups: BTreeMap<String, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    let mut order = Vec::new();
    for path in metrics {
        let rows = read_metrics(path)?;
        let label = label_for(path);
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        groups
            .entry(label)
            .or_default()
            .push(rows.iter().map(|r| (r.env_steps as f64, r.normalized_score)).collect());
    }
    let series: Vec<Series> = order
        .into_iter()
        .map(|label| Series {
            runs: groups.remove(&label).unwrap_or_default(),
            label,
        })
        .collect();
    std::fs::write(out, render_svg(&series, "normalized score vs environment steps"))
        .map_err(|e| Error::io(format!("writing {}", out.display()), e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(range: f64, ticks: f64) -> f64 {
    let raw = range / ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Render the chart. The y range always covers `[0, 1]`.
pub fn render_svg(series: &[Series], title: &str) -> String {
    let envs: Vec<Vec<(f64, f64, f64, f64)>> = series.iter().map(Series::envelope).collect();
    let pts = envs.iter().flatten();
    let x_max = pts.clone().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let y_min = pts.clone().map(|p| p.2).fold(0.0, f64::min);
    let y_max = pts.map(|p| p.3).fold(1.0, f64::max);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * pw;
    let sy = |y: f64| TOP + (y_max - y) / (y_max - y_min) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));

    let xs = nice_step(x_max, 5.0);
    let mut x = 0.0;
    while x <= x_max + 1e-9 {
        let px = sx(x);
        let _ = writeln!(s, r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/>"##, TOP, TOP + ph);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, x);
        x += xs;
    }
    let ys = nice_step(y_max - y_min, 5.0);
    let mut y = (y_min / ys).ceil() * ys;
    while y <= y_max + 1e-9 {
        let py = sy(y);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#, LEFT - 6.0, py + 4.0, y);
        y += ys;
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">environment steps</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">normalized score</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, (ser, env)) in series.iter().zip(&envs).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if ser.runs.len() > 1 && !env.is_empty() {
            let upper = env.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.3)));
            let lower = env.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.2)));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" "));
        }
        let line: Vec<String> = env.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        if line.len() == 1 {
            let p = env[0];
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(p.0), sy(p.1));
        } else if !line.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0);
        let runs = if ser.runs.len() > 1 {
            format!(" ({} runs)", ser.runs.len())
        } else {
            String::new()
        };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}{runs}</text>"#, lx + 26.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_two_runs() {
        let s = Series {
            label: "a".into(),
            runs: vec![vec![(0.0, 0.0), (10.0, 1.0)], vec![(0.0, 0.5), (10.0, 0.5), (20.0, 0.9)]],
        };
        assert_eq!(s.envelope(), vec![(0.0, 0.25, 0.0, 0.5), (10.0, 0.75, 0.5, 1.0)]);
    }

    #[test]
    fn svg_has_axes_legend_and_band() {
        let one = Series {
            label: "x<y".into(),
            runs: vec![vec![(0.0, 0.1), (5.0, 0.4)]],
        };
        let svg = render_svg(&[one.clone()], "t");
        assert!(svg.contains("environment steps") && svg.contains("normalized score"));
        assert!(svg.contains("x&lt;y"));
        assert!(!svg.contains("<polygon"));
        let banded = Series {
            runs: vec![one.runs[0].clone(), vec![(0.0, 0.3), (5.0, 0.2)]],
            ..one
        };
        let svg2 = render_svg(&[banded], "t");
        assert_eq!(svg2.matches("<polygon").count(), 1);
        assert_eq!(svg2, render_svg(&[Series { label: "x<y".into(), runs: vec![vec![(0.0, 0.1), (5.0, 0.4)], vec![(0.0, 0.3), (5.0, 0.2)]] }], "t"));
    }
}
