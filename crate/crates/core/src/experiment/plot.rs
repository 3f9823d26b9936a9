//! Minimal SVG line charts for the episode metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::Phase;
use crate::error::{QasError, Result};

use super::records::{moving_average, read_episodes, EpisodeRecord};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#7f7f7f"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let (x0, x1) = bounds(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = bounds(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}" stroke="black"/>"#,
            b = TOP + ph,
            r = LEFT + pw
        );
        for k in 0..=5 {
            let f = k as f64 / 5.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b5}" stroke="black"/><text x="{px:.2}" y="{bt}" text-anchor="middle">{}</text>"#,
                tick_label(xv),
                b = TOP + ph,
                b5 = TOP + ph + 5.0,
                bt = TOP + ph + 18.0
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{l5}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{lt}" y="{py4:.2}" text-anchor="end">{}</text>"#,
                tick_label(yv),
                l5 = LEFT - 5.0,
                lt = LEFT - 8.0,
                py4 = py + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{}</text>"#,
            escape(&self.y_label),
            cy = TOP + ph / 2.0
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let dash = if i > 0 { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                escape(&s.label),
                pts.join(" ")
            );
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 150.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

pub const PLOT_FILES: [&str; 6] = [
    "train_accuracy.svg",
    "test_accuracy.svg",
    "train_gates.svg",
    "test_gates.svg",
    "train_reward.svg",
    "test_reward.svg",
];

pub struct PlotOptions {
    pub train_window: usize,
    pub test_window: usize,
    /// Overlay `y_target` on the accuracy charts.
    pub show_target: bool,
}

type Metric = (&'static str, &'static str, fn(&EpisodeRecord) -> f64);

/// Renders the six charts in memory; nothing touches the disk.
pub fn render_charts(records: &[EpisodeRecord], opts: &PlotOptions) -> Result<Vec<(&'static str, String)>> {
    if records.is_empty() {
        return Err(QasError::Input("no episode records to plot".into()));
    }
    let mut out = Vec::with_capacity(6);
    let metrics: [Metric; 3] = [
        ("accuracy", "test accuracy", |r| r.accuracy),
        ("gates", "gate count", |r| r.gates as f64),
        ("reward", "episode reward", |r| r.reward),
    ];
    for (m, (metric, y_label, get)) in metrics.iter().enumerate() {
        for (p, phase) in [Phase::Train, Phase::Test].into_iter().enumerate() {
            let window = if phase == Phase::Train { opts.train_window } else { opts.test_window };
            let rows: Vec<&EpisodeRecord> = records.iter().filter(|r| r.phase == phase).collect();
            let xs: Vec<f64> = rows.iter().map(|r| r.episode as f64).collect();
            let ys = moving_average(&rows.iter().map(|r| get(r)).collect::<Vec<_>>(), window)?;
            let mut series = vec![Series {
                label: format!("{} ({window}-episode mean)", phase.as_str()),
                points: xs.iter().copied().zip(ys).collect(),
            }];
            if *metric == "accuracy" && opts.show_target {
                series.push(Series {
                    label: "y_target".into(),
                    points: xs.iter().copied().zip(rows.iter().map(|r| r.y_target)).collect(),
                });
            }
            let chart = Chart {
                title: format!("{} {}", phase.as_str(), metric),
                x_label: "episode".into(),
                y_label: y_label.to_string(),
                series,
            };
            out.push((PLOT_FILES[2 * m + p], chart.to_svg()));
        }
    }
    Ok(out)
}

/// Reads `episodes.csv` from `run_dir` and writes the six charts into
/// `run_dir/plots`. Nothing is written if the CSV cannot be read.
pub fn emit_plots_with(run_dir: &Path, opts: &PlotOptions) -> Result<Vec<PathBuf>> {
    let records = read_episodes(&run_dir.join("episodes.csv"))?;
    let charts = render_charts(&records, opts)?;
    let dir = run_dir.join("plots");
    std::fs::create_dir_all(&dir).map_err(|e| QasError::io(&dir, e))?;
    let mut paths = Vec::with_capacity(charts.len());
    for (name, svg) in charts {
        let path = dir.join(name);
        std::fs::write(&path, svg).map_err(|e| QasError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Like [`emit_plots_with`], taking windows and the target overlay from the
/// run's `config.toml` when present.
pub fn emit_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let config_path = run_dir.join("config.toml");
    let opts = if config_path.exists() {
        let c = super::ExperimentConfig::load(&config_path)?;
        PlotOptions { train_window: c.train_smoothing, test_window: c.test_smoothing, show_target: c.adaptive }
    } else {
        PlotOptions { train_window: 40, test_window: 4, show_target: false }
    };
    emit_plots_with(run_dir, &opts)
}
