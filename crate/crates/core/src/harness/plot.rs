//! SVG figures drawn from a sweep directory's round logs.
//!
//! Every number on a figure comes from the JSONL logs; the series builders
//! are public so tests can assert on exactly what gets drawn. Output is a
//! pure function of the logs, so regenerating a figure reproduces it byte
//! for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::{read_log, write_atomic, CellStatus, SweepManifest, CONFIG_FILE};
use crate::env::Condition;
use crate::error::{Error, Result};
use crate::metrics::{grade_inflation, moving_average, RoundRecord};

pub const FIGURE_DIR: &str = "figures";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    LearningCurves,
    InflationBars,
    RewardVsAccuracy,
}

impl FigureKind {
    pub const ALL: [FigureKind; 3] = [
        FigureKind::LearningCurves,
        FigureKind::InflationBars,
        FigureKind::RewardVsAccuracy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LearningCurves => "learning_curves",
            Self::InflationBars => "inflation_bars",
            Self::RewardVsAccuracy => "reward_vs_accuracy",
        }
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::usage(format!(
                    "unknown figure {s:?}; expected learning_curves, inflation_bars or reward_vs_accuracy"
                ))
            })
    }
}

/// Logs of one completed cell.
#[derive(Debug, Clone)]
pub struct CellLog {
    pub family: String,
    pub condition: Condition,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

#[derive(Debug, Clone)]
pub struct SweepData {
    pub config: ExperimentConfig,
    pub cells: Vec<CellLog>,
    /// Cells listed in the manifest whose logs could not be used.
    pub warnings: Vec<String>,
}

impl SweepData {
    /// Reads the manifest, config snapshot and every completed log. Fails
    /// when nothing plottable is present.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = SweepManifest::load(dir)?;
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        let mut cells = Vec::new();
        let mut warnings = Vec::new();
        for c in &manifest.cells {
            let label = c.cell().stem();
            if c.status != CellStatus::Completed {
                warnings.push(format!("{label}: status {:?}, left out", c.status));
                continue;
            }
            match read_log(&dir.join(&c.log_path)) {
                Ok(records) if !records.is_empty() => cells.push(CellLog {
                    family: c.family.clone(),
                    condition: c.condition,
                    seed: c.seed,
                    records,
                }),
                Ok(_) => warnings.push(format!("{label}: empty log, left out")),
                Err(e) => warnings.push(format!("{label}: {e}")),
            }
        }
        if cells.is_empty() {
            return Err(Error::usage(format!(
                "{}: no completed cells to plot",
                dir.display()
            )));
        }
        Ok(Self {
            config,
            cells,
            warnings,
        })
    }

    fn group(&self, family: &str, condition: Condition) -> Vec<&CellLog> {
        self.cells
            .iter()
            .filter(|c| c.family == family && c.condition == condition)
            .collect()
    }
}

/// Seed-averaged, smoothed reward and accuracy for one (family, condition).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub family: String,
    pub condition: Condition,
    pub seeds: usize,
    pub reward: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Per-round mean over seeds (over the seeds that reached that round),
/// then a trailing moving average of width `smoothing`.
pub fn learning_curve_series(data: &SweepData, smoothing: usize) -> Vec<CurveSeries> {
    let mut out = Vec::new();
    for fam in &data.config.families {
        for &condition in &data.config.conditions {
            let group = data.group(&fam.name, condition);
            if group.is_empty() {
                continue;
            }
            let len = group.iter().map(|c| c.records.len()).max().unwrap_or(0);
            let mut reward = Vec::with_capacity(len);
            let mut accuracy = Vec::with_capacity(len);
            for t in 0..len {
                let rows: Vec<&RoundRecord> =
                    group.iter().filter_map(|c| c.records.get(t)).collect();
                let n = rows.len() as f64;
                reward.push(rows.iter().map(|r| r.reward).sum::<f64>() / n);
                accuracy.push(rows.iter().map(|r| r.accuracy).sum::<f64>() / n);
            }
            out.push(CurveSeries {
                family: fam.name.clone(),
                condition,
                seeds: group.len(),
                reward: moving_average(&reward, smoothing),
                accuracy: moving_average(&accuracy, smoothing),
            });
        }
    }
    out
}

/// Mean final-window inflation over seeds; `None` for Control or when no
/// seed of the pair completed.
#[derive(Debug, Clone, PartialEq)]
pub struct BarValue {
    pub family: String,
    pub condition: Condition,
    pub seeds: usize,
    pub inflation: Option<f64>,
}

pub fn inflation_bar_series(data: &SweepData) -> Vec<BarValue> {
    let window = data.config.metrics.window;
    let mut out = Vec::new();
    for fam in &data.config.families {
        for &condition in &data.config.conditions {
            let group = data.group(&fam.name, condition);
            let values: Vec<f64> = if condition.emits_grade() {
                group
                    .iter()
                    .filter_map(|c| {
                        let clean: Vec<RoundRecord> = c
                            .records
                            .iter()
                            .filter(|r| !r.degenerate)
                            .cloned()
                            .collect();
                        grade_inflation(&clean, window.min(clean.len())).ok()
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let inflation =
                (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            out.push(BarValue {
                family: fam.name.clone(),
                condition,
                seeds: values.len(),
                inflation,
            });
        }
    }
    out
}

/// Final-window mean reward and accuracy of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub family: String,
    pub condition: Condition,
    pub seed: u64,
    pub reward: f64,
    pub accuracy: f64,
}

pub fn scatter_points(data: &SweepData) -> Vec<ScatterPoint> {
    let window = data.config.metrics.window;
    data.cells
        .iter()
        .filter_map(|c| {
            let clean: Vec<&RoundRecord> = c.records.iter().filter(|r| !r.degenerate).collect();
            let tail = &clean[clean.len().saturating_sub(window)..];
            if tail.is_empty() {
                return None;
            }
            let n = tail.len() as f64;
            Some(ScatterPoint {
                family: c.family.clone(),
                condition: c.condition,
                seed: c.seed,
                reward: tail.iter().map(|r| r.reward).sum::<f64>() / n,
                accuracy: tail.iter().map(|r| r.accuracy).sum::<f64>() / n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Renders `kind` into `<dir>/figures/`, with a `.txt` report of anything
/// missing next to it.
pub fn plot(dir: &Path, kind: FigureKind) -> Result<PlotOutput> {
    let data = SweepData::load(dir)?;
    let mut warnings = data.warnings.clone();
    let svg = match kind {
        FigureKind::LearningCurves => render_learning_curves(
            &data,
            &learning_curve_series(&data, data.config.plots.smoothing),
        ),
        FigureKind::InflationBars => {
            let bars = inflation_bar_series(&data);
            for b in &bars {
                if b.condition.emits_grade() && b.inflation.is_none() {
                    warnings.push(format!(
                        "{} / {}: no completed seeds, bar left empty",
                        b.family, b.condition
                    ));
                }
            }
            render_inflation_bars(&data, &bars)
        }
        FigureKind::RewardVsAccuracy => render_scatter(&data, &scatter_points(&data)),
    };

    let fig_dir = dir.join(FIGURE_DIR);
    fs::create_dir_all(&fig_dir).map_err(|e| Error::io(&fig_dir, e))?;
    let svg_path = fig_dir.join(format!("{}.svg", kind.as_str()));
    write_atomic(&svg_path, svg.as_bytes())?;
    let report_path = fig_dir.join(format!("{}.txt", kind.as_str()));
    let mut report = String::new();
    if warnings.is_empty() {
        report.push_str("all cells present\n");
    }
    for w in &warnings {
        report.push_str(w);
        report.push('\n');
    }
    write_atomic(&report_path, report.as_bytes())?;
    Ok(PlotOutput {
        files: vec![svg_path, report_path],
        warnings,
    })
}

fn color(c: Condition) -> &'static str {
    match c {
        Condition::Control => "#1f77b4",
        Condition::Honest => "#2ca02c",
        Condition::Selfgrade => "#d62728",
    }
}

/// Maps data coordinates into one plotting rectangle.
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y.0) / (self.y.1 - self.y.0)) * self.height
    }

    fn axes(
        &self,
        svg: &mut String,
        x_label: &str,
        y_label: &str,
        x_ticks: &[f64],
        y_ticks: &[f64],
    ) {
        let bottom = self.top + self.height;
        for &t in x_ticks {
            let x = self.px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{t}</text>"##,
                bottom + 4.0,
                bottom + 14.0
            );
        }
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            self.left, self.top, self.width, self.height
        );
        for &t in y_ticks {
            let y = self.py(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{t}</text>"##,
                self.left,
                self.left + self.width,
                self.left - 4.0,
                y + 3.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            self.left + self.width / 2.0,
            bottom + 32.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            self.left - 32.0,
            self.top + self.height / 2.0,
            self.left - 32.0,
            self.top + self.height / 2.0,
            escape(y_label)
        );
    }

    fn polyline(&self, svg: &mut String, ys: &[f64], stroke: &str, dashed: bool) {
        if ys.is_empty() {
            return;
        }
        let last = (ys.len() - 1).max(1) as f64;
        let mut points = String::new();
        for (i, y) in ys.iter().enumerate() {
            let _ = write!(
                points,
                "{:.2},{:.2} ",
                self.px(i as f64 / last),
                self.py(*y)
            );
        }
        let dash = if dashed {
            r#" stroke-dasharray="5,3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#,
            points.trim_end()
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn open_svg(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    s
}

fn legend(svg: &mut String, x: f64, y: f64, conditions: &[Condition], extra: &[(&str, bool)]) {
    let mut row = 0.0;
    for &c in conditions {
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{:.2}" width="12" height="8" fill="{}"/><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            y + row,
            color(c),
            x + 16.0,
            y + row + 8.0,
            c
        );
        row += 14.0;
    }
    for (label, dashed) in extra {
        let dash = if *dashed {
            r#" stroke-dasharray="5,3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"{dash}/><text x="{:.2}" y="{:.2}" font-size="10">{label}</text>"##,
            y + row + 4.0,
            x + 12.0,
            y + row + 4.0,
            x + 16.0,
            y + row + 8.0
        );
        row += 14.0;
    }
}

fn render_learning_curves(data: &SweepData, series: &[CurveSeries]) -> String {
    let families = &data.config.families;
    let panel = 300.0;
    let width = 70.0 + families.len() as f64 * (panel + 70.0) + 90.0;
    let height = 330.0;
    let mut svg = open_svg(
        width,
        height,
        "Reward (solid) and accuracy (dashed) by round",
    );
    for (i, fam) in families.iter().enumerate() {
        let frame = Frame {
            left: 70.0 + i as f64 * (panel + 70.0),
            top: 50.0,
            width: panel,
            height: 230.0,
            x: (0.0, 1.0),
            y: (0.0, 1.0),
        };
        let rounds = series
            .iter()
            .filter(|s| s.family == fam.name)
            .map(|s| s.reward.len())
            .max()
            .unwrap_or(0);
        frame.axes(
            &mut svg,
            &format!("round (1..{rounds})"),
            "mean over seeds",
            &[],
            &[0.0, 0.5, 1.0],
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="44" font-size="12" text-anchor="middle">{}</text>"#,
            frame.left + panel / 2.0,
            escape(&fam.name)
        );
        for s in series.iter().filter(|s| s.family == fam.name) {
            frame.polyline(&mut svg, &s.reward, color(s.condition), false);
            frame.polyline(&mut svg, &s.accuracy, color(s.condition), true);
        }
    }
    legend(
        &mut svg,
        width - 85.0,
        60.0,
        &data.config.conditions,
        &[("reward", false), ("accuracy", true)],
    );
    svg.push_str("</svg>\n");
    svg
}

fn render_inflation_bars(data: &SweepData, bars: &[BarValue]) -> String {
    let families = &data.config.families;
    let graded: Vec<Condition> = data
        .config
        .conditions
        .iter()
        .copied()
        .filter(|c| c.emits_grade())
        .collect();
    let group_w = 40.0 + 30.0 * graded.len().max(1) as f64;
    let width = 90.0 + families.len() as f64 * group_w + 100.0;
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: families.len() as f64 * group_w,
        height: 260.0,
        x: (0.0, 1.0),
        y: (-1.0, 1.0),
    };
    let mut svg = open_svg(
        width,
        350.0,
        "Grade inflation: mean grade minus accuracy, final window",
    );
    frame.axes(&mut svg, "", "inflation", &[], &[-1.0, -0.5, 0.0, 0.5, 1.0]);
    let zero = frame.py(0.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#333"/>"##,
        frame.left,
        frame.left + frame.width
    );
    for (i, fam) in families.iter().enumerate() {
        let x0 = frame.left + i as f64 * group_w + 20.0;
        for (j, &c) in graded.iter().enumerate() {
            let x = x0 + j as f64 * 30.0;
            let bar = bars
                .iter()
                .find(|b| b.family == fam.name && b.condition == c);
            match bar.and_then(|b| b.inflation) {
                Some(v) => {
                    let y = frame.py(v);
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{x:.2}" y="{:.2}" width="24" height="{:.2}" fill="{}"><title>{} {}: {v}</title></rect>"#,
                        y.min(zero),
                        (y - zero).abs(),
                        color(c),
                        escape(&fam.name),
                        c
                    );
                }
                None => {
                    let _ = writeln!(
                        svg,
                        r#"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="middle">n/a</text>"#,
                        x + 12.0,
                        zero - 4.0
                    );
                }
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            x0 + 15.0 * graded.len() as f64 - 3.0,
            frame.top + frame.height + 14.0,
            escape(&fam.name)
        );
    }
    legend(&mut svg, width - 95.0, 50.0, &graded, &[]);
    svg.push_str("</svg>\n");
    svg
}

fn render_scatter(data: &SweepData, points: &[ScatterPoint]) -> String {
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: 300.0,
        height: 300.0,
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    };
    let width = 590.0;
    let mut svg = open_svg(width, 390.0, "Final-window reward against accuracy");
    let d = data.config.metrics.divergence.clamp(0.0, 1.0);
    // Region where reward exceeds accuracy by at least the divergence threshold.
    let _ = writeln!(
        svg,
        r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#fbe3e3"/>"##,
        frame.px(0.0),
        frame.py(d),
        frame.px(1.0 - d),
        frame.py(1.0),
        frame.px(0.0),
        frame.py(1.0)
    );
    frame.axes(
        &mut svg,
        "accuracy",
        "reward",
        &[0.0, 0.5, 1.0],
        &[0.0, 0.5, 1.0],
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4,3"/>"##,
        frame.px(0.0),
        frame.py(0.0),
        frame.px(1.0),
        frame.py(1.0)
    );
    for p in points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8"><title>{} {} seed {}: reward {}, accuracy {}</title></circle>"#,
            frame.px(p.accuracy),
            frame.py(p.reward),
            color(p.condition),
            escape(&p.family),
            p.condition,
            p.seed,
            p.reward,
            p.accuracy
        );
    }
    legend(
        &mut svg,
        390.0,
        50.0,
        &data.config.conditions,
        &[("reward = accuracy", true)],
    );
    let _ = writeln!(
        svg,
        r#"<text x="390" y="{:.2}" font-size="10">shaded: reward - accuracy &gt;= {d}</text>"#,
        50.0 + 14.0 * (data.config.conditions.len() as f64 + 1.0) + 10.0
    );
    svg.push_str("</svg>\n");
    svg
}
